from __future__ import annotations

import math

import numpy as np
import pytest

from nsklab.model import (
    EffectiveModel,
    NHV1Model,
    Params,
    PerturbationModel,
    PressureLaw,
    RhoFormModel,
    divK_general,
    divK_log,
    divK_viscous,
    effective_velocity,
    make_model,
    pressure_eval,
    quasi_solution_residual,
    rhs_effective,
    rhs_nhv1,
    rhs_perturbation,
    rhs_rho_form,
)
from nsklab.spectral import Grid, SpectralField
from nsklab.state import FluidState

QUASI = Params(mu=0.5, lam=0.0, kappa=0.25, pressure=PressureLaw.linear(0.0))


def smooth_density(grid: Grid, amp: float = 0.3) -> SpectralField:
    x = grid.coords
    r = 1.0 + amp * np.cos(x[0])
    if grid.dim == 2:
        r = r + 0.5 * amp * np.sin(x[1] + x[0])
    return SpectralField(grid, samples=r)


def smooth_velocity(grid: Grid, amp: float = 0.2) -> SpectralField:
    x = grid.coords
    comps = [amp * np.sin(x[0] + 0.3 * i) for i in range(grid.dim)]
    if grid.dim == 2:
        comps[1] = comps[1] + amp * np.cos(x[1])
    return SpectralField(grid, samples=np.stack(comps))


class TestPressure:
    def test_linear_at_e(self):
        P, Pi, F = pressure_eval(PressureLaw.linear(2.0), math.e)
        assert P == pytest.approx(2.0 * math.e)
        assert Pi == pytest.approx(0.0, abs=1e-14)
        assert F == pytest.approx(2.0)

    @pytest.mark.parametrize("law", [PressureLaw.linear(1.5), PressureLaw.gamma_law(1.0, 1.4), PressureLaw.gamma_law(0.3, 2.0)])
    def test_closed_potentials_match_quadrature(self, law):
        s = np.array([0.3, 1.0, 1.7, 4.0])
        Pi_q, F_q = law.quadrature_potentials(s)
        assert np.allclose(law.Pi(s), Pi_q, rtol=1e-10, atol=1e-12)
        assert np.allclose(law.F(s), F_q, rtol=1e-10, atol=1e-12)

    def test_custom_law_uses_quadrature(self):
        law = PressureLaw("custom", P_func=lambda s: 2.0 * s, dP_func=lambda s: 2.0 + 0 * s)
        s = np.array([0.5, 2.0])
        assert np.allclose(law.Pi(s), PressureLaw.linear(2.0).Pi(s), rtol=1e-10)
        assert np.allclose(law.F(s), PressureLaw.linear(2.0).F(s), rtol=1e-10)

    def test_derivative_identities(self):
        law = PressureLaw.gamma_law(1.0, 1.4)
        s, h = 1.3, 1e-6
        dF = (law.F(s + h) - law.F(s - h)) / (2 * h)
        assert dF == pytest.approx(law.dP(s) / s, rel=1e-8)
        dPi = (law.Pi(s + h) - law.Pi(s - h)) / (2 * h)
        assert dPi == pytest.approx(law.dPi(s), rel=1e-8)

    def test_invalid(self):
        with pytest.raises(ValueError):
            pressure_eval(PressureLaw.linear(1.0), 0.0)
        with pytest.raises(ValueError):
            PressureLaw.gamma_law(1.0, 1.0)
        with pytest.raises(ValueError):
            PressureLaw("polytropic")


class TestParams:
    def test_total_viscosity_condition(self):
        with pytest.raises(ValueError, match="2μ\\+λ>0 violated"):
            Params(mu=1.0, lam=-3.0)

    def test_dimension_condition(self):
        p = Params(mu=1.0, lam=-0.8)
        p.check_dim(2)
        with pytest.raises(ValueError):
            p.check_dim(3)

    def test_quasi_regime(self):
        assert QUASI.quasi_regime
        assert not Params(mu=0.5, kappa=0.3).quasi_regime

    def test_scaled_pressure(self):
        p = Params(pressure=PressureLaw.gamma_law(2.0, 1.5)).scaled(4.0)
        assert p.pressure.a == pytest.approx(32.0)


class TestKorteweg:
    def test_constant_kappa_1d(self):
        g = Grid(1, 128)
        rho = smooth_density(g)
        p = Params(mu=1.0, kappa=0.7, capillarity_form="constant", viscosity_form="constant")
        out = divK_general(rho, p, dealiased=False).samples[0]
        x = g.coords[0]
        expect = 0.7 * rho.samples * 0.3 * np.sin(x)
        # third derivatives amplify roundoff by up to (n/2)^3
        assert np.max(np.abs(out - expect)) <= 1e-10

    @pytest.mark.parametrize("dim,n", [(1, 256), (2, 64)])
    def test_inverse_kappa_forms_agree(self, dim, n):
        g = Grid(dim, n)
        rho = smooth_density(g, 0.2)
        p = Params(kappa=0.4, capillarity_form="inverse")
        a = divK_general(rho, p, dealiased=False).samples
        b = divK_log(rho, 0.4, dealiased=False).samples
        c = divK_viscous(rho, 0.4, dealiased=False).samples
        scale = np.max(np.abs(a))
        assert np.max(np.abs(a - b)) <= 1e-9 * scale
        assert np.max(np.abs(a - c)) <= 1e-9 * scale

    def test_constant_density_zero(self):
        g = Grid(2, 16)
        rho = SpectralField(g, samples=np.full(g.shape, 1.3))
        assert np.max(np.abs(divK_general(rho, Params()).coeffs)) <= 1e-12


class TestModels:
    @pytest.mark.parametrize(
        "variant,params",
        [
            ("nhv1", Params(mu=1.0, lam=0.2, kappa=0.5)),
            ("rho_form", Params(mu=0.5, lam=0.1, kappa=0.2, capillarity_form="constant", viscosity_form="constant", pressure=PressureLaw.gamma_law(1.0, 1.4))),
            ("effective", QUASI),
        ],
    )
    def test_equilibrium_is_stationary(self, variant, params):
        g = Grid(2, 16)
        m = make_model(variant, g, params)
        x = m.from_state(FluidState.zeros(g))
        assert np.max(np.abs(m.rhs(x, 0.0))) <= 1e-12

    @pytest.mark.parametrize("cls", [NHV1Model, RhoFormModel])
    def test_remainder_is_quadratic(self, cls):
        g = Grid(2, 32)
        m = cls(g, Params(mu=1.0, lam=0.2, kappa=0.5, pressure=PressureLaw.gamma_law(1.0, 1.4)))
        base = FluidState(SpectralField(g, samples=np.log(smooth_density(g).samples)), smooth_velocity(g))
        x = m.from_state(base)
        eps = 1e-3
        n1 = np.linalg.norm(m.nonlinear(eps * x, 0.0))
        n2 = np.linalg.norm(m.nonlinear(2 * eps * x, 0.0))
        assert 3.5 <= n2 / n1 <= 4.5

    def test_nhv1_matches_conservative_form(self):
        g = Grid(2, 64)
        p = Params(mu=0.8, lam=0.1, kappa=0.3, pressure=PressureLaw.gamma_law(1.0, 1.4))
        rho = smooth_density(g, 0.1)
        u = smooth_velocity(g, 0.1)
        q = SpectralField(g, samples=np.log(rho.samples))
        dq, du = rhs_nhv1(q, u, p)
        drho, du2 = rhs_rho_form(rho, u, p)
        assert np.max(np.abs(dq.samples - drho.samples / rho.samples)) <= 1e-8
        assert np.max(np.abs(du.samples - du2.samples)) <= 1e-8

    def test_effective_consistent_with_nhv1(self):
        g = Grid(2, 64)
        p = Params(mu=0.5, lam=0.0, kappa=0.25, pressure=PressureLaw.linear(0.7))
        q = SpectralField(g, samples=np.log(smooth_density(g, 0.1).samples))
        u = smooth_velocity(g, 0.1)
        v = effective_velocity(q, u, p.mu)
        dq, du = rhs_nhv1(q, u, p)
        dq2, dv = rhs_effective(q, v, u, p)
        assert np.max(np.abs(dq.coeffs - dq2.coeffs)) <= 1e-9 * np.max(np.abs(dq.coeffs))
        expect = du.coeffs + p.mu * 1j * g.kd * dq.coeffs
        assert np.max(np.abs(dv.coeffs - expect)) <= 1e-9 * np.max(np.abs(expect))

    def test_effective_zero_velocity(self):
        g = Grid(1, 128)
        K = 0.5
        p = Params(mu=0.5, lam=0.0, kappa=0.25, pressure=PressureLaw.linear(K))
        rho = smooth_density(g, 0.2)
        q = SpectralField(g, samples=np.log(rho.samples))
        v = SpectralField.zeros(g, rank=1)
        dq, dv = rhs_effective(q, v, None, p)
        gq = 1j * g.kd * q.coeffs
        # with v = 0 the density solves the heat equation
        lap_rho = g.ifft(-g.k2 * rho.coeffs)
        assert np.max(np.abs(dq.samples - p.mu * lap_rho / rho.samples)) <= 1e-8
        assert np.max(np.abs(dv.coeffs + K * gq * g.dealias_mask)) <= 1e-10 * np.max(np.abs(K * gq))

    def test_effective_rejects_mismatched_u(self):
        g = Grid(1, 32)
        q = SpectralField(g, samples=0.1 * np.cos(g.coords[0]))
        with pytest.raises(ValueError):
            rhs_effective(q, SpectralField.zeros(g, rank=1), smooth_velocity(g), QUASI)

    def test_variant_requirements(self):
        g = Grid(1, 32)
        with pytest.raises(ValueError):
            NHV1Model(g, Params(capillarity_form="constant"))
        with pytest.raises(ValueError):
            EffectiveModel(g, Params(mu=1.0, kappa=0.5))
        with pytest.raises(ValueError):
            make_model("perturbation", g, QUASI)
        with pytest.raises(ValueError):
            make_model("bogus", g, QUASI)


class TestPerturbation:
    def test_zero_perturbation(self):
        g = Grid(1, 128)
        K = 0.5
        p = Params(mu=0.5, lam=0.0, kappa=0.25, pressure=PressureLaw.linear(K))
        rho1 = smooth_density(g, 0.2)
        dh, du = rhs_perturbation(SpectralField.zeros(g), SpectralField.zeros(g, rank=1), rho1, p)
        assert np.max(np.abs(dh.coeffs)) <= 1e-12
        gl = 1j * g.kd * g.fft(np.log(rho1.samples)) * g.dealias_mask
        assert np.max(np.abs(du.coeffs + K * gl * g.dealias_mask)) <= 1e-10 * np.max(np.abs(K * gl))

    def test_state_roundtrip(self):
        g = Grid(2, 32)
        rho1 = smooth_density(g, 0.2)
        m = PerturbationModel(g, QUASI, rho1)
        x = np.zeros((3, *g.shape), dtype=complex)
        st = m.to_state(x, 0.1)
        assert np.max(np.abs(m.from_state(st))) <= 1e-12

    def test_requires_linear_pressure(self):
        g = Grid(1, 32)
        p = Params(mu=0.5, lam=0.0, kappa=0.25, pressure=PressureLaw.gamma_law(1.0, 1.4))
        with pytest.raises(ValueError):
            PerturbationModel(g, p, smooth_density(g))


class TestQuasiResidual:
    @pytest.mark.parametrize("dim,n", [(1, 256), (2, 64)])
    def test_exact_without_pressure(self, dim, n):
        g = Grid(dim, n)
        res = quasi_solution_residual(smooth_density(g, 0.3), 0.5)
        assert res.relative <= 1e-9

    def test_pressure_residual_is_grad_rho(self):
        g = Grid(1, 256)
        rho = smooth_density(g, 0.3)
        K = 0.8
        res = quasi_solution_residual(rho, 0.5, K)
        grad_norm = math.sqrt(g.spectral_l2sq(1j * g.kd * rho.coeffs))
        assert res.momentum_l2 == pytest.approx(K * grad_norm, rel=1e-8)
        sub = quasi_solution_residual(rho, 0.5, K, subtract_pressure=True)
        assert sub.relative <= 1e-9
