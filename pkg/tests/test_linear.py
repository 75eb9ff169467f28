from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.linalg import expm

from nsklab.linear import (
    LinearCoeffs,
    LinearSymbol,
    ModeState,
    apply_semigroup,
    block_probe,
    closed_form_exp,
    duhamel_linf_split,
    dyadic_energy,
    lyapunov_series,
    predicted_block_rate,
    regime,
    sandwich_alpha_max,
    sandwich_holds,
    semigroup_besov_characterization,
    semigroup_matrices,
    verify_block_decay,
)
from nsklab.spectral import Grid, SpectralField, random_field
from nsklab.state import FluidState

TRIG = LinearCoeffs.from_physical(mu=1.0, lam=0.0, kappa=2.0)  # nu = 2, kappa > 1
RES = LinearCoeffs.from_physical(mu=1.0, lam=0.0, kappa=1.0)  # kappa = nu^2 / 4
HYP = LinearCoeffs.from_physical(mu=1.0, lam=0.0, kappa=0.25)


def reference_exp(xi2: float, t: float, c: LinearCoeffs) -> np.ndarray:
    A = np.array([[0.0, -xi2], [c.c * xi2, c.nu * xi2]])
    return expm(-t * A)


class TestCoeffs:
    def test_regimes(self):
        assert TRIG.regime == "trigonometric"
        assert RES.regime == "resonant"
        assert HYP.regime == "hyperbolic"
        assert regime(2.0, 1.0 + 1e-14) == "resonant"

    @pytest.mark.parametrize("kw", [dict(a=0, b=1, c=1), dict(a=1, b=-2, c=1), dict(a=1, b=0, c=0), dict(a=1, b=0, c=1, d=-1)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            LinearCoeffs(**kw)

    def test_from_physical(self):
        c = LinearCoeffs.from_physical(0.5, 0.2, 0.3, K=1.0)
        assert (c.a, c.b, c.c, c.d) == (0.5, 0.7, 0.3, 1.0)
        assert c.nu == pytest.approx(1.2)


class TestClosedForm:
    @pytest.mark.parametrize("coeffs", [TRIG, RES, HYP])
    def test_identity_at_zero(self, coeffs):
        out = closed_form_exp(np.array([0.0, 1.0, 9.0]), 0.0, coeffs)
        assert np.allclose(out, np.eye(2), atol=0)

    def test_resonant_offdiagonal(self):
        xi2, t = 3.0, 0.4
        tau = xi2 * t
        out = closed_form_exp(xi2, t, RES)
        assert out[0, 1] == pytest.approx(math.exp(-0.5 * RES.nu * tau) * tau, rel=1e-14)

    @pytest.mark.parametrize("coeffs", [TRIG, RES, HYP])
    @pytest.mark.parametrize("xi2,t", [(0.5, 0.1), (4.0, 0.3), (25.0, 0.05), (1.0, 2.0)])
    def test_matches_expm(self, coeffs, xi2, t):
        ref = reference_exp(xi2, t, coeffs)
        out = closed_form_exp(xi2, t, coeffs)
        assert np.max(np.abs(out - ref)) <= 1e-12 * max(1.0, np.max(np.abs(ref)))

    def test_broadcast_shape(self):
        out = closed_form_exp(np.ones((3, 1)), np.linspace(0, 1, 4), TRIG)
        assert out.shape == (3, 4, 2, 2)

    def test_pressure_rejected(self):
        with pytest.raises(ValueError):
            closed_form_exp(1.0, 1.0, LinearCoeffs(1, 0, 1, d=1))


class TestSemigroup:
    @pytest.mark.parametrize("coeffs", [TRIG, HYP, LinearCoeffs(1.0, 0.5, 0.7, d=2.0)])
    def test_matches_dense_expm_2d(self, coeffs):
        g = Grid(2, 8)
        t = 0.07
        E = semigroup_matrices(g, coeffs, t)
        L = coeffs.symbol().matrix(g)
        for idx in [(0, 1), (1, 2), (3, 3), (2, 0)]:
            ref = expm(t * L[(slice(None), slice(None), *idx)])
            assert np.max(np.abs(E[(slice(None), slice(None), *idx)] - ref)) <= 1e-12

    def test_identity_at_zero(self, rng):
        g = Grid(2, 16)
        s = FluidState(random_field(g, rng), random_field(g, rng, rank=2))
        out = apply_semigroup(s, 0.0, TRIG)
        assert np.allclose(out.coeffs(), s.coeffs(), atol=1e-14)

    def test_divergence_free_is_heat_flow(self, rng):
        g = Grid(2, 32)
        psi = random_field(g, rng)
        kx, ky = g.kd
        u = SpectralField(g, coeffs=np.stack([1j * ky * psi.coeffs, -1j * kx * psi.coeffs]))
        s = FluidState(SpectralField.zeros(g), u)
        t = 0.05
        out = apply_semigroup(s, t, TRIG)
        assert np.max(np.abs(out.q.coeffs)) <= 1e-12
        expect = u.coeffs * np.exp(-TRIG.a * g.k2 * t)
        assert np.max(np.abs(out.u.coeffs - expect)) <= 1e-12 * np.max(np.abs(expect))

    def test_semigroup_property(self, rng):
        g = Grid(2, 16)
        s = FluidState(random_field(g, rng), random_field(g, rng, rank=2))
        one = apply_semigroup(s, 0.2, HYP)
        two = apply_semigroup(apply_semigroup(s, 0.1, HYP), 0.1, HYP)
        assert np.max(np.abs(one.coeffs() - two.coeffs())) <= 1e-12

    def test_negative_time(self, rng):
        with pytest.raises(ValueError):
            apply_semigroup(FluidState.zeros(Grid(1, 16)), -1.0, TRIG)

    def test_mode_state_roundtrip(self, rng):
        g = Grid(2, 16)
        u = random_field(g, rng, rank=2)
        u = SpectralField(g, coeffs=u.coeffs * (g.k2 > 0))
        s = FluidState(random_field(g, rng), u)
        back = ModeState.from_state(s).to_state()
        assert np.allclose(back.u.coeffs, s.u.coeffs, atol=1e-12)


class TestBlockDecay:
    def test_predicted_rate(self):
        assert predicted_block_rate(2, TRIG) == pytest.approx(2.0 * 16)
        assert predicted_block_rate(2, HYP) == pytest.approx(0.25 * 2.0 * 16)

    @pytest.mark.parametrize("coeffs", [TRIG, RES, HYP])
    def test_rate_scales_with_square_of_frequency(self, coeffs):
        fits = [verify_block_decay(l, coeffs).c_fit for l in (2, 3, 4)]
        assert min(fits) > 0.1
        assert max(fits) / min(fits) <= 1.05

    def test_probe_normalized_and_supported(self, rng):
        g = Grid(1, 1024)
        p = block_probe(g, 3, rng)
        gq = 1j * g.kd * p.q.coeffs
        assert math.sqrt(g.spectral_l2sq(gq) + g.spectral_l2sq(p.u.coeffs)) == pytest.approx(1.0)
        off = (g.kabs < 0.75 * 8) | (g.kabs > 8 / 3 * 8)
        assert np.all(p.q.coeffs[off] == 0)

    def test_pressure_only_speeds_decay(self):
        plain = verify_block_decay(2, TRIG)
        pressure = verify_block_decay(2, LinearCoeffs(TRIG.a, TRIG.b, TRIG.c, d=1.0))
        assert pressure.predicted_rate == plain.predicted_rate
        assert pressure.norms[-1] > 0

    def test_bad_time_grid(self):
        with pytest.raises(ValueError):
            verify_block_decay(2, TRIG, t_grid=[0.0, 0.1, 0.1, 0.2])


class TestLyapunov:
    coeffs = LinearCoeffs.from_physical(mu=1.0, lam=0.0, kappa=1.0)

    def test_alpha_bound(self):
        assert sandwich_alpha_max(0.09) == pytest.approx(0.1)
        with pytest.raises(ValueError):
            dyadic_energy(FluidState.zeros(Grid(1, 64)), 2, 2.0, self.coeffs)

    def test_sandwich_and_monotone(self, rng):
        g = Grid(1, 1024)
        s = block_probe(g, 3, rng)
        alpha = 0.1
        assert sandwich_holds(s, 3, alpha, self.coeffs)
        rep = lyapunov_series(s, 3, alpha, self.coeffs, np.linspace(0, 0.05, 60))
        assert rep.monotone
        assert rep.K_fit > 0

    def test_zero_state(self):
        assert dyadic_energy(FluidState.zeros(Grid(1, 64)), 2, 0.1, self.coeffs) == 0.0


class TestDuhamel:
    def test_zero_velocity_pure_heat_initial(self, rng):
        g = Grid(1, 256)
        q = random_field(g, rng) * 0.05
        s = FluidState(q, SpectralField.zeros(g, rank=1))
        rep = duhamel_linf_split(s, TRIG, 0.2, n_times=10, n_split=3)
        assert rep.split_rel_error <= 1e-8
        assert rep.heat_max_principle

    def test_random_small_data(self, rng):
        g = Grid(2, 32)
        s = FluidState(random_field(g, rng) * 0.01, random_field(g, rng, rank=2) * 0.01)
        rep = duhamel_linf_split(s, HYP, 0.5, n_times=10, n_split=3)
        assert rep.split_rel_error <= 1e-8
        assert rep.heat_max_principle
        assert math.isfinite(rep.C_fit) and rep.C_sqrt_fit > 0

    def test_rejects_pressure(self):
        with pytest.raises(ValueError):
            duhamel_linf_split(FluidState.zeros(Grid(1, 32)), LinearCoeffs(1, 0, 1, d=1), 1.0)


class TestCharacterization:
    def test_zero_data(self):
        rep = semigroup_besov_characterization(FluidState.zeros(Grid(1, 1024)), 0.5, 2, 2, TRIG)
        assert rep.lhs == 0.0 and rep.rhs == 0.0 and rep.ratio == 0.0

    @pytest.mark.parametrize("s,p,r", [(0.5, 2, 2), (0.5, math.inf, math.inf), (1.0, 2, 1)])
    def test_ratio_stable_across_blocks(self, s, p, r):
        g = Grid(1, 1024, 8 * np.pi)
        ratios = []
        for l in (2, 3, 4):
            probe = block_probe(g, l, np.random.default_rng(l))
            ratios.append(semigroup_besov_characterization(probe, s, p, r, TRIG, n_times=120).ratio)
        assert min(ratios) > 0
        assert max(ratios) / min(ratios) <= 1.25

    def test_invalid(self):
        z = FluidState.zeros(Grid(1, 64))
        with pytest.raises(ValueError):
            semigroup_besov_characterization(z, 0.0, 2, 2, TRIG)
        with pytest.raises(ValueError):
            semigroup_besov_characterization(z, 0.5, 2, 0.5, TRIG)


class TestSymbol:
    def test_validation(self):
        with pytest.raises(ValueError):
            LinearSymbol(a=1.0, b=0.0, c=-1.0)
