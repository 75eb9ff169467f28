"""
Physical parameters, pressure laws, the Korteweg tensor and right-hand sides.

Conventions
-----------
* ``D(u) = (grad u + grad u^T) / 2``; with this convention the log-density
  momentum equation equals the conservative one divided by ``rho``.
* ``(a . D(u))_j = sum_i a_i D_ij`` and ``((a . grad) v)_j = sum_i a_i d_i v_j``.
* Every right-hand side splits as ``L X + N(X)``: ``L`` is an exact
  :class:`~nsklab.linear.LinearSymbol` and ``N`` collects products, which are
  evaluated pseudo-spectrally and dealiased with the 2/3 rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .linear import LinearSymbol
from .spectral import Grid, SpectralField
from .state import FluidState, check_vacuum

# ---------------------------------------------------------------------------
# pressure laws


@dataclass(frozen=True)
class PressureLaw:
    """
    Barotropic pressure ``P(rho)``.

    ``kind`` is ``"linear"`` (``P = K rho``), ``"gamma"`` (``P = a rho^gamma``)
    or ``"custom"`` (callables ``P`` and ``dP``; potentials by quadrature).
    The energy potential is ``Pi(s) = s (int_1^s P(z)/z^2 dz - P(1))`` and the
    log-pressure potential satisfies ``F'(s) = P'(s)/s`` with ``F(1) = 0``.
    """

    kind: str = "linear"
    K: float = 1.0
    a: float = 1.0
    gamma: float = 1.4
    P_func: Callable | None = field(default=None, compare=False)
    dP_func: Callable | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.kind == "linear":
            if not self.K >= 0:
                raise ValueError(f"K must be non-negative, got {self.K}")
        elif self.kind == "gamma":
            if not (self.a > 0 and self.gamma > 1):
                raise ValueError("gamma law needs a > 0 and gamma > 1")
        elif self.kind == "custom":
            if self.P_func is None or self.dP_func is None:
                raise ValueError("custom pressure needs P_func and dP_func")
        else:
            raise ValueError(f"unknown pressure kind {self.kind!r}")

    @classmethod
    def linear(cls, K: float) -> "PressureLaw":
        return cls("linear", K=K)

    @classmethod
    def gamma_law(cls, a: float, gamma: float) -> "PressureLaw":
        return cls("gamma", a=a, gamma=gamma)

    def P(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "linear":
            return self.K * s
        if self.kind == "gamma":
            return self.a * s**self.gamma
        return self.P_func(s)

    def dP(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "linear":
            return self.K * np.ones_like(s)
        if self.kind == "gamma":
            return self.a * self.gamma * s ** (self.gamma - 1)
        return self.dP_func(s)

    @property
    def stiffness(self) -> float:
        """``P'(1)``."""
        return float(self.dP(1.0))

    def _integral(self, f, s):
        s = np.asarray(s, dtype=float)
        out = np.vectorize(lambda x: quad(f, 1.0, x, epsabs=0.0, epsrel=1e-13, limit=200)[0])(s)
        return out

    def Pi(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "linear":
            return self.K * (s * np.log(s) - s)
        if self.kind == "gamma":
            g, a = self.gamma, self.a
            return s * (a * (s ** (g - 1) - 1) / (g - 1) - a)
        P1 = float(self.P(1.0))
        return s * (self._integral(lambda z: float(self.P(z)) / z**2, s) - P1)

    def dPi(self, s):
        """``Pi'(s) = int_1^s P/z^2 dz - P(1) + P(s)/s``."""
        s = np.asarray(s, dtype=float)
        return (self.Pi(s) + self.P(s)) / s

    def F(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "linear":
            return self.K * np.log(s)
        if self.kind == "gamma":
            g, a = self.gamma, self.a
            return a * g / (g - 1) * (s ** (g - 1) - 1)
        return self._integral(lambda z: float(self.dP(z)) / z, s)

    def quadrature_potentials(self, s):
        """``(Pi, F)`` by adaptive quadrature of their defining integrals (oracle path)."""
        s = np.asarray(s, dtype=float)
        P1 = float(self.P(1.0))
        Pi = s * (self._integral(lambda z: float(self.P(z)) / z**2, s) - P1)
        F = self._integral(lambda z: float(self.dP(z)) / z, s)
        return Pi, F

    def as_dict(self) -> dict:
        if self.kind == "linear":
            return {"type": "linear", "K": self.K}
        if self.kind == "gamma":
            return {"type": "gamma", "a": self.a, "gamma": self.gamma}
        return {"type": "custom"}


def pressure_eval(law: PressureLaw, s):
    """Return ``(P(s), Pi(s), F(s))`` for ``s > 0``."""
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise ValueError("pressure potentials need s > 0")
    return law.P(s), law.Pi(s), law.F(s)


# ---------------------------------------------------------------------------
# parameters

CAPILLARITY_FORMS = ("constant", "inverse")
VISCOSITY_FORMS = ("constant", "shallow_water")


@dataclass(frozen=True)
class Params:
    """
    Physical coefficients.

    Parameters
    ----------
    mu, lam : float
        Viscosities; ``mu(rho) = mu`` or ``mu rho`` per ``viscosity_form``
        and likewise for ``lam``.
    kappa : float
        Capillarity; ``kappa(rho) = kappa`` or ``kappa / rho`` per
        ``capillarity_form``.
    pressure : PressureLaw
    """

    mu: float = 1.0
    lam: float = 0.0
    kappa: float = 1.0
    pressure: PressureLaw = field(default_factory=lambda: PressureLaw.linear(1.0))
    capillarity_form: str = "inverse"
    viscosity_form: str = "shallow_water"

    def __post_init__(self) -> None:
        if not self.mu > 0:
            raise ValueError(f"mu > 0 violated (mu = {self.mu})")
        if not 2 * self.mu + self.lam > 0:
            raise ValueError(f"2μ+λ>0 violated (2mu + lambda = {2 * self.mu + self.lam})")
        if not self.kappa > 0:
            raise ValueError(f"kappa > 0 violated (kappa = {self.kappa})")
        if self.capillarity_form not in CAPILLARITY_FORMS:
            raise ValueError(f"capillarity_form must be one of {CAPILLARITY_FORMS}")
        if self.viscosity_form not in VISCOSITY_FORMS:
            raise ValueError(f"viscosity_form must be one of {VISCOSITY_FORMS}")

    def check_dim(self, dim: int) -> None:
        if not 2 * self.mu + dim * self.lam >= 0:
            raise ValueError(f"2μ+Nλ≥0 violated for N = {dim}")

    @property
    def K(self) -> float:
        return self.pressure.stiffness

    @property
    def nu(self) -> float:
        return 2 * self.mu + self.lam

    @property
    def shallow_water(self) -> bool:
        return self.viscosity_form == "shallow_water" and self.capillarity_form == "inverse"

    @property
    def quasi_regime(self) -> bool:
        """``mu(rho) = mu rho``, ``kappa(rho) = mu^2/rho`` and ``lambda = 0``."""
        return (
            self.shallow_water
            and self.lam == 0
            and math.isclose(self.kappa, self.mu**2, rel_tol=1e-12)
        )

    def mu_of(self, rho):
        return self.mu * rho if self.viscosity_form == "shallow_water" else self.mu * np.ones_like(rho)

    def lam_of(self, rho):
        return self.lam * rho if self.viscosity_form == "shallow_water" else self.lam * np.ones_like(rho)

    def kappa_of(self, rho):
        return self.kappa / rho if self.capillarity_form == "inverse" else self.kappa * np.ones_like(rho)

    def dkappa_of(self, rho):
        return -self.kappa / rho**2 if self.capillarity_form == "inverse" else np.zeros_like(rho)

    def scaled(self, lam_scale: float) -> "Params":
        """Same coefficients with the pressure multiplied by ``lam_scale**2``."""
        p = self.pressure
        f = lam_scale**2
        if p.kind == "linear":
            law = PressureLaw.linear(p.K * f)
        elif p.kind == "gamma":
            law = PressureLaw.gamma_law(p.a * f, p.gamma)
        else:
            law = PressureLaw("custom", P_func=lambda s: f * p.P_func(s), dP_func=lambda s: f * p.dP_func(s))
        return Params(self.mu, self.lam, self.kappa, law, self.capillarity_form, self.viscosity_form)

    def as_dict(self) -> dict:
        return {
            "mu": self.mu,
            "lambda": self.lam,
            "kappa": self.kappa,
            "capillarity_form": self.capillarity_form,
            "viscosity_form": self.viscosity_form,
            "pressure_law": self.pressure.as_dict(),
        }


# ---------------------------------------------------------------------------
# pseudo-spectral helpers on coefficient arrays


class _Ops:
    """Derivatives and dealiased products on raw coefficient / sample arrays."""

    def __init__(self, grid: Grid, dealias: bool = True):
        self.grid = grid
        self.dealias = dealias
        self.ik = 1j * grid.kd
        self.k2 = grid.k2
        self.mask = grid.dealias_mask if dealias else np.ones(grid.shape, dtype=bool)

    def s(self, ah):
        return self.grid.ifft(ah)

    def h(self, a):
        """Dealiased coefficients of a product evaluated in sample space."""
        return self.grid.fft(a) * self.mask

    def grad(self, ah):
        return self.ik * ah

    def div(self, vh):
        return np.sum(self.ik * vh, axis=0)

    def lap(self, ah):
        return -self.k2 * ah

    def jac(self, vh):
        """``G[i, j] = d_i v_j`` in sample space."""
        return self.s(self.ik[:, None] * vh[None, :])

    def div_matrix(self, Mh):
        """``(div M)_j = sum_i d_i M_ij``."""
        return np.sum(self.ik[:, None] * Mh, axis=0)


def _sym(G):
    return 0.5 * (G + np.swapaxes(G, 0, 1))


def _dot(a, M):
    """``sum_i a_i M_ij``."""
    return np.einsum("i...,ij...->j...", a, M)


def _field(grid, coeffs):
    return SpectralField(grid, coeffs=coeffs)


# ---------------------------------------------------------------------------
# Korteweg tensor


def _rho_samples(rho: SpectralField) -> np.ndarray:
    r = rho.samples
    check_vacuum(r, 0.0)
    return r


def divK_general(rho: SpectralField, params: Params, *, dealiased: bool = True) -> SpectralField:
    """
    ``grad(rho kappa Delta rho + (kappa + rho kappa')|grad rho|^2 / 2) - div(kappa grad rho (x) grad rho)``.

    ``kappa(rho)`` follows ``params.capillarity_form``.
    """
    grid = rho.grid
    ops = _Ops(grid, dealiased)
    r = _rho_samples(rho)
    rh = rho.coeffs
    kap, dkap = params.kappa_of(r), params.dkappa_of(r)
    gr = ops.s(ops.grad(rh))
    lr = ops.s(ops.lap(rh))
    g2 = np.sum(gr**2, axis=0)
    A = r * kap * lr + 0.5 * (kap + r * dkap) * g2
    B = kap * gr[:, None] * gr[None, :]
    out = ops.grad(ops.h(A)) - ops.div_matrix(ops.h(B))
    return _field(grid, out)


def divK_log(rho: SpectralField, kappa: float, *, dealiased: bool = True) -> SpectralField:
    """``kappa rho (grad Delta ln rho + grad |grad ln rho|^2 / 2)`` (valid for ``kappa(rho) = kappa/rho``)."""
    grid = rho.grid
    ops = _Ops(grid, dealiased)
    r = _rho_samples(rho)
    qh = grid.fft(np.log(r))
    gq = ops.s(ops.grad(qh))
    inner = ops.grad(ops.lap(qh)) + 0.5 * ops.grad(ops.h(np.sum(gq**2, axis=0)))
    return _field(grid, ops.h(kappa * r * ops.s(inner)))


def divK_viscous(rho: SpectralField, kappa: float, *, dealiased: bool = True) -> SpectralField:
    """``kappa div(rho grad grad ln rho)`` (valid for ``kappa(rho) = kappa/rho``)."""
    grid = rho.grid
    ops = _Ops(grid, dealiased)
    r = _rho_samples(rho)
    qh = grid.fft(np.log(r))
    hess = ops.s(ops.ik[:, None] * ops.ik[None, :] * qh)
    return _field(grid, kappa * ops.div_matrix(ops.h(r * hess)))


# ---------------------------------------------------------------------------
# system models: linear symbol plus dealiased nonlinear remainder


class SystemModel:
    """
    One system variant written as ``dX/dt = L X + N(X, t)``.

    ``X`` is a stacked coefficient array ``(1 + dim, *shape)``; its scalar row
    is the variant's own density variable.
    """

    name = "abstract"

    def __init__(self, grid: Grid, params: Params):
        params.check_dim(grid.dim)
        self.grid = grid
        self.params = params
        self.ops = _Ops(grid)

    symbol: LinearSymbol

    def nonlinear(self, x: np.ndarray, t: float) -> np.ndarray:
        raise NotImplementedError

    def rhs(self, x: np.ndarray, t: float) -> np.ndarray:
        L = self.symbol.matrix(self.grid)
        return np.einsum("ij...,j...->i...", L, x) + self.nonlinear(x, t)

    def from_state(self, state: FluidState) -> np.ndarray:
        return state.coeffs()

    def to_state(self, x: np.ndarray, t: float) -> FluidState:
        return FluidState.from_coeffs(self.grid, x, t)

    def density(self, x: np.ndarray, t: float) -> np.ndarray:
        return np.exp(self.grid.ifft(x[0]))

    def velocity(self, x: np.ndarray, t: float) -> np.ndarray:
        return self.grid.ifft(x[1:])

    def _pressure_remainder(self, q: np.ndarray, gq: np.ndarray) -> np.ndarray:
        law = self.params.pressure
        if law.kind == "linear":
            return np.zeros_like(gq)
        return (law.dP(np.exp(q)) - law.stiffness) * gq


class NHV1Model(SystemModel):
    """Log-density system with shallow-water viscosities and ``kappa(rho) = kappa/rho``."""

    name = "nhv1"

    def __init__(self, grid: Grid, params: Params):
        if not params.shallow_water:
            raise ValueError("nhv1 needs viscosity_form='shallow_water' and capillarity_form='inverse'")
        super().__init__(grid, params)
        p = params
        self.symbol = LinearSymbol(a=p.mu, b=p.lam + p.mu, c=p.kappa, d=p.K)

    def nonlinear(self, x, t=0.0):
        ops, p = self.ops, self.params
        qh, uh = x[0], x[1:]
        q = ops.s(qh)
        gq = ops.s(ops.grad(qh))
        u = ops.s(uh)
        G = ops.jac(uh)
        divu = np.trace(G)
        nq = ops.h(-np.sum(u * gq, axis=0))
        prod = (
            -_dot(u, G)
            + 2.0 * p.mu * _dot(gq, _sym(G))
            + p.lam * divu * gq
            - self._pressure_remainder(q, gq)
        )
        nu_ = ops.h(prod) + 0.5 * p.kappa * ops.grad(ops.h(np.sum(gq**2, axis=0)))
        return np.concatenate([nq[None], nu_])


class EffectiveModel(SystemModel):
    """``(q, v)`` system with ``v = u + mu grad q``; needs ``kappa = mu^2`` and ``lambda = 0``."""

    name = "effective"

    def __init__(self, grid: Grid, params: Params):
        if not params.quasi_regime:
            raise ValueError("effective variables need kappa = mu^2, lambda = 0 and shallow-water forms")
        super().__init__(grid, params)
        self.symbol = LinearSymbol(a=params.mu, b=0.0, c=0.0, d=params.K, e=params.mu)

    def nonlinear(self, x, t=0.0):
        ops, mu = self.ops, self.params.mu
        qh, vh = x[0], x[1:]
        q = ops.s(qh)
        gq = ops.s(ops.grad(qh))
        v = ops.s(vh)
        u = v - mu * gq
        G = ops.jac(vh)
        nq = ops.h(-np.sum(v * gq, axis=0) + mu * np.sum(gq**2, axis=0))
        nv = ops.h(-_dot(u, G) + mu * _dot(gq, G) - self._pressure_remainder(q, gq))
        return np.concatenate([nq[None], nv])

    def from_state(self, state):
        x = state.coeffs()
        x[1:] = x[1:] + self.params.mu * self.ops.grad(x[0])
        return x

    def to_state(self, x, t):
        y = x.copy()
        y[1:] = x[1:] - self.params.mu * self.ops.grad(x[0])
        return FluidState.from_coeffs(self.grid, y, t)

    def velocity(self, x, t):
        return self.grid.ifft(x[1:] - self.params.mu * self.ops.grad(x[0]))


def heat_coeffs(rho0_hat: np.ndarray, grid: Grid, mu: float, t: float) -> np.ndarray:
    return rho0_hat * np.exp(-mu * grid.k2 * t)


class PerturbationModel(SystemModel):
    """
    Perturbation ``(h2, u2)`` around the quasi-solution ``(rho1, -mu grad ln rho1)``.

    ``rho1`` solves the heat equation from ``rho1_0`` and is re-evaluated at
    every stage time.
    """

    name = "perturbation"

    def __init__(self, grid: Grid, params: Params, rho1_0: SpectralField):
        if not params.quasi_regime:
            raise ValueError("perturbation system needs kappa = mu^2, lambda = 0 and shallow-water forms")
        if params.pressure.kind != "linear":
            raise ValueError("perturbation system is stated for P = K rho")
        super().__init__(grid, params)
        check_vacuum(rho1_0.samples)
        self.rho1_0 = rho1_0
        p = params
        self.symbol = LinearSymbol(a=p.mu, b=p.mu, c=p.kappa, d=p.K)

    def background(self, t: float):
        """``rho1(t)`` samples from the exact heat flow and the coefficients of ``ln rho1(t)``."""
        rho1 = self.grid.ifft(heat_coeffs(self.rho1_0.coeffs, self.grid, self.params.mu, t))
        check_vacuum(rho1)
        lh = self.grid.fft(np.log(rho1))
        return rho1, lh

    def nonlinear(self, x, t=0.0):
        return coupling_terms(self.ops, self.params, x, self.background(t)[1])

    def to_state(self, x, t):
        _, lh = self.background(t)
        mu = self.params.mu
        q = self.grid.ifft(lh + x[0])
        u = self.grid.ifft(-mu * self.ops.grad(lh) + x[1:])
        return FluidState(SpectralField(self.grid, samples=q), SpectralField(self.grid, samples=u), t)

    def from_state(self, state):
        _, lh = self.background(state.t)
        x = state.coeffs()
        x[0] = x[0] - lh
        x[1:] = x[1:] + self.params.mu * self.ops.grad(lh)
        return x

    def density(self, x, t):
        _, lh = self.background(t)
        return np.exp(self.grid.ifft(lh + x[0]))

    def velocity(self, x, t):
        _, lh = self.background(t)
        return self.grid.ifft(-self.params.mu * self.ops.grad(lh) + x[1:])


def coupling_terms(ops: _Ops, params: Params, x: np.ndarray, lh: np.ndarray) -> np.ndarray:
    """Coupling with the background plus the remainders ``F`` and ``G``, dealiased."""
    mu, K = params.mu, params.K
    hh, uh = x[0], x[1:]
    gl = ops.s(ops.grad(lh * ops.mask))
    gh = ops.s(ops.grad(hh))
    u2 = ops.s(uh)
    u1 = -mu * gl
    G2 = ops.jac(uh)
    G1 = ops.jac(ops.h(u1))
    nh = ops.h(mu * np.sum(gl * gh, axis=0) - np.sum(u2 * gl, axis=0) - np.sum(u2 * gh, axis=0))
    prod = (
        2.0 * mu * _dot(gl, _sym(G2))
        + 2.0 * mu * _dot(gh, _sym(G1))
        - _dot(u1, G2)
        - _dot(u2, G1)
        - _dot(u2, G2)
        + 2.0 * mu * _dot(gh, _sym(G2))
        - K * gl
    )
    nu_ = (
        ops.h(prod)
        + mu**2 * ops.grad(ops.h(np.sum(gl * gh, axis=0)))
        + 0.5 * mu**2 * ops.grad(ops.h(np.sum(gh**2, axis=0)))
    )
    return np.concatenate([nh[None], nu_])


class RhoFormModel(SystemModel):
    """
    Conservative system in ``(h, u)`` with ``rho = 1 + h``.

    Viscosity and capillarity follow the forms selected in ``params``; the
    Korteweg force is :func:`divK_general`.
    """

    name = "rho_form"

    def __init__(self, grid: Grid, params: Params):
        super().__init__(grid, params)
        p = params
        one = np.float64(1.0)
        mu1, lam1, kap1 = float(p.mu_of(one)), float(p.lam_of(one)), float(p.kappa_of(one))
        self.symbol = LinearSymbol(a=mu1, b=lam1 + mu1, c=kap1, d=p.K)

    def nonlinear(self, x, t=0.0):
        ops, p = self.ops, self.params
        hh, uh = x[0], x[1:]
        h = ops.s(hh)
        r = 1.0 + h
        check_vacuum(r)
        u = ops.s(uh)
        G = ops.jac(uh)
        divu = np.trace(G)
        nh = -ops.div(ops.h(h * u))
        force = conservative_force(ops, p, r, hh + _const(self.grid), G, divu)
        W = ops.h(force / r)
        lin = np.einsum("ij...,j...->i...", self.symbol.matrix(self.grid)[1:], x)
        nu_ = W - ops.mask * lin - ops.h(_dot(u, G))
        return np.concatenate([nh[None], nu_])

    def from_state(self, state):
        x = state.coeffs()
        x[0] = self.grid.fft(np.exp(state.q.samples) - 1.0)
        return x

    def to_state(self, x, t):
        r = 1.0 + self.grid.ifft(x[0])
        check_vacuum(r)
        q = SpectralField(self.grid, samples=np.log(r))
        return FluidState(q, SpectralField(self.grid, coeffs=x[1:]), t)

    def density(self, x, t):
        return 1.0 + self.grid.ifft(x[0])


def conservative_force(ops: _Ops, p: Params, r, rh, G, divu) -> np.ndarray:
    """``div(2 mu(rho) D u) + grad(lambda(rho) div u) - grad P(rho) + div K`` in samples."""
    grid = ops.grid
    visc = ops.div_matrix(ops.h(2.0 * p.mu_of(r) * _sym(G)))
    bulk = ops.grad(ops.h(p.lam_of(r) * divu))
    pres = ops.grad(ops.h(p.pressure.P(r)))
    kor = divK_general(SpectralField(grid, coeffs=rh), p, dealiased=ops.dealias).coeffs
    return grid.ifft(visc + bulk - pres + kor)


def make_model(variant: str, grid: Grid, params: Params, rho1_0: SpectralField | None = None) -> SystemModel:
    if variant == "nhv1":
        return NHV1Model(grid, params)
    if variant == "effective":
        return EffectiveModel(grid, params)
    if variant == "perturbation":
        if rho1_0 is None:
            raise ValueError("perturbation variant needs the background rho1_0")
        return PerturbationModel(grid, params, rho1_0)
    if variant == "rho_form":
        return RhoFormModel(grid, params)
    raise ValueError(f"unknown system variant {variant!r}")


# ---------------------------------------------------------------------------
# public right-hand sides on fields


def _pair(grid, x):
    return SpectralField(grid, coeffs=x[0]), SpectralField(grid, coeffs=x[1:])


def rhs_nhv1(q: SpectralField, u: SpectralField, params: Params):
    """``(dq/dt, du/dt)`` of the shallow-water log-density system."""
    model = NHV1Model(q.grid, params)
    x = np.concatenate([q.coeffs[None], u.coeffs])
    return _pair(q.grid, model.rhs(x, 0.0))


def effective_velocity(q: SpectralField, u: SpectralField, mu: float) -> SpectralField:
    """``v = u + mu grad q``."""
    return SpectralField(q.grid, coeffs=u.coeffs + mu * 1j * q.grid.kd * q.coeffs)


def rhs_effective(q: SpectralField, v: SpectralField, u: SpectralField | None, params: Params):
    """
    ``(dq/dt, dv/dt)`` of the effective-velocity system.

    ``u`` defaults to ``v - mu grad q``; when given it must agree with it.
    """
    model = EffectiveModel(q.grid, params)
    if u is not None:
        expect = v.coeffs - params.mu * 1j * q.grid.kd * q.coeffs
        scale = max(np.max(np.abs(expect)), 1e-300)
        if np.max(np.abs(u.coeffs - expect)) > 1e-8 * scale:
            raise ValueError("u is not v - mu grad q")
    x = np.concatenate([q.coeffs[None], v.coeffs])
    return _pair(q.grid, model.rhs(x, 0.0))


def rhs_perturbation(h2: SpectralField, u2: SpectralField, rho1: SpectralField, params: Params):
    """``(dh2/dt, du2/dt)`` around the quasi-solution built on ``rho1`` (at its current time)."""
    model = PerturbationModel(h2.grid, params, rho1)
    x = np.concatenate([h2.coeffs[None], u2.coeffs])
    return _pair(h2.grid, model.rhs(x, 0.0))


def rhs_rho_form(rho: SpectralField, u: SpectralField, params: Params):
    """``(drho/dt, du/dt)`` of the conservative system divided by ``rho``."""
    model = RhoFormModel(rho.grid, params)
    x = np.concatenate([(rho.coeffs - _const(rho.grid))[None], u.coeffs])
    return _pair(rho.grid, model.rhs(x, 0.0))


def _const(grid: Grid) -> np.ndarray:
    one = np.zeros(grid.shape, dtype=complex)
    one[(0,) * grid.dim] = grid.n**grid.dim
    return one


@dataclass(frozen=True)
class QuasiResidual:
    mass_l2: float
    mass_linf: float
    momentum_l2: float
    momentum_linf: float
    effective_mass_l2: float
    scale: float

    @property
    def relative(self) -> float:
        return max(self.mass_l2, self.momentum_l2, self.effective_mass_l2) / self.scale


def quasi_solution_residual(
    rho1: SpectralField, mu: float, K: float = 0.0, *, subtract_pressure: bool = False
) -> QuasiResidual:
    """
    Residuals of the quasi-solution ``(rho1, u1 = -mu grad ln rho1)``.

    ``d_t rho1`` is taken as ``mu Delta rho1``. Three equations are evaluated:
    mass ``d_t rho + div(rho u1)``, momentum
    ``rho d_t u1 + rho u1 . grad u1 - div(2 mu rho D u1) - div K + grad P``
    with ``kappa(rho) = mu^2/rho``, and the effective mass equation
    ``d_t rho - mu Delta rho + div(rho v)`` with ``v = u1 + mu grad ln rho1``.
    With ``K > 0`` the momentum residual equals ``K grad rho1``; pass
    ``subtract_pressure=True`` to measure the residual minus that term.
    No dealiasing is applied: the identities hold pointwise.
    """
    grid = rho1.grid
    ops = _Ops(grid, dealias=False)
    r = _rho_samples(rho1)
    rh = rho1.coeffs
    params = Params(mu, 0.0, mu**2, PressureLaw.linear(K), "inverse", "shallow_water")
    lh = grid.fft(np.log(r))
    gl = ops.s(ops.grad(lh))
    u1 = -mu * gl
    u1h = grid.fft(u1)
    drho = ops.s(mu * ops.lap(rh))
    mass = drho + ops.s(ops.div(grid.fft(r * u1)))
    du1 = -mu * ops.s(ops.grad(grid.fft(drho / r)))
    G = ops.jac(u1h)
    divu = np.trace(G)
    force = conservative_force(ops, params, r, rh, G, divu)
    momentum = r * du1 + r * _dot(u1, G) - force
    if subtract_pressure:
        momentum = momentum - K * ops.s(ops.grad(rh))
    v = u1 + mu * gl
    eff = drho - ops.s(mu * ops.lap(rh)) + ops.s(ops.div(grid.fft(r * v)))
    inner = grid.inner
    scale = max(
        math.sqrt(inner(drho, drho)),
        math.sqrt(sum(inner(c, c) for c in r * du1)),
        1e-300,
    )

    def l2(a):
        return math.sqrt(grid.inner(a, a)) if a.ndim == grid.dim else math.sqrt(sum(grid.inner(c, c) for c in a))

    return QuasiResidual(
        l2(mass), float(np.max(np.abs(mass))), l2(momentum), float(np.max(np.abs(momentum))), l2(eff), scale
    )


__all__ = [
    "EffectiveModel",
    "NHV1Model",
    "Params",
    "PerturbationModel",
    "PressureLaw",
    "QuasiResidual",
    "RhoFormModel",
    "SystemModel",
    "coupling_terms",
    "divK_general",
    "divK_log",
    "divK_viscous",
    "effective_velocity",
    "heat_coeffs",
    "make_model",
    "pressure_eval",
    "quasi_solution_residual",
    "rhs_effective",
    "rhs_nhv1",
    "rhs_perturbation",
    "rhs_rho_form",
]
