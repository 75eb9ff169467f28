"""
Physical and analytical monitors over states and trajectories.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson, cumulative_trapezoid

from .config import MAX_POINTS
from .linear import critical_data_norm
from .model import Params, _Ops, _sym
from .spectral import Grid, SpectralField
from .state import FluidState, check_vacuum


@dataclass(frozen=True)
class EnergyRecord:
    """
    Energy terms of one state.

    ``total`` is ``kinetic + potential + capillary``; ``viscous_dissipated``
    is the running time integral of ``dissipation_rate`` and is filled in by
    :func:`energy_history`.
    """

    kinetic: float
    potential: float
    capillary: float
    dissipation_rate: float
    viscous_dissipated: float = 0.0

    @property
    def total(self) -> float:
        return self.kinetic + self.potential + self.capillary


def energy(state: FluidState, params: Params) -> EnergyRecord:
    """Quadrature of ``rho|u|^2/2``, ``Pi(rho) - Pi(1)``, ``kappa(rho)|grad rho|^2/2`` and the dissipation rate."""
    grid = state.grid
    rho = np.exp(state.q.samples)
    check_vacuum(rho)
    ops = _Ops(grid, dealias=False)
    u = state.u.samples
    dv = grid.cell_volume
    kinetic = 0.5 * float(np.sum(rho * np.sum(u**2, axis=0))) * dv
    law = params.pressure
    potential = float(np.sum(law.Pi(rho) - law.Pi(1.0))) * dv
    grho = ops.s(ops.grad(grid.fft(rho)))
    capillary = 0.5 * float(np.sum(params.kappa_of(rho) * np.sum(grho**2, axis=0))) * dv
    G = ops.jac(state.u.coeffs)
    D = _sym(G)
    divu = np.trace(G)
    rate = float(
        np.sum(2.0 * params.mu_of(rho) * np.sum(D**2, axis=(0, 1)) + params.lam_of(rho) * divu**2)
    ) * dv
    return EnergyRecord(kinetic, potential, capillary, rate)


def energy_history(trajectory, params: Params) -> list[EnergyRecord]:
    """
    Energy records with the dissipation rate integrated over the snapshot times.

    Composite Simpson (``scipy.integrate.cumulative_simpson``) is used from three
    snapshots on, the trapezoid rule below that.
    """
    recs = [energy(s, params) for s in trajectory.snapshots]
    times = np.asarray(trajectory.times, dtype=float)
    rates = np.array([r.dissipation_rate for r in recs])
    if len(recs) >= 3:
        acc = cumulative_simpson(rates, x=times, initial=0.0)
    else:
        acc = cumulative_trapezoid(rates, x=times, initial=0.0)
    return [dataclasses.replace(r, viscous_dissipated=float(a)) for r, a in zip(recs, acc)]


@dataclass(frozen=True)
class DissipationVerdict:
    passed: bool
    max_violation: float
    tol: float
    initial_total: float
    worst_time: float

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def dissipation_check(trajectory, params: Params, tol: float = 1e-3) -> DissipationVerdict:
    """
    Check ``total(t) + dissipated(t) <= total(0) (1 + tol)`` at every snapshot.

    ``max_violation`` is ``max_t (total(t) + dissipated(t)) / total(0) - 1``
    (negative when the inequality holds strictly).
    """
    if len(trajectory.snapshots) < 3:
        raise ValueError("dissipation check needs at least 3 snapshots")
    hist = energy_history(trajectory, params)
    e0 = hist[0].total
    if e0 <= 0:
        lhs = np.array([h.total + h.viscous_dissipated for h in hist])
        worst = int(np.argmax(lhs))
        return DissipationVerdict(bool(lhs[worst] <= tol), float(lhs[worst]), tol, e0, float(trajectory.times[worst]))
    rel = np.array([(h.total + h.viscous_dissipated) / e0 - 1.0 for h in hist])
    worst = int(np.argmax(rel[1:]) + 1)
    return DissipationVerdict(bool(np.all(rel <= tol)), float(rel[worst]), tol, e0, float(trajectory.times[worst]))


# ---------------------------------------------------------------------------
# scaling invariance

def tile_field(f: SpectralField, lam: int, factor: float = 1.0) -> SpectralField:
    """Samples of ``factor * f(lam x)`` on the grid refined ``lam`` times (``lam`` copies of ``f``)."""
    grid = f.grid
    fine = grid.refined(lam)
    idx = np.arange(fine.n) % grid.n
    out = f.samples
    for ax in range(grid.dim):
        out = np.take(out, idx, axis=ax - grid.dim)
    return SpectralField(fine, samples=factor * out)


def restrict_to_coarse(f_fine: np.ndarray, grid: Grid, lam: int) -> np.ndarray:
    """Samples of the fine field at points ``x`` with ``lam x`` on the coarse grid (first copy)."""
    sl = tuple(slice(0, grid.n) for _ in range(grid.dim))
    return f_fine[(..., *sl)]


@dataclass(frozen=True)
class ScalingVerdict:
    lambda_scale: int
    max_mismatch: float
    tol: float
    passed: bool
    n_compared: int


def scaling_invariance_check(config, lambda_scale: int, tol: float | None = None) -> ScalingVerdict:
    """
    Compare a run with its parabolic rescaling.

    The rescaled run uses ``lam`` copies of the data on a grid with ``lam n``
    points (same box), ``u`` multiplied by ``lam``, pressure by ``lam^2`` and
    ``dt, T`` divided by ``lam^2``. ``rho_lam(t, x)`` is compared with
    ``rho(lam^2 t, lam x)`` on the shared points at every snapshot.
    The default tolerance is ``1e-10`` for muted runs and ``1e-4`` otherwise.
    """
    from .initial_data import build_initial
    from .model import make_model
    from .solver import heat_trajectory, run_system

    lam = int(lambda_scale)
    if lam < 1 or lam & (lam - 1):
        raise ValueError(f"lambda_scale must be a power of two, got {lambda_scale}")
    grid = config.grid
    if grid.n * lam > MAX_POINTS[grid.dim]:
        raise ValueError(f"rescaled grid with {grid.n * lam} points per axis is not resolvable here")
    if tol is None:
        tol = 1e-10 if config.stepper.mute_nonlinear else 1e-4
    state0, rho1_0 = build_initial(config)
    st = config.stepper
    fine_stepper = dataclasses.replace(st, dt=st.dt / lam**2, T=st.T / lam**2)
    params_l = config.params.scaled(lam)
    state_l = FluidState(tile_field(state0.q, lam), tile_field(state0.u, lam, float(lam)))
    rho1_l = tile_field(rho1_0, lam) if rho1_0 is not None else None
    if config.variant == "heat":
        base = heat_trajectory(rho1_0, config.params.mu, st)
        scaled = heat_trajectory(rho1_l, config.params.mu, fine_stepper)
    else:
        base = run_system(make_model(config.variant, grid, config.params, rho1_0), state0, st)
        scaled = run_system(make_model(config.variant, grid.refined(lam), params_l, rho1_l), state_l, fine_stepper)
    if not (base.ok and scaled.ok):
        raise RuntimeError(f"run aborted: base {base.status}, scaled {scaled.status}")
    worst = 0.0
    for a, b in zip(base.snapshots, scaled.snapshots):
        ra = np.exp(a.q.samples)
        rb = restrict_to_coarse(np.exp(b.q.samples), grid, lam)
        worst = max(worst, float(np.max(np.abs(ra - rb))))
    return ScalingVerdict(lam, worst, tol, worst <= tol, len(base.snapshots))


# ---------------------------------------------------------------------------
# sup-norm monitoring


@dataclass(frozen=True)
class LinfSeries:
    times: np.ndarray
    rho_max: np.ndarray
    inv_rho_max: np.ndarray
    q_max: np.ndarray
    C_T: float | None
    flagged: bool
    C_fit: float

    def rows(self):
        for i in range(self.times.size):
            yield float(self.times[i]), float(self.rho_max[i]), float(self.inv_rho_max[i]), float(self.q_max[i])


def linf_monitor(trajectory, C_T: float | None = None) -> LinfSeries:
    """
    Per-snapshot ``||rho||_inf``, ``||1/rho||_inf`` and ``||q||_inf``.

    ``flagged`` is set when ``||rho||_inf + ||1/rho||_inf`` exceeds ``C_T``.
    ``C_fit`` is ``(sup_t ||q||_inf - ||q0||_inf) / ||(grad q0, u0)||_{B^{N/2-1}_{2,2}}``.
    """
    snaps = trajectory.snapshots
    times = np.array([s.t for s in snaps])
    q_max = np.array([s.q.norm_linf() for s in snaps])
    rho_max = np.array([float(np.max(np.exp(s.q.samples))) for s in snaps])
    inv = np.array([float(np.max(np.exp(-s.q.samples))) for s in snaps])
    flagged = bool(C_T is not None and np.any(rho_max + inv > C_T))
    data = critical_data_norm(snaps[0]) if snaps else 0.0
    C_fit = float((np.max(q_max) - q_max[0]) / data) if data > 0 else 0.0
    return LinfSeries(times, rho_max, inv, q_max, C_T, flagged, C_fit)


__all__ = [
    "DissipationVerdict",
    "EnergyRecord",
    "LinfSeries",
    "ScalingVerdict",
    "dissipation_check",
    "energy",
    "energy_history",
    "linf_monitor",
    "scaling_invariance_check",
    "tile_field",
]
