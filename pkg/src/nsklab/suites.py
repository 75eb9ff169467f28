"""
Verification suites.

Each ``criterion_*`` function runs one quantitative check at its stated
tolerance and returns a :class:`CriterionResult`. Suites group criteria
under the names accepted by ``nsklab verify --suite``.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import expm

from .config import example_configs, load_config
from .diagnostics import dissipation_check, scaling_invariance_check
from .initial_data import smooth_noise, truncated_profile_report
from .linear import (
    LinearCoeffs,
    closed_form_exp,
    duhamel_linf_split,
    lyapunov_series,
    verify_block_decay,
)
from .littlewood_paley import block_scaling_check, partition_for
from .model import (
    EffectiveModel,
    NHV1Model,
    Params,
    PressureLaw,
    divK_general,
    divK_log,
    divK_viscous,
    quasi_solution_residual,
)
from .solver import ExponentialIntegrator, TimeStepperConfig, picard_solve, run_system, solve_heat
from .spectral import Grid, SpectralField, random_field
from .state import FluidState


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    metrics: dict = field(default_factory=dict)
    elapsed: float = 0.0

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"[{verdict}] criterion {self.number:2d} {self.name} ({self.elapsed:.2f} s)"

    def as_dict(self) -> dict:
        return {
            "criterion": self.number,
            "name": self.name,
            "passed": self.passed,
            "elapsed_s": round(self.elapsed, 3),
            "metrics": _jsonable(self.metrics),
        }


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _timed(number: int, name: str):
    def deco(fn: Callable[..., tuple[bool, dict]]):
        def run(*args, **kwargs) -> CriterionResult:
            t0 = time.perf_counter()
            passed, metrics = fn(*args, **kwargs)
            return CriterionResult(number, name, bool(passed), metrics, time.perf_counter() - t0)

        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run

    return deco


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    den = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))), 1e-300)
    return float(np.max(np.abs(a - b))) / den


# ---------------------------------------------------------------------------
# 1. Korteweg tensor identity


def positive_density(grid: Grid, rng: np.random.Generator, amplitude: float = 0.2) -> SpectralField:
    """``1 + amplitude * g / max|g|`` for a smooth random ``g`` (modes ``|k| <= 2.5``)."""
    g = random_field(grid, rng, k_max=2.5)
    s = g.samples / np.max(np.abs(g.samples))
    return SpectralField(grid, samples=1.0 + amplitude * s)


@_timed(1, "Korteweg tensor triple identity")
def criterion_1(n_fields: int = 20, n: int = 64, tol: float = 1e-8, seed: int = 0):
    """Three forms of ``div K`` for ``kappa(rho) = kappa/rho`` agree pairwise."""
    kappa = 0.7
    params = Params(1.0, 0.0, kappa, PressureLaw.linear(0.0))
    rng = np.random.default_rng(seed)
    worst = 0.0
    for dim in (1, 2):
        grid = Grid(dim, n)
        for _ in range(n_fields):
            rho = positive_density(grid, rng)
            forms = [
                divK_general(rho, params).samples,
                divK_log(rho, kappa).samples,
                divK_viscous(rho, kappa).samples,
            ]
            for a, b in itertools.combinations(forms, 2):
                worst = max(worst, _rel(a, b))
    return worst <= tol, {"max_pairwise_rel_error": worst, "tol": tol, "fields_per_dim": n_fields}


# ---------------------------------------------------------------------------
# 2. closed-form semigroup


REGIME_COEFFS = {
    "trigonometric": LinearCoeffs(1.0, 0.0, 1.0),
    "resonant": LinearCoeffs(1.0, 1.0, 1.0),
    "hyperbolic": LinearCoeffs(1.0, 1.0, 0.25),
}


@_timed(2, "closed-form semigroup vs dense exponential")
def criterion_2(n_pairs: int = 100, tol: float = 1e-10, seed: int = 0):
    """``closed_form_exp`` against ``scipy.linalg.expm`` of ``-t A(xi)`` on random ``(xi, t)``."""
    rng = np.random.default_rng(seed)
    metrics = {}
    ok = True
    for name, co in REGIME_COEFFS.items():
        assert co.regime == name
        xi2 = 10.0 ** rng.uniform(-2, 2, n_pairs)
        t = 10.0 ** rng.uniform(-3, 0.5, n_pairs)
        cf = closed_form_exp(xi2, t, co)
        worst = 0.0
        for i in range(n_pairs):
            A = np.array([[0.0, -xi2[i]], [co.c * xi2[i], co.nu * xi2[i]]])
            ref = expm(-t[i] * A)
            worst = max(worst, np.linalg.norm(cf[i] - ref) / np.linalg.norm(ref))
        metrics[name] = worst
        ok &= worst <= tol
    metrics["tol"] = tol
    return ok, metrics


# ---------------------------------------------------------------------------
# 3. block decay law

KAPPA_SWEEP = (0.01, 0.1, 0.25)
DECAY_BLOCKS = (2, 3, 4)


@_timed(3, "block decay law")
def criterion_3(kappas=KAPPA_SWEEP, blocks=DECAY_BLOCKS, nu: float = 2.0):
    """
    Rates scale as ``4^l`` within 20% and the prefactor ``c_fit`` is stable within 30%.

    The sweep is ``mu = 1, lambda = 0`` (``nu = 2``) with ``kappa`` in the
    hyperbolic regime, where ``min(1, 4 kappa / nu^2)`` actually varies.
    """
    rows = []
    scaling_ok = True
    for kappa in kappas:
        co = LinearCoeffs.from_physical(nu / 2.0, 0.0, kappa)
        reps = [verify_block_decay(l, co) for l in blocks]
        norm_rates = np.array([r.measured_rate / 4.0**r.block for r in reps])
        spread = float(np.max(np.abs(norm_rates / np.mean(norm_rates) - 1.0)))
        scaling_ok &= spread <= 0.20
        c_fit = float(np.mean([r.c_fit for r in reps]))
        rows.append({"kappa": kappa, "rate_over_4l_spread": spread, "c_fit": c_fit,
                     "measured_rates": [r.measured_rate for r in reps]})
    cs = np.array([r["c_fit"] for r in rows])
    c_spread = float(np.max(np.abs(cs / np.mean(cs) - 1.0)))
    return scaling_ok and c_spread <= 0.30, {"sweep": rows, "c_fit_spread": c_spread}


# ---------------------------------------------------------------------------
# 4. Lyapunov functional


@_timed(4, "dyadic Lyapunov monotonicity")
def criterion_4(n: int = 64, n_samples: int = 50, seed: int = 1):
    """``k_l(t)`` is non-increasing for ``alpha = sqrt(c)/2`` on every block of a 2D grid."""
    co = LinearCoeffs(1.0, 1.0, 1.0)
    alpha = math.sqrt(co.c) / 2.0
    grid = Grid(2, n)
    rng = np.random.default_rng(seed)
    state = FluidState(random_field(grid, rng), random_field(grid, rng, rank="vector"))
    per_block = {}
    ok = True
    for l in partition_for(grid).blocks:
        times = np.linspace(0.0, 2.0 / 4.0**l, n_samples)
        rep = lyapunov_series(state, l, alpha, co, times)
        per_block[l] = {"monotone": rep.monotone, "max_increase": rep.max_increase, "K_fit": rep.K_fit}
        ok &= rep.monotone
    return ok, {"alpha": alpha, "blocks": per_block}


# ---------------------------------------------------------------------------
# 5. quasi-solution exactness


def bump_density(grid: Grid, amplitude: float = 0.3, width: float = 0.4) -> SpectralField:
    """``1 + amplitude * exp(-|x|^2 / (2 width^2))`` centred in the box."""
    r2 = sum(c**2 for c in grid.centered_coords())
    return SpectralField(grid, samples=1.0 + amplitude * np.exp(-r2 / (2.0 * width**2)))


@_timed(5, "quasi-solution exactness")
def criterion_5(n_samples: int = 20, tol: float = 1e-8, mu: float = 0.5):
    """Residual of the pressureless system at ``(rho1, -mu grad ln rho1)`` along the heat flow."""
    worst = 0.0
    for dim, n in ((1, 256), (2, 64)):
        grid = Grid(dim, n)
        rho0 = bump_density(grid)
        for t in np.linspace(0.0, 1.0, n_samples):
            res = quasi_solution_residual(solve_heat(rho0, mu, t), mu)
            worst = max(worst, res.relative)
    return worst <= tol, {"max_relative_residual": worst, "tol": tol}


# ---------------------------------------------------------------------------
# 6. effective velocity


@_timed(6, "effective-velocity equivalence")
def criterion_6(n_steps: int = 10, dt: float = 1e-3, tol: float = 1e-6, seed: int = 0):
    """The ``(q, u)`` trajectory mapped by ``v = u + mu grad q`` equals the ``(q, v)`` trajectory."""
    params = Params(1.0, 0.0, 1.0, PressureLaw.linear(1.0))
    worst = 0.0
    for dim, n in ((1, 64), (2, 32)):
        grid = Grid(dim, n)
        rng = np.random.default_rng(seed)
        state = FluidState(smooth_noise(grid, rng, 0.1, 4), smooth_noise(grid, rng, 0.1, 4, "vector"))
        a, b = NHV1Model(grid, params), EffectiveModel(grid, params)
        ia, ib = ExponentialIntegrator(a, dt), ExponentialIntegrator(b, dt)
        xa, xb = a.from_state(state), b.from_state(state)
        for k in range(n_steps):
            xa = ia.step(xa, k * dt)
            xb = ib.step(xb, k * dt)
            mapped = b.from_state(a.to_state(xa, (k + 1) * dt))
            worst = max(worst, float(np.max(np.abs(grid.ifft(mapped) - grid.ifft(xb)))))
    return worst <= tol, {"sup_error": worst, "tol": tol, "steps": n_steps}


# ---------------------------------------------------------------------------
# 7. energy inequality


@_timed(7, "energy inequality")
def criterion_7(tol: float = 1e-3, names=None):
    """``dissipation_check`` on every shipped example config."""
    from .solver import simulate

    out = {}
    ok = True
    for name, path in example_configs().items():
        if names is not None and name not in names:
            continue
        cfg = load_config(path)
        traj = simulate(cfg)
        v = dissipation_check(traj, cfg.params, tol)
        out[name] = {"status": traj.status, "max_violation": v.max_violation, "passed": v.passed}
        ok &= v.passed and traj.ok
    return ok, {"runs": out, "tol": tol}


# ---------------------------------------------------------------------------
# 8. scaling invariance


@_timed(8, "scaling invariance")
def criterion_8(lambda_scale: int = 2):
    """Linear sector to ``1e-10`` and nonlinear small-data sector to ``1e-4``."""
    configs = example_configs()
    lin = scaling_invariance_check(load_config(configs["linear_nhv1"]), lambda_scale, 1e-10)
    non = scaling_invariance_check(load_config(configs["nhv1_small"]), lambda_scale, 1e-4)
    return lin.passed and non.passed, {
        "linear_mismatch": lin.max_mismatch,
        "nonlinear_mismatch": non.max_mismatch,
        "lambda": lambda_scale,
    }


# ---------------------------------------------------------------------------
# 9. homogeneous profiles


@_timed(9, "homogeneous-profile Besov flatness")
def criterion_9(tol_flat: float = 0.10, tol_trend: float = 0.25):
    """Flat weighted block norms of ``|x|^-sigma`` and the truncated-profile trends."""
    flat = {}
    ok = True
    for grid, sigma in ((Grid(1, 2**16), 0.5), (Grid(2, 1024), 1.0)):
        rep = block_scaling_check(sigma, grid, tol_flat)
        flat[f"N={grid.dim},sigma={sigma}"] = rep["max_rel_deviation"]
        ok &= rep["passed"]
    grid = Grid(1, 2**16)
    trends = {}
    for eps in (0.05, 0.1):
        reps = [truncated_profile_report(eps, l0, grid) for l0 in range(3, 10)]
        l0s = np.array([r["l0"] for r in reps])
        slope = float(np.polyfit(l0s, np.log2([r["besov_inf"] for r in reps]), 1)[0])
        slope_dev = abs(slope / -eps - 1.0)
        ratio_dev = max(abs(r["ratio"] / r["predicted_ratio"] - 1.0) for r in reps)
        trends[eps] = {"slope": slope, "slope_rel_dev": slope_dev, "ratio_rel_dev": ratio_dev}
        ok &= slope_dev <= tol_trend and ratio_dev <= tol_trend
    return ok, {"flatness": flat, "truncated": trends}


# ---------------------------------------------------------------------------
# 10. Picard iteration


@_timed(10, "Picard contraction")
def criterion_10(T: float = 0.1, n_steps: int = 64, n_iter: int = 6, seed: int = 0, tol: float = 1e-4):
    """Ratios below one for ``n = 2..5`` and agreement with exponential RK2 at ``t = T``."""
    grid = Grid(2, 32)
    params = Params(1.0, 0.0, 1.0, PressureLaw.linear(1.0))
    rng = np.random.default_rng(seed)
    state = FluidState(smooth_noise(grid, rng, 0.1, 4), smooth_noise(grid, rng, 0.1, 4, "vector"))
    res = picard_solve(state, T, n_iter, params, n_steps=n_steps)
    ratios = res.ratios[:4]
    stepper = TimeStepperConfig(T / n_steps, T, "exp_rk2", snapshot_stride=n_steps)
    traj = run_system(NHV1Model(grid, params), state, stepper)
    a = res.final_state().coeffs()
    b = traj.snapshots[-1].coeffs()
    rel = math.sqrt(grid.spectral_l2sq(a - b) / grid.spectral_l2sq(b))
    ok = len(ratios) == 4 and all(r < 1 for r in ratios) and rel <= tol
    return ok, {"ratios": res.ratios, "rel_vs_rk2": rel, "tol": tol}


# ---------------------------------------------------------------------------
# 11. Duhamel split


def compressive_state(grid: Grid, amplitude: float = 0.3, width2: float = 0.5) -> FluidState:
    """``q0 = 0`` and a converging radial velocity ``u0 = -amplitude x exp(-|x|^2/width2)``."""
    xs = grid.centered_coords()
    env = np.exp(-sum(c**2 for c in xs) / width2)
    u = SpectralField(grid, samples=np.stack([-amplitude * c * env for c in xs]))
    return FluidState(SpectralField.zeros(grid), u)


@_timed(11, "L-infinity Duhamel split")
def criterion_11(T: float = 0.5, tol: float = 1e-6, stability: float = 0.25):
    """Split agrees with the semigroup, heat part obeys the max principle, ``C_fit`` is grid-stable."""
    co = LinearCoeffs(1.0, 0.5, 0.7)
    reps = {n: duhamel_linf_split(compressive_state(Grid(2, n)), co, T) for n in (32, 64)}
    c32, c64 = reps[32].C_fit, reps[64].C_fit
    drift = abs(c64 / c32 - 1.0) if c32 != 0 else math.inf
    ok = (
        all(r.split_rel_error <= tol for r in reps.values())
        and all(r.heat_max_principle for r in reps.values())
        and drift <= stability
    )
    return ok, {
        "split_rel_error": {n: r.split_rel_error for n, r in reps.items()},
        "heat_sup_minus_q0_sup": {n: r.heat_sup - r.q0_sup for n, r in reps.items()},
        "C_fit": {n: r.C_fit for n, r in reps.items()},
        "C_fit_drift": drift,
    }


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
    11: criterion_11,
}

SUITES = {
    "tensor-identity": (1,),
    "semigroup-decay": (2, 3, 4, 11),
    "quasi-solution": (5, 6),
    "energy": (7,),
    "scaling": (8,),
    "besov-profile": (9,),
    "picard": (10,),
}


@dataclass
class SuiteResult:
    name: str
    results: list

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def as_dict(self) -> dict:
        return {"suite": self.name, "passed": self.passed, "criteria": [r.as_dict() for r in self.results]}


def run_suite(name: str) -> SuiteResult:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)} or 'all'")
    return SuiteResult(name, [CRITERIA[i]() for i in SUITES[name]])


def run_all() -> list[SuiteResult]:
    return [run_suite(name) for name in SUITES]


__all__ = [
    "CRITERIA",
    "CriterionResult",
    "SUITES",
    "SuiteResult",
    "bump_density",
    "compressive_state",
    "positive_density",
    "run_all",
    "run_suite",
]
__all__ += [f"criterion_{i}" for i in CRITERIA]
