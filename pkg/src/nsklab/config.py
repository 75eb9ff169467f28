"""
Run configuration: a YAML document validated in full before any allocation.

Example
-------
.. code-block:: yaml

    system: nhv1
    seed: 0
    output: runs/nhv1
    grid: {dim: 2, n: 32, box_length: 6.283185307179586}
    params:
      mu: 1.0
      lambda: 0.0
      kappa: 1.0
      pressure_law: {type: linear, K: 1.0}
    stepper: {dt: 0.002, T: 0.1, scheme: exp_rk2}
    data: {kind: smooth_noise, amplitude: 0.05, velocity_amplitude: 0.05, k_max: 4}
    diagnostics: ["1,2,inf", "0,2,2"]
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .initial_data import KINDS, DataSpec
from .littlewood_paley import BesovSpec
from .model import CAPILLARITY_FORMS, VISCOSITY_FORMS, Params, PressureLaw
from .solver import SCHEMES, TimeStepperConfig
from .spectral import Grid

VARIANTS = ("rho_form", "nhv1", "effective", "perturbation", "heat")
TOP_KEYS = {"system", "seed", "output", "grid", "params", "stepper", "data", "diagnostics"}
GRID_KEYS = {"dim", "n", "box_length"}
PARAM_KEYS = {"mu", "lambda", "kappa", "K", "capillarity_form", "viscosity_form", "pressure_law"}
LAW_KEYS = {"type", "K", "a", "gamma"}
STEPPER_KEYS = {"dt", "T", "scheme", "picard_iters", "snapshot_stride", "mute_nonlinear"}
DATA_KEYS = {f.name for f in dataclasses.fields(DataSpec)}
MAX_POINTS = {1: 2**20, 2: 2048, 3: 128}


class ConfigError(ValueError):
    """Validation failure; ``errors`` lists every problem found."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class RunConfig:
    variant: str
    grid: Grid
    params: Params
    stepper: TimeStepperConfig
    data: DataSpec
    diagnostics: tuple[str, ...] = ()
    seed: int = 0
    output: str = "run"
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def from_dict(cls, doc: dict, purpose: str = "run") -> "RunConfig":
        return _build(doc, purpose)

    @classmethod
    def from_yaml(cls, path, purpose: str = "run") -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError([f"cannot read config {path}: {exc.strerror}"]) from None
        try:
            doc = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError([f"config is not valid YAML: {exc}"]) from None
        return _build(doc, purpose)

    def to_dict(self) -> dict:
        return {
            "system": self.variant,
            "seed": self.seed,
            "output": self.output,
            "grid": {"dim": self.grid.dim, "n": self.grid.n, "box_length": self.grid.box_length},
            "params": self.params.as_dict(),
            "stepper": dataclasses.asdict(self.stepper),
            "data": dataclasses.asdict(self.data),
            "diagnostics": list(self.diagnostics),
        }

    def hash(self) -> str:
        """SHA-256 of the canonical JSON form of the validated config."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_overrides(self, **kw) -> "RunConfig":
        return dataclasses.replace(self, **kw)


def _unknown(section: str, got: dict, allowed: set, errors: list) -> None:
    extra = sorted(set(got) - allowed)
    if extra:
        errors.append(f"unknown key(s) in {section}: {', '.join(map(str, extra))}")


def _section(doc: dict, name: str, errors: list, required: bool = True) -> dict:
    sec = doc.get(name)
    if sec is None:
        if required:
            errors.append(f"missing section '{name}'")
        return {}
    if not isinstance(sec, dict):
        errors.append(f"section '{name}' must be a mapping")
        return {}
    return sec


def _number(sec: dict, key: str, errors: list, where: str, default=None, integer: bool = False):
    v = sec.get(key, default)
    if v is None:
        errors.append(f"{where}.{key} is required")
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        errors.append(f"{where}.{key} must be a number, got {v!r}")
        return None
    if integer and (not float(v).is_integer()):
        errors.append(f"{where}.{key} must be an integer, got {v!r}")
        return None
    if not math.isfinite(v):
        errors.append(f"{where}.{key} must be finite")
        return None
    return int(v) if integer else float(v)


def _build(doc, purpose: str = "run") -> RunConfig:
    """
    Validate ``doc`` and build the config.

    ``purpose="data"`` is for field construction only: ``system``, ``params``
    and ``stepper`` become optional and profile-type data kinds are allowed.
    """
    if purpose not in ("run", "data"):
        raise ValueError(f"purpose must be 'run' or 'data', got {purpose!r}")
    if not isinstance(doc, dict):
        raise ConfigError(["config must be a mapping at the top level"])
    run = purpose == "run"
    if not run:
        doc = {"system": "rho_form", "params": {"mu": 1.0, "kappa": 1.0},
               "stepper": {"dt": 1.0, "T": 1.0}} | doc
    errors: list[str] = []
    _unknown("config", doc, TOP_KEYS, errors)

    variant = doc.get("system")
    if variant not in VARIANTS:
        errors.append(f"system must be one of {VARIANTS}, got {variant!r}")

    g = _section(doc, "grid", errors)
    _unknown("grid", g, GRID_KEYS, errors)
    dim = _number(g, "dim", errors, "grid", integer=True)
    n = _number(g, "n", errors, "grid", integer=True)
    box = _number(g, "box_length", errors, "grid", default=2 * math.pi)
    if dim is not None and dim not in (1, 2, 3):
        errors.append(f"grid.dim must be 1, 2 or 3, got {dim}")
    if n is not None and (n < 8 or n & (n - 1)):
        errors.append(f"grid.n must be a power of two >= 8, got {n}")
    elif n is not None and dim in MAX_POINTS and n > MAX_POINTS[dim]:
        errors.append(f"grid.n = {n} exceeds the limit {MAX_POINTS[dim]} for dim {dim}")
    if box is not None and box <= 0:
        errors.append("grid.box_length must be positive")

    p = _section(doc, "params", errors)
    _unknown("params", p, PARAM_KEYS, errors)
    mu = _number(p, "mu", errors, "params")
    lam = _number(p, "lambda", errors, "params", default=0.0)
    kappa = _number(p, "kappa", errors, "params")
    cap = p.get("capillarity_form", "inverse")
    visc = p.get("viscosity_form", "shallow_water")
    if cap not in CAPILLARITY_FORMS:
        errors.append(f"params.capillarity_form must be one of {CAPILLARITY_FORMS}, got {cap!r}")
    if visc not in VISCOSITY_FORMS:
        errors.append(f"params.viscosity_form must be one of {VISCOSITY_FORMS}, got {visc!r}")
    if mu is not None and mu <= 0:
        errors.append(f"mu > 0 violated (mu = {mu})")
    if mu is not None and lam is not None:
        if not 2 * mu + lam > 0:
            errors.append(f"2μ+λ>0 violated (2mu + lambda = {2 * mu + lam})")
        elif dim is not None and not 2 * mu + dim * lam >= 0:
            errors.append(f"2μ+Nλ≥0 violated for N = {dim}")
    if kappa is not None and kappa <= 0:
        errors.append(f"kappa > 0 violated (kappa = {kappa})")
    law = None
    law_doc = p.get("pressure_law")
    if law_doc is None:
        K = _number(p, "K", errors, "params", default=1.0)
        if K is not None:
            law_doc = {"type": "linear", "K": K}
    elif "K" in p:
        errors.append("params.K and params.pressure_law are mutually exclusive")
    if isinstance(law_doc, dict):
        _unknown("params.pressure_law", law_doc, LAW_KEYS, errors)
        kind = law_doc.get("type", "linear")
        if kind == "linear":
            K = _number(law_doc, "K", errors, "pressure_law")
            if K is not None and K < 0:
                errors.append("pressure_law.K must be non-negative")
            elif K is not None:
                law = PressureLaw.linear(K)
        elif kind == "gamma":
            a = _number(law_doc, "a", errors, "pressure_law")
            gam = _number(law_doc, "gamma", errors, "pressure_law")
            if a is not None and gam is not None:
                if a > 0 and gam > 1:
                    law = PressureLaw.gamma_law(a, gam)
                else:
                    errors.append("gamma law needs a > 0 and gamma > 1")
        else:
            errors.append(f"pressure_law.type must be 'linear' or 'gamma', got {kind!r}")
    elif law_doc is not None:
        errors.append("params.pressure_law must be a mapping")

    s = _section(doc, "stepper", errors)
    _unknown("stepper", s, STEPPER_KEYS, errors)
    dt = _number(s, "dt", errors, "stepper")
    T = _number(s, "T", errors, "stepper")
    scheme = s.get("scheme", "exp_rk2")
    iters = _number(s, "picard_iters", errors, "stepper", default=5, integer=True)
    stride = _number(s, "snapshot_stride", errors, "stepper", default=1, integer=True)
    mute = s.get("mute_nonlinear", False)
    if scheme not in SCHEMES:
        errors.append(f"stepper.scheme must be one of {SCHEMES}, got {scheme!r}")
    if not isinstance(mute, bool):
        errors.append("stepper.mute_nonlinear must be true or false")
    if dt is not None and dt <= 0:
        errors.append("stepper.dt must be positive")
    if dt is not None and T is not None and dt > 0 and T < dt:
        errors.append("stepper.T must be >= stepper.dt")
    if dt is not None and T is not None and dt > 0 and T / dt > 1e6:
        errors.append("stepper: more than 1e6 steps requested")
    if iters is not None and iters < 1:
        errors.append("stepper.picard_iters must be >= 1")
    if stride is not None and stride < 1:
        errors.append("stepper.snapshot_stride must be >= 1")

    d = _section(doc, "data", errors, required=False) or {"kind": "equilibrium"}
    _unknown("data", d, DATA_KEYS, errors)
    if d.get("kind", "equilibrium") not in KINDS:
        errors.append(f"data.kind must be one of {KINDS}, got {d.get('kind')!r}")

    diags = doc.get("diagnostics", [])
    if not isinstance(diags, list):
        errors.append("diagnostics must be a list of 's,p,r' strings")
        diags = []
    for spec in diags:
        try:
            BesovSpec.parse(str(spec))
        except ValueError as exc:
            errors.append(f"diagnostics entry {spec!r}: {exc}")

    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        errors.append(f"seed must be a non-negative integer, got {seed!r}")
    output = doc.get("output", "run")
    if not isinstance(output, str) or not output:
        errors.append("output must be a non-empty path string")

    data = params = stepper = None
    if not any(e.startswith("data") for e in errors):
        try:
            data = DataSpec(**d)
        except (TypeError, ValueError) as exc:
            errors.append(f"data: {exc}")
    try:
        params = Params(mu, lam, kappa, law, cap, visc)
    except (TypeError, ValueError):
        pass  # already reported field by field
    try:
        stepper = TimeStepperConfig(dt, T, scheme, iters, stride, mute)
    except (TypeError, ValueError):
        pass
    if run and variant in VARIANTS and params is not None:
        _check_variant(variant, params, data, stepper, errors)
    if errors:
        raise ConfigError(errors)
    grid = Grid(dim, n, box)
    try:
        data.validate_for(grid)
    except ValueError as exc:
        raise ConfigError([f"data: {exc}"]) from None
    return RunConfig(variant, grid, params, stepper, data, tuple(str(x) for x in diags), seed, output, raw=doc)


def _check_variant(variant: str, params: Params, data, stepper, errors: list) -> None:
    """Cross-section compatibility; ``data`` or ``stepper`` may be ``None`` when invalid."""
    if variant in ("nhv1", "effective", "perturbation", "heat") and not params.shallow_water:
        errors.append(f"{variant} needs viscosity_form 'shallow_water' and capillarity_form 'inverse'")
    if variant in ("effective", "perturbation", "heat") and not params.quasi_regime:
        errors.append(f"{variant} needs kappa = mu^2 and lambda = 0")
    if variant == "perturbation" and params.pressure.kind != "linear":
        errors.append("perturbation needs a linear pressure law")
    if variant == "heat" and params.K != 0:
        errors.append("heat describes the pressureless quasi-solution; set K = 0")
    if data is not None:
        if variant in ("perturbation", "heat") and data.kind != "quasi_solution":
            errors.append(f"{variant} needs data.kind 'quasi_solution'")
        if data.kind in ("homogeneous_profile", "truncated_profile", "scaled_profile"):
            errors.append(f"data.kind {data.kind!r} is a field for the 'data' command, not an initial state")
    if stepper is not None and stepper.scheme == "picard" and variant == "heat":
        errors.append("heat runs are exact; picard does not apply")


def load_config(path, purpose: str = "run") -> RunConfig:
    return RunConfig.from_yaml(path, purpose)


def example_configs() -> dict[str, Path]:
    """Shipped example configs by stem."""
    root = Path(__file__).parent / "configs"
    return {p.stem: p for p in sorted(root.glob("*.yaml"))}


__all__ = ["ConfigError", "RunConfig", "VARIANTS", "example_configs", "load_config"]
