from __future__ import annotations

import copy

import pytest
import yaml

from nsklab.config import ConfigError, RunConfig, example_configs, load_config

from test_solver import run_doc


def errors_of(doc, purpose="run") -> list[str]:
    with pytest.raises(ConfigError) as info:
        RunConfig.from_dict(doc, purpose)
    return info.value.errors


class TestValid:
    def test_roundtrip_and_hash(self):
        cfg = RunConfig.from_dict(run_doc())
        again = RunConfig.from_dict(cfg.to_dict())
        assert again.hash() == cfg.hash()
        assert len(cfg.hash()) == 64

    def test_hash_sensitive_to_values(self):
        a = RunConfig.from_dict(run_doc())
        b = RunConfig.from_dict(run_doc(seed=7))
        assert a.hash() != b.hash()

    def test_flat_K_equals_linear_law(self):
        doc = run_doc()
        doc["params"] = {"mu": 1.0, "lambda": 0.0, "kappa": 1.0, "K": 1.0}
        assert RunConfig.from_dict(doc).params == RunConfig.from_dict(run_doc()).params

    @pytest.mark.parametrize("name", sorted(example_configs()))
    def test_shipped_configs_load(self, name):
        cfg = load_config(example_configs()[name])
        assert cfg.variant in ("nhv1", "rho_form", "effective", "perturbation", "heat")
        assert cfg.stepper.snapshot_stride == 1

    def test_yaml_file(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text(yaml.safe_dump(run_doc()))
        assert load_config(p).hash() == RunConfig.from_dict(run_doc()).hash()

    def test_data_purpose_defaults(self):
        doc = {"grid": {"dim": 1, "n": 1024}, "data": {"kind": "homogeneous_profile", "sigma": 0.5}}
        cfg = RunConfig.from_dict(doc, purpose="data")
        assert cfg.data.kind == "homogeneous_profile"


class TestInvalid:
    def test_viscosity_condition_message(self):
        errs = errors_of(run_doc(params={"lambda": -3.0}))
        assert any("2μ+λ>0 violated" in e for e in errs)

    def test_all_errors_reported(self):
        doc = run_doc(grid={"n": 100}, stepper={"dt": -1.0}, seed=-2, colour="red")
        errs = errors_of(doc)
        joined = " | ".join(errs)
        for frag in ("power of two", "stepper.dt", "seed", "unknown key"):
            assert frag in joined
        assert len(errs) >= 4

    @pytest.mark.parametrize(
        "over,frag",
        [
            (dict(system="euler"), "system must be one of"),
            (dict(params={"pressure_law": {"type": "van_der_waals"}}), "pressure_law.type"),
            (dict(params={"pressure_law": {"type": "gamma", "a": 1.0, "gamma": 0.5}}), "gamma law"),
            (dict(stepper={"scheme": "rk4"}), "stepper.scheme"),
            (dict(data={"kind": "vortex"}), "data.kind"),
            (dict(diagnostics=["1,2"]), "diagnostics entry"),
            (dict(grid={"dim": 2, "n": 4096}), "exceeds the limit"),
            (dict(system="effective", params={"kappa": 0.5}), "kappa = mu^2"),
            (dict(system="perturbation", params={"kappa": 1.0}), "quasi_solution"),
            (dict(data={"kind": "homogeneous_profile"}), "not an initial state"),
        ],
    )
    def test_single_problem(self, over, frag):
        errs = errors_of(run_doc(**over))
        assert any(frag in e for e in errs), errs

    def test_missing_section(self):
        doc = copy.deepcopy(run_doc())
        del doc["grid"]
        assert any("grid" in e for e in errors_of(doc))

    def test_bad_yaml(self, tmp_path):
        p = tmp_path / "bad.yaml"
        p.write_text("grid: [1, 2\n")
        with pytest.raises(ConfigError):
            load_config(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "nope.yaml")
