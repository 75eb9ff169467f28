from __future__ import annotations

import json

import numpy as np
import pytest

from nsklab.suites import (
    CRITERIA,
    SUITES,
    CriterionResult,
    bump_density,
    compressive_state,
    positive_density,
    run_suite,
)
from nsklab.spectral import Grid


class TestRegistry:
    def test_every_criterion_in_one_suite(self):
        listed = sorted(n for nums in SUITES.values() for n in nums)
        assert listed == sorted(CRITERIA)

    def test_named_suites(self):
        for name in ("tensor-identity", "semigroup-decay", "quasi-solution", "energy", "scaling", "besov-profile"):
            assert name in SUITES

    def test_unknown_suite(self):
        with pytest.raises(ValueError):
            run_suite("nope")


class TestResult:
    def test_line_and_dict(self):
        r = CriterionResult(3, "block decay", False, {"x": np.float64(np.inf), "v": np.arange(2)}, 1.234)
        assert r.line() == "[FAIL] criterion  3 block decay (1.23 s)"
        d = r.as_dict()
        assert d["metrics"] == {"x": "inf", "v": [0, 1]}
        json.dumps(d)

    def test_suite_result(self):
        res = run_suite("tensor-identity")
        assert res.passed
        assert res.as_dict()["criteria"][0]["criterion"] == 1


class TestHelpers:
    def test_positive_density(self, rng):
        rho = positive_density(Grid(2, 32), rng, 0.2)
        assert rho.samples.min() >= 0.8 - 1e-12 and rho.samples.max() <= 1.2 + 1e-12

    def test_bump_density(self):
        rho = bump_density(Grid(1, 64))
        assert rho.samples.max() == pytest.approx(1.3)

    def test_compressive_state(self):
        s = compressive_state(Grid(2, 32))
        div = np.sum(1j * s.grid.kd * s.u.coeffs, axis=0)
        assert np.all(s.q.samples == 0)
        # div(-a x exp(-|x|^2/w)) = -N a at the origin
        assert s.grid.ifft(div)[0, 0] == pytest.approx(-2 * 0.3, rel=1e-8)
