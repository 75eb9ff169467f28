from __future__ import annotations

import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import FunctionTransformer

from nsklab.littlewood_paley import (
    BesovSpec,
    DyadicBlockTransformer,
    HybridSpec,
    NormSeries,
    besov_norm,
    block_scaling_check,
    chemin_lerner_norm,
    chi,
    dyadic_block,
    hybrid_besov_norm,
    lebesgue_besov_norm,
    partition_for,
    phi,
)
from nsklab.spectral import Grid, SpectralField, random_field


def mode(grid: Grid, k: float) -> SpectralField:
    x = grid.coords[0]
    return SpectralField(grid, samples=np.cos(k * x))


class TestCutoffs:
    def test_chi_plateau_and_support(self):
        r = np.linspace(0, 3, 3001)
        c = chi(r)
        assert np.all(c[r <= 0.75] == 1.0)
        assert np.all(c[r >= 4 / 3] == 0.0)
        assert np.all(np.diff(c) <= 0)

    def test_phi_support(self):
        r = np.linspace(0, 4, 4001)
        p = phi(r)
        assert np.all(p[(r < 0.75) | (r > 8 / 3)] == 0.0)
        assert np.all(p[(r >= 4 / 3) & (r <= 1.5)] == 1.0)
        assert np.all((p >= 0) & (p <= 1))


class TestPartition:
    def test_block_range_formula(self):
        g = Grid(1, 1024, 2 * np.pi)
        part = partition_for(g)
        assert part.j_min == math.ceil(math.log2(4 / 3))
        assert part.j_max == math.floor(math.log2(3 / 8 * 512))

    @pytest.mark.parametrize("dim,n", [(1, 1024), (2, 128)])
    def test_partition_of_unity_on_certified_band(self, dim, n):
        g = Grid(dim, n)
        part = partition_for(g)
        lo, hi = part.certified_band()
        band = (g.kabs >= lo) & (g.kabs <= hi)
        assert band.sum() > 0
        s = part.partition_sum()[band]
        assert np.max(np.abs(s - 1.0)) <= 1e-10

    def test_nonhomogeneous_sum(self):
        g = Grid(1, 1024)
        part = partition_for(g)
        _, hi = part.certified_band()
        band = g.kabs <= hi
        assert np.max(np.abs(part.nonhomogeneous_sum()[band] - 1.0)) <= 1e-10

    def test_reconstruction(self, rng):
        g = Grid(1, 1024)
        part = partition_for(g)
        lo, hi = part.certified_band()
        f = random_field(g, rng)
        f = SpectralField(g, coeffs=f.coeffs * ((g.kabs >= lo) & (g.kabs <= hi)))
        total = sum(dyadic_block(f, l).samples for l in part.blocks)
        assert np.linalg.norm(total - f.samples) / np.linalg.norm(f.samples) <= 1e-8

    def test_out_of_range_block(self):
        g = Grid(1, 64)
        with pytest.raises(ValueError):
            dyadic_block(SpectralField.zeros(g), 40)


class TestBlocks:
    # a box of length 24 pi has wavenumber spacing 1/12, so 2^l * 17/12 is on the grid
    grid = Grid(1, 4096, 24 * np.pi)

    def test_core_mode_unchanged(self):
        f = mode(self.grid, 4 * 17 / 12)
        out = dyadic_block(f, 2)
        assert np.max(np.abs(out.samples - f.samples)) <= 1e-12

    def test_disjoint_block_zero(self):
        f = mode(self.grid, 4 * 17 / 12)
        assert np.max(np.abs(dyadic_block(f, 5).samples)) <= 1e-12

    def test_besov_single_mode(self):
        l, s = 3, 0.7
        f = mode(self.grid, 2.0**l * 17 / 12)
        f = f * (1.0 / f.norm_l2())
        val = besov_norm(f, BesovSpec(s, 2, math.inf))
        assert 0.5 <= val / 2.0 ** (l * s) <= 2.0

    def test_zero_field(self):
        assert besov_norm(SpectralField.zeros(self.grid), BesovSpec(1, 2, 1)) == 0.0


class TestHybrid:
    def test_equal_indices_reduce_to_plain(self, rng):
        g = Grid(2, 64)
        f = random_field(g, rng)
        h = BesovSpec(hybrid=HybridSpec(0.5, 0.5, 2, 2, 2, 1, 1))
        assert hybrid_besov_norm(f, h) == pytest.approx(besov_norm(f, BesovSpec(0.5, 2, 1)), rel=1e-12)

    def test_high_support_has_no_low_part(self):
        g = Grid(1, 1024)
        f = mode(g, 60.0)
        h = BesovSpec(hybrid=HybridSpec(-1.0, 1.0, 3, 2, 2, 1, 1))
        assert hybrid_besov_norm(f, h) == pytest.approx(besov_norm(f, BesovSpec(1.0, 2, 1)), rel=1e-12)

    def test_sum_of_restricted_parts(self, rng):
        g = Grid(1, 1024)
        f = random_field(g, rng)
        part = partition_for(g)
        l0 = 4
        h = BesovSpec(hybrid=HybridSpec(-0.5, 1.5, l0, 2, 2, 1, 2))
        norms = part.block_norms(f, 2)
        ls = np.array(part.blocks)
        low = np.sum(2.0 ** (-0.5 * ls[ls <= l0]) * norms[ls <= l0])
        high = np.sqrt(np.sum((2.0 ** (1.5 * ls[ls > l0]) * norms[ls > l0]) ** 2))
        assert hybrid_besov_norm(f, h) == pytest.approx(low + high, rel=1e-12)

    def test_spec_parse(self):
        s = BesovSpec.parse("1, 2, inf")
        assert (s.s, s.p, s.r) == (1.0, 2.0, math.inf)
        assert s.spec_id == "B[s=1,p=2,r=inf]"
        with pytest.raises(ValueError):
            BesovSpec.parse("1,2")
        with pytest.raises(ValueError):
            BesovSpec(0, 0.5, 1)


class TestCheminLerner:
    grid = Grid(1, 1024)

    def test_constant_in_time(self, rng):
        f = random_field(self.grid, rng)
        spec = BesovSpec(0.5, 2, 1)
        assert chemin_lerner_norm([0, 1, 2], [f] * 3, math.inf, spec) == pytest.approx(besov_norm(f, spec))

    def test_r_equals_rho(self, rng):
        f = random_field(self.grid, rng)
        times = np.linspace(0, 1, 41)
        fields = [f * math.exp(-t) for t in times]
        spec = BesovSpec(0.0, 2, 2)
        assert chemin_lerner_norm(times, fields, 2, spec) == pytest.approx(
            lebesgue_besov_norm(times, fields, 2, spec), rel=1e-10
        )

    def test_minkowski_ordering(self):
        g = self.grid
        a, b = mode(g, 6.0), mode(g, 48.0)
        times = np.linspace(0, 1, 21)
        fields = [a * math.cos(3 * t) + b * math.sin(3 * t) for t in times]
        spec = BesovSpec(0.0, 2, 1)
        assert chemin_lerner_norm(times, fields, math.inf, spec) >= lebesgue_besov_norm(
            times, fields, math.inf, spec
        )

    def test_times_validated(self, rng):
        f = random_field(self.grid, rng)
        with pytest.raises(ValueError):
            chemin_lerner_norm([1, 0], [f, f], 2, BesovSpec())


class TestProfileFlatness:
    def test_sigma_half_dimension_is_flat(self):
        rep = block_scaling_check(0.5, Grid(1, 2**14))
        assert rep["passed"]

    @pytest.mark.parametrize("dim,n,sigma", [(1, 2**16, 0.5), (2, 1024, 1.0)])
    def test_flat_mid_band(self, dim, n, sigma):
        rep = block_scaling_check(sigma, Grid(dim, n))
        assert rep["max_rel_deviation"] <= 0.10
        assert len(rep["blocks"]) >= 2


class TestNormSeries:
    def test_append_and_validation(self):
        s = NormSeries()
        s.append(0.0, {"a": 1.0})
        s.append(0.5, {"a": 0.5})
        with pytest.raises(ValueError):
            s.append(0.5, {"a": 0.1})
        with pytest.raises(ValueError):
            s.append(1.0, {"a": -1.0})
        assert list(s.csv_rows()) == [(0.0, "a", 1.0), (0.5, "a", 0.5)]
        assert s.summary()["a"]["last"] == 0.5


class TestTransformer:
    def test_matches_weighted_blocks(self, rng):
        g = Grid(1, 256)
        fields = [random_field(g, rng) for _ in range(3)]
        X = np.array([f.samples for f in fields])
        tr = DyadicBlockTransformer(dim=1, box_length=2 * np.pi, s=0.5).fit(X)
        Y = tr.transform(X)
        part = partition_for(g)
        ref = 2.0 ** (0.5 * np.array(part.blocks)) * part.block_norms(fields[1], 2)
        assert np.allclose(Y[1], ref, rtol=1e-12)
        assert list(tr.get_feature_names_out()) == [f"block_{l}" for l in part.blocks]

    def test_sklearn_protocol(self, rng):
        X = rng.standard_normal((4, 16 * 16))
        pipe = make_pipeline(FunctionTransformer(), DyadicBlockTransformer(dim=2))
        assert pipe.fit_transform(X).shape[0] == 4
        tr = clone(DyadicBlockTransformer(dim=2, s=1.0))
        assert tr.get_params()["s"] == 1.0
        with pytest.raises(ValueError):
            DyadicBlockTransformer(dim=2).fit(rng.standard_normal((2, 15)))
