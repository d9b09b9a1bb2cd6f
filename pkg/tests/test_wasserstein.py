import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causalgen.metrics import discrete_ot, sliced_w1, w1_1d
from causalgen.simulate import BSParams, simulate_bs


class TestW11d:
    def test_identical_zero(self):
        a = np.array([0.3, -1.2, 5.0])
        assert w1_1d(a, a) == 0.0

    def test_point_masses(self):
        assert w1_1d([0.0], [1.0]) == pytest.approx(1.0)

    def test_two_point_shift(self):
        assert w1_1d([0.0, 1.0], [1.0, 2.0]) == pytest.approx(1.0)

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            w1_1d([], [1.0])

    def test_unequal_counts_vs_lp(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            a = rng.normal(size=rng.integers(2, 9))
            b = rng.normal(size=rng.integers(2, 9))
            cost = np.abs(a[:, None] - b[None, :])
            wa = np.full(a.size, 1.0 / a.size)
            wb = np.full(b.size, 1.0 / b.size)
            oracle, _ = discrete_ot(cost, wa, wb)
            assert w1_1d(a, b) == pytest.approx(oracle, abs=1e-10)

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=30, deadline=None)
    def test_translation_equivariance(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=6)
        b = rng.normal(size=9)
        c = rng.normal()
        assert w1_1d(a + c, b + c) == pytest.approx(w1_1d(a, b), abs=1e-12)
        assert w1_1d(a, a + abs(c)) == pytest.approx(abs(c), abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        a, b = rng.normal(size=5), rng.normal(size=8)
        assert w1_1d(a, b) == pytest.approx(w1_1d(b, a), abs=1e-14)


class TestSlicedW1:
    def test_identical_zero(self):
        x = np.random.default_rng(2).normal(size=(20, 6))
        assert sliced_w1(x, x, n_proj=10, seed=0) == 0.0

    def test_translation_bound(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(30, 5))
        shift = rng.normal(size=5) * 2.0
        d = sliced_w1(x, x + shift, n_proj=50, seed=1)
        assert d <= np.linalg.norm(shift) + 1e-9

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            sliced_w1(np.ones((5, 3)), np.ones((5, 4)))

    def test_symmetry_and_reproducibility(self):
        rng = np.random.default_rng(4)
        x, y = rng.normal(size=(15, 4)), rng.normal(size=(12, 4))
        d1 = sliced_w1(x, y, n_proj=20, seed=7)
        d2 = sliced_w1(y, x, n_proj=20, seed=7)
        assert d1 == pytest.approx(d2, abs=1e-14)
        assert sliced_w1(x, y, n_proj=20, seed=7) == d1

    def test_accepts_pathsets(self):
        ps = simulate_bs(BSParams(n_steps=5), 10, seed=0)
        assert sliced_w1(ps, ps, n_proj=5, seed=0) == 0.0

    @pytest.mark.slow
    def test_bs_control_ordering_across_seeds(self):
        # distance to a higher-vol control exceeds distance to a fresh resample
        p_real = BSParams(sigma=0.2)
        p_ctrl = BSParams(sigma=0.3)
        wins = 0
        for seed in range(10):
            real = simulate_bs(p_real, 1000, seed=100 + seed)
            resample = simulate_bs(p_real, 1000, seed=200 + seed)
            control = simulate_bs(p_ctrl, 1000, seed=300 + seed)
            d_res = sliced_w1(real, resample, n_proj=100, seed=seed)
            d_ctl = sliced_w1(real, control, n_proj=100, seed=seed)
            wins += d_ctl > d_res
        assert wins == 10
