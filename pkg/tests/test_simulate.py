import numpy as np
import pytest

from causalgen.simulate import (
    BSParams,
    HestonParams,
    PDV4Params,
    derived_rng,
    realized_vol,
    simulate_bs,
    simulate_heston,
    simulate_pdv4,
)


class TestRng:
    def test_deterministic(self):
        a = derived_rng(7).standard_normal(5)
        b = derived_rng(7).standard_normal(5)
        np.testing.assert_array_equal(a, b)

    def test_streams_differ(self):
        a = derived_rng(7, 0).standard_normal(5)
        b = derived_rng(7, 1).standard_normal(5)
        assert not np.array_equal(a, b)


class TestBS:
    def test_shapes_and_start(self):
        ps = simulate_bs(BSParams(), 50, seed=1)
        assert ps.values.shape == (50, 61, 1)
        np.testing.assert_allclose(ps.values[:, 0, 0], 1.0)
        assert ps.dt == pytest.approx(1 / 12)

    def test_seed_reproducible(self):
        a = simulate_bs(BSParams(), 10, seed=3).values
        b = simulate_bs(BSParams(), 10, seed=3).values
        np.testing.assert_array_equal(a, b)
        c = simulate_bs(BSParams(), 10, seed=4).values
        assert not np.array_equal(a, c)

    def test_lognormal_moments(self):
        # E[S_T] = s0 exp(mu T); the exact scheme has no discretization bias.
        p = BSParams(mu=0.1, sigma=0.2, dt=1 / 12, n_steps=60)
        ps = simulate_bs(p, 200_000, seed=0)
        st = ps.values[:, -1, 0]
        t_final = p.n_steps * p.dt
        mean_expect = np.exp(p.mu * t_final)
        assert np.mean(st) == pytest.approx(mean_expect, rel=0.01)
        log_var_expect = p.sigma**2 * t_final
        assert np.var(np.log(st)) == pytest.approx(log_var_expect, rel=0.02)

    def test_zero_vol_is_deterministic_growth(self):
        p = BSParams(mu=0.1, sigma=0.0, dt=0.5, n_steps=4)
        ps = simulate_bs(p, 3, seed=0)
        expect = np.exp(0.1 * 0.5 * np.arange(5))
        np.testing.assert_allclose(ps.values[:, :, 0], np.broadcast_to(expect, (3, 5)), rtol=1e-12)

    def test_realized_vol_concentrates(self):
        ps = simulate_bs(BSParams(sigma=0.2), 2000, seed=5)
        rv = realized_vol(ps)
        assert 0.15 < np.median(rv) < 0.25

    def test_validation(self):
        with pytest.raises(ValueError):
            simulate_bs(BSParams(sigma=-0.1), 5, 0)
        with pytest.raises(ValueError):
            simulate_bs(BSParams(), 0, 0)


class TestHeston:
    def test_shapes(self):
        ps = simulate_heston(HestonParams(), 20, seed=2)
        assert ps.values.shape == (20, 61, 2)
        np.testing.assert_allclose(ps.values[:, 0, 0], 1.0)
        np.testing.assert_allclose(ps.values[:, 0, 1], 0.2)

    def test_degenerate_matches_bs(self):
        # xi = 0 and v0 = theta freeze the variance, recovering BS with
        # sigma = sqrt(theta) on the identical noise stream.
        hp = HestonParams(mu=0.05, kappa=1.3, theta=0.09, xi=0.0, rho=-0.5, v0=0.09)
        bp = BSParams(mu=0.05, sigma=0.3, dt=hp.dt, n_steps=hp.n_steps)
        h = simulate_heston(hp, 30, seed=11)
        b = simulate_bs(bp, 30, seed=11)
        np.testing.assert_array_equal(h.values[:, :, 0], b.values[:, :, 0])
        np.testing.assert_allclose(h.values[:, :, 1], 0.09)

    def test_variance_mean_reverts(self):
        hp = HestonParams(kappa=3.0, theta=0.04, xi=0.2, v0=0.5, dt=1 / 52, n_steps=300)
        ps = simulate_heston(hp, 4000, seed=7)
        v_end = np.mean(ps.values[:, -1, 1])
        assert abs(v_end - hp.theta) < 0.25 * (hp.v0 - hp.theta)

    def test_leverage_sign(self):
        # rho = -0.9 couples negative price shocks to rising variance.
        ps = simulate_heston(HestonParams(), 5000, seed=9)
        ret = np.diff(np.log(ps.values[:, :, 0]), axis=1)
        dv = np.diff(ps.values[:, :, 1], axis=1)
        corr = np.corrcoef(ret.ravel(), dv.ravel())[0, 1]
        assert corr < -0.5

    def test_validation(self):
        with pytest.raises(ValueError):
            simulate_heston(HestonParams(rho=-1.5), 5, 0)


class TestPDV4:
    def test_shapes_and_channels(self):
        ps = simulate_pdv4(PDV4Params(), 10, seed=3)
        assert ps.values.shape == (10, 61, 2)
        np.testing.assert_allclose(ps.values[:, 0, 0], 1.0)
        assert np.all(ps.values[:, :, 1] > 0)

    def test_degenerate_matches_bs(self):
        # beta1 = beta2 = 0 gives constant vol beta0 regardless of burn-in.
        pp = PDV4Params(mu=0.1, beta0=0.2, beta1=0.0, beta2=0.0)
        bp = BSParams(mu=0.1, sigma=0.2, dt=pp.dt, n_steps=pp.n_steps)
        a = simulate_pdv4(pp, 25, seed=13)
        b = simulate_bs(bp, 25, seed=13)
        np.testing.assert_array_equal(a.values[:, :, 0], b.values[:, :, 0])
        np.testing.assert_allclose(a.values[:, :, 1], 0.2)

    def test_burn_in_changes_initial_vol(self):
        p0 = PDV4Params(burn_in=0)
        p1 = PDV4Params(burn_in=250)
        a = simulate_pdv4(p0, 40, seed=1)
        b = simulate_pdv4(p1, 40, seed=1)
        # without burn-in every path starts at sigma = beta0 exactly
        np.testing.assert_allclose(a.values[:, 0, 1], p0.beta0)
        assert np.std(b.values[:, 0, 1]) > 1e-4

    def test_vol_floor_holds(self):
        # strong negative beta1 pushes sigma below zero without the floor
        p = PDV4Params(beta0=0.01, beta1=-5.0, beta2=0.0, burn_in=50)
        ps = simulate_pdv4(p, 50, seed=2)
        assert np.all(ps.values[:, :, 1] >= 1e-6)

    def test_vol_clusters(self):
        # squared returns of the 4-factor model autocorrelate positively
        p = PDV4Params(n_steps=500)
        ps = simulate_pdv4(p, 200, seed=4)
        r2 = np.diff(np.log(ps.values[:, :, 0]), axis=1) ** 2
        x, y = r2[:, :-1].ravel(), r2[:, 1:].ravel()
        corr = np.corrcoef(x, y)[0, 1]
        assert corr > 0.05

    def test_validation(self):
        with pytest.raises(ValueError):
            simulate_pdv4(PDV4Params(lambda11=0.0), 5, 0)
        with pytest.raises(ValueError):
            simulate_pdv4(PDV4Params(theta1=1.5), 5, 0)


def test_realized_vol_rejects_nonpositive():
    from causalgen.paths import PathSet

    vals = np.ones((2, 3, 1))
    vals[0, 1, 0] = -1.0
    with pytest.raises(ValueError):
        realized_vol(PathSet(vals, dt=1.0))
