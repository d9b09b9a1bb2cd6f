import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from causalgen.autodiff import Var, backward, grad_check
from causalgen.flows import LOG_2PI, CouplingLayer, FlowPrior, time_parity_mask


def randomize(flow, seed, scale=0.5):
    rng = np.random.default_rng(seed)
    for _, p in flow.params():
        p.value[...] = rng.normal(scale=scale, size=p.value.shape)


class TestMasks:
    def test_parity_pattern(self):
        np.testing.assert_array_equal(time_parity_mask(6, 1, 0), [1, 0, 1, 0, 1, 0])
        np.testing.assert_array_equal(time_parity_mask(6, 2, 1), [0, 0, 1, 1, 0, 0])

    def test_bad_multiple(self):
        with pytest.raises(ValueError):
            time_parity_mask(5, 2, 0)

    def test_layers_alternate(self):
        flow = FlowPrior(dim=4, d_z=1, n_layers=4, hidden=8, seed=0)
        m0, m1 = flow.layers[0].mask, flow.layers[1].mask
        np.testing.assert_array_equal(m0 + m1, np.ones(4))


class TestCoupling:
    def test_fresh_layer_is_identity(self):
        # final net layer starts at zero, so s = t = 0
        rng = np.random.default_rng(0)
        layer = CouplingLayer(time_parity_mask(4, 1, 0), hidden=8, scale_cap=3.0, rng=rng)
        z = np.random.default_rng(1).normal(size=(5, 4))
        out, ld = layer.forward(Var(z))
        np.testing.assert_array_equal(out.value, z)
        np.testing.assert_array_equal(ld.value, np.zeros(5))

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=40, deadline=None)
    def test_roundtrip_random_params(self, seed):
        flow = FlowPrior(dim=6, d_z=1, n_layers=4, hidden=8, seed=0)
        randomize(flow, seed)
        z = np.random.default_rng(seed + 1).normal(size=(3, 6))
        z0, ld_inv = flow.inverse_flow(Var(z))
        back, ld_fwd = flow.forward_flow(z0)
        np.testing.assert_allclose(back.value, z, atol=1e-9)
        # inverse log-det cancels the forward one
        np.testing.assert_allclose((ld_inv + ld_fwd).value, 0.0, atol=1e-9)

    def test_scale_is_capped(self):
        flow = FlowPrior(dim=4, d_z=1, n_layers=2, hidden=8, scale_cap=3.0, seed=0)
        randomize(flow, 3, scale=100.0)
        z = np.random.default_rng(4).normal(size=(4, 4)) * 50
        _, ld = flow.inverse_flow(Var(z))
        # each of the 2 layers moves 2 coordinates, each bounded by the cap
        assert np.all(np.abs(ld.value) <= 2 * 2 * 3.0 + 1e-9)
        assert np.all(np.isfinite(ld.value))

    def test_two_complementary_layers_touch_everything(self):
        flow = FlowPrior(dim=6, d_z=1, n_layers=2, hidden=8, seed=0)
        randomize(flow, 7)
        z = np.random.default_rng(8).normal(size=(1, 6))
        out, _ = flow.forward_flow(Var(z))
        assert np.all(np.abs(out.value - z) > 1e-12)


class TestLogDetOracle:
    def numerical_logdet(self, fn, z, h=1e-6):
        """log|det| of the Jacobian of fn at z via central differences."""
        d = z.size
        jac = np.empty((d, d))
        for i in range(d):
            up, dn = z.copy(), z.copy()
            up[i] += h
            dn[i] -= h
            jac[:, i] = (fn(up) - fn(dn)) / (2 * h)
        sign, logdet = np.linalg.slogdet(jac)
        assert sign != 0
        return logdet

    @pytest.mark.parametrize("dim,d_z", [(4, 1), (6, 2), (6, 3)])
    def test_inverse_logdet_matches_jacobian(self, dim, d_z):
        flow = FlowPrior(dim=dim, d_z=d_z, n_layers=4, hidden=8, seed=1)
        randomize(flow, 11)
        z = np.random.default_rng(12).normal(size=dim)

        def inv(v):
            out, _ = flow.inverse_flow(Var(v[None, :]))
            return out.value[0]

        _, ld = flow.inverse_flow(Var(z[None, :]))
        oracle = self.numerical_logdet(inv, z)
        assert ld.value[0] == pytest.approx(oracle, abs=1e-4)

    def test_forward_logdet_matches_jacobian(self):
        flow = FlowPrior(dim=4, d_z=1, n_layers=3, hidden=8, seed=2)
        randomize(flow, 13)
        z = np.random.default_rng(14).normal(size=4)

        def fwd(v):
            out, _ = flow.forward_flow(Var(v[None, :]))
            return out.value[0]

        _, ld = flow.forward_flow(Var(z[None, :]))
        assert ld.value[0] == pytest.approx(self.numerical_logdet(fwd, z), abs=1e-4)


class TestLogProb:
    def test_zero_layers_standard_normal(self):
        flow = FlowPrior(dim=2, d_z=1, n_layers=0, seed=0)
        lp = flow.log_prob(np.zeros((1, 2))).value[0]
        assert lp == pytest.approx(-LOG_2PI, abs=1e-12)

    def test_identity_init_equals_base(self):
        flow = FlowPrior(dim=6, d_z=1, n_layers=6, hidden=8, seed=3)
        z = np.random.default_rng(15).normal(size=(10, 6))
        lp = flow.log_prob(z).value
        base = -0.5 * np.sum(z * z, axis=1) - 3 * LOG_2PI
        np.testing.assert_allclose(lp, base, atol=1e-12)

    def test_1d_density_integrates_to_one(self):
        flow = FlowPrior(dim=1, d_z=1, n_layers=4, hidden=8, seed=4)
        # moderate params keep the pushforward mass inside the quadrature window
        randomize(flow, 16, scale=0.1)
        grid = np.linspace(-10.0, 10.0, 20001)
        dens = np.exp(flow.log_prob(grid[:, None]).value)
        integral = np.trapezoid(dens, grid)
        assert integral == pytest.approx(1.0, abs=1e-3)

    def test_shape_error(self):
        flow = FlowPrior(dim=3, d_z=1, n_layers=1, seed=0)
        with pytest.raises(ValueError):
            flow.log_prob(np.zeros((2, 4)))

    def test_grads_via_fd(self):
        flow = FlowPrior(dim=4, d_z=1, n_layers=2, hidden=6, seed=5)
        randomize(flow, 17, scale=0.3)
        z = np.random.default_rng(18).normal(size=(2, 4))
        targets = [
            (dense, attr)
            for layer in flow.layers
            for dense in layer.net.layers
            for attr in ("w", "b")
        ]

        def f(zv, *param_vals):
            for (obj, attr), v in zip(targets, param_vals):
                setattr(obj, attr, v)
            return flow.log_prob(zv).sum()

        # check gradient in z and in every flow parameter
        grad_check(f, [z] + [getattr(o, a).value.copy() for o, a in targets])


class TestSampling:
    def test_identity_flow_samples_standard_normal(self):
        flow = FlowPrior(dim=3, d_z=1, n_layers=4, hidden=8, seed=6)
        z = flow.sample(10_000, seed=100)
        for k in range(3):
            p = stats.kstest(z[:, k], "norm").pvalue
            assert p > 0.01

    def test_seed_reproducible(self):
        flow = FlowPrior(dim=4, d_z=1, n_layers=3, hidden=8, seed=7)
        randomize(flow, 19)
        np.testing.assert_array_equal(flow.sample(50, seed=1), flow.sample(50, seed=1))
        assert not np.array_equal(flow.sample(50, seed=1), flow.sample(50, seed=2))

    def test_entropy_self_consistency(self):
        # mean log_prob over two independent sample sets agrees within 3 SE
        flow = FlowPrior(dim=3, d_z=1, n_layers=4, hidden=8, seed=8)
        randomize(flow, 20, scale=0.3)
        n = 4000
        lp_a = flow.log_prob(flow.sample(n, seed=1)).value
        lp_b = flow.log_prob(flow.sample(n, seed=2)).value
        se = np.sqrt(lp_a.var() / n + lp_b.var() / n)
        assert abs(lp_a.mean() - lp_b.mean()) < 3 * se

    def test_sample_validates_n(self):
        with pytest.raises(ValueError):
            FlowPrior(dim=2, seed=0).sample(0, seed=1)


def test_log_prob_differentiable_end_to_end():
    flow = FlowPrior(dim=4, d_z=2, n_layers=2, hidden=6, seed=9)
    randomize(flow, 21, scale=0.3)
    z = Var(np.random.default_rng(22).normal(size=(3, 4)))
    lp = flow.log_prob(z).sum()
    backward(lp, leaves=[z] + [p for _, p in flow.params()])
    assert np.all(np.isfinite(z.grad))
