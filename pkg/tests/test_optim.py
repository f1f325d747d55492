import numpy as np
import pytest

from rednet.optim import AdamHyper, AdamState, adam_step, sgd_step


def _fresh(shape=(3, 4), value=0.0):
    params = [np.full(shape, value, dtype=np.float64)]
    return params, AdamState.for_params(params)


class TestAdam:
    def test_zero_gradient_is_noop(self):
        params, state = _fresh(value=1.5)
        before = params[0].copy()
        for _ in range(3):
            adam_step(params, [np.zeros_like(params[0])], state, AdamHyper())
        assert np.array_equal(params[0], before)
        assert state.t == 3

    def test_first_step_closed_form(self):
        # constant g=2 from zero state with defaults:
        # m=0.2, v=0.004, a_1 = 1e-4*sqrt(1e-3)/0.1, step = -9.99997e-5
        params, state = _fresh()
        adam_step(params, [np.full((3, 4), 2.0)], state, AdamHyper())
        assert np.allclose(params[0], -9.99997e-5, rtol=0, atol=1e-9)

    def test_first_step_magnitude_bounded_by_alpha(self):
        hyper = AdamHyper()
        for g in (1e-3, 0.5, 2.0, 1e4, -7.0):
            params, state = _fresh()
            adam_step(params, [np.full((3, 4), g)], state, hyper)
            assert np.all(np.abs(params[0]) <= hyper.alpha * (1 + 1e-6))
            assert np.all(np.sign(params[0]) == -np.sign(g))

    def test_step_counter_increments(self):
        params, state = _fresh()
        g = [np.ones_like(params[0])]
        adam_step(params, g, state, AdamHyper())
        adam_step(params, g, state, AdamHyper())
        assert state.t == 2

    def test_deterministic(self):
        results = []
        for _ in range(2):
            params, state = _fresh(value=0.3)
            g = [np.linspace(-1, 1, 12).reshape(3, 4)]
            for _ in range(5):
                adam_step(params, g, state, AdamHyper())
            results.append(params[0].copy())
        assert np.array_equal(results[0], results[1])

    def test_shape_mismatch_rejected(self):
        params, state = _fresh()
        with pytest.raises(ValueError):
            adam_step(params, [np.zeros((4, 3))], state, AdamHyper())

    def test_non_finite_gradient_reported(self):
        params, state = _fresh()
        g = np.zeros((3, 4))
        g[1, 2] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            adam_step(params, [g], state, AdamHyper())

    def test_state_zero_initialized(self):
        params = [np.ones((2, 2)), np.ones(3)]
        state = AdamState.for_params(params)
        assert state.t == 0
        assert all(not m.any() for m in state.m)
        assert all(not v.any() for v in state.v)

    def test_hyper_validation(self):
        with pytest.raises(ValueError):
            AdamHyper(alpha=0)
        with pytest.raises(ValueError):
            AdamHyper(beta1=1.0)
        with pytest.raises(ValueError):
            AdamHyper(beta2=-0.1)
        with pytest.raises(ValueError):
            AdamHyper(epsilon=0)


class TestSgd:
    def test_zero_gradient_is_noop(self):
        p = [np.full((2, 2), 3.0)]
        sgd_step(p, [np.zeros((2, 2))], 0.1)
        assert np.all(p[0] == 3.0)

    def test_arithmetic(self):
        p = [np.array([1.0])]
        sgd_step(p, [np.array([10.0])], 1e-6)
        assert np.allclose(p[0], 0.99999, rtol=0, atol=1e-12)

    def test_linearity_two_steps_equal_summed_gradients(self):
        g1 = np.array([0.5, -2.0])
        g2 = np.array([1.5, 0.25])
        a = [np.array([1.0, 1.0])]
        sgd_step(a, [g1], 0.01)
        sgd_step(a, [g2], 0.01)
        b = [np.array([1.0, 1.0])]
        sgd_step(b, [g1 + g2], 0.01)
        assert np.allclose(a[0], b[0])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            sgd_step([np.zeros(3)], [np.zeros(4)], 0.1)
