import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pma_reach.dynamics import (
    IntegratorConfig,
    VectorFieldModel,
    eval_field,
    euler_step,
    open_loop_fixed_point,
    rotate_quarter,
    run_open_loop,
)
from pma_reach.errors import ConfigurationError, NumericFault

from oracles import damped_euler_fixed_point, rotation

finite = st.floats(-1e3, 1e3, allow_nan=False)


def sink(a, rate=1.0):
    return VectorFieldModel("linear-sink", np.array(a, dtype=float), rate=rate)


class TestEvalField:
    def test_sink_vanishes_at_attractor(self):
        assert np.array_equal(eval_field(sink([0.0, 0.0]), [0.0, 0.0]), [0.0, 0.0])

    def test_sink_hand_value(self):
        np.testing.assert_array_equal(eval_field(sink([1.0, 1.0], rate=2.0), [0.0, 0.0]), [2.0, 2.0])

    def test_swirl_hand_value(self):
        m = VectorFieldModel("nonlinear-swirl", np.zeros(2), rate=1.0, swirl=1.0)
        np.testing.assert_allclose(eval_field(m, [1.0, 0.0]), [-1.0, -1.0], atol=1e-15)

    def test_quarter_turn_matches_rotation_matrix(self):
        # clockwise quarter turn == rotation by -pi/2
        r = np.array(rotation(-math.pi / 2))
        rng = np.random.default_rng(3)
        for _ in range(20):
            v = rng.normal(size=2)
            np.testing.assert_allclose(rotate_quarter(v), r @ v, atol=1e-12)

    def test_swirl_is_identity_on_higher_coordinates(self):
        m = VectorFieldModel("nonlinear-swirl", np.zeros(3), rate=1.0, swirl=5.0)
        out = eval_field(m, [0.0, 0.0, 2.0])
        # rate*(a - xi) + swirl*(xi - a) on the third coordinate
        assert out[2] == -2.0 + 10.0

    def test_biased_sink_adds_bias(self):
        m = VectorFieldModel("biased-linear-sink", np.array([1.0, 0.5]), rate=1.0, bias=np.array([-0.3, 0.2]))
        np.testing.assert_allclose(eval_field(m, m.attractor), [-0.3, 0.2])

    def test_matrix_rate(self):
        m = VectorFieldModel("linear-sink", np.array([1.0, 0.0]), rate=np.array([[2.0, 0.0], [1.0, 3.0]]))
        np.testing.assert_allclose(eval_field(m, [0.0, 0.0]), [2.0, 1.0])

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigurationError):
            eval_field(sink([0.0, 0.0]), [1.0, 2.0, 3.0])

    def test_non_finite_input(self):
        with pytest.raises(NumericFault):
            eval_field(sink([0.0, 0.0]), [np.nan, 0.0])

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(kind="linear-sink", attractor=[0.0], rate=0.0),
            dict(kind="linear-sink", attractor=[0.0], rate=-1.0),
            dict(kind="linear-sink", attractor=[0.0, 0.0], rate=np.eye(3)),
            dict(kind="nonlinear-swirl", attractor=[0.0], swirl=1.0),
            dict(kind="biased-linear-sink", attractor=[0.0, 0.0], bias=[1.0]),
            dict(kind="wobble", attractor=[0.0]),
        ],
    )
    def test_invalid_models(self, kwargs):
        with pytest.raises((ConfigurationError, ValueError)):
            VectorFieldModel(**kwargs)

    @given(st.lists(finite, min_size=2, max_size=2), st.lists(finite, min_size=2, max_size=2))
    def test_finite_everywhere(self, a, xi):
        m = VectorFieldModel("nonlinear-swirl", np.array(a), rate=2.0, swirl=-0.7)
        assert np.all(np.isfinite(eval_field(m, xi)))


class TestEulerStep:
    def test_zero_velocity_identity(self):
        cfg = IntegratorConfig(h=0.01, mu=1.0, t_final=1.0)
        np.testing.assert_array_equal(euler_step([1.0, 1.0], [0.0, 0.0], cfg), [1.0, 1.0])

    def test_mu_zero_discards_state(self):
        cfg = IntegratorConfig(h=0.5, mu=0.0, t_final=1.0)
        np.testing.assert_array_equal(euler_step([3.0, 3.0], [2.0, -2.0], cfg), [1.0, -1.0])

    def test_damped_hand_value(self):
        cfg = IntegratorConfig(h=0.1, mu=0.9, t_final=1.0)
        np.testing.assert_allclose(euler_step([1.0, 0.0], [1.0, 1.0], cfg), [1.0, 0.1], rtol=1e-15)

    def test_overflow_is_a_fault(self):
        cfg = IntegratorConfig(h=0.1, mu=1.0, t_final=1.0)
        with pytest.raises(NumericFault) as info:
            euler_step([1.7e308], [1e308], cfg, step=7)
        assert info.value.step == 7

    @settings(max_examples=200)
    @given(
        st.lists(finite, min_size=3, max_size=3),
        st.lists(finite, min_size=3, max_size=3),
        st.floats(-100, 100),
        st.floats(0.0, 1.0),
    )
    def test_homogeneous(self, x, v, alpha, mu):
        cfg = IntegratorConfig(h=0.01, mu=mu, t_final=1.0)
        x, v = np.array(x), np.array(v)
        scale = abs(alpha) * (np.abs(x) + 0.01 * np.abs(v))
        diff = np.abs(euler_step(alpha * x, alpha * v, cfg) - alpha * euler_step(x, v, cfg))
        assert np.all(diff <= 1e-14 * scale + 1e-300)


class TestIntegratorConfig:
    def test_defaults(self):
        cfg = IntegratorConfig()
        assert (cfg.h, cfg.mu, cfg.t_final, cfg.steps) == (0.01, 0.99, 4.0, 400)

    @pytest.mark.parametrize("t_final,h,k", [(0.3, 0.1, 3), (1.0, 0.02, 50), (1.0, 0.005, 200), (1.0, 0.3, 3)])
    def test_step_count(self, t_final, h, k):
        assert IntegratorConfig(h=h, mu=1.0, t_final=t_final).steps == k

    @pytest.mark.parametrize("kwargs", [dict(h=0.0), dict(h=-1.0), dict(mu=1.5), dict(mu=-0.1), dict(h=5.0, t_final=4.0)])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigurationError):
            IntegratorConfig(**kwargs)


class TestOpenLoop:
    def test_converges_to_attractor_with_plain_euler(self):
        a = np.array([1.0, -2.0])
        log = run_open_loop(sink(a), [5.0, 5.0], IntegratorConfig(h=0.01, mu=1.0, t_final=30.0))
        np.testing.assert_allclose(log.xi[-1], a, atol=1e-9)

    def test_damping_shifts_endpoint(self):
        a = np.array([1.0, 1.0])
        cfg = IntegratorConfig(h=0.01, mu=0.9, t_final=30.0)
        log = run_open_loop(sink(a), [0.0, 0.0], cfg)
        assert np.linalg.norm(log.xi[-1] - a) > 0.1 * np.linalg.norm(a)
        expected = np.array([float(v) for v in damped_euler_fixed_point(a, 1.0, 0.01, 0.9)])
        np.testing.assert_allclose(log.xi[-1], expected, rtol=1e-9)
        np.testing.assert_allclose(open_loop_fixed_point(sink(a), cfg), expected, rtol=1e-15)

    def test_single_step(self):
        log = run_open_loop(sink([1.0]), [0.0], IntegratorConfig(h=1.0, mu=1.0, t_final=1.0))
        assert log.rows == 2

    def test_log_shape_and_timestamps(self):
        cfg = IntegratorConfig()
        log = run_open_loop(sink([1.0, 0.5]), [0.0, 0.0], cfg)
        assert log.rows == cfg.steps + 1
        assert np.array_equal(log.t, np.arange(cfg.steps + 1) * cfg.h)
        assert not log.u.any() and not log.udist.any()
        np.testing.assert_array_equal(log.eps, log.xi_ref - log.xi)

    def test_first_order_convergence(self):
        m = sink([0.0])
        errors = []
        for h in (0.02, 0.01, 0.005):
            log = run_open_loop(m, [1.0], IntegratorConfig(h=h, mu=1.0, t_final=1.0))
            errors.append(abs(log.xi[-1, 0] - math.exp(-1.0)))
        for coarse, fine in zip(errors, errors[1:]):
            assert coarse / fine == pytest.approx(2.0, abs=0.2)

    def test_divergence_faults_with_partial_log(self):
        # mu*x + h*rate*(a - x) with h*rate = 3 flips sign and grows each step
        m = sink([0.0], rate=300.0)
        with pytest.raises(NumericFault) as info:
            run_open_loop(m, [1.0], IntegratorConfig(h=0.01, mu=1.0, t_final=100.0))
        fault = info.value
        assert fault.step is not None and fault.log.rows == fault.step
        assert np.all(np.isfinite(fault.log.xi))
