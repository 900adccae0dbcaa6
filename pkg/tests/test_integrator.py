import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from airbrake_surrogate.integrator import (
    IndeterminateOrderError,
    IntegrationDivergedError,
    MaxStepsExceededError,
    OdeSystem,
    Rk4Config,
    empirical_order,
    integrate_until,
    rk4_step,
)


def const_sys(c=0.0):
    return OdeSystem(1, lambda t, y: np.array([c]))


EXP_SYS = OdeSystem(1, lambda t, y: y.copy())
DECAY_SYS = OdeSystem(1, lambda t, y: -y)


class TestRk4Step:
    def test_zero_derivative_fixed_point(self):
        out = rk4_step(const_sys(0.0), 0.0, np.array([7.0]), 0.5)
        assert out[0] == 7.0

    def test_exponential_hand_expansion(self):
        # k1=0.1, k2=0.105, k3=0.10525, k4=0.110525 -> 1.1051708333...
        out = rk4_step(EXP_SYS, 0.0, np.array([1.0]), 0.1)
        assert out[0] == pytest.approx(1.1051708333333333, abs=1e-12)
        assert abs(out[0] - math.exp(0.1)) < 1e-7

    def test_harmonic_oscillator_period(self):
        sys = OdeSystem(2, lambda t, y: np.array([y[1], -y[0]]))
        # ~0.01 step chosen so n*h is exactly 50 full periods
        n = int(round(100 * math.pi / 0.01))
        h = 100 * math.pi / n
        y = np.array([1.0, 0.0])
        for i in range(n):
            y = rk4_step(sys, i * h, y, h)
        assert np.all(np.abs(y - np.array([1.0, 0.0])) < 1e-6)

    def test_divergence_identifies_stage(self):
        calls = {"n": 0}

        def rhs(t, y):
            calls["n"] += 1
            return np.array([math.inf if calls["n"] == 3 else 1.0])

        with pytest.raises(IntegrationDivergedError) as err:
            rk4_step(OdeSystem(1, rhs), 0.0, np.array([0.0]), 0.1)
        assert err.value.stage == 3

    def test_exact_on_cubic_polynomials(self):
        # dy/dt = p(t), deg <= 3: one step matches the analytic integral
        coeffs = [2.0, -3.0, 0.5, 4.0]  # p(t) = 2 - 3t + 0.5t^2 + 4t^3
        sys = OdeSystem(
            1, lambda t, y: np.array([coeffs[0] + coeffs[1] * t + coeffs[2] * t**2 + coeffs[3] * t**3])
        )
        h = 0.37
        t0 = 0.21
        exact = sum(
            c / (k + 1) * ((t0 + h) ** (k + 1) - t0 ** (k + 1))
            for k, c in enumerate(coeffs)
        )
        out = rk4_step(sys, t0, np.array([1.5]), h)
        assert out[0] - 1.5 == pytest.approx(exact, rel=10 * np.finfo(float).eps)

    @given(
        c0=st.floats(-5, 5), c1=st.floats(-5, 5), c2=st.floats(-5, 5), c3=st.floats(-5, 5),
        h=st.floats(0.01, 1.0),
    )
    @settings(max_examples=50, deadline=None)
    def test_polynomial_exactness_property(self, c0, c1, c2, c3, h):
        sys = OdeSystem(1, lambda t, y: np.array([c0 + c1 * t + c2 * t**2 + c3 * t**3]))
        exact = c0 * h + c1 * h**2 / 2 + c2 * h**3 / 3 + c3 * h**4 / 4
        out = rk4_step(sys, 0.0, np.array([0.0]), h)
        assert out[0] == pytest.approx(exact, rel=1e-12, abs=1e-12)


class TestIntegrateUntil:
    def test_time_stop_entry_count(self):
        traj = integrate_until(
            const_sys(), 0.0, np.array([3.0]), Rk4Config(h=0.25), lambda t, y: t >= 1.0
        )
        assert len(traj) == 5
        assert all(y[0] == 3.0 for _, y in traj)

    def test_gravity_zero_crossing_time(self):
        sys = OdeSystem(1, lambda t, y: np.array([-9.81]))
        traj = integrate_until(
            sys, 0.0, np.array([9.81]), Rk4Config(h=0.001), lambda t, y: y[0] <= 0.0
        )
        assert traj[-1][0] == pytest.approx(1.0, abs=0.0011)

    def test_max_steps_truncation_carries_partial(self):
        with pytest.raises(MaxStepsExceededError) as err:
            integrate_until(
                const_sys(), 0.0, np.array([0.0]), Rk4Config(h=0.1, max_steps=3),
                lambda t, y: False,
            )
        assert len(err.value.trajectory) == 4

    def test_initial_state_already_stopped(self):
        traj = integrate_until(
            const_sys(), 5.0, np.array([1.0]), Rk4Config(h=0.1), lambda t, y: t >= 1.0
        )
        assert len(traj) == 1

    def test_halved_h_doubles_interior_steps(self):
        stop = lambda t, y: t >= 2.0
        coarse = integrate_until(const_sys(), 0.0, np.array([0.0]), Rk4Config(h=0.1), stop)
        fine = integrate_until(const_sys(), 0.0, np.array([0.0]), Rk4Config(h=0.05), stop)
        assert len(fine) - 1 == 2 * (len(coarse) - 1)

    def test_determinism_bit_identical(self):
        sys = OdeSystem(2, lambda t, y: np.array([y[1], -y[0] * 1.3]))
        run = lambda: integrate_until(
            sys, 0.0, np.array([1.0, 0.2]), Rk4Config(h=0.01), lambda t, y: t >= 3.0
        )
        a, b = run(), run()
        assert all(
            ta == tb and np.array_equal(ya, yb) for (ta, ya), (tb, yb) in zip(a, b)
        )


class TestEmpiricalOrder:
    def test_decay_problem_order_four(self):
        order = empirical_order(
            DECAY_SYS, np.array([1.0]), 1.0, 0.1, lambda t: np.array([math.exp(-t)])
        )
        assert 3.8 <= order <= 4.2

    def test_growth_problem_order_four(self):
        order = empirical_order(
            EXP_SYS, np.array([1.0]), 1.0, 0.2, lambda t: np.array([math.exp(t)])
        )
        assert 3.8 <= order <= 4.2

    def test_linear_rhs_indeterminate(self):
        sys = const_sys(2.5)
        with pytest.raises(IndeterminateOrderError):
            empirical_order(sys, np.array([0.0]), 1.0, 0.1, lambda t: np.array([2.5 * t]))


class TestValidation:
    def test_bad_step_size(self):
        with pytest.raises(ValueError):
            Rk4Config(h=0.0)
        with pytest.raises(ValueError):
            rk4_step(const_sys(), 0.0, np.array([0.0]), -0.1)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            rk4_step(OdeSystem(2, lambda t, y: y), 0.0, np.array([1.0]), 0.1)
