import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shbdf3.bdf import (
    InsufficientHistory,
    TimeHistory,
    d3_apply,
    initial_level,
    lagged_rhs,
    make_kernels,
)
from shbdf3.grid import GridField, GridSpec

from conftest import random_field

SPEC = GridSpec(2, 1.0, 8)


def const(c):
    return GridField.constant(SPEC, c)


def history_at(level_n, fields, tau=0.1, phi0=None, phi1=None):
    """History at level ``level_n`` holding ``fields`` newest first."""
    return TimeHistory(tau, level_n, list(fields), phi0, phi1)


class TestKernels:
    def test_unit_step(self):
        k = make_kernels(1.0)
        assert (k.b0, k.b1, k.b2) == pytest.approx((11 / 6, -7 / 6, 1 / 3), rel=1e-15)
        assert k.b0_n1 == 2.0 and k.b0_n2 == 1.5

    def test_tau_six(self):
        k = make_kernels(6.0)
        assert (k.b0, k.b1, k.b2) == pytest.approx((11 / 36, -7 / 36, 1 / 18), rel=1e-15)

    @pytest.mark.parametrize("tau", [1e-4, 0.1, 0.37, 2.0, 50.0])
    def test_sum_is_inverse_tau(self, tau):
        k = make_kernels(tau)
        assert k.b0 + k.b1 + k.b2 == pytest.approx(1.0 / tau, rel=1e-15)

    @pytest.mark.parametrize("tau", [0.0, -1.0])
    def test_rejects_nonpositive(self, tau):
        with pytest.raises(ValueError):
            make_kernels(tau)

    def test_lead_weights(self):
        k = make_kernels(0.5)
        assert [k.lead_weight(n) for n in (1, 2, 3, 7)] == [4.0, 3.0, 11 / 3, 11 / 3]
        with pytest.raises(ValueError):
            k.lead_weight(0)


class TestTimeHistory:
    def test_level_count_enforced(self):
        with pytest.raises(ValueError):
            TimeHistory(0.1, 2, [const(0), const(0)])
        with pytest.raises(ValueError):
            TimeHistory(0.1, -1, [])

    def test_mixed_grids_rejected(self):
        other = GridField.zeros(GridSpec(2, 2.0, 8))
        with pytest.raises(ValueError):
            TimeHistory(0.1, 1, [const(0), other])

    def test_push_keeps_three_newest(self):
        hist = TimeHistory.start(const(0), 0.1)
        for c in (1, 2, 3, 4):
            hist.push(const(c))
        assert hist.n == 4
        assert [lv.values[0, 0] for lv in hist.levels] == [4, 3, 2]
        assert hist.time == pytest.approx(0.4)

    def test_extrapolation_exact_for_quadratics(self):
        hist = history_at(5, [const(25.0), const(16.0), const(9.0)])
        assert hist.extrapolate().values[0, 0] == 36.0


class TestInitialLevel:
    def test_zero_data(self):
        for mode in ("corrected", "paper_literal"):
            u0, phi1 = initial_level(const(0.0), 0.3, 1.0, 0.25, mode)
            assert not u0.values.any() and not phi1.values.any()

    @pytest.mark.parametrize("tau", [0.1, 1.0])
    def test_unit_constant(self, tau):
        u0, phi1 = initial_level(const(1.0), tau, 1.0, 0.25, "corrected")
        np.testing.assert_allclose(phi1.values, -0.75, rtol=1e-15)
        np.testing.assert_allclose(u0.values, 1.0 - 0.375 * tau, rtol=1e-15)
        u0, phi1 = initial_level(const(1.0), tau, 1.0, 0.25, "paper_literal")
        np.testing.assert_allclose(phi1.values, 0.75, rtol=1e-15)
        np.testing.assert_allclose(u0.values, 1.0 + 0.375 * tau, rtol=1e-15)

    def test_forcing_enters_time_derivative(self):
        _, phi1 = initial_level(const(0.0), 0.1, 1.0, 0.25, "corrected", forcing=const(2.0))
        np.testing.assert_allclose(phi1.values, 2.0)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            initial_level(const(0.0), 0.1, 1.0, 0.25, "other")


class TestD3:
    def test_constant_history_is_zero(self):
        c = const(2.5)
        cases = [
            (history_at(0, [c], phi0=c, phi1=const(0)), 1),
            (history_at(1, [c, c]), 2),
            (history_at(4, [c, c, c]), 5),
        ]
        for hist, level in cases:
            assert not d3_apply(hist, c, level).values.any()

    def test_bdf3_single_increment(self):
        tau = 0.2
        hist = history_at(3, [const(1.0)] * 3, tau=tau)
        out = d3_apply(hist, const(1.5), 4).values
        np.testing.assert_allclose(out, 11 / (6 * tau) * 0.5, rtol=1e-15)

    def test_first_level(self):
        tau = 0.2
        hist = history_at(0, [const(1.0)], tau=tau, phi0=const(1.0), phi1=const(0.0))
        np.testing.assert_allclose(d3_apply(hist, const(1.3), 1).values, 2 / tau * 0.3, rtol=1e-14)

    def test_linear_in_time_exact(self):
        tau = 0.1
        t = np.arange(6) * tau
        hist = history_at(5, [const(t[5]), const(t[4]), const(t[3])], tau=tau)
        out = d3_apply(hist, const(6 * tau), 6).values
        np.testing.assert_allclose(out, 1.0, rtol=1e-13)

    def test_cubic_in_time_exact(self):
        tau = 0.1
        t = np.arange(7) * tau
        hist = history_at(5, [const(t[5] ** 3), const(t[4] ** 3), const(t[3] ** 3)], tau=tau)
        out = d3_apply(hist, const(t[6] ** 3), 6).values
        np.testing.assert_allclose(out, 3 * t[6] ** 2, rtol=1e-10)

    def test_level_mismatch(self):
        hist = history_at(1, [const(0), const(0)])
        with pytest.raises(ValueError):
            d3_apply(hist, const(0), 3)

    def test_missing_startup_data(self):
        hist = history_at(0, [const(0)])
        with pytest.raises(InsufficientHistory):
            lagged_rhs(hist, 1)


class TestLaggedRhs:
    def test_constant_history_bdf3(self):
        tau = 0.3
        out = lagged_rhs(history_at(3, [const(2.0)] * 3, tau=tau), 4).values
        np.testing.assert_allclose(out, 11 / (6 * tau) * 2.0, rtol=1e-15)

    def test_constant_history_bdf2(self):
        tau = 0.3
        out = lagged_rhs(history_at(1, [const(2.0)] * 2, tau=tau), 2).values
        np.testing.assert_allclose(out, 3 / (2 * tau) * 2.0, rtol=1e-15)

    def test_startup_zero(self):
        hist = history_at(0, [const(0)], phi0=const(0), phi1=const(0))
        assert not lagged_rhs(hist, 1).values.any()

    def test_startup_formula(self):
        tau = 0.25
        hist = history_at(0, [const(9.0)], tau=tau, phi0=const(1.0), phi1=const(-0.5))
        np.testing.assert_allclose(lagged_rhs(hist, 1).values, 2 / tau - 0.5)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(0, 6), tau=st.floats(1e-3, 10.0))
def test_defining_identity(seed, n, tau):
    """d3_apply(w) = lead * w - lagged_rhs for every level kind."""
    rng = np.random.default_rng(seed)
    fields = [random_field(SPEC, rng) for _ in range(min(n + 1, 3))]
    hist = TimeHistory(tau, n, fields, random_field(SPEC, rng), random_field(SPEC, rng))
    level = n + 1
    w = random_field(SPEC, rng)
    lhs = d3_apply(hist, w, level).values
    rhs = hist.kernels.lead_weight(level) * w.values - lagged_rhs(hist, level).values
    if level == 1:
        # level 1 reads phi0/phi1 rather than u0; rebuild u0 from them
        hist = TimeHistory(tau, 0, [hist.phi0.with_values(hist.phi0.values + 0.5 * tau * hist.phi1.values)],
                           hist.phi0, hist.phi1)
        lhs = d3_apply(hist, w, 1).values
    scale = np.abs(lhs).max() + np.abs(rhs).max()
    assert np.abs(lhs - rhs).max() <= 1e-12 * scale
