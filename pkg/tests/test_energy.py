import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shbdf3.bdf import InsufficientHistory, TimeHistory
from shbdf3.energy import discrete_energy, energy_record, linf_bound_check, modified_energy
from shbdf3.grid import GridField, GridSpec

from conftest import random_field


def brute_force_energy(values, h, g, eps):
    """Nodewise loops with explicit periodic indexing; independent of the grid module."""
    M = values.shape[0]
    total_shift = total_quartic = total_cubic = total_sq = 0.0
    for i in range(M):
        for j in range(M):
            u = values[i, j]
            lap = (values[(i + 1) % M, j] + values[(i - 1) % M, j] + values[i, (j + 1) % M]
                   + values[i, (j - 1) % M] - 4.0 * u) / (h * h)
            total_shift += (u + lap) ** 2
            total_quartic += u**4
            total_cubic += u**3
            total_sq += u * u
    w = h * h
    return w * (0.5 * total_shift + 0.25 * total_quartic - g / 3 * total_cubic - eps / 2 * total_sq)


class TestDiscreteEnergy:
    def test_zero(self):
        assert discrete_energy(GridField.zeros(GridSpec(3, 2.0, 8)), 1.0, 0.25) == 0.0

    def test_unit_constant_unit_square(self):
        E = discrete_energy(GridField.constant(GridSpec(2, 1.0, 8), 1.0), 1.0, 0.25)
        assert E == pytest.approx(7 / 24, rel=1e-14)

    @pytest.mark.parametrize("dim", [2, 3])
    def test_constant_general(self, dim):
        c, L, g, eps = -0.7, 3.0, 0.4, 0.9
        E = discrete_energy(GridField.constant(GridSpec(dim, L, 8), c), g, eps)
        expected = L**dim * (0.5 * c * c + 0.25 * c**4 - g / 3 * c**3 - eps / 2 * c * c)
        assert E == pytest.approx(expected, rel=1e-13)

    def test_matches_brute_force(self, rng):
        spec = GridSpec(2, 2.5, 8)
        for _ in range(5):
            v = random_field(spec, rng)
            E = discrete_energy(v, 0.7, 0.3)
            assert E == pytest.approx(brute_force_energy(v.values, spec.h, 0.7, 0.3), rel=1e-13)

    def test_shift_invariance(self, rng):
        spec = GridSpec(3, 2.0, 8)
        v = random_field(spec, rng)
        moved = GridField(spec, np.roll(v.values, (1, 3, 2), axis=(0, 1, 2)))
        assert discrete_energy(moved, 1.0, 0.25) == pytest.approx(discrete_energy(v, 1.0, 0.25), rel=1e-13)


class TestModifiedEnergy:
    SPEC = GridSpec(2, 2.0, 8)

    def test_level_zero_is_energy(self, rng):
        u = random_field(self.SPEC, rng)
        hist = TimeHistory.start(u, 0.1)
        assert modified_energy(hist, 0, 1.0, 0.25) == discrete_energy(u, 1.0, 0.25)

    def test_equal_levels(self, rng):
        u = random_field(self.SPEC, rng)
        hist = TimeHistory(0.1, 4, [u, u, u])
        assert modified_energy(hist, 4, 1.0, 0.25) == discrete_energy(u, 1.0, 0.25)

    def test_level_one_constant_increment(self):
        tau, delta = 0.2, 0.3
        a = GridField.constant(self.SPEC, 0.5)
        b = GridField.constant(self.SPEC, 0.5 + delta)
        hist = TimeHistory(tau, 1, [b, a])
        expected = discrete_energy(b, 1.0, 0.25) + 3 / (4 * tau) * delta**2 * self.SPEC.volume
        assert modified_energy(hist, 1, 1.0, 0.25) == pytest.approx(expected, rel=1e-14)

    def test_two_differences(self):
        tau = 0.5
        fields = [GridField.constant(self.SPEC, c) for c in (3.0, 1.0, 0.0)]
        hist = TimeHistory(tau, 2, fields)
        expected = (discrete_energy(fields[0], 0.0, 1.0)
                    + 3 / (4 * tau) * 4.0 * self.SPEC.volume + 1 / (6 * tau) * 1.0 * self.SPEC.volume)
        assert modified_energy(hist, 2, 0.0, 1.0) == pytest.approx(expected, rel=1e-14)

    def test_level_must_be_current(self, rng):
        hist = TimeHistory.start(random_field(self.SPEC, rng), 0.1)
        with pytest.raises(ValueError):
            modified_energy(hist, 1, 1.0, 0.25)

    def test_insufficient_history(self):
        u = GridField.zeros(self.SPEC)
        hist = TimeHistory(0.1, 0, [u])
        hist.n = 2  # corrupted bookkeeping
        with pytest.raises(InsufficientHistory):
            modified_energy(hist, 2, 1.0, 0.25)


class TestBoundMonitor:
    def test_zero_field(self):
        spec = GridSpec(2, 3.0, 8)
        chk = linf_bound_check(GridField.zeros(spec), 0.0, 1.0, 0.25)
        assert chk.lhs == 0.0 and chk.holds
        assert chk.rhs == pytest.approx(9 / 7 * (1 + 0.25 + 1) ** 2 * 9.0, rel=1e-15)

    def test_adversarial_fires(self):
        spec = GridSpec(2, 1.0, 8)
        chk = linf_bound_check(GridField.constant(spec, 10.0), 0.0, 0.0, 0.25)
        assert chk.lhs == pytest.approx(400.0, rel=1e-14)
        assert chk.rhs == pytest.approx(9 / 7 * 1.25**2, rel=1e-15)
        assert not chk.holds


class TestRecord:
    def test_fields(self, rng):
        spec = GridSpec(2, 2.0, 8)
        u = random_field(spec, rng)
        hist = TimeHistory.start(u, 0.1)
        rec = energy_record(hist, 1.0, 0.25, E0=discrete_energy(u, 1.0, 0.25), newton_iters=3, residual=1e-12)
        assert rec.level == 0 and rec.time == 0.0
        assert rec.E == rec.E_mod
        assert rec.linf == np.abs(u.values).max()
        assert rec.bound_lhs <= rec.bound_rhs
        assert rec.newton_iters == 3

    def test_unmonitored_bound_is_nan(self, rng):
        hist = TimeHistory.start(random_field(GridSpec(2, 2.0, 8), rng), 0.1)
        rec = energy_record(hist, 1.0, 0.25)
        assert math.isnan(rec.bound_lhs) and math.isnan(rec.bound_rhs)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(0, 5), tau=st.floats(1e-3, 5.0))
def test_energy_below_modified(seed, n, tau):
    rng = np.random.default_rng(seed)
    spec = GridSpec(2, 2.0, 8)
    hist = TimeHistory(tau, n, [random_field(spec, rng) for _ in range(min(n + 1, 3))])
    E = discrete_energy(hist.newest, 0.5, 0.3)
    assert E <= modified_energy(hist, n, 0.5, 0.3)
