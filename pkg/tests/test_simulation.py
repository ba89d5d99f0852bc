import math

import numpy as np
import pytest

from shbdf3.config import ConfigError, RunConfig
from shbdf3.fileio import (
    CheckpointError,
    SnapshotHeader,
    read_checkpoint,
    read_energy_csv,
    read_snapshot,
    write_snapshot,
)
from shbdf3.grid import GridField, GridSpec
from shbdf3.simulation import example2_initial, initial_field, random_initial, run_simulation
from shbdf3.solver import NewtonConvergenceError


def small(**kw):
    base = dict(L=20.0, M=16, tau=0.1, steps=6, g=0.5, eps=0.25, ic="random", amplitude=0.3, seed=5)
    base.update(kw)
    return RunConfig(**base)


class TestInitialData:
    def test_random_is_seeded_pcg64(self):
        spec = GridSpec(2, 1.0, 8)
        a, state = random_initial(spec, 0.01, 42)
        b, _ = random_initial(spec, 0.01, 42)
        assert a.values.tobytes() == b.values.tobytes()
        ref = np.random.Generator(np.random.PCG64(42)).uniform(-0.01, 0.01, size=(8, 8))
        assert np.array_equal(a.values, ref)
        assert np.abs(a.values).max() <= 0.01
        assert state["bit_generator"] == "PCG64"

    def test_example2_formula(self):
        spec = GridSpec(2, 100.0, 8)
        u = example2_initial(spec)
        x, y = 12.5 * 3, 12.5 * 5
        expected = (0.1 + 0.02 * math.cos(math.pi * x / 100) * math.sin(math.pi * y / 100)
                    + 0.05 * math.sin(math.pi * x / 20) * math.cos(math.pi * y / 20))
        assert u.values[3, 5] == pytest.approx(expected, rel=1e-15)

    def test_file_grid_must_match(self, tmp_path):
        spec = GridSpec(2, 20.0, 8)
        path = tmp_path / "u.bin"
        write_snapshot(path, GridField.zeros(spec), SnapshotHeader(2, 8, 20.0, 0.1, 0, 0.0, 0.5, 0.25))
        field, _ = initial_field(small(M=8, ic=f"file:{path}"))
        assert field.spec == spec
        with pytest.raises(ConfigError):
            initial_field(small(M=16, ic=f"file:{path}"))


class TestRuns:
    def test_zero_field(self, tmp_path):
        cfg = small(ic="zero", steps=3, output_dir=str(tmp_path))
        res = run_simulation(cfg)
        assert not res.final.values.any()
        recs = read_energy_csv(tmp_path / "energy.csv")
        assert [r.level for r in recs] == [0, 1, 2, 3]
        assert all(r.E == 0.0 and r.E_mod == 0.0 for r in recs)

    def test_row_count_and_byte_identical_rerun(self, tmp_path):
        run_simulation(small(output_dir=str(tmp_path / "a")))
        run_simulation(small(output_dir=str(tmp_path / "b")))
        a = (tmp_path / "a" / "energy.csv").read_bytes()
        assert a == (tmp_path / "b" / "energy.csv").read_bytes()
        assert len(a.decode().strip().splitlines()) == 1 + 6 + 1

    def test_dissipation_and_residuals(self):
        res = run_simulation(small(steps=20))
        assert not res.guards.flags
        assert not res.dissipation_failures and not res.bound_failures
        assert all(r.final_residual_l2 <= 1e-10 for r in res.reports)
        em = [r.E_mod for r in res.records]
        assert all(b <= a + 1e-10 * (1 + abs(b)) for a, b in zip(em, em[1:]))

    def test_snapshot_and_checkpoint_cadence(self, tmp_path):
        run_simulation(small(snapshot_every=2, checkpoint_every=3, output_dir=str(tmp_path)))
        names = sorted(p.name for p in tmp_path.iterdir())
        assert [n for n in names if n.startswith("snap")] == [f"snap_{k:06d}.bin" for k in (0, 2, 4, 6)]
        assert [n for n in names if n.startswith("checkpoint")] == ["checkpoint_000003.npz", "checkpoint_000006.npz"]
        field, head = read_snapshot(tmp_path / "snap_000004.bin")
        assert head.level == 4 and head.time == pytest.approx(0.4) and head.g == 0.5
        assert (tmp_path / "config.txt").read_text().startswith("L = 20.0")

    @pytest.mark.parametrize("stop", [1, 2, 4])
    def test_resume_bitwise(self, tmp_path, stop):
        full = run_simulation(small(steps=8))
        run_simulation(small(steps=stop, checkpoint_every=stop, output_dir=str(tmp_path)))
        ckpt = tmp_path / f"checkpoint_{stop:06d}.npz"
        assert len(read_checkpoint(ckpt).history.levels) == min(stop + 1, 3)
        resumed = run_simulation(small(steps=8), resume_from=ckpt)
        assert resumed.final.values.tobytes() == full.final.values.tobytes()
        assert resumed.records == full.records

    def test_resume_refuses_changed_parameters(self, tmp_path):
        run_simulation(small(steps=2, checkpoint_every=2, output_dir=str(tmp_path)))
        with pytest.raises(CheckpointError, match="different parameters"):
            run_simulation(small(steps=4, tau=0.05), resume_from=tmp_path / "checkpoint_000002.npz")

    def test_resume_allows_longer_run_and_new_output(self, tmp_path):
        run_simulation(small(steps=2, checkpoint_every=2, output_dir=str(tmp_path / "a")))
        res = run_simulation(small(steps=5), resume_from=tmp_path / "a" / "checkpoint_000002.npz",
                             output_dir=tmp_path / "b")
        assert res.history.n == 5
        assert len(read_energy_csv(tmp_path / "b" / "energy.csv")) == 6

    def test_checkpoint_keeps_rng_state(self, tmp_path):
        run_simulation(small(steps=1, checkpoint_every=1, output_dir=str(tmp_path)))
        assert read_checkpoint(tmp_path / "checkpoint_000001.npz").rng_state["bit_generator"] == "PCG64"

    def test_solver_failure_reports_level(self):
        with pytest.raises(NewtonConvergenceError) as info:
            run_simulation(small(steps=3, max_newton_iters=1, abs_tol=1e-14, amplitude=2.0))
        assert info.value.level == 1

    def test_guard_violation_only_warns(self):
        with pytest.warns(UserWarning):
            res = run_simulation(small(steps=3, tau=1.0, g=1.0))
        assert "energy_violated" in res.guards.flags
        assert all("energy_violated" in r.guard_flags for r in res.reports)

    def test_three_dimensional(self):
        res = run_simulation(small(dim=3, M=8, L=8.0, steps=3))
        assert res.final.values.shape == (8, 8, 8)

    def test_forced_example1(self):
        cfg = RunConfig(L=2 * math.pi, M=32, tau=0.1, steps=10, g=1.0, eps=0.25, ic="example1", forcing=True)
        res = run_simulation(cfg)
        x, y = res.final.spec.coordinates()
        exact = math.cos(1.0) * np.sin(2 * x) * np.sin(2 * y)
        assert np.abs(res.final.values - exact).max() < 0.05
