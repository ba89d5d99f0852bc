"""Time loop: startup level, trapezoid step, BDF2 step, then BDF3 to the end."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

from .bdf import TimeHistory, initial_level
from .config import ConfigError, RunConfig, format_config
from .energy import EnergyRecord, discrete_energy, energy_record
from .fileio import (
    Checkpoint,
    CheckpointError,
    SnapshotHeader,
    read_checkpoint,
    read_snapshot,
    write_checkpoint,
    write_energy_csv,
    write_snapshot,
)
from .grid import GridField, GridSpec
from .solver import (
    Model,
    SolveConfig,
    StepGuards,
    StepReport,
    check_step_constraints,
    newton_step_solve,
)

log = logging.getLogger(__name__)

ForcingFn = Callable[[float], GridField]


def march(history: TimeHistory, steps: int, model: Model, cfg: SolveConfig,
          forcing: ForcingFn | None = None,
          guards: StepGuards | None = None) -> Iterator[tuple[TimeHistory, StepReport]]:
    """Advance ``history`` in place up to level ``steps``, yielding after each level."""
    while history.n < steps:
        level = history.n + 1
        f_n = forcing(level * history.tau) if forcing is not None else None
        u, report = newton_step_solve(history, level, cfg, model, f_n, guards)
        history.push(u)
        yield history, report


def start_history(phi0: GridField, tau: float, model: Model, sign_mode: str = "corrected",
                  forcing: ForcingFn | None = None) -> TimeHistory:
    f0 = forcing(0.0) if forcing is not None else None
    u0, phi1 = initial_level(phi0, tau, model.g, model.eps, sign_mode, f0)
    return TimeHistory.start(u0, tau, phi0, phi1)


# -- initial data ------------------------------------------------------------

def example1_initial(spec: GridSpec) -> GridField:
    return GridField.from_function(spec, lambda x, y: np.sin(2 * x) * np.sin(2 * y))


def example2_initial(spec: GridSpec) -> GridField:
    def u(x, y):
        return (0.1 + 0.02 * np.cos(np.pi * x / 100) * np.sin(np.pi * y / 100)
                + 0.05 * np.sin(np.pi * x / 20) * np.cos(np.pi * y / 20))
    return GridField.from_function(spec, u)


def random_initial(spec: GridSpec, amplitude: float, seed: int):
    """Uniform samples in [-amplitude, amplitude] from a seeded PCG64 stream."""
    rng = np.random.Generator(np.random.PCG64(seed))
    field = GridField(spec, rng.uniform(-amplitude, amplitude, size=spec.shape))
    return field, rng.bit_generator.state


def initial_field(config: RunConfig):
    """Returns (phi0, rng_state or None)."""
    spec = GridSpec(config.dim, config.L, config.M)
    kind = config.ic_kind
    if kind == "zero":
        return GridField.zeros(spec), None
    if kind == "example1":
        return example1_initial(spec), None
    if kind == "example2":
        return example2_initial(spec), None
    if kind == "random":
        return random_initial(spec, config.amplitude, config.seed)
    field_, _ = read_snapshot(config.ic_path)
    if field_.spec != spec:
        raise ConfigError(f"initial snapshot grid {field_.spec} does not match "
                          f"dim/L/M of the configuration")
    return field_, None


def config_forcing(config: RunConfig) -> ForcingFn | None:
    if not config.forcing:
        return None
    from .harness import ManufacturedSolution

    return ManufacturedSolution(GridSpec(2, config.L, config.M), config.g, config.eps).forcing


def solve_config(config) -> SolveConfig:
    return SolveConfig(config.abs_tol, config.max_newton_iters, config.max_inner_iters,
                       config.linear_mode)


# -- driver ------------------------------------------------------------------

@dataclass
class SimulationResult:
    config: RunConfig
    history: TimeHistory
    records: list[EnergyRecord]
    reports: list[StepReport]
    guards: StepGuards
    E0: float
    # levels at which the modified energy rose although the energy guard held
    dissipation_failures: list[int] = field(default_factory=list)
    # levels at which the L-infinity bound monitor fired
    bound_failures: list[int] = field(default_factory=list)

    @property
    def final(self) -> GridField:
        return self.history.newest


def _header(config: RunConfig, hist: TimeHistory) -> SnapshotHeader:
    return SnapshotHeader(config.dim, config.M, config.L, config.tau, hist.n,
                          hist.time, config.g, config.eps)


def run_simulation(config: RunConfig, resume_from=None, output_dir=None) -> SimulationResult:
    """Run ``config`` to ``config.steps`` levels, optionally from a checkpoint.

    ``resume_from`` is a checkpoint path or :class:`Checkpoint`; resuming refuses
    a checkpoint written under different trajectory-defining parameters.
    """
    model = Model(config.g, config.eps)
    cfg = solve_config(config)
    guards = check_step_constraints(config.tau, config.g, config.eps)
    forcing = config_forcing(config)
    out = Path(output_dir or config.output_dir) if (output_dir or config.output_dir) else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.txt").write_text(format_config(config))
    digest = config.digest()

    rng_state = None
    if resume_from is not None:
        ckpt = resume_from if isinstance(resume_from, Checkpoint) else read_checkpoint(resume_from)
        if ckpt.digest != digest:
            raise CheckpointError("checkpoint was written with different parameters; "
                                  "refusing to resume")
        hist = TimeHistory(ckpt.history.tau, ckpt.history.n,
                           [lv.copy() for lv in ckpt.history.levels],
                           ckpt.history.phi0, ckpt.history.phi1)
        E0 = ckpt.E0
        records = list(ckpt.records)
        rng_state = ckpt.rng_state
    else:
        phi0, rng_state = initial_field(config)
        hist = start_history(phi0, config.tau, model, config.sign_mode, forcing)
        E0 = discrete_energy(hist.newest, config.g, config.eps)
        records = [energy_record(hist, config.g, config.eps,
                                 E0 if config.monitor_bound else None)]

    result = SimulationResult(config, hist, records, [], guards, E0)

    def after_level(report: StepReport | None):
        n = hist.n
        if report is not None:
            rec = energy_record(hist, config.g, config.eps,
                                E0 if config.monitor_bound else None,
                                report.newton_iters, report.final_residual_l2)
            prev = records[-1]
            records.append(rec)
            result.reports.append(report)
            if rec.E_mod > prev.E_mod + 1e-10 * (1.0 + abs(rec.E_mod)):
                if guards.energy_stable:
                    result.dissipation_failures.append(n)
                    log.warning("modified energy increased at level %d: %.17g -> %.17g",
                                n, prev.E_mod, rec.E_mod)
                else:
                    log.info("modified energy increased at level %d (energy guard "
                             "not satisfied)", n)
            if config.monitor_bound and not math.isnan(rec.bound_lhs) \
                    and rec.bound_lhs > rec.bound_rhs + 1e-9 * (1.0 + abs(rec.bound_rhs)):
                result.bound_failures.append(n)
                log.warning("L-infinity bound monitor fired at level %d", n)
        if out is None:
            return
        if config.snapshot_every and n % config.snapshot_every == 0:
            write_snapshot(out / f"snap_{n:06d}.bin", hist.newest, _header(config, hist))
        if config.checkpoint_every and n > 0 and n % config.checkpoint_every == 0:
            write_checkpoint(out / f"checkpoint_{n:06d}.npz",
                             Checkpoint(hist, digest, E0, records, rng_state))

    if resume_from is None:
        after_level(None)
    for _, report in march(hist, config.steps, model, cfg, forcing, guards):
        after_level(report)
    if out is not None:
        write_energy_csv(out / "energy.csv", records)
    return result
