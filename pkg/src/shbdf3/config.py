"""``key = value`` run and study configuration files.

Lines are ``key = value``; ``#`` starts a comment; blank lines are ignored.
Unknown keys, duplicates, malformed values and violated constraints raise
:class:`ConfigError` carrying the offending line number.

Run configuration keys (``*`` required)::

    dim              2 | 3                                   (default 2)
    L*               box length
    M*               nodes per axis (>= 4)
    tau*             time step
    steps*           number of time steps N
    g*, eps*         nonlinearity parameters (g >= 0, eps > 0)
    ic*              zero | example1 | example2 | random | file:<snapshot path>
    amplitude        random initial data range [-a, a]       (default 0.01)
    seed             random generator seed                   (default 0)
    forcing          on | off  (manufactured forcing, example 1 setup)  (off)
    sign_mode        corrected | paper_literal               (corrected)
    abs_tol          Newton residual tolerance (L2)          (1e-10)
    max_newton_iters                                         (25)
    max_inner_iters                                          (500)
    linear_mode      iterative | fourier_direct              (iterative)
    monitor_bound    on | off  (L-infinity bound monitor)    (on)
    snapshot_every   write a snapshot every k levels, 0 = never   (0)
    checkpoint_every write a checkpoint every k levels, 0 = never (0)
    output_dir       directory for CSV/snapshots/checkpoints (none)

Study configuration keys (``converge`` subcommand)::

    study*           temporal | spatial
    T*               final time
    g*, eps*
    Ns               temporal: step counts, comma separated  (10,20,40,80)
    M                temporal: nodes per axis                (1024)
    Ms               spatial: nodes per axis list            (16,32,64)
    steps            spatial: number of steps                (1000)
    sign_mode, abs_tol, max_newton_iters, max_inner_iters, linear_mode, output_dir
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass

IC_KINDS = ("zero", "example1", "example2", "random", "file")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


def _real(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError
    return value


def _integer(text: str) -> int:
    return int(text)


def _switch(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("on", "true", "yes", "1"):
        return True
    if lowered in ("off", "false", "no", "0"):
        return False
    raise ValueError


def _int_list(text: str) -> tuple[int, ...]:
    items = tuple(int(p) for p in text.replace(" ", "").split(",") if p)
    if not items:
        raise ValueError
    return items


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "on" if value else "off"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    return str(value)


_KIND_NAMES = {_real: "a real number", _integer: "an integer", _switch: "on/off",
               _int_list: "a comma-separated integer list", str: "text"}


def _parse_lines(text: str) -> list[tuple[int, str, str]]:
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", lineno)
        entries.append((lineno, key, value))
    return entries


def _build(cls, text: str):
    schema = cls._schema()
    seen: dict[str, int] = {}
    values = {}
    lines = {}
    for lineno, key, raw in _parse_lines(text):
        if key not in schema:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in seen:
            if key == "ic":
                raise ConfigError("initial condition given more than once "
                                  f"(first on line {seen[key]})", lineno)
            raise ConfigError(f"duplicate key {key!r} (first on line {seen[key]})", lineno)
        seen[key] = lineno
        conv = schema[key]
        try:
            values[key] = conv(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected {_KIND_NAMES[conv]}, got {raw!r}",
                              lineno) from None
        lines[key] = lineno
    required = [f.name for f in dataclasses.fields(cls)
                if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING]
    for name in required:
        if name not in values:
            raise ConfigError(f"missing required key {name!r}")
    try:
        return cls(**values)
    except ConfigError as exc:
        if exc.line is None and getattr(exc, "key", None) in lines:
            raise ConfigError(str(exc), lines[exc.key]) from None
        raise


def _invalid(key: str, message: str) -> ConfigError:
    exc = ConfigError(message)
    exc.key = key
    return exc


_SOLVER_SCHEMA = {
    "sign_mode": str, "abs_tol": _real, "max_newton_iters": _integer,
    "max_inner_iters": _integer, "linear_mode": str, "output_dir": str,
}


def _check_solver_fields(cfg):
    if cfg.sign_mode not in ("corrected", "paper_literal"):
        raise _invalid("sign_mode", "sign_mode must be corrected or paper_literal")
    if not cfg.abs_tol > 0:
        raise _invalid("abs_tol", "abs_tol must be positive")
    if cfg.max_newton_iters < 1:
        raise _invalid("max_newton_iters", "max_newton_iters must be >= 1")
    if cfg.max_inner_iters < 1:
        raise _invalid("max_inner_iters", "max_inner_iters must be >= 1")
    if cfg.linear_mode not in ("iterative", "fourier_direct"):
        raise _invalid("linear_mode", "linear_mode must be iterative or fourier_direct")


@dataclass(frozen=True)
class RunConfig:
    L: float
    M: int
    tau: float
    steps: int
    g: float
    eps: float
    ic: str
    dim: int = 2
    amplitude: float = 0.01
    seed: int = 0
    forcing: bool = False
    sign_mode: str = "corrected"
    abs_tol: float = 1e-10
    max_newton_iters: int = 25
    max_inner_iters: int = 500
    linear_mode: str = "iterative"
    monitor_bound: bool = True
    snapshot_every: int = 0
    checkpoint_every: int = 0
    output_dir: str | None = None

    @staticmethod
    def _schema():
        return {
            "dim": _integer, "L": _real, "M": _integer, "tau": _real, "steps": _integer,
            "g": _real, "eps": _real, "ic": str, "amplitude": _real, "seed": _integer,
            "forcing": _switch, "monitor_bound": _switch, "snapshot_every": _integer,
            "checkpoint_every": _integer, **_SOLVER_SCHEMA,
        }

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise _invalid("dim", "dim must be 2 or 3")
        for key in ("L", "tau", "eps"):
            if not getattr(self, key) > 0:
                raise _invalid(key, f"{key} must be positive")
        if self.M < 4:
            raise _invalid("M", "M must be at least 4")
        if self.steps < 0:
            raise _invalid("steps", "steps must be non-negative")
        if self.g < 0:
            raise _invalid("g", "g must be non-negative")
        if self.amplitude < 0:
            raise _invalid("amplitude", "amplitude must be non-negative")
        for key in ("snapshot_every", "checkpoint_every"):
            if getattr(self, key) < 0:
                raise _invalid(key, f"{key} must be non-negative")
        if self.ic_kind not in IC_KINDS:
            raise _invalid("ic", f"ic must be one of {', '.join(IC_KINDS)} "
                                 f"(file as file:<path>), got {self.ic!r}")
        if self.ic_kind == "file" and not self.ic_path:
            raise _invalid("ic", "ic = file:<path> needs a path")
        if self.ic_kind in ("example1", "example2") and self.dim != 2:
            raise _invalid("ic", f"{self.ic} initial data is two-dimensional")
        if self.forcing and (self.dim != 2 or abs(self.L - 2 * math.pi) > 1e-12):
            raise _invalid("forcing", "manufactured forcing needs dim = 2 and L = 2*pi")
        _check_solver_fields(self)

    @property
    def ic_kind(self) -> str:
        return self.ic.split(":", 1)[0].strip()

    @property
    def ic_path(self) -> str:
        return self.ic.split(":", 1)[1].strip() if ":" in self.ic else ""

    def replace(self, **changes) -> RunConfig:
        return dataclasses.replace(self, **changes)

    def digest(self) -> str:
        """Hash of everything that determines the trajectory.

        Output settings and the step count are excluded, so a checkpoint can be
        resumed with a longer run or a different output directory.
        """
        skip = {"steps", "snapshot_every", "checkpoint_every", "output_dir", "monitor_bound"}
        text = format_config(self, skip=skip)
        return hashlib.sha256(text.encode()).hexdigest()


@dataclass(frozen=True)
class StudyConfig:
    study: str
    T: float
    g: float
    eps: float
    Ns: tuple[int, ...] = (10, 20, 40, 80)
    M: int = 1024
    Ms: tuple[int, ...] = (16, 32, 64)
    steps: int = 1000
    sign_mode: str = "corrected"
    abs_tol: float = 1e-10
    max_newton_iters: int = 25
    max_inner_iters: int = 500
    linear_mode: str = "iterative"
    output_dir: str | None = None

    @staticmethod
    def _schema():
        return {
            "study": str, "T": _real, "g": _real, "eps": _real, "Ns": _int_list,
            "M": _integer, "Ms": _int_list, "steps": _integer, **_SOLVER_SCHEMA,
        }

    def __post_init__(self):
        if self.study not in ("temporal", "spatial"):
            raise _invalid("study", "study must be temporal or spatial")
        for key in ("T", "eps"):
            if not getattr(self, key) > 0:
                raise _invalid(key, f"{key} must be positive")
        if self.g < 0:
            raise _invalid("g", "g must be non-negative")
        for key in ("Ns", "Ms"):
            seq = getattr(self, key)
            if any(b <= a for a, b in zip(seq, seq[1:])) or min(seq) < 1:
                raise _invalid(key, f"{key} must be strictly increasing positive integers")
        if min(self.Ms) < 4 or self.M < 4:
            raise _invalid("M", "grids need at least 4 nodes per axis")
        if self.steps < 1:
            raise _invalid("steps", "steps must be positive")
        _check_solver_fields(self)


def parse_config(text: str) -> RunConfig:
    return _build(RunConfig, text)


def parse_study_config(text: str) -> StudyConfig:
    return _build(StudyConfig, text)


def format_config(cfg, skip=frozenset()) -> str:
    """Render a config so that parsing it back yields an equal object."""
    lines = []
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if f.name in skip or value is None:
            continue
        lines.append(f"{f.name} = {_fmt(value)}")
    return "\n".join(lines) + "\n"


def load_config(path) -> RunConfig | StudyConfig:
    """Parse a file as a study config if it names a study, else as a run config."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if any(key == "study" for _, key, _ in _parse_lines(text)):
        return parse_study_config(text)
    return parse_config(text)
