"""BDF3 convolution kernels, startup formulas and the rolling solution history.

Levels 1 and 2 use the trapezoid-type start and BDF2 respectively; from level
3 on the three-weight BDF3 kernel applies.  For every level the discrete time
derivative splits as ``D3(w) = lead_weight(level) * w - lagged_rhs(...)``,
which is the form the implicit solver works with.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import GridField, GridSpec, f_values, shifted_squared_values

SIGN_MODES = ("corrected", "paper_literal")


@dataclass(frozen=True)
class BdfKernels:
    tau: float
    b0: float
    b1: float
    b2: float
    b0_n1: float
    b0_n2: float

    def lead_weight(self, level: int) -> float:
        if level < 1:
            raise ValueError(f"level must be >= 1, got {level}")
        return {1: self.b0_n1, 2: self.b0_n2}.get(level, self.b0)

    @property
    def weights(self) -> np.ndarray:
        return np.array([self.b0, self.b1, self.b2])


def make_kernels(tau: float) -> BdfKernels:
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    return BdfKernels(
        tau=tau,
        b0=11.0 / (6.0 * tau),
        b1=-7.0 / (6.0 * tau),
        b2=1.0 / (3.0 * tau),
        b0_n1=2.0 / tau,
        b0_n2=3.0 / (2.0 * tau),
    )


class InsufficientHistory(ValueError):
    pass


@dataclass
class TimeHistory:
    """The newest (up to three) accepted levels, newest first.

    ``phi0`` and ``phi1`` hold the startup data; they are only consulted when
    solving for level 1.
    """

    tau: float
    n: int
    levels: list[GridField]
    phi0: GridField | None = None
    phi1: GridField | None = None
    kernels: BdfKernels = field(init=False, repr=False)

    def __post_init__(self):
        self.kernels = make_kernels(self.tau)
        if self.n < 0:
            raise ValueError("level index must be non-negative")
        if len(self.levels) != min(self.n + 1, 3):
            raise ValueError(
                f"level {self.n} requires {min(self.n + 1, 3)} stored levels, "
                f"got {len(self.levels)}"
            )
        specs = {lv.spec for lv in self.levels}
        if len(specs) != 1:
            raise ValueError("all history levels must share one grid")

    @classmethod
    def start(cls, u0: GridField, tau: float, phi0=None, phi1=None) -> TimeHistory:
        return cls(tau=tau, n=0, levels=[u0], phi0=phi0, phi1=phi1)

    @property
    def spec(self) -> GridSpec:
        return self.levels[0].spec

    @property
    def newest(self) -> GridField:
        return self.levels[0]

    @property
    def time(self) -> float:
        return self.n * self.tau

    def push(self, u: GridField) -> None:
        """Accept ``u`` as level n + 1; levels older than three are dropped."""
        if u.spec != self.spec:
            raise ValueError("new level does not match the history grid")
        self.levels = [u] + self.levels[:2]
        self.n += 1

    def extrapolate(self) -> GridField:
        """Initial Newton iterate for the next level."""
        if len(self.levels) == 3:
            a, b, c = (lv.values for lv in self.levels)
            return self.newest.with_values(3.0 * a - 3.0 * b + c)
        return self.newest.copy()


def initial_level(phi0: GridField, tau: float, g: float, eps: float,
                  sign_mode: str = "corrected",
                  forcing: GridField | None = None) -> tuple[GridField, GridField]:
    """Startup data ``(u0, phi1)`` with ``u0 = phi0 + tau/2 * phi1``.

    ``corrected`` takes ``phi1`` as the discrete time derivative at t = 0
    (including the forcing when one is supplied); ``paper_literal`` flips its
    sign.
    """
    if sign_mode not in SIGN_MODES:
        raise ValueError(f"sign_mode must be one of {SIGN_MODES}, got {sign_mode!r}")
    v = phi0.values
    ut = -(f_values(v, g, eps) + shifted_squared_values(v, phi0.spec.h))
    if forcing is not None:
        ut = ut + forcing.values
    phi1 = ut if sign_mode == "corrected" else -ut
    return phi0.with_values(v + 0.5 * tau * phi1), phi0.with_values(phi1)


def _require(hist: TimeHistory, level: int):
    if level != hist.n + 1:
        raise ValueError(f"history is at level {hist.n}; cannot assemble level {level}")
    if len(hist.levels) < min(level, 3):
        raise InsufficientHistory(
            f"level {level} needs {min(level, 3)} stored levels, have {len(hist.levels)}"
        )


def lagged_rhs_values(hist: TimeHistory, level: int) -> np.ndarray:
    _require(hist, level)
    tau = hist.tau
    vals = [lv.values for lv in hist.levels]
    if level == 1:
        if hist.phi0 is None or hist.phi1 is None:
            raise InsufficientHistory("level 1 needs the startup data phi0, phi1")
        return (2.0 / tau) * hist.phi0.values + hist.phi1.values
    if level == 2:
        u1, u0 = vals
        return (3.0 / (2.0 * tau)) * u1 + (1.0 / (2.0 * tau)) * (u1 - u0)
    k = hist.kernels
    a, b, c = vals
    return k.b0 * a - k.b1 * (a - b) - k.b2 * (b - c)


def lagged_rhs(hist: TimeHistory, level: int) -> GridField:
    """The history part ``g`` of ``D3(w) = b0^(level) w - g``."""
    return hist.newest.with_values(lagged_rhs_values(hist, level))


def d3_apply(hist: TimeHistory, candidate: GridField, level: int) -> GridField:
    """Discrete time derivative at ``level`` with ``candidate`` as the new value."""
    _require(hist, level)
    if candidate.spec != hist.spec:
        raise ValueError("candidate does not match the history grid")
    tau = hist.tau
    w = candidate.values
    vals = [lv.values for lv in hist.levels]
    if level == 1:
        out = 2.0 * (w - vals[0]) / tau
    elif level == 2:
        out = (3.0 * (w - vals[0]) - (vals[0] - vals[1])) / (2.0 * tau)
    else:
        a, b, c = vals
        out = (11.0 * (w - a) - 7.0 * (a - b) + 2.0 * (b - c)) / (6.0 * tau)
    return candidate.with_values(out)
