"""Discrete and modified energies, and the computable L-infinity bound monitor."""

from __future__ import annotations

from dataclasses import dataclass

from .bdf import InsufficientHistory, TimeHistory
from .grid import GridField, inner, norm, shifted


@dataclass(frozen=True)
class EnergyRecord:
    level: int
    time: float
    E: float
    E_mod: float
    l2: float
    l4: float
    linf: float
    bound_lhs: float = float("nan")
    bound_rhs: float = float("nan")
    newton_iters: int = 0
    residual: float = 0.0


def discrete_energy(u: GridField, g: float, eps: float) -> float:
    """1/2 |(1+Delta_h)u|^2 + 1/4 |u|_4^4 - g/3 <u^2, u> - eps/2 |u|^2."""
    su = shifted(u)
    cube = u.with_values(u.values * u.values)
    return (
        0.5 * inner(su, su)
        + 0.25 * norm(u, 4) ** 4
        - (g / 3.0) * inner(cube, u)
        - 0.5 * eps * inner(u, u)
    )


def _diff_sq(a: GridField, b: GridField) -> float:
    d = a.with_values(a.values - b.values)
    return inner(d, d)


def modified_energy(hist: TimeHistory, level: int, g: float, eps: float,
                    E: float | None = None) -> float:
    """Energy plus the nonnegative backward-difference terms at ``level``.

    ``level`` must be the history's current level; ``E`` may be passed when the
    plain energy of the newest level is already known.
    """
    if level != hist.n:
        raise ValueError(f"history is at level {hist.n}, not {level}")
    if len(hist.levels) < min(level + 1, 3):
        raise InsufficientHistory(f"modified energy at level {level} needs more history")
    lv = hist.levels
    if E is None:
        E = discrete_energy(lv[0], g, eps)
    tau = hist.tau
    if level == 0:
        return E
    out = E + 3.0 / (4.0 * tau) * _diff_sq(lv[0], lv[1])
    if level >= 2:
        out += 1.0 / (6.0 * tau) * _diff_sq(lv[1], lv[2])
    return out


@dataclass(frozen=True)
class BoundCheck:
    lhs: float
    rhs: float
    holds: bool


def linf_bound_check(u: GridField, E0: float, g: float, eps: float) -> BoundCheck:
    """(|(1+Delta_h)u| + |u|)^2 <= 4 E[u0] + 9/7 (1+eps+g^2)^2 |Omega_h|."""
    lhs = (norm(shifted(u), 2) + norm(u, 2)) ** 2
    rhs = 4.0 * E0 + (9.0 / 7.0) * (1.0 + eps + g * g) ** 2 * u.spec.volume
    return BoundCheck(lhs, rhs, lhs <= rhs + 1e-9 * (1.0 + abs(rhs)))


def energy_record(hist: TimeHistory, g: float, eps: float, E0: float | None = None,
                  newton_iters: int = 0, residual: float = 0.0) -> EnergyRecord:
    u = hist.newest
    E = discrete_energy(u, g, eps)
    bound = linf_bound_check(u, E0, g, eps) if E0 is not None else None
    return EnergyRecord(
        level=hist.n,
        time=hist.time,
        E=E,
        E_mod=modified_energy(hist, hist.n, g, eps, E=E),
        l2=norm(u, 2),
        l4=norm(u, 4),
        linf=norm(u, "inf"),
        bound_lhs=bound.lhs if bound else float("nan"),
        bound_rhs=bound.rhs if bound else float("nan"),
        newton_iters=newton_iters,
        residual=residual,
    )
