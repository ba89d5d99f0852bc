"""Manufactured-solution convergence studies.

The exact solution is u = cos(t) sin(2x) sin(2y) on (0, 2 pi)^2.  Since
Delta u = -8u for the continuous Laplacian, (1 + Delta)^2 u = 49 u, and the
forcing that makes it exact is

    F = (-sin t + 49 cos t) sin(2x) sin(2y) + f(u).

The forcing deliberately uses the continuous operator, so the discrete
solution carries the O(h^2) spatial error of the stencil.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import GridField, GridSpec, f_values, norm
from .simulation import march, start_history
from .solver import Model, SolveConfig

TWO_PI = 2.0 * math.pi


def exact_solution(x, y, t: float):
    return math.cos(t) * np.sin(2 * x) * np.sin(2 * y)


def manufactured_forcing(x, y, t: float, g: float, eps: float):
    s = np.sin(2 * x) * np.sin(2 * y)
    u = math.cos(t) * s
    return (-math.sin(t) + 49.0 * math.cos(t)) * s + f_values(u, g, eps)


class ManufacturedSolution:
    """Exact solution and forcing sampled on the nodes of one grid."""

    def __init__(self, spec: GridSpec, g: float, eps: float):
        if spec.dim != 2 or abs(spec.L - TWO_PI) > 1e-12:
            raise ValueError("the manufactured solution lives on (0, 2 pi)^2")
        self.spec = spec
        self.g = g
        self.eps = eps
        x, y = spec.coordinates()
        self._mode = np.sin(2 * x) * np.sin(2 * y)

    def exact(self, t: float) -> GridField:
        return GridField(self.spec, math.cos(t) * self._mode)

    def forcing(self, t: float) -> GridField:
        u = math.cos(t) * self._mode
        values = (-math.sin(t) + 49.0 * math.cos(t)) * self._mode + f_values(u, self.g, self.eps)
        return GridField(self.spec, values)


@dataclass(frozen=True)
class ConvergenceRow:
    N: int
    tau: float
    M: int
    error_l2: float
    order: float | None = None


def estimate_order(e_coarse: float, e_fine: float, refinement: float = 2.0) -> float:
    """log(e_coarse / e_fine) / log(refinement); base 2 for doubling."""
    if not (e_coarse > 0 and e_fine > 0):
        raise ValueError("errors must be positive to estimate an order")
    if refinement == 2.0:
        return math.log2(e_coarse / e_fine)
    return math.log(e_coarse / e_fine) / math.log(refinement)


def with_orders(rows: list[ConvergenceRow], key: str) -> list[ConvergenceRow]:
    """Fill ``order`` from consecutive rows refined in ``key`` ('N' or 'M')."""
    out = []
    for i, row in enumerate(rows):
        order = None
        if i > 0:
            prev = rows[i - 1]
            order = estimate_order(prev.error_l2, row.error_l2,
                                   getattr(row, key) / getattr(prev, key))
        out.append(ConvergenceRow(row.N, row.tau, row.M, row.error_l2, order))
    return out


def manufactured_error(M: int, N: int, T: float, g: float, eps: float,
                       cfg: SolveConfig = SolveConfig(),
                       sign_mode: str = "corrected") -> tuple[float, list]:
    """Final-time L2 error of the forced production solver; also the step reports."""
    spec = GridSpec(2, TWO_PI, M)
    ms = ManufacturedSolution(spec, g, eps)
    model = Model(g, eps)
    tau = T / N
    hist = start_history(ms.exact(0.0), tau, model, sign_mode, ms.forcing)
    reports = []
    try:
        for _, report in march(hist, N, model, cfg, ms.forcing):
            reports.append(report)
    except RuntimeError as exc:
        raise RuntimeError(f"manufactured run failed at N={N}, M={M}: {exc}") from exc
    err = hist.newest.with_values(hist.newest.values - ms.exact(T).values)
    return norm(err, 2), reports


def run_temporal_study(Ns, M: int, T: float, g: float, eps: float,
                       cfg: SolveConfig = SolveConfig(), sign_mode: str = "corrected",
                       error_fn=None) -> list[ConvergenceRow]:
    """Rows of e(N) at final time T for increasing step counts ``Ns``.

    ``error_fn(N, M)`` replaces the solver run (used to check the bookkeeping).
    """
    Ns = list(Ns)
    if any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise ValueError("Ns must be strictly increasing")
    rows = []
    for N in Ns:
        if error_fn is None:
            err, _ = manufactured_error(M, N, T, g, eps, cfg, sign_mode)
        else:
            err = error_fn(N, M)
        rows.append(ConvergenceRow(N, T / N, M, err))
    return with_orders(rows, "N")


def run_spatial_study(Ms, N_large: int, T: float, g: float, eps: float,
                      cfg: SolveConfig = SolveConfig(), sign_mode: str = "corrected",
                      error_fn=None) -> list[ConvergenceRow]:
    """Rows of e(M) at final time T with orders measured in h."""
    Ms = list(Ms)
    if any(b <= a for a, b in zip(Ms, Ms[1:])):
        raise ValueError("Ms must be strictly increasing")
    rows = []
    for M in Ms:
        if error_fn is None:
            err, _ = manufactured_error(M, N_large, T, g, eps, cfg, sign_mode)
        else:
            err = error_fn(N_large, M)
        rows.append(ConvergenceRow(N_large, T / N_large, M, err))
    return with_orders(rows, "M")


def summary(rows: list[ConvergenceRow]) -> str:
    lines = [f"{'N':>6} {'tau':>12} {'M':>6} {'e':>12} {'order':>7}"]
    for r in rows:
        order = "*" if r.order is None else f"{r.order:.2f}"
        lines.append(f"{r.N:>6} {r.tau:>12.5g} {r.M:>6} {r.error_l2:>12.4e} {order:>7}")
    return "\n".join(lines)
