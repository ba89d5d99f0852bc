"""Implicit BDF3 step: Newton iteration on the nonlinear map of each level.

Each Newton correction solves

    (b0 I + (I + Delta_h)^2 + diag(f'(w))) delta = -residual

using the constant-coefficient operator ``b0 + (1 + lambda_h)^2 + mean(f')``,
which is diagonal in the discrete Fourier basis, either as a stationary
splitting iteration (``fourier_direct``) or as the preconditioner of a
conjugate-gradient solve (``iterative``).
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
from scipy.sparse.linalg import LinearOperator, cg

from .bdf import TimeHistory, lagged_rhs_values
from .grid import (
    GridField,
    GridSpec,
    f_prime_values,
    f_values,
    shifted_squared_values,
)

log = logging.getLogger(__name__)

LINEAR_MODES = ("iterative", "fourier_direct")
GUARD_FLAGS = ("solvability_violated", "energy_violated", "convergence_violated")

# Multiple of machine epsilon * ||A|| * ||w|| below which the residual of a
# fine grid cannot be pushed in double precision.
ROUNDOFF_FACTOR = 4.0


@dataclass(frozen=True)
class Model:
    """Parameters of f(u) = u^3 - g u^2 - eps u.

    ``cubic=False`` drops the cubic and quadratic terms (f(u) = -eps u); it is
    a test hook for checking the linear solve in isolation.
    """

    g: float
    eps: float
    cubic: bool = True

    def f(self, u: np.ndarray) -> np.ndarray:
        if self.cubic:
            return f_values(u, self.g, self.eps)
        return -self.eps * u

    def f_prime(self, u: np.ndarray) -> np.ndarray:
        if self.cubic:
            return f_prime_values(u, self.g, self.eps)
        return np.full_like(u, -self.eps)


@dataclass(frozen=True)
class SolveConfig:
    abs_tol: float = 1e-10
    max_newton_iters: int = 25
    max_inner_iters: int = 500
    linear_mode: str = "iterative"

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if self.max_newton_iters < 1:
            raise ValueError("max_newton_iters must be >= 1")
        if self.max_inner_iters < 1:
            raise ValueError("max_inner_iters must be >= 1")
        if self.linear_mode not in LINEAR_MODES:
            raise ValueError(f"linear_mode must be one of {LINEAR_MODES}")


@dataclass
class StepReport:
    newton_iters: int
    final_residual_l2: float
    tolerance: float
    residual_history: list[float] = field(default_factory=list)
    linear_iters: int = 0
    guard_flags: frozenset[str] = frozenset()


class SolverError(RuntimeError):
    level: int | None = None


class LinearSolveError(SolverError):
    pass


class NewtonConvergenceError(SolverError):
    def __init__(self, message, iterate: GridField, report: StepReport, level=None):
        super().__init__(message)
        self.iterate = iterate
        self.report = report
        self.level = level


# -- step-size guards --------------------------------------------------------

@dataclass(frozen=True)
class StepGuards:
    tau: float
    tau_solvability: float
    tau_energy: float
    # Uniqueness needs b0^(n) > g^2 + eps, i.e. tau < c_n / (g^2 + eps) with
    # c_n the numerator of the level's lead weight.
    tau_solvability_per_level: dict
    solvable: bool
    energy_stable: bool

    @property
    def flags(self) -> frozenset[str]:
        out = set()
        if not self.solvable:
            out.add("solvability_violated")
        if not self.energy_stable:
            out.add("energy_violated")
        return frozenset(out)


def check_step_constraints(tau: float, g: float, eps: float, warn: bool = True) -> StepGuards:
    """Sufficient step-size bounds for unique solvability and energy decay."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    s = g * g + eps
    tau_solv = 3.0 / (2.0 * s) if s > 0 else math.inf
    e = 2.0 * g * g + 1.5 * eps
    tau_energy = 1.0 / e if e > 0 else math.inf
    per_level = {
        1: 2.0 / s if s > 0 else math.inf,
        2: 1.5 / s if s > 0 else math.inf,
        3: (11.0 / 6.0) / s if s > 0 else math.inf,
    }
    guards = StepGuards(
        tau=tau,
        tau_solvability=tau_solv,
        tau_energy=tau_energy,
        tau_solvability_per_level=per_level,
        solvable=tau < tau_solv,
        energy_stable=tau <= tau_energy,
    )
    if warn:
        if not guards.solvable:
            warnings.warn(
                f"tau={tau} violates the unique-solvability bound tau < {tau_solv:.6g}",
                stacklevel=2,
            )
        if not guards.energy_stable:
            warnings.warn(
                f"tau={tau} violates the energy-stability bound tau <= {tau_energy:.6g}",
                stacklevel=2,
            )
    return guards


# -- residual ------------------------------------------------------------------

def residual_values(w: np.ndarray, rhs_g: np.ndarray, lead_weight: float, h: float,
                    model: Model, forcing: np.ndarray | None = None) -> np.ndarray:
    r = lead_weight * w - rhs_g + shifted_squared_values(w, h) + model.f(w)
    if forcing is not None:
        r -= forcing
    return r


def residual(candidate: GridField, rhs_g: GridField, lead_weight: float, g: float,
             eps: float, forcing: GridField | None = None) -> GridField:
    """lead_weight*w - rhs_g + (1 + Delta_h)^2 w + f(w) - forcing."""
    for other in (rhs_g, forcing):
        if other is not None and other.spec != candidate.spec:
            raise ValueError("residual operands live on different grids")
    r = residual_values(candidate.values, rhs_g.values, lead_weight, candidate.spec.h,
                        Model(g, eps), None if forcing is None else forcing.values)
    return candidate.with_values(r)


def _l2(spec: GridSpec, v: np.ndarray) -> float:
    return math.sqrt(spec.cell_volume * float(np.add.reduce(np.ravel(v * v))))


# -- linear solves -------------------------------------------------------------

class ConstantCoefficientInverse:
    """Exact inverse of ``a I + (I + Delta_h)^2`` in the discrete Fourier basis."""

    def __init__(self, spec: GridSpec, shift: float):
        self.spec = spec
        self.shift = shift
        self.symbol = shift + (1.0 + spec.laplacian_symbol) ** 2
        if np.min(np.abs(self.symbol)) < 1e-14 * np.max(np.abs(self.symbol)):
            raise LinearSolveError(
                f"constant-coefficient operator is singular (shift={shift})"
            )

    def __call__(self, v: np.ndarray) -> np.ndarray:
        axes = tuple(range(self.spec.dim))
        return sfft.irfftn(sfft.rfftn(v, axes=axes) / self.symbol,
                           s=self.spec.shape, axes=axes)


def solve_constant_coefficient(spec: GridSpec, shift: float, rhs: np.ndarray) -> np.ndarray:
    """Solve (shift I + (I + Delta_h)^2) x = rhs by Fourier division."""
    return ConstantCoefficientInverse(spec, shift)(rhs)


def apply_jacobian(spec: GridSpec, lead: float, diag: np.ndarray, v: np.ndarray) -> np.ndarray:
    return lead * v + shifted_squared_values(v, spec.h) + diag * v


def solve_linearized(spec: GridSpec, lead: float, diag: np.ndarray, rhs: np.ndarray,
                     rtol: float, mode: str = "iterative",
                     max_iters: int = 500) -> tuple[np.ndarray, int]:
    """Solve (lead + (1+Delta_h)^2 + diag) x = rhs; returns (x, iterations)."""
    mean = float(np.mean(diag))
    precond = ConstantCoefficientInverse(spec, lead + mean)
    b_norm = math.sqrt(float(np.vdot(rhs, rhs)))
    if b_norm == 0.0:
        return np.zeros_like(rhs), 0
    variable = diag - mean

    if mode == "fourier_direct":
        x = precond(rhs)
        prev = math.inf
        growth = 0
        for it in range(1, max_iters + 1):
            if not np.any(variable):
                return x, it
            r = rhs - apply_jacobian(spec, lead, diag, x)
            rn = math.sqrt(float(np.vdot(r, r)))
            if rn <= rtol * b_norm:
                return x, it
            growth = growth + 1 if rn > prev else 0
            if growth >= 2 or not math.isfinite(rn):
                raise LinearSolveError(
                    "fourier_direct splitting iteration diverged; "
                    "the variable part of f' dominates (use linear_mode=iterative)"
                )
            prev = rn
            x = x + precond(r)
        return x, max_iters

    n = rhs.size
    shape = spec.shape
    A = LinearOperator((n, n), dtype=np.float64,
                       matvec=lambda v: apply_jacobian(spec, lead, diag, v.reshape(shape)).ravel())
    P = LinearOperator((n, n), dtype=np.float64,
                       matvec=lambda v: precond(v.reshape(shape)).ravel())
    count = [0]

    def _tick(_):
        count[0] += 1

    x, info = cg(A, rhs.ravel(), x0=precond(rhs).ravel(), rtol=rtol, atol=0.0,
                 maxiter=max_iters, M=P, callback=_tick)
    if info < 0 or not np.isfinite(x).all():
        raise LinearSolveError(f"conjugate-gradient breakdown (info={info})")
    return x.reshape(shape), count[0]


# -- Newton --------------------------------------------------------------------

def roundoff_floor(spec: GridSpec, lead: float, model: Model, w: np.ndarray) -> float:
    """Smallest residual L2 norm resolvable in float64 for iterate ``w``."""
    sym_max = float(np.max((1.0 + spec.laplacian_symbol) ** 2))
    fp_max = float(np.max(np.abs(model.f_prime(w)))) if w.size else 0.0
    op_norm = lead + sym_max + fp_max
    return ROUNDOFF_FACTOR * np.finfo(float).eps * op_norm * _l2(spec, w)


def newton_solve(rhs_g: np.ndarray, lead: float, spec: GridSpec, model: Model,
                 guess: np.ndarray, cfg: SolveConfig,
                 forcing: np.ndarray | None = None) -> tuple[np.ndarray, StepReport]:
    """Solve ``lead*w - rhs_g + (1+Delta_h)^2 w + f(w) = forcing`` for ``w``."""
    w = np.array(guess, dtype=np.float64, copy=True)
    history = []
    linear_iters = 0
    tol = cfg.abs_tol
    for it in range(cfg.max_newton_iters + 1):
        r = residual_values(w, rhs_g, lead, spec.h, model, forcing)
        rn = _l2(spec, r)
        history.append(rn)
        tol = max(cfg.abs_tol, roundoff_floor(spec, lead, model, w))
        if rn <= tol:
            return w, StepReport(it, rn, tol, history, linear_iters)
        if not math.isfinite(rn) or it == cfg.max_newton_iters:
            break
        # Forcing term for the linear solve: enough accuracy to keep Newton
        # quadratic, never below what the residual floor can resolve.
        rtol = min(1e-3, max(0.01 * tol / rn, 1e-13))
        delta, n_lin = solve_linearized(spec, lead, model.f_prime(w), -r, rtol,
                                        cfg.linear_mode, cfg.max_inner_iters)
        linear_iters += n_lin
        w += delta
    report = StepReport(len(history) - 1, history[-1], tol, history, linear_iters)
    raise NewtonConvergenceError(
        f"Newton did not reach residual {tol:.3e} in {cfg.max_newton_iters} "
        f"iterations (last {history[-1]:.3e})",
        GridField(spec, w), report)


def newton_step_solve(hist: TimeHistory, level: int, cfg: SolveConfig, model: Model,
                      forcing: GridField | None = None,
                      guards: StepGuards | None = None) -> tuple[GridField, StepReport]:
    """Compute level ``level`` = ``hist.n + 1`` from the stored history."""
    spec = hist.spec
    rhs = lagged_rhs_values(hist, level)
    lead = hist.kernels.lead_weight(level)
    guess = hist.extrapolate().values
    try:
        w, report = newton_solve(rhs, lead, spec, model, guess, cfg,
                                 None if forcing is None else forcing.values)
    except SolverError as exc:
        exc.level = level
        raise
    if guards is not None:
        report.guard_flags = guards.flags
    return GridField(spec, w), report
