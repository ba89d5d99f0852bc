"""Self-checks behind the ``verify`` subcommand.

Each check returns a :class:`CheckResult`; nothing here raises on failure.
Random inputs come from fixed seeds so a run is reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dockernels import (
    decomposition_identity_check,
    doc_bounds_check,
    doc_explicit,
    doc_positive_definiteness,
    doc_recursive,
    quadratic_form_b,
    verify_orthogonality,
)
from .grid import GridField, GridSpec, gradient, inner, laplacian, shifted, shifted_squared

TAUS = (1e-3, 1.0, 10.0)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst: float
    limit: float
    # True when ``worst`` is a slack that must stay above ``limit``
    lower: bool = False

    @property
    def detail(self) -> str:
        if self.lower:
            return f"min slack {self.worst:.3e} (must be >= {self.limit:.1e})"
        return f"worst {self.worst:.3e} (limit {self.limit:.1e})"


def _result(name: str, worst: float, limit: float, ok: bool | None = None) -> CheckResult:
    if ok is None:
        ok = math.isfinite(worst) and worst <= limit
    return CheckResult(name, bool(ok), float(worst), float(limit))


# -- DOC kernels --------------------------------------------------------------

def check_dual_construction(jmax: int = 200, taus=TAUS, rtol: float = 1e-12) -> CheckResult:
    worst = 0.0
    for tau in taus:
        theta = doc_recursive(jmax, tau).theta
        for j in range(jmax + 1):
            try:
                e = doc_explicit(j, tau)
            except ArithmeticError:
                return _result("doc recursive = closed form", math.inf, rtol)
            worst = max(worst, abs(theta[j] - e) / abs(e))
    return _result("doc recursive = closed form", worst, rtol)


def check_orthogonality(dmax: int = 200, taus=TAUS, atol: float = 1e-13) -> CheckResult:
    worst = max(verify_orthogonality(dmax, tau) for tau in taus)
    return _result("doc orthogonality", worst, atol)


def check_doc_bounds(m: int = 1000, taus=TAUS) -> CheckResult:
    slacks = [doc_bounds_check(m, tau) for tau in taus]
    # report the smallest relative pointwise slack; any violation fails
    worst = min(s.pointwise for s in slacks)
    ok = all(s.holds for s in slacks)
    return CheckResult("doc pointwise and sum bounds", ok, worst, 0.0, lower=True)


def check_scaling(jmax: int = 200, taus=TAUS, rtol: float = 1e-15) -> CheckResult:
    unit = doc_recursive(jmax, 1.0).theta
    worst = 0.0
    for tau in taus:
        theta = doc_recursive(jmax, tau).theta
        nz = unit != 0
        worst = max(worst, float(np.max(np.abs(theta[nz] - tau * unit[nz]) / np.abs(tau * unit[nz]))))
    return _result("doc kernels linear in tau", worst, rtol)


def check_positive_definiteness(samples: int = 1000, max_len: int = 50, seed: int = 11,
                                tol: float = 1e-12) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    worst_b = worst_doc = -math.inf
    for _ in range(samples):
        n = int(rng.integers(1, max_len + 1))
        w = rng.standard_normal(n) * 10.0 ** rng.uniform(-3, 3)
        tau = 10.0 ** rng.uniform(-3, 1)
        scale = float(np.dot(w, w))
        # normalized violation: how far below -tol*sum(w^2) we fall, in units of sum(w^2)
        worst_b = max(worst_b, -quadratic_form_b(w, tau) / scale)
        worst_doc = max(worst_doc, -doc_positive_definiteness(w, tau) / scale)
    return [_result("bdf3 kernel form >= 0", max(worst_b, 0.0), tol, worst_b <= tol),
            _result("doc kernel form >= 0", max(worst_doc, 0.0), tol, worst_doc <= tol)]


def check_decomposition(samples: int = 1000, seed: int = 12, rtol: float = 1e-13) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        a, b, c = rng.uniform(-1.0, 1.0, 3)
        lhs, rhs = decomposition_identity_check(a, b, c)
        # relative to the size of the terms that were summed
        scale = max(abs(lhs), a * a + b * b + c * c)
        worst = max(worst, abs(lhs - rhs) / scale)
    return _result("telescoping decomposition", worst, rtol)


# -- grid operators -----------------------------------------------------------

def _rel(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0.0 else abs(a - b) / scale


def _random_fields(spec: GridSpec, rng, count: int):
    for _ in range(count):
        yield (GridField(spec, rng.standard_normal(spec.shape)),
               GridField(spec, rng.standard_normal(spec.shape)))


def check_green(Ms=(8, 16), dims=(2, 3), samples: int = 100, seed: int = 13,
                rtol: float = 1e-12) -> CheckResult:
    """inner(-lap v, w) against the sum of gradient inner products."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for dim in dims:
        for M in Ms:
            spec = GridSpec(dim, 1.0 + rng.uniform(), M)
            for v, w in _random_fields(spec, rng, samples):
                lhs = -inner(laplacian(v), w)
                rhs = sum(inner(dv, dw) for dv, dw in zip(gradient(v), gradient(w)))
                worst = max(worst, _rel(lhs, rhs))
    return _result("discrete Green formula", worst, rtol)


def check_adjoint(Ms=(8, 16), dims=(2, 3), samples: int = 100, seed: int = 14,
                  rtol: float = 1e-12) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for dim in dims:
        for M in Ms:
            spec = GridSpec(dim, 1.0 + rng.uniform(), M)
            for v, w in _random_fields(spec, rng, samples):
                lhs = inner(shifted_squared(v), w)
                rhs = inner(shifted(v), shifted(w))
                worst = max(worst, _rel(lhs, rhs))
    return _result("(1+lap)^2 adjoint identity", worst, rtol)


def check_eigenmodes(Ms=(8, 16), rtol: float = 1e-12) -> CheckResult:
    """Every sin/cos product mode is an eigenvector with the stencil symbol."""
    worst = 0.0
    for dim in (2, 3):
        for M in Ms:
            spec = GridSpec(dim, 2.0 * math.pi, M)
            h = spec.h
            coords = spec.coordinates()
            for wave in np.ndindex(*(M // 2 + 1,) * dim):
                values = np.ones(spec.shape)
                for axis, (k, x) in enumerate(zip(wave, coords)):
                    values = values * (np.sin(k * x) if axis == 0 else np.cos(k * x))
                if not np.any(np.abs(values) > 1e-8):
                    continue
                sym = -sum(4.0 * math.sin(math.pi * k / M) ** 2 for k in wave) / h**2
                got = laplacian(GridField(spec, values)).values
                scale = max(abs(sym), 1.0 / h**2) * np.max(np.abs(values))
                worst = max(worst, float(np.max(np.abs(got - sym * values))) / scale)
    return _result("laplacian eigenmode symbol", worst, rtol)


def run_all() -> list[CheckResult]:
    results = [
        check_dual_construction(),
        check_orthogonality(),
        check_doc_bounds(),
        check_scaling(),
        *check_positive_definiteness(),
        check_decomposition(),
        check_green(),
        check_adjoint(),
        check_eigenmodes(),
    ]
    return results


def format_table(results: list[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  result  detail"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  {r.detail}")
    return "\n".join(lines)
