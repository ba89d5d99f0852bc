"""Discrete orthogonal convolution (DOC) kernels of BDF3 and kernel quadratic forms.

The DOC kernels invert the BDF3 convolution: sum_j theta[n-j] b[j-k] = delta_nk.
They satisfy 11 theta[j] - 7 theta[j-1] + 2 theta[j-2] = 0 with seeds
6 tau/11 and 42 tau/121; the recursion is the production path and the complex
closed form is kept for cross-checking.

Writing theta_j = tau * c_j / 11**(j+1) turns the recursion into the integer
recursion c_j = 7 c_{j-1} - 22 c_{j-2} (c_0 = 6, c_1 = 42), so kernels are
formed exactly and rounded once.  The closed form is evaluated in extended
precision: in float64 it loses relative accuracy wherever theta_j passes close
to zero (e.g. j = 68).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import mpmath
import numpy as np

from .bdf import make_kernels

EXPLICIT_DPS = 40


@dataclass(frozen=True)
class DocKernelSeq:
    tau: float
    theta: np.ndarray

    @property
    def m(self) -> int:
        return len(self.theta) - 1


@lru_cache(maxsize=8)
def _numerators(m: int) -> tuple[int, ...]:
    c = [6, 42][: m + 1]
    while len(c) <= m:
        c.append(7 * c[-1] - 22 * c[-2])
    return tuple(c)


def doc_exact(m: int) -> list[Fraction]:
    """theta_j / tau for j = 0..m as exact rationals."""
    return [Fraction(c, 11 ** (j + 1)) for j, c in enumerate(_numerators(m))]


def doc_recursive(m: int, tau: float) -> DocKernelSeq:
    if m < 0:
        raise ValueError("m must be non-negative")
    if not tau > 0:
        raise ValueError("tau must be positive")
    unit = np.array([float(q) for q in doc_exact(m)])
    return DocKernelSeq(tau, unit * tau)


def doc_explicit_complex(j: int, tau: float) -> mpmath.mpc:
    """Both conjugate terms of the closed form, summed in extended precision."""
    with mpmath.workdps(EXPLICIT_DPS):
        s39 = mpmath.sqrt(39)
        coef_a = mpmath.mpc(39, 7 * s39) / 78
        coef_b = mpmath.mpc(39, -7 * s39) / 78
        root_a = mpmath.mpc(7, -s39) / 22
        root_b = mpmath.mpc(7, s39) / 22
        return 6 * mpmath.mpf(tau) / 11 * (coef_a * root_a**j + coef_b * root_b**j)


def doc_explicit(j: int, tau: float) -> float:
    """theta_j from the characteristic-root closed form."""
    if j < 0:
        raise ValueError("j must be non-negative")
    z = doc_explicit_complex(j, tau)
    if abs(z.imag) > 1e-14 * tau:
        raise ArithmeticError(f"closed form has imaginary residue {float(z.imag):.3e}")
    return float(z.real)


def verify_orthogonality(n_minus_k_max: int, tau: float) -> float:
    """max_d |sum_i theta[d-i] b[i] - delta_{d0}| over offsets d = 0..n_minus_k_max."""
    theta = doc_recursive(n_minus_k_max, tau).theta
    b = make_kernels(tau).weights
    worst = 0.0
    for d in range(n_minus_k_max + 1):
        s = sum(theta[d - i] * b[i] for i in range(min(d, 2) + 1))
        worst = max(worst, abs(s - (1.0 if d == 0 else 0.0)))
    return worst


@dataclass(frozen=True)
class BoundSlack:
    # min_j [1 - |theta_j| / ((2/11)^(j/2) tau)]; negative = violated
    pointwise: float
    # 22 tau/9 - sum_j |theta_j|
    total: float
    pointwise_holds: bool
    total_holds: bool

    @property
    def holds(self) -> bool:
        return self.pointwise_holds and self.total_holds


def doc_bounds_check(m: int, tau: float) -> BoundSlack:
    """Check |theta_j| <= (2/11)^(j/2) tau and sum |theta_j| <= 22 tau/9 exactly.

    Since theta_j = tau c_j / 11^(j+1), the pointwise bound is the integer
    inequality c_j^2 <= 2^j 11^(j+2) and tau cancels; the checks never
    underflow even where (2/11)^(j/2) does.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    c = _numerators(m)
    ok = True
    worst = 1.0
    for j, cj in enumerate(c):
        cap = 2**j * 11 ** (j + 2)
        ok = ok and cj * cj <= cap
        worst = min(worst, 1.0 - float(Fraction(cj * cj, cap)) ** 0.5)
    total = sum(abs(q) for q in doc_exact(m))
    cap_total = Fraction(22, 9)
    slack = float((cap_total - total) * Fraction(tau))
    return BoundSlack(worst, slack, ok, total <= cap_total)


def _lower_toeplitz_form(kernel: np.ndarray, w: np.ndarray) -> float:
    """sum_k w_k sum_{j<=k} kernel[k-j] w_j."""
    conv = np.convolve(kernel, w)[: len(w)]
    return float(np.dot(w, conv))


def quadratic_form_b(w, tau: float) -> float:
    """2 sum_k w_k sum_{j<=k} b_{k-j} w_j for a sequence w_3..w_n."""
    w = np.asarray(w, dtype=float)
    if w.size == 0:
        raise ValueError("sequence must be nonempty")
    return 2.0 * _lower_toeplitz_form(make_kernels(tau).weights, w)


def doc_positive_definiteness(w, tau: float) -> float:
    """sum_k w_k sum_{j<=k} theta_{k-j} w_j."""
    w = np.asarray(w, dtype=float)
    if w.size == 0:
        raise ValueError("sequence must be nonempty")
    return _lower_toeplitz_form(doc_recursive(w.size - 1, tau).theta, w)


def decomposition_identity_check(w_nm2: float, w_nm1: float, w_n: float,
                                 tau: float = 1.0) -> tuple[float, float]:
    """Both sides of the telescoping split of 6 tau w_n sum_j b_{n-j} w_j."""
    k = make_kernels(tau)
    lhs = 6.0 * tau * w_n * (k.b0 * w_n + k.b1 * w_nm1 + k.b2 * w_nm2)
    rhs = (
        4.5 * (w_n**2 + 2.0 / 9.0 * w_nm1**2)
        - 4.5 * (w_nm1**2 + 2.0 / 9.0 * w_nm2**2)
        + 2.0 * w_n**2
        + (w_n + w_nm2) ** 2
        + 3.5 * (w_n - w_nm1) ** 2
    )
    return lhs, rhs
