"""Periodic uniform grids, second-order difference operators and discrete norms.

Fields are stored as C-ordered float64 arrays of shape ``(M,) * dim``; the
value at index ``(i, j[, k])`` is the sample at ``(i*h, j*h[, k*h])``.  The
periodic node set is non-duplicated, so index arithmetic wraps modulo ``M``
and the ``h**dim`` weighted node count equals the box volume ``L**dim``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """Periodic box ``(0, L)**dim`` with ``M`` nodes per axis."""

    dim: int
    L: float
    M: int

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if int(self.M) != self.M or self.M < 4:
            raise ValueError(f"M must be an integer >= 4, got {self.M}")
        if not (self.L > 0 and math.isfinite(self.L)):
            raise ValueError(f"L must be positive, got {self.L}")
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self) -> float:
        return self.L / self.M

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.M,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def volume(self) -> float:
        """|Omega_h|, the weighted node count (equals L**dim)."""
        return self.cell_volume * self.M**self.dim

    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Node coordinates as ``dim`` arrays of the field shape."""
        x = np.arange(self.M) * self.h
        return tuple(np.meshgrid(*([x] * self.dim), indexing="ij"))

    @cached_property
    def laplacian_symbol(self) -> np.ndarray:
        """Eigenvalues of the periodic 5/7-point Laplacian on the rfftn grid.

        The last axis holds the non-negative half spectrum, matching
        ``scipy.fft.rfftn`` output layout.
        """
        M, h = self.M, self.h
        full = -4.0 * np.sin(np.pi * np.fft.fftfreq(M, d=1.0 / M) / M) ** 2 / h**2
        half = full[: M // 2 + 1]
        axes = [full] * (self.dim - 1) + [half]
        symbol = np.zeros([len(a) for a in axes])
        for component in np.meshgrid(*axes, indexing="ij", sparse=True):
            symbol = symbol + component
        return symbol


@dataclass(frozen=True, eq=False)
class GridField:
    """Scalar samples on the nodes of ``spec``."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.shape != self.spec.shape:
            raise ValueError(
                f"field shape {values.shape} does not match grid {self.spec.shape}"
            )
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, spec: GridSpec) -> GridField:
        return cls(spec, np.zeros(spec.shape))

    @classmethod
    def constant(cls, spec: GridSpec, c: float) -> GridField:
        return cls(spec, np.full(spec.shape, float(c)))

    @classmethod
    def from_function(cls, spec: GridSpec, func) -> GridField:
        return cls(spec, np.broadcast_to(func(*spec.coordinates()), spec.shape))

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.values).all())

    def copy(self) -> GridField:
        return GridField(self.spec, self.values.copy())

    def with_values(self, values: np.ndarray) -> GridField:
        return GridField(self.spec, values)


def _check_same(v: GridField, w: GridField):
    if v.spec != w.spec:
        raise ValueError(f"grid mismatch: {v.spec} vs {w.spec}")


def _pairwise_sum(a: np.ndarray) -> float:
    # numpy reduces contiguous 1-D float data with pairwise summation; the
    # reduction tree depends only on the array length.
    return float(np.add.reduce(np.ravel(a)))


def laplacian_values(values: np.ndarray, h: float) -> np.ndarray:
    """Periodic second-difference Laplacian of a raw array."""
    # differences first, so constants map to exactly zero
    out = np.zeros_like(values)
    for axis in range(values.ndim):
        out += np.roll(values, 1, axis=axis) - values
        out += np.roll(values, -1, axis=axis) - values
    out /= h * h
    return out


def shifted_values(values: np.ndarray, h: float) -> np.ndarray:
    """(I + Delta_h) applied to a raw array."""
    return values + laplacian_values(values, h)


def shifted_squared_values(values: np.ndarray, h: float) -> np.ndarray:
    return shifted_values(shifted_values(values, h), h)


def laplacian(f: GridField) -> GridField:
    return f.with_values(laplacian_values(f.values, f.spec.h))


def shifted(f: GridField) -> GridField:
    """(I + Delta_h) f."""
    return f.with_values(shifted_values(f.values, f.spec.h))


def shifted_squared(f: GridField) -> GridField:
    """(I + Delta_h)^2 f, as two successive applications of (I + Delta_h)."""
    return f.with_values(shifted_squared_values(f.values, f.spec.h))


def gradient(v: GridField) -> tuple[GridField, ...]:
    """Forward differences per axis, living at half-integer offsets.

    Component ``a`` at node index ``i`` stores ``(v[i + e_a] - v[i]) / h``.
    """
    h = v.spec.h
    return tuple(
        v.with_values((np.roll(v.values, -1, axis=a) - v.values) / h)
        for a in range(v.spec.dim)
    )


def inner(v: GridField, w: GridField) -> float:
    _check_same(v, w)
    return v.spec.cell_volume * _pairwise_sum(v.values * w.values)


def norm(v: GridField, q: int | float | str = 2) -> float:
    if q == 2:
        return math.sqrt(inner(v, v))
    if q == 4:
        return (v.spec.cell_volume * _pairwise_sum(v.values**4)) ** 0.25
    if q in ("inf", math.inf):
        return float(np.max(np.abs(v.values)))
    raise ValueError(f"unsupported norm order {q!r}; use 2, 4 or 'inf'")


def f_values(u: np.ndarray, g: float, eps: float) -> np.ndarray:
    return u * u * u - g * u * u - eps * u


def f_eval(v: GridField, g: float, eps: float) -> GridField:
    """Pointwise nonlinearity u**3 - g u**2 - eps u."""
    return v.with_values(f_values(v.values, g, eps))


def f_prime_values(u: np.ndarray, g: float, eps: float) -> np.ndarray:
    return 3.0 * u * u - 2.0 * g * u - eps
