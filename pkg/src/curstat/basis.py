"""Orthonormal one-dimensional function families on a compact interval.

Two families are available:

* :class:`PiecewisePoly` -- piecewise polynomials of maximum degree ``s`` on a
  regular partition. Degree 0 gives histograms. Inside each cell the basis is
  made of shifted Legendre polynomials normalised to unit L2 norm.
* :class:`Trigonometric` -- the constant function followed by sine/cosine
  pairs ``sin(2 pi j u), cos(2 pi j u)``, ``j = 1, 2, ...`` after the affine
  map of the support onto ``[0, 1]``. The dimension must be odd.

Cells are half-open ``[a_i, a_{i+1})`` except the last one, which is closed so
that the upper end of the support is not lost.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.polynomial import legendre

from .errors import ConfigError, EvaluationError


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)) or not self.lo < self.hi:
            raise ConfigError(f"interval requires lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def contains(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return (p >= self.lo) & (p <= self.hi)


@dataclass(frozen=True)
class PiecewisePoly:
    degree: int = 0

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 0:
            raise ConfigError(f"piecewise polynomial degree must be an integer >= 0, got {self.degree}")

    @property
    def token(self) -> str:
        return "hist" if self.degree == 0 else f"poly{self.degree}"


@dataclass(frozen=True)
class Trigonometric:

    @property
    def token(self) -> str:
        return "trig"


Family = Union[PiecewisePoly, Trigonometric]


def parse_family(token: str) -> Family:
    """Parse ``hist``, ``polyS`` (e.g. ``poly2``) or ``trig``."""
    tok = token.strip().lower()
    if tok in ("hist", "histogram"):
        return PiecewisePoly(0)
    if tok == "trig":
        return Trigonometric()
    if tok.startswith("poly"):
        try:
            return PiecewisePoly(int(tok[4:]))
        except ValueError:
            pass
    raise ConfigError(f"unknown basis family {token!r}; expected hist, polyS or trig")


@dataclass(frozen=True)
class Basis1D:
    """Orthonormal family of dimension ``dim`` on ``support``.

    Build instances with :func:`make_basis`, which validates the dimension.
    """

    family: Family
    dim: int
    support: Interval

    @property
    def is_histogram(self) -> bool:
        return isinstance(self.family, PiecewisePoly) and self.family.degree == 0

    @property
    def n_cells(self) -> int:
        if not isinstance(self.family, PiecewisePoly):
            raise AttributeError("only piecewise polynomial bases have cells")
        return self.dim // (self.family.degree + 1)

    @property
    def cell_width(self) -> float:
        return self.support.length / self.n_cells

    def cell_edges(self) -> np.ndarray:
        edges = self.support.lo + self.cell_width * np.arange(self.n_cells + 1)
        edges[-1] = self.support.hi
        return edges

    def cell_index(self, points) -> np.ndarray:
        """Index of the cell holding each point (no support check)."""
        p = np.asarray(points, dtype=float)
        idx = np.floor((p - self.support.lo) / self.cell_width).astype(np.int64)
        return np.clip(idx, 0, self.n_cells - 1)

    def matrix(self, points) -> np.ndarray:
        """Evaluate all basis functions: returns an array of shape ``(len(points), dim)``."""
        p = np.atleast_1d(np.asarray(points, dtype=float))
        if p.ndim != 1:
            raise ValueError("points must be one-dimensional")
        outside = ~self.support.contains(p)
        if outside.any():
            bad = p[outside][0]
            raise EvaluationError(
                f"point {bad!r} outside support [{self.support.lo}, {self.support.hi}]"
            )
        if isinstance(self.family, PiecewisePoly):
            return self._piecewise(p)
        return self._trig(p)

    def _piecewise(self, p: np.ndarray) -> np.ndarray:
        s = self.family.degree
        w = self.cell_width
        cells = self.cell_index(p)
        out = np.zeros((p.size, self.dim))
        rows = np.arange(p.size)
        if s == 0:
            out[rows, cells] = 1.0 / np.sqrt(w)
            return out
        left = self.support.lo + cells * w
        z = np.clip(2.0 * (p - left) / w - 1.0, -1.0, 1.0)
        for j in range(s + 1):
            coef = np.zeros(j + 1)
            coef[j] = 1.0
            out[rows, cells * (s + 1) + j] = np.sqrt((2 * j + 1) / w) * legendre.legval(z, coef)
        return out

    def _trig(self, p: np.ndarray) -> np.ndarray:
        length = self.support.length
        z = (p - self.support.lo) / length
        out = np.empty((p.size, self.dim))
        out[:, 0] = 1.0 / np.sqrt(length)
        scale = np.sqrt(2.0 / length)
        for j in range(1, (self.dim - 1) // 2 + 1):
            arg = 2.0 * np.pi * j * z
            out[:, 2 * j - 1] = scale * np.sin(arg)
            out[:, 2 * j] = scale * np.cos(arg)
        return out


def make_basis(family: Family, dim: int, support: Interval) -> Basis1D:
    if int(dim) != dim or dim < 1:
        raise ConfigError(f"basis dimension must be a positive integer, got {dim}")
    dim = int(dim)
    if isinstance(family, PiecewisePoly):
        if dim % (family.degree + 1):
            raise ConfigError(
                f"dimension {dim} is not a multiple of degree+1 = {family.degree + 1} "
                "for piecewise polynomials"
            )
    elif isinstance(family, Trigonometric):
        if dim % 2 == 0:
            raise ConfigError(f"trigonometric dimension must be odd, got {dim}")
    else:
        raise ConfigError(f"unknown basis family {family!r}")
    return Basis1D(family, dim, support)


def eval_basis(b: Basis1D, point: float) -> np.ndarray:
    """Return ``(phi_1(point), ..., phi_D(point))``."""
    return b.matrix([point])[0]


def sup_constant(b: Basis1D, n_points: int = 10_000) -> float:
    """Measured constant K in ``sup_x sum_k phi_k(x)^2 <= K D / lg(support)``.

    The length factor makes K scale free: K = 1 for histograms and
    trigonometric families, ``degree + 1`` at most for piecewise polynomials.
    """
    grid = np.linspace(b.support.lo, b.support.hi, n_points)
    sq = (b.matrix(grid) ** 2).sum(axis=1)
    return float(sq.max() * b.support.length / b.dim)
