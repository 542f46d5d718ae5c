"""Increasing rearrangement of estimator slices in the time variable.

For a fixed covariate value the map ``u -> F(x, u)`` is replaced by the
quantile function of ``F(x, U)`` with ``U`` uniform on ``A2``. For a
piecewise-constant slice this is a weighted sort of the (value, width) pairs,
which is what :func:`rearrange_slice` does.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EvaluationError

DEFAULT_RESOLUTION = 512


@dataclass(frozen=True)
class SliceFunction:
    """Piecewise-constant function on ``[breakpoints[0], breakpoints[-1]]``.

    Pieces are ``[b_i, b_{i+1})``, the last one closed.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        if bp.ndim != 1 or bp.size < 2 or vals.shape != (bp.size - 1,):
            raise ConfigError("a slice needs k+1 breakpoints and k values, k >= 1")
        if not (np.diff(bp) > 0).all():
            raise ConfigError("slice breakpoints must be strictly increasing")

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        idx = np.searchsorted(self.breakpoints, u, side="right") - 1
        return self.values[np.clip(idx, 0, self.values.size - 1)]


def _merge_equal(bp: np.ndarray, vals: np.ndarray) -> SliceFunction:
    keep = np.ones(vals.size, dtype=bool)
    keep[1:] = vals[1:] != vals[:-1]
    starts = np.flatnonzero(keep)
    return SliceFunction(np.append(bp[starts], bp[-1]), vals[starts])


def rearrange_slice(s: SliceFunction) -> SliceFunction:
    """Sort the pieces of ``s`` by value, keeping each piece's width."""
    order = np.argsort(s.values, kind="stable")
    vals = s.values[order]
    widths = s.widths
    bp = s.breakpoints
    if np.allclose(widths, widths[0], rtol=1e-12, atol=0.0):
        # equal widths: the rearranged pieces sit on the original grid
        return _merge_equal(bp, vals)
    new_bp = np.empty_like(bp)
    new_bp[0] = bp[0]
    new_bp[1:] = bp[0] + np.cumsum(widths[order])
    new_bp[-1] = bp[-1]
    return _merge_equal(new_bp, vals)


@dataclass
class RearrangedEstimator:
    """Evaluates the rearranged slice of ``base`` at each requested ``x``.

    ``base`` needs ``evaluate(x, u)`` and a ``model`` attribute. When the
    model is a histogram in ``u`` the slices are exact; otherwise each slice is
    first sampled at the midpoints of ``resolution`` equal cells of ``A2``.
    """

    base: object
    resolution: int = DEFAULT_RESOLUTION
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.resolution < 1:
            raise ConfigError("rearrangement resolution must be >= 1")
        model = self.base.model
        at = model.region[1]
        if model.basis_t.is_histogram:
            self._edges = model.basis_t.cell_edges()
        else:
            self._edges = np.linspace(at.lo, at.hi, self.resolution + 1)
            self._edges[-1] = at.hi
        self._mids = 0.5 * (self._edges[:-1] + self._edges[1:])
        self._x_cells = model.basis_x.is_histogram

    @property
    def model(self):
        return self.base.model

    @property
    def exact(self) -> bool:
        return self.model.basis_t.is_histogram

    def _key(self, x: float):
        if self._x_cells:
            return int(self.model.basis_x.cell_index(x))
        return float(x)

    def original_slice(self, x: float) -> SliceFunction:
        vals = self.base.evaluate(np.full(self._mids.shape, float(x)), self._mids)
        return SliceFunction(self._edges, vals)

    def slice_at(self, x: float) -> SliceFunction:
        key = self._key(x)
        s = self._cache.get(key)
        if s is None:
            s = rearrange_slice(self.original_slice(x))
            self._cache[key] = s
        return s

    def evaluate(self, x, u):
        xb, ub = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(u, dtype=float))
        ax, at = self.model.region
        if not (ax.contains(xb).all() and at.contains(ub).all()):
            raise EvaluationError("evaluation point outside the estimator region")
        flat_x, flat_u = xb.ravel(), ub.ravel()
        out = np.empty(flat_x.size)
        uniq, inverse = np.unique(flat_x, return_inverse=True)
        order = np.argsort(inverse, kind="stable")
        groups = np.split(order, np.cumsum(np.bincount(inverse, minlength=uniq.size))[:-1])
        for xv, idx in zip(uniq, groups):
            out[idx] = self.slice_at(xv)(flat_u[idx])
        return out.reshape(xb.shape) if xb.shape else float(out[0])


def rearrange_estimator(est, grid_x=None, resolution: int = DEFAULT_RESOLUTION) -> RearrangedEstimator:
    """Wrap ``est`` so it is nondecreasing in ``u``; ``grid_x`` slices are precomputed."""
    r = RearrangedEstimator(est, resolution)
    if grid_x is not None:
        for xv in np.asarray(grid_x, dtype=float).ravel():
            r.slice_at(xv)
    return r
