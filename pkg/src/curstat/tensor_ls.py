"""Tensor-product least-squares fits of current-status indicators.

A model is the tensor product of two :class:`~curstat.basis.Basis1D`, one for
the covariate axis ``x`` and one for the inspection-time axis ``t``. The
coefficients are stored in row-major order over ``(k, l)``: ``(1,1), ...,
(1,D2), (2,1), ...``, i.e. flat index ``k * D2 + l`` with zero-based ``k, l``.

The fit solves the normal equations ``G a = V`` through a spectral
decomposition of the empirical Gram matrix ``G``. Directions whose eigenvalue
falls below ``rank_tol`` times the largest one are dropped, which yields the
minimum-norm minimiser of the least-squares contrast. Its values on the
sample are the projection of the indicators onto the span of the basis
evaluations, and it has no component along functions that vanish on the
sample.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .basis import Basis1D, Family, Interval, make_basis, parse_family
from .errors import ConfigError, EvaluationError, InputFormatError, NumericalError

RANK_TOL = 1e-10
DENSE_LIMIT = 10**6  # max D_m**2 for the dense accumulation path
INDEFINITE_TOL = 1e-8


@dataclass(frozen=True)
class Sample:
    """Current-status observations ``(x, t, delta)`` restricted to a region ``A1 x A2``."""

    x: np.ndarray
    t: np.ndarray
    delta: np.ndarray
    region: Tuple[Interval, Interval]
    n_dropped: int = 0

    def __post_init__(self):
        if not (self.x.shape == self.t.shape == self.delta.shape) or self.x.ndim != 1:
            raise ConfigError("x, t and delta must be one-dimensional arrays of equal length")
        if self.x.size < 1:
            raise ConfigError("sample is empty after restriction to the region")

    @classmethod
    def from_arrays(cls, x, t, delta, region) -> "Sample":
        """Validate the indicators and drop records with ``(x, t)`` outside the region."""
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        d = np.asarray(delta)
        if d.size and not np.isin(d, (0, 1)).all():
            raise ConfigError("delta must take values in {0, 1}")
        d = d.astype(np.int64)
        ax, at = region
        keep = ax.contains(x) & at.contains(t)
        return cls(x[keep], t[keep], d[keep], (ax, at), int((~keep).sum()))

    @property
    def n(self) -> int:
        return int(self.x.size)


@dataclass(frozen=True)
class TensorModel:
    basis_x: Basis1D
    basis_t: Basis1D

    @property
    def dims(self) -> Tuple[int, int]:
        return self.basis_x.dim, self.basis_t.dim

    @property
    def dim(self) -> int:
        return self.basis_x.dim * self.basis_t.dim

    @property
    def region(self) -> Tuple[Interval, Interval]:
        return self.basis_x.support, self.basis_t.support

    @property
    def is_histogram(self) -> bool:
        return self.basis_x.is_histogram and self.basis_t.is_histogram

    @property
    def index_map(self) -> list:
        """One-based ``(k, l)`` pairs in coefficient order."""
        d1, d2 = self.dims
        return [(k + 1, l + 1) for k in range(d1) for l in range(d2)]

    def design_matrix(self, x, t) -> np.ndarray:
        """``n x D_m`` matrix of products ``phi_k(x_i) psi_l(t_i)`` in row-major order."""
        bx = self.basis_x.matrix(x)
        bt = self.basis_t.matrix(t)
        return (bx[:, :, None] * bt[:, None, :]).reshape(bx.shape[0], -1)

    def flat_cell(self, x, t) -> np.ndarray:
        """Histogram models only: flat coefficient index of the cell holding each point."""
        return self.basis_x.cell_index(x) * self.basis_t.dim + self.basis_t.cell_index(t)


def tensor_model(family_x: Family, d1: int, family_t: Family, d2: int, region) -> TensorModel:
    ax, at = region
    return TensorModel(make_basis(family_x, d1, ax), make_basis(family_t, d2, at))


def _check_inside(sample: Sample, model: TensorModel):
    ax, at = model.region
    if not (ax.contains(sample.x).all() and at.contains(sample.t).all()):
        raise EvaluationError("sample points fall outside the model region; filter with Sample.from_arrays")


def _histogram_system(sample: Sample, model: TensorModel):
    cells = model.flat_cell(sample.x, sample.t)
    counts = np.bincount(cells, minlength=model.dim).astype(float)
    hits = np.bincount(cells, weights=sample.delta.astype(float), minlength=model.dim)
    area = model.basis_x.cell_width * model.basis_t.cell_width
    n = sample.n
    return counts / (n * area), hits / (n * np.sqrt(area))


def assemble_system(sample: Sample, model: TensorModel, dense: bool = False):
    """Empirical Gram matrix and moment vector of the model on the sample.

    Histogram x histogram models use a cell-count fast path (the Gram matrix
    is diagonal there) unless ``dense`` is set.
    """
    _check_inside(sample, model)
    if model.is_histogram and not dense:
        diag, moment = _histogram_system(sample, model)
        return np.diag(diag), moment
    if model.dim**2 > DENSE_LIMIT:
        raise ConfigError(f"model dimension {model.dim} too large for dense assembly")
    design = model.design_matrix(sample.x, sample.t)
    n = sample.n
    gram = design.T @ design / n
    gram = 0.5 * (gram + gram.T)
    moment = design.T @ sample.delta.astype(float) / n
    return gram, moment


def solve_least_squares(gram, moment, rank_tol: float = RANK_TOL):
    """Minimum-norm solution of ``gram @ coeffs = moment``.

    Returns ``(coeffs, effective_rank)``; the rank counts eigenvalues above
    ``rank_tol`` times the largest one.
    """
    gram = np.asarray(gram, dtype=float)
    moment = np.asarray(moment, dtype=float)
    if np.count_nonzero(gram - np.diag(np.diagonal(gram))) == 0:
        return _solve_diagonal(np.diagonal(gram), moment, rank_tol)
    evals, evecs = np.linalg.eigh(gram)
    top = evals[-1]
    if top <= 0:
        raise NumericalError("Gram matrix has no positive eigenvalue")
    if evals[0] < -INDEFINITE_TOL * top:
        raise NumericalError(
            f"Gram matrix is indefinite (min eigenvalue {evals[0]:.3e}, max {top:.3e})"
        )
    keep = evals > rank_tol * top
    proj = evecs[:, keep].T @ moment
    return evecs[:, keep] @ (proj / evals[keep]), int(keep.sum())


def _solve_diagonal(diag, moment, rank_tol):
    if diag.min() < -INDEFINITE_TOL * max(diag.max(), 0.0):
        raise NumericalError("Gram matrix has a negative diagonal entry")
    top = diag.max()
    if top <= 0:
        raise NumericalError("Gram matrix has no positive eigenvalue")
    keep = diag > rank_tol * top
    coeffs = np.zeros_like(moment)
    coeffs[keep] = moment[keep] / diag[keep]
    return coeffs, int(keep.sum())


@dataclass(frozen=True)
class FittedModel:
    model: TensorModel
    coeffs: np.ndarray
    contrast: float
    effective_rank: int
    n_used: int

    def evaluate(self, x, u) -> np.ndarray:
        """Unclamped surface ``sum_kl a_kl phi_k(x) psi_l(u)``; broadcasts ``x`` against ``u``."""
        return evaluate(self, x, u)


def fit(sample: Sample, model: TensorModel, rank_tol: float = RANK_TOL, dense: bool = False) -> FittedModel:
    if model.is_histogram and not dense:
        _check_inside(sample, model)
        diag, moment = _histogram_system(sample, model)
        coeffs, rank = _solve_diagonal(diag, moment, rank_tol)
    else:
        gram, moment = assemble_system(sample, model, dense=dense)
        coeffs, rank = solve_least_squares(gram, moment, rank_tol)
    fitted = _values_on(model, coeffs, sample.x, sample.t)
    contrast = float(np.mean((sample.delta - fitted) ** 2))
    return FittedModel(model, coeffs, contrast, rank, sample.n)


def _values_on(model: TensorModel, coeffs: np.ndarray, x: np.ndarray, t: np.ndarray) -> np.ndarray:
    if model.is_histogram:
        ax, at = model.region
        if not (ax.contains(x).all() and at.contains(t).all()):
            raise EvaluationError("evaluation point outside the model region")
        scale = 1.0 / np.sqrt(model.basis_x.cell_width * model.basis_t.cell_width)
        return coeffs[model.flat_cell(x, t)] * scale
    bx = model.basis_x.matrix(x)
    bt = model.basis_t.matrix(t)
    a = coeffs.reshape(model.dims)
    return np.einsum("ik,kl,il->i", bx, a, bt)


def evaluate(fm: FittedModel, x, u) -> np.ndarray:
    """Evaluate a fitted surface at points ``(x, u)`` (arrays broadcast together)."""
    xb, ub = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(u, dtype=float))
    shape = xb.shape
    vals = _values_on(fm.model, fm.coeffs, xb.ravel(), ub.ravel())
    return vals.reshape(shape) if shape else float(vals[0])


def cell_values(fm: FittedModel) -> np.ndarray:
    """Histogram models only: ``D1 x D2`` array of the surface value on each cell."""
    m = fm.model
    if not m.is_histogram:
        raise ConfigError("cell values are defined for histogram x histogram models only")
    scale = 1.0 / np.sqrt(m.basis_x.cell_width * m.basis_t.cell_width)
    return (fm.coeffs * scale).reshape(m.dims)


# -- serialization ----------------------------------------------------------

MODEL_MAGIC = "curstat-model v1"


def dumps_model(fm: FittedModel) -> str:
    """Text form: one header line, then one coefficient per line in row-major order."""
    m = fm.model
    ax, at = m.region
    header = (
        f"{MODEL_MAGIC} x={m.basis_x.family.token},{m.basis_x.dim},{ax.lo!r},{ax.hi!r} "
        f"t={m.basis_t.family.token},{m.basis_t.dim},{at.lo!r},{at.hi!r} "
        f"contrast={fm.contrast!r} rank={fm.effective_rank} n={fm.n_used}"
    )
    lines = [header] + [f"{c:.17g}" for c in fm.coeffs]
    return "\n".join(lines) + "\n"


def loads_model(text: str) -> FittedModel:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith(MODEL_MAGIC):
        raise InputFormatError("line 1: not a curstat model file (bad header)")
    fields = dict(item.split("=", 1) for item in lines[0][len(MODEL_MAGIC):].split())
    try:
        axes = []
        for key in ("x", "t"):
            fam, dim, lo, hi = fields[key].split(",")
            axes.append(make_basis(parse_family(fam), int(dim), Interval(float(lo), float(hi))))
        model = TensorModel(*axes)
        coeffs = np.array([float(v) for v in lines[1:]])
        contrast = float(fields["contrast"])
        rank = int(fields["rank"])
        n_used = int(fields["n"])
    except (KeyError, ValueError) as exc:
        raise InputFormatError(f"malformed model file: {exc}") from exc
    if coeffs.size != model.dim:
        raise InputFormatError(f"model file holds {coeffs.size} coefficients, expected {model.dim}")
    return FittedModel(model, coeffs, contrast, rank, n_used)
