"""Penalized model selection over a collection of tensor-product models.

Every model ``m = (D1, D2)`` admitted by the dimension budget is fitted and
scored by ``contrast + theta * D_m / (4 n)``. The collection assumes the
per-axis dimension lists grow slowly (the default dyadic lists have
logarithmic size); arbitrary user lists are accepted unchecked.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .basis import Family, PiecewisePoly, Trigonometric
from .errors import ConfigError, CurstatError
from .tensor_ls import RANK_TOL, FittedModel, Sample, TensorModel, fit, tensor_model

BUDGET_RULES = ("sqrt_n_over_log_n", "quarter_power", "unbounded")


def default_dims(family: Family, max_level: int = 6) -> List[int]:
    """Dyadic dimension list for a family: ``(s+1) * 2**j`` or ``2**j + 1`` for trig."""
    if isinstance(family, Trigonometric):
        return [1] + [2**j + 1 for j in range(1, max_level + 1)]
    return [(family.degree + 1) * 2**j for j in range(max_level + 1)]


@dataclass(frozen=True)
class CollectionSpec:
    family_x: Family = PiecewisePoly(0)
    family_t: Family = PiecewisePoly(0)
    dims_x: Optional[Tuple[int, ...]] = None
    dims_t: Optional[Tuple[int, ...]] = None
    budget: str = "sqrt_n_over_log_n"
    theta: float = 2.0

    def __post_init__(self):
        if not self.theta > 1:
            raise ConfigError(f"theta must be > 1, got {self.theta}")
        if self.budget not in BUDGET_RULES:
            raise ConfigError(f"budget must be one of {BUDGET_RULES}, got {self.budget!r}")
        for name in ("dims_x", "dims_t"):
            dims = getattr(self, name)
            if dims is not None:
                if not dims:
                    raise ConfigError(f"{name} must not be empty")
                object.__setattr__(self, name, tuple(sorted(set(int(d) for d in dims))))

    @property
    def x_dims(self) -> Tuple[int, ...]:
        return self.dims_x if self.dims_x is not None else tuple(default_dims(self.family_x))

    @property
    def t_dims(self) -> Tuple[int, ...]:
        return self.dims_t if self.dims_t is not None else tuple(default_dims(self.family_t))


def budget_value(rule: str, n: int) -> float:
    """Upper bound used by the budget rule (product or per-axis); ``inf`` when unbounded."""
    if rule == "unbounded":
        return math.inf
    if n < 2:
        raise ConfigError(f"budget rule {rule!r} needs n >= 2, got n={n}")
    log_n = math.log(n)
    if rule == "sqrt_n_over_log_n":
        return math.sqrt(n) / log_n
    if rule == "quarter_power":
        return (n / log_n**2) ** 0.25
    raise ConfigError(f"unknown budget rule {rule!r}")


def admitted_pairs(spec: CollectionSpec, n: int) -> List[Tuple[int, int]]:
    bound = budget_value(spec.budget, n)
    pairs = []
    for d1 in spec.x_dims:
        for d2 in spec.t_dims:
            if spec.budget == "sqrt_n_over_log_n" and d1 * d2 > bound:
                continue
            if spec.budget == "quarter_power" and max(d1, d2) > bound:
                continue
            pairs.append((d1, d2))
    if not pairs:
        raise ConfigError(
            f"empty model collection: budget {spec.budget} gives bound {bound:.4g} at n={n}"
        )
    return pairs


def build_collection(spec: CollectionSpec, n: int, region) -> List[TensorModel]:
    """Admitted models in ``(D1 asc, D2 asc)`` order."""
    return [
        tensor_model(spec.family_x, d1, spec.family_t, d2, region)
        for d1, d2 in admitted_pairs(spec, n)
    ]


def penalty(theta: float, dim: int, n: int) -> float:
    return theta * dim / (4 * n)


@dataclass(frozen=True)
class ModelRow:
    d1: int
    d2: int
    dim: int
    contrast: float
    penalty: float
    criterion: float


@dataclass(frozen=True)
class ClampedEstimator:
    """Fitted surface truncated to ``[0, 1]``; the coefficients are left untouched."""

    fitted: FittedModel

    @property
    def model(self) -> TensorModel:
        return self.fitted.model

    def evaluate(self, x, u):
        return clamp_values(self.fitted.evaluate(x, u))


def clamp_values(values):
    return np.minimum(np.maximum(values, 0.0), 1.0)


def clamp(fm: FittedModel) -> ClampedEstimator:
    return ClampedEstimator(fm)


@dataclass(frozen=True)
class SelectionResult:
    chosen: Tuple[int, int]
    fitted: FittedModel
    per_model: List[ModelRow] = field(repr=False)
    clamped: bool = True
    n: int = 0
    theta: float = 2.0

    @property
    def chosen_index(self) -> int:
        return next(i for i, r in enumerate(self.per_model) if (r.d1, r.d2) == self.chosen)

    @property
    def estimator(self):
        return clamp(self.fitted) if self.clamped else self.fitted


class SelectionError(CurstatError):
    def __init__(self, dims, cause):
        super().__init__(f"fit failed for model (D1, D2) = {dims}: {cause}")
        self.dims = dims


def _argmin(rows: Sequence[ModelRow]) -> int:
    best = 0
    for i, row in enumerate(rows[1:], start=1):
        b = rows[best]
        if (row.criterion, row.dim) < (b.criterion, b.dim):
            best = i
    return best


def select(
    sample: Sample,
    spec: CollectionSpec = CollectionSpec(),
    *,
    clamped: bool = True,
    rank_tol: float = RANK_TOL,
    jobs: int = 1,
) -> SelectionResult:
    """Fit every admitted model and keep the minimiser of the penalized contrast.

    Ties on the criterion go to the smallest ``D_m``, then to the first model
    in collection order.
    """
    n = sample.n
    models = build_collection(spec, n, sample.region)

    def run(model):
        try:
            return fit(sample, model, rank_tol=rank_tol)
        except CurstatError as exc:
            raise SelectionError(model.dims, exc) from exc

    if jobs > 1 and len(models) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            fits = list(pool.map(run, models))
    else:
        fits = [run(m) for m in models]

    rows = []
    for model, fm in zip(models, fits):
        pen = penalty(spec.theta, model.dim, n)
        rows.append(ModelRow(*model.dims, model.dim, fm.contrast, pen, fm.contrast + pen))
    best = _argmin(rows)
    return SelectionResult(models[best].dims, fits[best], rows, clamped, n, spec.theta)
