"""Norms, L2 risk against a known truth, and Monte Carlo risk studies."""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .basis import Basis1D, Interval
from .errors import ConfigError, CurstatError
from .rearrange import rearrange_estimator
from .selection import CollectionSpec, clamp, select
from .simgen import SimDesign, generate, make_rng, true_cdf

DEFAULT_QUAD_RESOLUTION = 400


@dataclass(frozen=True)
class EstimateGrid:
    x_nodes: np.ndarray
    u_nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.x_nodes.size < 2 or self.u_nodes.size < 2:
            raise ConfigError("an estimate grid needs at least two nodes per axis")
        if self.values.shape != (self.x_nodes.size, self.u_nodes.size):
            raise ConfigError("grid values must have shape (len(x_nodes), len(u_nodes))")
        if not np.isfinite(self.values).all():
            raise ConfigError("grid values must be finite")


def evaluate_grid(est, x_nodes, u_nodes) -> EstimateGrid:
    x_nodes = np.asarray(x_nodes, dtype=float)
    u_nodes = np.asarray(u_nodes, dtype=float)
    values = _call(est, x_nodes[:, None], u_nodes[None, :])
    return EstimateGrid(x_nodes, u_nodes, np.asarray(values, dtype=float))


def _call(f, x, u):
    return f.evaluate(x, u) if hasattr(f, "evaluate") else f(x, u)


def empirical_norm_sq(values) -> float:
    """``(1/n) sum t(X_i, T_i)^2`` from the values of ``t`` on the sample."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ConfigError("empirical norm of an empty vector")
    return float(np.mean(v * v))


# -- integrated risk -------------------------------------------------------------

def _axis_resolution(basis: Optional[Basis1D], resolution: int) -> int:
    # refine a multiple of the histogram cell count so each quadrature cell sits in one histogram cell
    if basis is not None and basis.is_histogram:
        cells = basis.n_cells
        return cells * max(1, math.ceil(resolution / cells))
    return resolution


def quadrature_resolution(est, resolution: int = DEFAULT_QUAD_RESOLUTION) -> Tuple[int, int]:
    model = getattr(est, "model", None)
    if model is None:
        return resolution, resolution
    return _axis_resolution(model.basis_x, resolution), _axis_resolution(model.basis_t, resolution)


def midpoints(interval: Interval, res: int) -> np.ndarray:
    edges = np.linspace(interval.lo, interval.hi, res + 1)
    return 0.5 * (edges[:-1] + edges[1:])


def quadrature_nodes(region, res_x: int, res_u: int):
    ax, au = region
    return midpoints(ax, res_x), midpoints(au, res_u), ax.length * au.length / (res_x * res_u)


def l2_risk_values(est_vals, truth_vals, cell_area: float) -> float:
    diff = np.asarray(est_vals, dtype=float) - np.asarray(truth_vals, dtype=float)
    return float(np.sum(diff * diff) * cell_area)


def l2_risk(est, truth, region, quad_resolution: int = DEFAULT_QUAD_RESOLUTION) -> float:
    """``int_A (est - truth)^2`` by midpoint tensor quadrature.

    ``est`` and ``truth`` are callables ``f(x, u)`` or objects with an
    ``evaluate`` method. When ``est`` exposes a histogram model the grid is
    aligned with its cells, which makes the estimator part exact.
    """
    if quad_resolution < 1:
        raise ConfigError("quadrature resolution must be >= 1")
    res_x, res_u = quadrature_resolution(est, quad_resolution)
    xm, um, area = quadrature_nodes(region, res_x, res_u)
    xg, ug = xm[:, None], um[None, :]
    return l2_risk_values(_call(est, xg, ug), _call(truth, xg, ug), area)


# -- conditional variance of the centered process -----------------------------------

@dataclass(frozen=True)
class NuRow:
    function_id: str
    variance: float
    std_error: float
    bound: float

    @property
    def ratio(self) -> float:
        return self.variance / self.bound if self.bound > 0 else 0.0


def nu_n_values(delta, f_vals, t_vals) -> np.ndarray:
    """``nu_n(t) = (1/n) sum (delta_i - F_i) t_i``; ``delta`` may carry leading replicate axes."""
    resid = np.asarray(delta, dtype=float) - np.asarray(f_vals, dtype=float)
    return resid @ np.asarray(t_vals, dtype=float) / resid.shape[-1]


def nu_n_diagnostic(
    f_vals,
    test_values: Dict[str, np.ndarray],
    reps: int = 2000,
    rng: Optional[np.random.Generator] = None,
    chunk: int = 250,
) -> List[NuRow]:
    """Monte Carlo second moment of ``nu_n(t)`` with the sample ``(X, T)`` held fixed.

    ``f_vals`` holds the true ``F(X_i, T_i)``; each entry of ``test_values``
    holds ``t(X_i, T_i)``. Indicators are redrawn as Bernoulli(F_i). Since the
    mean of ``nu_n`` is exactly zero, its variance is estimated by the mean of
    ``nu_n^2``; the bound is ``||t||_n^2 / (4 n)``.
    """
    f_vals = np.asarray(f_vals, dtype=float)
    if reps < 2:
        raise ConfigError("nu_n diagnostic needs at least 2 replicates")
    rng = rng if rng is not None else make_rng(0)
    n = f_vals.size
    ids = list(test_values)
    tmat = np.column_stack([np.asarray(test_values[i], dtype=float) for i in ids])
    draws = []
    done = 0
    while done < reps:
        m = min(chunk, reps - done)
        delta = rng.random((m, n)) < f_vals
        draws.append(nu_n_values(delta, f_vals, tmat))
        done += m
    nu = np.vstack(draws)
    sq = nu * nu
    rows = []
    for j, fid in enumerate(ids):
        bound = empirical_norm_sq(tmat[:, j]) / (4 * n)
        rows.append(NuRow(fid, float(sq[:, j].mean()), float(sq[:, j].std(ddof=1) / math.sqrt(reps)), bound))
    return rows


# -- Monte Carlo risk studies ---------------------------------------------------------

@dataclass(frozen=True)
class ReplicateRecord:
    design: str
    n: int
    rep: int
    risk_raw: float
    risk_clamped: float
    risk_rearranged: float
    chosen_d1: int
    chosen_d2: int
    error: str = ""


@dataclass(frozen=True)
class RiskReport:
    design: str
    n: int
    pipeline: str
    records: List[ReplicateRecord] = field(repr=False)

    @property
    def reps(self) -> int:
        return len(self.records)

    @property
    def risks(self) -> np.ndarray:
        attr = {"raw": "risk_raw", "clamped": "risk_clamped", "rearranged": "risk_rearranged"}[self.pipeline]
        return np.array([getattr(r, attr) for r in self.records if not r.error])

    @property
    def failures(self) -> int:
        return sum(1 for r in self.records if r.error)

    @property
    def mean(self) -> float:
        return float(np.mean(self.risks))

    @property
    def median(self) -> float:
        return float(np.median(self.risks))

    @property
    def std(self) -> float:
        return float(np.std(self.risks))

    @property
    def dim_histogram(self) -> Dict[Tuple[int, int], int]:
        hist: Dict[Tuple[int, int], int] = {}
        for r in self.records:
            if not r.error:
                key = (r.chosen_d1, r.chosen_d2)
                hist[key] = hist.get(key, 0) + 1
        return dict(sorted(hist.items()))


def replicate_seed(base_seed: int, rep: int) -> int:
    return int(base_seed) ^ int(rep)


class _TruthCache:
    def __init__(self, design: SimDesign):
        self.design = design
        self._grids: Dict[Tuple[int, int], Tuple[np.ndarray, np.ndarray, float, np.ndarray]] = {}

    def grid(self, res_x: int, res_u: int):
        key = (res_x, res_u)
        if key not in self._grids:
            xm, um, area = quadrature_nodes(self.design.region, res_x, res_u)
            self._grids[key] = (xm, um, area, true_cdf(self.design, xm[:, None], um[None, :]))
        return self._grids[key]


def run_replicate(
    design: SimDesign,
    n: int,
    rep: int,
    spec: CollectionSpec,
    base_seed: int,
    quad_resolution: int = DEFAULT_QUAD_RESOLUTION,
    truth: Optional[_TruthCache] = None,
) -> ReplicateRecord:
    """Generate, select, post-process and score one Monte Carlo replicate."""
    truth = truth or _TruthCache(design)
    try:
        _, sample = generate(design, n, make_rng(replicate_seed(base_seed, rep), n))
        result = select(sample, spec)
        raw = result.fitted
        clamped = clamp(raw)
        rearranged = rearrange_estimator(clamped)
        risks = []
        for est in (raw, clamped, rearranged):
            res_x, res_u = quadrature_resolution(est, quad_resolution)
            xm, um, area, fvals = truth.grid(res_x, res_u)
            risks.append(l2_risk_values(est.evaluate(xm[:, None], um[None, :]), fvals, area))
        return ReplicateRecord(design.label, n, rep, *risks, *result.chosen)
    except CurstatError as exc:
        nan = float("nan")
        return ReplicateRecord(design.label, n, rep, nan, nan, nan, 0, 0, f"{type(exc).__name__}: {exc}")


def pipeline_name(clamp: bool = True, rearrange: bool = False) -> str:
    if rearrange:
        return "rearranged"
    return "clamped" if clamp else "raw"


def risk_study(
    design: SimDesign,
    n_list: Sequence[int],
    reps: int,
    *,
    clamp: bool = True,
    rearrange: bool = False,
    spec: CollectionSpec = CollectionSpec(),
    seed: Optional[int] = None,
    quad_resolution: int = DEFAULT_QUAD_RESOLUTION,
    jobs: int = 1,
) -> List[RiskReport]:
    """One :class:`RiskReport` per sample size, replicates seeded ``seed ^ rep``.

    Every record carries all three risks (raw, clamped, rearranged); the
    report's headline statistics follow the pipeline flags.
    """
    if not n_list:
        raise ConfigError("n_list must not be empty")
    if reps < 1:
        raise ConfigError("reps must be >= 1")
    base = design.seed if seed is None else seed
    truth = _TruthCache(design)
    tasks = [(n, rep) for n in n_list for rep in range(reps)]

    def run(task):
        n, rep = task
        return run_replicate(design, n, rep, spec, base, quad_resolution, truth)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(run, tasks))
    else:
        records = [run(t) for t in tasks]
    name = pipeline_name(clamp, rearrange)
    return [
        RiskReport(design.label, n, name, [r for r in records if r.n == n])
        for n in n_list
    ]


def rate_fit(ns: Sequence[float], risks: Sequence[float]) -> Tuple[float, float]:
    """Least-squares line through ``(log n, log risk)``; returns ``(slope, intercept)``."""
    ns = np.asarray(ns, dtype=float)
    risks = np.asarray(risks, dtype=float)
    keep = risks > 0
    if not keep.all():
        warnings.warn(f"rate_fit: dropping {int((~keep).sum())} nonpositive risk values", RuntimeWarning)
    ns, risks = ns[keep], risks[keep]
    if np.unique(ns).size < 3:
        raise ConfigError("rate_fit needs at least 3 distinct sample sizes with positive risk")
    slope, intercept = np.polyfit(np.log(ns), np.log(risks), 1)
    return float(slope), float(intercept)


def rate_fit_reports(reports: Sequence[RiskReport]) -> Tuple[float, float]:
    return rate_fit([r.n for r in reports], [r.median for r in reports])
