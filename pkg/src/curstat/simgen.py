"""Simulation designs for current-status data with a covariate.

Three generative models are provided, all built from gamma variables:

* ``mod1`` (additive): ``X ~ G(1, 1)``, ``Y = X + e``, ``T = X + e'`` with
  ``e, e' ~ G(3, 2)``; true ``F(x, y) = P(3, (y - x) / 2)``.
* ``mod2`` (multiplicative): ``X ~ G(1.5, 2)``, ``Y = X e``, ``T = X e'`` with
  ``e, e' ~ G(3, 1)``; true ``F(x, y) = P(3, y / x)``.
* ``mod2b`` (offset ``a``): as ``mod2`` with ``Y = a + X e``; true
  ``F(x, y) = P(3, (y - a) / x)``.

``G(k, s)`` is the gamma law with shape ``k`` and scale ``s`` and ``P`` the
regularized lower incomplete gamma function.

Random streams come from numpy's counter-based Philox bit generator seeded
through :class:`numpy.random.SeedSequence`; gamma variates are produced by
the Marsaglia-Tsang squeeze method on top of its normal and uniform draws.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import integrate

from .basis import Interval
from .errors import ConfigError, NumericalError
from .tensor_ls import Sample

CDF_EPS = 1e-15
CDF_MAX_ITER = 10_000


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Philox generator for ``seed``; extra ``keys`` select independent sub-streams."""
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class GammaParams:
    shape: float
    scale: float = 1.0

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ConfigError(f"gamma parameters must be positive, got k={self.shape}, scale={self.scale}")

    @property
    def mean(self) -> float:
        return self.shape * self.scale

    @property
    def var(self) -> float:
        return self.shape * self.scale**2


# -- sampling ----------------------------------------------------------------

def gamma_sample(rng: np.random.Generator, p: GammaParams) -> float:
    """One draw from ``G(k, scale)`` by Marsaglia-Tsang (boosted when ``k < 1``)."""
    k = p.shape
    boost = 1.0
    if k < 1:
        boost = rng.random() ** (1.0 / k)
        k += 1.0
    d = k - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        z = rng.standard_normal()
        v = 1.0 + c * z
        if v <= 0:
            continue
        v = v * v * v
        u = rng.random()
        if u < 1.0 - 0.0331 * z**4 or math.log(u) < 0.5 * z * z + d * (1.0 - v + math.log(v)):
            return d * v * boost * p.scale


def gamma_variates(rng: np.random.Generator, p: GammaParams, size: int) -> np.ndarray:
    """``size`` draws from ``G(k, scale)``; vectorized Marsaglia-Tsang."""
    k = p.shape
    boost = None
    if k < 1:
        boost = rng.random(size) ** (1.0 / k)
        k += 1.0
    d = k - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    out = np.empty(size)
    filled = 0
    while filled < size:
        need = size - filled
        # acceptance is above 95% for k >= 1; oversample a little to finish in one pass
        m = need + need // 16 + 16
        z = rng.standard_normal(m)
        u = rng.random(m)
        v = 1.0 + c * z
        pos = v > 0
        v3 = np.where(pos, v, 1.0) ** 3
        with np.errstate(divide="ignore", invalid="ignore"):
            ok = pos & (
                (u < 1.0 - 0.0331 * z**4)
                | (np.log(u) < 0.5 * z * z + d * (1.0 - v3 + np.log(v3)))
            )
        got = d * v3[ok][:need]
        out[filled:filled + got.size] = got
        filled += got.size
    if boost is not None:
        out *= boost
    return out * p.scale


# -- distribution functions --------------------------------------------------

def _lower_series(k: float, z: np.ndarray) -> np.ndarray:
    term = np.full(z.shape, 1.0 / k)
    total = term.copy()
    ap = k
    active = np.ones(z.shape, dtype=bool)
    for _ in range(CDF_MAX_ITER):
        ap += 1.0
        term = np.where(active, term * z / ap, 0.0)
        total += term
        active &= np.abs(term) >= np.abs(total) * CDF_EPS
        if not active.any():
            break
    else:
        raise NumericalError("incomplete gamma series did not converge")
    return total * np.exp(-z + k * np.log(z) - math.lgamma(k))


def _upper_fraction(k: float, z: np.ndarray) -> np.ndarray:
    # modified Lentz evaluation of the continued fraction for Q(k, z)
    tiny = 1e-300
    b = z + 1.0 - k
    c = np.full(z.shape, 1.0 / tiny)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(z.shape, dtype=bool)
    for i in range(1, CDF_MAX_ITER):
        an = -i * (i - k)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < tiny, tiny, d)
        c = b + an / c
        c = np.where(np.abs(c) < tiny, tiny, c)
        d = 1.0 / d
        delta = np.where(active, d * c, 1.0)
        h *= delta
        active &= np.abs(delta - 1.0) >= CDF_EPS
        if not active.any():
            break
    else:
        raise NumericalError("incomplete gamma continued fraction did not converge")
    return np.exp(-z + k * np.log(z) - math.lgamma(k)) * h


def regularized_lower_gamma(k: float, z) -> np.ndarray:
    """``P(k, z)`` for ``z >= 0``; zero for nonpositive ``z``."""
    z = np.asarray(z, dtype=float)
    out = np.zeros(z.shape)
    pos = z > 0
    small = pos & (z < k + 1.0)
    large = pos & ~small
    if small.any():
        out[small] = _lower_series(k, z[small])
    if large.any():
        out[large] = 1.0 - _upper_fraction(k, z[large])
    inf = np.isposinf(z)
    out[inf] = 1.0
    return np.clip(out, 0.0, 1.0)


def gamma_cdf(y, p: GammaParams):
    z = np.asarray(y, dtype=float) / p.scale
    with np.errstate(invalid="ignore"):
        out = regularized_lower_gamma(p.shape, np.where(np.isnan(z), 0.0, z))
    return out if out.shape else float(out)


def gamma_pdf(y, p: GammaParams):
    y = np.asarray(y, dtype=float)
    out = np.zeros(y.shape)
    pos = y > 0
    yp = y[pos] / p.scale
    out[pos] = np.exp((p.shape - 1.0) * np.log(yp) - yp - math.lgamma(p.shape)) / p.scale
    return out if out.shape else float(out)


def gamma_quantile(q: float, p: GammaParams) -> float:
    """Inverse of :func:`gamma_cdf` by bisection."""
    if not 0 < q < 1:
        raise ConfigError("quantile level must lie in (0, 1)")
    lo, hi = 0.0, p.mean + 10.0 * math.sqrt(p.var)
    while gamma_cdf(hi, p) < q:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gamma_cdf(mid, p) < q:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * hi:
            break
    return 0.5 * (lo + hi)


# -- designs -------------------------------------------------------------------

DESIGN_KINDS = ("mod1", "mod2", "mod2b")
MOD1_REGION = (Interval(0.1, 3.0), Interval(3.1, 19.0))
MOD2_REGION = (Interval(1.0, 10.0), Interval(1.0, 20.0))

K3_S2 = GammaParams(3.0, 2.0)
K3_S1 = GammaParams(3.0, 1.0)


@dataclass(frozen=True)
class SimDesign:
    kind: str = "mod1"
    offset: float = 0.0
    region: Optional[Tuple[Interval, Interval]] = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in DESIGN_KINDS:
            raise ConfigError(f"design must be one of {DESIGN_KINDS}, got {self.kind!r}")
        if self.offset < 0:
            raise ConfigError(f"offset must be >= 0, got {self.offset}")
        if self.offset and self.kind != "mod2b":
            raise ConfigError("an offset is only meaningful for design mod2b")
        if self.region is None:
            object.__setattr__(self, "region", MOD1_REGION if self.kind == "mod1" else MOD2_REGION)

    @property
    def label(self) -> str:
        if self.kind == "mod2b":
            return f"mod2b(a={self.offset:g})"
        return self.kind

    @property
    def covariate(self) -> GammaParams:
        return GammaParams(1.0, 1.0) if self.kind == "mod1" else GammaParams(1.5, 2.0)

    @property
    def noise(self) -> GammaParams:
        return K3_S2 if self.kind == "mod1" else K3_S1


@dataclass(frozen=True)
class FullSample:
    """Unfiltered draws, including the latent lifetimes ``y``."""

    x: np.ndarray
    y: np.ndarray
    t: np.ndarray
    delta: np.ndarray


def generate(design: SimDesign, n: int, rng: Optional[np.random.Generator] = None):
    """Draw ``n`` records; returns ``(full, sample)`` with ``sample`` restricted to the region."""
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    if rng is None:
        rng = make_rng(design.seed)
    x = gamma_variates(rng, design.covariate, n)
    eps = gamma_variates(rng, design.noise, n)
    eps_t = gamma_variates(rng, design.noise, n)
    if design.kind == "mod1":
        y, t = x + eps, x + eps_t
    else:
        y, t = design.offset + x * eps, x * eps_t
    delta = (y <= t).astype(np.int64)
    full = FullSample(x, y, t, delta)
    return full, Sample.from_arrays(x, t, delta, design.region)


def true_cdf(design: SimDesign, x, y):
    """Conditional c.d.f. ``P(Y <= y | X = x)`` of the design."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if design.kind == "mod1":
        return gamma_cdf(y - x, K3_S2)
    if np.any(x <= 0):
        raise ConfigError("designs mod2/mod2b need x > 0")
    return gamma_cdf((y - design.offset) / x, K3_S1)


# -- distance between the marginal densities of Y and T --------------------------

TAIL = 1e-8


def dist_a(a: float, tol: float = 0.01, tail: float = TAIL):
    """L1 distance between the densities of ``Y`` and ``T`` in design mod2b.

    Computes ``int_x f_X(x) int_u |f_{Y|X}(u) - f_{T|X}(u)| du dx`` over
    ``(0, inf)^2`` by nested adaptive quadrature, with the conditional
    densities ``g((u - a) / x) / x`` and ``g(u / x) / x``, ``g`` the G(3, 1)
    density. Both integrals are truncated at the ``1 - tail`` quantiles.
    Returns ``(value, error_bound)``; raises if the bound exceeds ``tol``.
    """
    if a < 0:
        raise ConfigError(f"offset must be >= 0, got {a}")
    if a == 0:
        return 0.0, 0.0
    fx = GammaParams(1.5, 2.0)
    x_max = gamma_quantile(1.0 - tail, fx)
    q3 = gamma_quantile(1.0 - tail, K3_S1)
    inner_err = [0.0]

    log_norm = math.lgamma(K3_S1.shape)

    def density(z):
        # G(3, 1) density, scalar path for the quadrature inner loop
        if z <= 0.0:
            return 0.0
        return math.exp(2.0 * math.log(z) - z - log_norm)

    def inner(x):
        def integrand(u):
            return abs(density((u - a) / x) - density(u / x)) / x

        val, err = integrate.quad(integrand, 0.0, a + x * q3, points=[a], limit=200)
        w = gamma_pdf(x, fx)
        inner_err[0] = max(inner_err[0], err)
        return val * w

    value, outer_err = integrate.quad(inner, 0.0, x_max, limit=200)
    # truncated mass: each tail drops at most `tail` from each density in L1
    bound = outer_err + inner_err[0] + 4.0 * tail
    if not np.isfinite(value) or bound > tol:
        raise NumericalError(f"dist({a}) quadrature estimate {value:.6g} with error bound {bound:.3g} > {tol}")
    return float(value), float(bound)
