"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` to see the verdict lines inline.
"""
import math
import time

import numpy as np
import pytest

from curstat.basis import Interval, PiecewisePoly
from curstat.rearrange import rearrange_estimator
from curstat.risk import l2_risk_values, midpoints, nu_n_diagnostic, rate_fit, rate_fit_reports, risk_study
from curstat.selection import CollectionSpec, clamp, penalty, select
from curstat.simgen import (
    GammaParams,
    SimDesign,
    dist_a,
    gamma_cdf,
    gamma_variates,
    generate,
    make_rng,
    true_cdf,
)
from curstat.tensor_ls import fit, tensor_model

from .oracles import UNIT, cell_mean_oracle, dense_design, projection, random_sample

HIST = PiecewisePoly(0)


def report(capsys, tag, ok, detail):
    with capsys.disabled():
        print(f"\n{tag} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


def test_ac01_dist_reference_values(capsys):
    start = time.perf_counter()
    want = {0.0: 0.0, 2.0: 0.63, 5.0: 1.12, 10.0: 1.54}
    got = {a: dist_a(a)[0] for a in want}
    elapsed = time.perf_counter() - start
    worst = max(abs(got[a] - want[a]) for a in want)
    shown = ", ".join(f"{a:g}:{got[a]:.4f}" for a in want)
    report(capsys, "AC1", worst <= 0.03 and elapsed < 30, f"dist(a) {shown}; max dev {worst:.4f}; {elapsed:.1f}s")


def test_ac02_histogram_cell_means(capsys):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for seed in range(50):
        n = int(rng.integers(5, 501))
        d1, d2 = (int(v) for v in rng.integers(1, 17, size=2))
        region = (Interval(0.0, float(rng.uniform(0.5, 4))), Interval(1.0, 1.0 + float(rng.uniform(0.5, 10))))
        s = random_sample(seed, n, region, p=lambda x, t: 0.3 + 0.4 * (x > region[0].hi / 2))
        m = tensor_model(HIST, d1, HIST, d2, region)
        fm = fit(s, m)
        means, _ = cell_mean_oracle(m.basis_x.cell_edges(), m.basis_t.cell_edges(), s)
        xm = midpoints(region[0], d1)[:, None]
        um = midpoints(region[1], d2)[None, :]
        worst = max(worst, float(np.abs(fm.evaluate(xm, um) - means).max()))
        # at the sample points too
        i = m.basis_x.cell_index(s.x)
        j = m.basis_t.cell_index(s.t)
        worst = max(worst, float(np.abs(fm.evaluate(s.x, s.t) - means[i, j]).max()))
    report(capsys, "AC2", worst <= 1e-10, f"50 samples, max |fit - cell mean| = {worst:.2e}")


def test_ac03_rank_deficient_projection(capsys):
    rng = np.random.default_rng(77)
    families = [(PiecewisePoly(1), PiecewisePoly(1)), (HIST, PiecewisePoly(2)), (PiecewisePoly(1), HIST), (HIST, HIST)]
    # at >= 4 pieces per axis some tensor cells miss both boxes
    boxes = [(0.0, 0.4, 0.0, 0.5), (0.6, 1.0, 0.3, 1.0)]
    worst, deficient = 0.0, 0
    for seed in range(50):
        fx, ft = families[seed % len(families)]
        d1 = (fx.degree + 1) * int(rng.choice([4, 8]))
        d2 = (ft.degree + 1) * int(rng.choice([4, 8]))
        s = random_sample(1000 + seed, int(rng.integers(60, 400)), UNIT, p=lambda x, t: t, occupied=boxes)
        m = tensor_model(fx, d1, ft, d2, UNIT)
        fm = fit(s, m)
        design = dense_design(m, s)
        deficient += fm.effective_rank < m.dim
        worst = max(worst, float(np.abs(fm.evaluate(s.x, s.t) - projection(design, s.delta.astype(float))).max()))
    ok = worst <= 1e-8 and deficient == 50
    report(capsys, "AC3", ok, f"50 instances ({deficient} rank deficient), max |fit - projection| = {worst:.2e}")


def test_ac04_penalty_and_argmin(capsys):
    bad = 0
    runs = 0
    for seed in range(12):
        design = SimDesign(("mod1", "mod2")[seed % 2])
        _, s = generate(design, 400 + 150 * seed, make_rng(seed, 4))
        for theta in (2.0, 2.5, 3.0):
            res = select(s, CollectionSpec(theta=theta, budget=("sqrt_n_over_log_n", "unbounded")[seed % 2]))
            runs += 1
            for r in res.per_model:
                bad += r.penalty != theta * r.dim / (4 * s.n)
                bad += r.penalty != penalty(theta, r.dim, s.n)
                bad += r.criterion != r.contrast + r.penalty
            crit = np.array([r.criterion for r in res.per_model])
            chosen = res.per_model[res.chosen_index]
            bad += chosen.criterion != crit.min()
            bad += (chosen.d1, chosen.d2) != res.chosen
    report(capsys, "AC4", bad == 0, f"{runs} selections, {bad} penalty/argmin mismatches")


def _grid(region, k=100):
    ax, au = region
    return np.linspace(ax.lo, ax.hi, k)[:, None], np.linspace(au.lo, au.hi, k)[None, :]


def test_ac05_clamp_contraction(capsys):
    violations, active = 0, 0
    for rep in range(100):
        design = SimDesign(("mod1", "mod2")[rep % 2])
        _, s = generate(design, 1000, make_rng(rep, 5))
        fm = select(s, CollectionSpec(budget="unbounded")).fitted
        xg, ug = _grid(design.region)
        truth = true_cdf(design, xg, ug)
        raw = fm.evaluate(xg, ug)
        clamped = clamp(fm).evaluate(xg, ug)
        violations += int((np.abs(clamped - truth) > np.abs(raw - truth)).sum())
        active += int((clamped != raw).sum())
    report(capsys, "AC5", violations == 0, f"100 fits x 100x100 grid, {violations} violations ({active} clamped nodes)")


def _slice_l2(values_at_mids, truth_at_mids, width):
    return float(np.sum((values_at_mids - truth_at_mids) ** 2) * width)


def test_ac06_rearrangement_contraction(capsys):
    worst_gain = -np.inf
    changed = 0
    nonmono = 0
    measure_bad = 0
    for rep in range(100):
        design = SimDesign(("mod1", "mod2")[rep % 2])
        _, s = generate(design, 1000, make_rng(rep, 6))
        est = clamp(select(s, CollectionSpec(budget="unbounded")).fitted)
        r = rearrange_estimator(est)
        ax, au = design.region
        d2 = est.model.basis_t.n_cells
        res = d2 * math.ceil(400 / d2)
        um = midpoints(au, res)
        width = au.length / res
        for x in np.linspace(ax.lo, ax.hi, 100):
            f = true_cdf(design, x, um)
            before = est.evaluate(np.full(res, x), um)
            after = r.evaluate(np.full(res, x), um)
            worst_gain = max(worst_gain, _slice_l2(after, f, width) - _slice_l2(before, f, width))
            sl, orig = r.slice_at(x), r.original_slice(x)
            nonmono += int((np.diff(sl.values) < 0).any())
            changed += int(not np.array_equal(after, before))
            # measure preservation: the distribution of values over the slice is unchanged
            levels = np.unique(orig.values)
            m_orig = np.array([orig.widths[orig.values <= c].sum() for c in levels])
            m_new = np.array([sl.widths[sl.values <= c].sum() for c in levels])
            measure_bad += int(np.abs(m_orig - m_new).max() > 1e-12 * au.length)
    ok = worst_gain <= 1e-9 and nonmono == 0 and measure_bad == 0
    detail = (
        f"100 fits x 100 slices ({changed} reordered); max error increase {worst_gain:.2e}; "
        f"{nonmono} non-monotone, {measure_bad} measure mismatches"
    )
    report(capsys, "AC6", ok, detail)


def test_ac07_censoring_symmetry(capsys):
    n = 100_000
    sym = {}
    for kind in ("mod1", "mod2"):
        full, _ = generate(SimDesign(kind, seed=7), n)
        sym[kind] = float(full.delta.mean())
    offsets = (0.0, 2.0, 5.0, 10.0)
    shift = [float(generate(SimDesign("mod2b", a, seed=7), n)[0].delta.mean()) for a in offsets]
    ok = all(abs(v - 0.5) <= 0.005 for v in sym.values()) and all(np.diff(shift) < 0)
    detail = (
        f"mean delta mod1 {sym['mod1']:.4f}, mod2 {sym['mod2']:.4f}; "
        f"mod2b a=0,2,5,10: {', '.join(f'{v:.4f}' for v in shift)}"
    )
    report(capsys, "AC7", ok, detail)


def test_ac08_risk_improves_with_n(capsys):
    start = time.perf_counter()
    medians = {}
    for kind in ("mod1", "mod2"):
        reports = risk_study(SimDesign(kind, seed=8), [500, 5000], 20, jobs=4)
        medians[kind] = [r.median for r in reports]
    elapsed = time.perf_counter() - start
    ok = all(m[1] < m[0] for m in medians.values()) and elapsed < 600
    detail = ", ".join(f"{k} median risk n=500 {m[0]:.3f} -> n=5000 {m[1]:.3f}" for k, m in medians.items())
    report(capsys, "AC8", ok, f"{detail}; {elapsed:.1f}s")


def test_ac09_risk_degrades_with_offset(capsys):
    offsets = (0.0, 2.0, 5.0, 10.0)
    med = [risk_study(SimDesign("mod2b", a, seed=9), [3000], 20, jobs=4)[0].median for a in offsets]
    ok = all(np.diff(med) >= 0)
    report(capsys, "AC9", ok, f"mod2b n=3000 median risk a=0,2,5,10: {', '.join(f'{v:.3f}' for v in med)}")


def test_ac10_nu_variance_bound(capsys):
    R = 2000
    design = SimDesign("mod1")
    _, s = generate(design, 1000, make_rng(10))
    f = true_cdf(design, s.x, s.t)
    rng = np.random.default_rng(10)
    tests = {}
    for k in range(100):
        d1, d2 = (int(v) for v in rng.choice([1, 2, 4, 8, 16], size=2))
        m = tensor_model(HIST, d1, HIST, d2, design.region)
        coeffs = rng.normal(size=m.dim)
        tests[f"h{k}"] = m.design_matrix(s.x, s.t) @ coeffs
    rows = nu_n_diagnostic(f, tests, reps=R, rng=make_rng(10, 1))
    slack = 1 + 5 / math.sqrt(R)
    violations = sum(r.variance > r.bound * slack for r in rows)
    worst = max(r.ratio for r in rows)

    n = 1000
    sat = nu_n_diagnostic(np.full(n, 0.5), {"one": np.ones(n)}, reps=R, rng=make_rng(10, 2))[0]
    z = (sat.variance - sat.bound) / sat.std_error
    ok = violations == 0 and abs(z) <= 5
    detail = f"100 test functions, {violations} above bound, max var/bound {worst:.3f}; saturation z = {z:+.2f}"
    report(capsys, "AC10", ok, detail)


def erlang_cdf(y, k, scale):
    z = y / scale
    return 1.0 - math.exp(-z) * sum(z**j / math.factorial(j) for j in range(k))


def test_ac11_gamma_machinery(capsys):
    worst = 0.0
    for k in (1, 2, 3):
        for scale in (1.0, 2.0):
            ys = np.linspace(0.0, 12 * k * scale, 100)
            got = gamma_cdf(ys, GammaParams(float(k), scale))
            want = np.array([erlang_cdf(y, k, scale) for y in ys])
            worst = max(worst, float(np.abs(got - want).max()))
    N = 1_000_000
    moment_z = []
    for k, scale in ((3.0, 2.0), (3.0, 1.0), (0.5, 1.5)):
        draws = gamma_variates(make_rng(11, int(10 * k)), GammaParams(k, scale), N)
        mean, var = k * scale, k * scale**2
        moment_z.append((draws.mean() - mean) / math.sqrt(var / N))
        moment_z.append((draws.var(ddof=1) - var) / (var * math.sqrt((2 + 6 / k) / N)))
    zmax = max(abs(z) for z in moment_z)
    ok = worst <= 1e-10 and zmax <= 5
    report(capsys, "AC11", ok, f"Erlang max error {worst:.2e}; moment |z| max {zmax:.2f} at 1e6 draws")


def test_ac12_rate_fit(capsys):
    ns = np.array([500, 1000, 2000, 4000, 8000])
    synth = [abs(rate_fit(ns, 2.0 * ns**e)[0] - e) for e in (-0.5, -2 / 3, -0.8)]
    reports = risk_study(SimDesign("mod1", seed=12), list(ns), 30, jobs=4)
    slope, _ = rate_fit_reports(reports)
    ok = max(synth) <= 1e-12 and slope < -0.15
    meds = ", ".join(f"{r.median:.3f}" for r in reports)
    report(capsys, "AC12", ok, f"synthetic slope error {max(synth):.1e}; mod1 medians {meds}; fitted slope {slope:.3f}")
