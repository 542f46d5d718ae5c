"""Command-line front end: ``curstat {simulate,fit,evaluate,study,dist}``.

Settings come from flags and, optionally, a TOML file given with
``--config``. Top-level keys of the file apply to every command, a table
named after the command (e.g. ``[study]``) overrides them, and flags override
both. Keys use the flag names with underscores (``quad_resolution``).

Exit codes: 0 success, 2 configuration error, 3 numerical or input-format
error, 4 I/O error.
"""
from __future__ import annotations

import argparse
import sys
from typing import Any, Callable, Dict, Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import csvio
from .basis import Interval, parse_family
from .errors import ConfigError, CurstatError
from .rearrange import DEFAULT_RESOLUTION, rearrange_estimator
from .risk import DEFAULT_QUAD_RESOLUTION, evaluate_grid, rate_fit_reports, risk_study
from .selection import BUDGET_RULES, CollectionSpec, clamp, select
from .simgen import DESIGN_KINDS, SimDesign, dist_a, generate
from .tensor_ls import dumps_model, loads_model

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 0, 2, 3, 4


# -- value parsing -------------------------------------------------------------------

def _int(v):
    if isinstance(v, bool):
        raise ValueError("expected an integer")
    if isinstance(v, float) and not v.is_integer():
        raise ValueError("expected an integer")
    return int(v)


def _float_list(v):
    if isinstance(v, (list, tuple)):
        return [float(x) for x in v]
    return [float(x) for x in str(v).split(",") if x.strip()]


def _int_list(v):
    if isinstance(v, (list, tuple)):
        return [_int(x) for x in v]
    return [int(x) for x in str(v).split(",") if x.strip()]


def _bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {v!r}")


def _region(v):
    vals = _float_list(v)
    if len(vals) != 4:
        raise ValueError("region needs four numbers: x_lo,x_hi,t_lo,t_hi")
    return (Interval(vals[0], vals[1]), Interval(vals[2], vals[3]))


def _choice(options):
    def conv(v):
        if v not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return v
    return conv


class Settings:
    """Merged settings for one command, with field-named validation errors."""

    def __init__(self, command: str, flags: Dict[str, Any], config_path: Optional[str]):
        merged: Dict[str, Any] = {}
        if config_path:
            with open(config_path, "rb") as fh:
                try:
                    data = tomllib.load(fh)
                except tomllib.TOMLDecodeError as exc:
                    raise ConfigError(f"config: cannot parse {config_path}: {exc}") from None
            merged.update({k: v for k, v in data.items() if not isinstance(v, dict)})
            merged.update(data.get(command, {}))
        merged.update({k: v for k, v in flags.items() if v is not None})
        self.command = command
        self._values = merged

    def get(self, name: str, conv: Callable = lambda v: v, default: Any = None, required: bool = False):
        if name not in self._values or self._values[name] is None:
            if required:
                raise ConfigError(f"{self.command}.{name}: required setting is missing (use --{name.replace('_', '-')})")
            return default
        try:
            return conv(self._values[name])
        except (ValueError, TypeError, ConfigError) as exc:
            raise ConfigError(f"{self.command}.{name}: {exc}") from None


def _design(s: Settings) -> SimDesign:
    kind = s.get("design", _choice(DESIGN_KINDS), required=True)
    offset = s.get("offset", float, 0.0)
    if offset < 0:
        raise ConfigError(f"{s.command}.offset: must be >= 0")
    return SimDesign(kind, offset, s.get("region", _region), s.get("seed", _int, 0))


def _collection(s: Settings) -> CollectionSpec:
    theta = s.get("theta", float, 2.0)
    if not theta > 1:
        raise ConfigError(f"{s.command}.theta: must be > 1, got {theta}")
    return CollectionSpec(
        family_x=s.get("family_x", parse_family, parse_family("hist")),
        family_t=s.get("family_t", parse_family, parse_family("hist")),
        dims_x=s.get("dims_x", _int_list),
        dims_t=s.get("dims_t", _int_list),
        budget=s.get("budget", _choice(BUDGET_RULES), "sqrt_n_over_log_n"),
        theta=theta,
    )


def _positive(s: Settings, name: str, default=None, required=False):
    v = s.get(name, _int, default, required)
    if v is not None and v < 1:
        raise ConfigError(f"{s.command}.{name}: must be >= 1, got {v}")
    return v


def _emit(text: str, path: Optional[str]):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _read(path: str) -> str:
    with open(path, "r", newline="") as fh:
        return fh.read()


# -- commands -----------------------------------------------------------------------

def cmd_simulate(s: Settings):
    design = _design(s)
    n = _positive(s, "n", required=True)
    full, sample = generate(design, n)
    y = None
    if s.get("emit_y", _bool, False):
        keep = design.region[0].contains(full.x) & design.region[1].contains(full.t)
        y = full.y[keep]
    _emit(csvio.sample_to_csv(sample, y), s.get("out"))
    full_out = s.get("full_out")
    if full_out:
        _emit(csvio.full_to_csv(full), full_out)


def _fit_region(s: Settings):
    region = s.get("region", _region)
    if region is None:
        kind = s.get("design", _choice(DESIGN_KINDS))
        if kind is None:
            raise ConfigError(f"{s.command}.region: required (or give --design to use its default region)")
        region = SimDesign(kind).region
    return region


def cmd_fit(s: Settings):
    spec = _collection(s)
    region = _fit_region(s)
    sample_path = s.get("sample", required=True)
    model_out = s.get("model_out", required=True)
    jobs = _positive(s, "jobs", 1)
    sample = csvio.read_sample_csv(_read(sample_path), region)
    result = select(sample, spec, jobs=jobs)
    _emit(dumps_model(result.fitted), model_out)
    diag = s.get("diagnostics_out")
    if diag:
        _emit(csvio.per_model_to_csv(result), diag)


def cmd_evaluate(s: Settings):
    fm = loads_model(_read(s.get("model", required=True)))
    nx = s.get("nx", _int, 100)
    nu = s.get("nu", _int, 100)
    if nx < 2 or nu < 2:
        raise ConfigError(f"{s.command}.nx/nu: grid needs at least 2 nodes per axis")
    est = clamp(fm) if s.get("clamp", _bool, True) else fm
    if s.get("rearrange", _bool, False):
        est = rearrange_estimator(est, resolution=_positive(s, "resolution", DEFAULT_RESOLUTION))
    ax, au = fm.model.region
    grid = evaluate_grid(est, np.linspace(ax.lo, ax.hi, nx), np.linspace(au.lo, au.hi, nu))
    _emit(csvio.grid_to_csv(grid), s.get("out"))


def cmd_study(s: Settings):
    base = _design(s)
    offsets = s.get("offsets", _float_list)
    if offsets and base.kind != "mod2b":
        raise ConfigError(f"{s.command}.offsets: only valid with design mod2b")
    designs = [SimDesign(base.kind, a, base.region, base.seed) for a in offsets] if offsets else [base]
    n_list = s.get("n", _int_list, required=True)
    if not n_list or min(n_list) < 2:
        raise ConfigError(f"{s.command}.n: need sample sizes >= 2")
    reps = _positive(s, "reps", required=True)
    spec = _collection(s)
    kwargs = dict(
        clamp=s.get("clamp", _bool, True),
        rearrange=s.get("rearrange", _bool, False),
        spec=spec,
        quad_resolution=_positive(s, "quad_resolution", DEFAULT_QUAD_RESOLUTION),
        jobs=_positive(s, "jobs", 1),
    )
    records, summary = [], ["design,n,reps,failures,mean,median,std"]
    for design in designs:
        reports = risk_study(design, n_list, reps, **kwargs)
        for rep in reports:
            records.extend(rep.records)
            summary.append(
                f"{rep.design},{rep.n},{rep.reps},{rep.failures},"
                f"{csvio.fmt(rep.mean)},{csvio.fmt(rep.median)},{csvio.fmt(rep.std)}"
            )
        if len(set(n_list)) >= 3:
            slope, intercept = rate_fit_reports(reports)
            summary.append(f"# {design.label} rate_fit slope={csvio.fmt(slope)} intercept={csvio.fmt(intercept)}")
    _emit(csvio.risk_records_to_csv(records), s.get("out"))
    summary_out = s.get("summary_out")
    if summary_out:
        _emit("\n".join(summary) + "\n", summary_out)


def cmd_dist(s: Settings):
    offsets = s.get("offsets", _float_list, [0.0, 2.0, 5.0, 10.0])
    tol = s.get("tol", float, 0.01)
    rows = []
    for a in offsets:
        if a < 0:
            raise ConfigError(f"{s.command}.offsets: offsets must be >= 0, got {a}")
        rows.append((a, *dist_a(a, tol=tol)))
    _emit(csvio.dist_table_to_csv(rows), s.get("out"))


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "evaluate": cmd_evaluate,
    "study": cmd_study,
    "dist": cmd_dist,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="curstat", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(p, *names, **kw):
        kw.setdefault("default", None)
        p.add_argument(*names, **kw)

    def common(p):
        add(p, "--config", help="TOML settings file")

    def design_opts(p):
        add(p, "--design", help=f"one of {', '.join(DESIGN_KINDS)}")
        add(p, "--offset", help="offset a for mod2b")
        add(p, "--seed")
        add(p, "--region", help="x_lo,x_hi,t_lo,t_hi")

    def collection_opts(p):
        add(p, "--family-x", dest="family_x", help="hist, polyS or trig")
        add(p, "--family-t", dest="family_t")
        add(p, "--dims-x", dest="dims_x", help="comma separated dimensions")
        add(p, "--dims-t", dest="dims_t")
        add(p, "--budget", help=f"one of {', '.join(BUDGET_RULES)}")
        add(p, "--theta")
        add(p, "--jobs")

    p = sub.add_parser("simulate", help="draw a current-status sample from a design")
    common(p)
    design_opts(p)
    add(p, "--n")
    add(p, "--out")
    add(p, "--full-out", dest="full_out", help="also write the unfiltered draws with y")
    add(p, "--emit-y", dest="emit_y", action="store_const", const=True, help="add the latent y column")

    p = sub.add_parser("fit", help="select and fit a model on a sample CSV")
    common(p)
    add(p, "--sample")
    add(p, "--design", help="take the region from this design")
    add(p, "--region")
    collection_opts(p)
    add(p, "--model-out", dest="model_out")
    add(p, "--diagnostics-out", dest="diagnostics_out")

    p = sub.add_parser("evaluate", help="evaluate a model file on a grid")
    common(p)
    add(p, "--model")
    add(p, "--nx")
    add(p, "--nu")
    add(p, "--no-clamp", dest="clamp", action="store_const", const=False)
    add(p, "--rearrange", action="store_const", const=True)
    add(p, "--resolution", help="u sampling for rearranging non-histogram models")
    add(p, "--out")

    p = sub.add_parser("study", help="Monte Carlo risk study")
    common(p)
    design_opts(p)
    add(p, "--offsets", help="comma separated offsets (mod2b)")
    add(p, "--n", help="comma separated sample sizes")
    add(p, "--reps")
    collection_opts(p)
    add(p, "--no-clamp", dest="clamp", action="store_const", const=False)
    add(p, "--rearrange", action="store_const", const=True)
    add(p, "--quad-resolution", dest="quad_resolution")
    add(p, "--out")
    add(p, "--summary-out", dest="summary_out")

    p = sub.add_parser("dist", help="L1 distance between the densities of Y and T (mod2b)")
    common(p)
    add(p, "--offsets")
    add(p, "--tol")
    add(p, "--out")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        settings = Settings(args.command, flags, args.config)
        COMMANDS[args.command](settings)
    except ConfigError as exc:
        print(f"curstat {args.command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CurstatError as exc:
        print(f"curstat {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"curstat {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
