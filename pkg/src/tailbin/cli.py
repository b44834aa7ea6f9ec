"""Command line interface: ``tailbin {fit,gof,compare,plotdata,sweep}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .binned_data import (
    BinnedDataError,
    BinnedSample,
    empirical_survival,
    fixture_from_selector,
    fixture_keys,
    parse_binned_csv,
    truncate,
)
from .compare import DEFAULT_ALPHA, DegenerateComparison, vuong_test, zipf_lrt
from .distributions import bin_probs, survival
from .estimation import LOGNORMAL_MIN_BINS, FitError, fit
from .gof import DEFAULT_REPLICATES, GofError, gof_pvalue
from .numerics import RNG_ALGORITHM

SWEEP_S_MIN = (5, 10, 20, 30, 50)
FAMILIES = ("pareto", "zipf", "lognormal")
ESTIMATORS = {"pareto": ("mle", "ols"), "zipf": ("fixed",), "lognormal": ("mle",)}
SEED_ENV = "TAILBIN_SEED"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    datasets: list[BinnedSample]
    s_min: list[int]
    models: list[tuple[str, str]]
    replicates: int = DEFAULT_REPLICATES
    seed: int = 0
    alpha: float = DEFAULT_ALPHA
    fmt: str = "json"
    output: str | None = None
    jobs: int = 1
    extra: dict = field(default_factory=dict)

    def validate(self):
        if self.replicates < 1:
            raise ConfigError(f"--replicates must be >= 1, got {self.replicates}")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"--alpha must be in (0, 1), got {self.alpha}")
        for ds in self.datasets:
            for s in self.s_min:
                if s not in ds.boundaries:
                    raise ConfigError(f"--smin {s} is not a boundary of {ds.name} {list(ds.boundaries)}")


# ------------------------------------------------------------------ records


def _clean(value):
    """JSON-safe copy: non-finite floats become null."""
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def _record(dataset, s_min, family, estimator, test, seed, **payload):
    rec = {"dataset": dataset, "s_min": s_min, "family": family, "estimator": estimator,
           "test": test, "seed": seed}
    rec.update(payload)
    return rec


def _error(exc):
    out = {"type": type(exc).__name__, "message": str(exc)}
    details = getattr(exc, "details", None)
    if details:
        out["details"] = details
    return out


def _sort_key(rec):
    return (rec["dataset"], rec["s_min"], rec["family"], rec["estimator"], rec["test"])


def _fit_cell(ds, s_min, family, estimator):
    t = truncate(ds, s_min, LOGNORMAL_MIN_BINS if family == "lognormal" else 2)
    return t, fit(t, family, estimator)


def run_cell(ds: BinnedSample, s_min: int, cfg: RunConfig, do_fit=True, do_gof=False,
             do_compare=False) -> list[dict]:
    """All records for one (dataset, s_min) cell. Failures become error records."""
    records, fits = [], {}
    name = ds.name
    for family, estimator in cfg.models:
        test = "gof" if do_gof else "fit"
        if not (do_fit or do_gof):
            break
        try:
            t, res = _fit_cell(ds, s_min, family, estimator)
            fits[(family, estimator)] = res
            payload = {"fit": res.summary()}
            if do_gof:
                payload["gof"] = gof_pvalue(family, estimator, t, cfg.replicates, cfg.seed,
                                            fit_result=res).as_dict()
            records.append(_record(name, s_min, family, estimator, test, cfg.seed, **payload))
        except (FitError, GofError, BinnedDataError, ValueError) as exc:
            records.append(_record(name, s_min, family, estimator, test, cfg.seed,
                                   error=_error(exc), fatal=True))
    if do_compare:
        records.extend(_compare_cell(ds, s_min, cfg, fits))
    return records


def _compare_cell(ds, s_min, cfg, fits):
    out = []
    name = ds.name

    def get(family, estimator):
        if (family, estimator) not in fits:
            fits[(family, estimator)] = _fit_cell(ds, s_min, family, estimator)[1]
        return fits[(family, estimator)]

    try:
        t = truncate(ds, s_min)
        lrt = zipf_lrt(t, get("pareto", "mle"))
        out.append(_record(name, s_min, "zipf-vs-pareto", "mle", "lrt", cfg.seed, lrt=lrt.as_dict()))
    except (FitError, BinnedDataError, ValueError) as exc:
        out.append(_record(name, s_min, "zipf-vs-pareto", "mle", "lrt", cfg.seed,
                           error=_error(exc), fatal=True))
    for a in (("pareto", "mle"), ("zipf", "fixed")):
        label = f"{a[0]}-vs-lognormal"
        try:
            t = truncate(ds, s_min, LOGNORMAL_MIN_BINS)
            rep = vuong_test(get(*a), get("lognormal", "mle"), t, cfg.alpha)
            out.append(_record(name, s_min, label, "mle", "vuong", cfg.seed, vuong=rep.as_dict()))
        except DegenerateComparison as exc:
            out.append(_record(name, s_min, label, "mle", "vuong", cfg.seed,
                               error=_error(exc), degenerate=True, fatal=False))
        except (FitError, BinnedDataError, ValueError) as exc:
            out.append(_record(name, s_min, label, "mle", "vuong", cfg.seed,
                               error=_error(exc), fatal=True))
    return out


def _run_cell_job(args):
    ds, s_min, cfg, flags = args
    return run_cell(ds, s_min, cfg, **flags)


def run_grid(cfg: RunConfig, **flags) -> list[dict]:
    jobs = [(ds, s, cfg, flags) for ds in cfg.datasets for s in cfg.s_min]
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            chunks = list(pool.map(_run_cell_job, jobs))
    else:
        chunks = [_run_cell_job(j) for j in jobs]
    records = [r for chunk in chunks for r in chunk]
    return sorted(records, key=_sort_key)


def make_report(command: str, cfg: RunConfig, records: list[dict]) -> dict:
    meta = {
        "tool": "tailbin",
        "version": __version__,
        "command": command,
        "seed": cfg.seed,
        "replicates": cfg.replicates,
        "alpha": cfg.alpha,
        "rng": RNG_ALGORITHM,
        "datasets": [ds.name for ds in cfg.datasets],
        "s_min": list(cfg.s_min),
    }
    return {"meta": meta, "records": records}


def has_fatal(report: dict) -> bool:
    return any(rec.get("fatal") for rec in report["records"])


# ------------------------------------------------------------------ output


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, list):
            out[key] = ";".join(str(x) for x in v)
        else:
            out[key] = v
    return out


def report_to_csv(report: dict) -> str:
    rows = [_flatten(r) for r in report["records"]]
    head = ["dataset", "s_min", "family", "estimator", "test", "seed"]
    rest = sorted({k for r in rows for k in r} - set(head))
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=head + rest, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r.get(k) is None else repr(r[k]) if isinstance(r.get(k), float) else r[k])
                    for k in head + rest})
    return buf.getvalue()


def render(report: dict, fmt: str) -> str:
    if fmt == "csv":
        return report_to_csv(report)
    return json.dumps(_clean(report), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _emit(text: str, output: str | None):
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def table2_text(cfg: RunConfig) -> str:
    """Bin probabilities in percent (one decimal): empirical, then each fitted model."""
    lines = []
    for ds in cfg.datasets:
        for s in cfg.s_min:
            t = truncate(ds, s)
            cols, names = [[100.0 * h / t.n for h in t.counts]], ["empirical"]
            for family, estimator in cfg.models:
                try:
                    res = _fit_cell(ds, s, family, estimator)[1]
                except (FitError, BinnedDataError, ValueError):
                    continue
                cols.append(list(100.0 * bin_probs(res.params, t.boundaries)))
                names.append(f"{family}-{estimator}")
            lines.append(f"# {ds.name} s_min={s} n={t.n}")
            lines.append("bin," + ",".join(names))
            b = [int(x) for x in t.boundaries]
            for i, lo in enumerate(b):
                label = f"{lo}-{b[i + 1] - 1}" if i + 1 < len(b) else f"{lo}+"
                lines.append(label + "," + ",".join(f"{c[i]:.1f}" for c in cols))
    return "\n".join(lines) + "\n"


def clamp(value: float, limit: float | None) -> float:
    if limit is None:
        return value
    return max(-limit, min(limit, value))


def plotdata_csv(cfg: RunConfig, kind: str = "survival", limit: float | None = None) -> tuple[str, bool]:
    """Plot-ready CSV. ``survival``: empirical and model survival at each boundary.
    ``vuong``: normalized log-likelihood ratios, optionally clamped to ``+-limit``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    failed = False
    if kind == "vuong":
        w.writerow(["dataset", "s_min", "comparison", "r_n", "threshold"])
        from .compare import vuong_threshold
        T = vuong_threshold(cfg.alpha)
        for ds in cfg.datasets:
            for s in cfg.s_min:
                for rec in _compare_cell(ds, s, cfg, {}):
                    if rec["test"] != "vuong":
                        continue
                    if "vuong" not in rec:
                        failed |= bool(rec.get("fatal"))
                        continue
                    w.writerow([ds.name, s, rec["family"], repr(clamp(rec["vuong"]["r_n"], limit)), repr(T)])
        return buf.getvalue(), failed
    names = [f"{f}_{e}" for f, e in cfg.models]
    w.writerow(["dataset", "s_min", "boundary", "empirical_survival"] + names)
    for ds in cfg.datasets:
        for s in cfg.s_min:
            t = truncate(ds, s)
            models = []
            for family, estimator in cfg.models:
                try:
                    models.append(_fit_cell(ds, s, family, estimator)[1].params)
                except (FitError, BinnedDataError, ValueError):
                    models.append(None)
                    failed = True
            for b, p in empirical_survival(t):
                row = [ds.name, s, b, repr(float(p))]
                row += ["" if m is None else repr(float(survival(m, b))) for m in models]
                w.writerow(row)
    return buf.getvalue(), failed


# ------------------------------------------------------------------ parsing


def _int_list(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def _common(p: argparse.ArgumentParser, sweep=False):
    src = p.add_argument_group("input")
    src.add_argument("--fixture", action="append", default=[], metavar="GROUP:YEAR",
                     help="built-in firm-size table column, e.g. all:1996 (repeatable)")
    src.add_argument("--input", action="append", default=[], metavar="CSV",
                     help="CSV file with header 'lower,count' (repeatable)")
    if sweep:
        src.add_argument("--input-dir", help="directory of CSV files, one dataset each")
    p.add_argument("--smin", action="append", type=_int_list, default=[],
                   help="lower bound(s) s_min; repeat or comma-separate")
    p.add_argument("--family", action="append", choices=FAMILIES, default=[])
    p.add_argument("--estimator", action="append", choices=("mle", "ols", "fixed"), default=[])
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--seed", type=int, default=None, help=f"master seed (fallback: ${SEED_ENV}, then 0)")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--format", dest="fmt", choices=("json", "csv"), default="json")
    p.add_argument("--output", "-o")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for independent cells")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tailbin", description=__doc__)
    parser.add_argument("--version", action="version", version=f"tailbin {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("fit", help="fit Pareto/Zipf/lognormal models")
    _common(p)
    p.add_argument("--table2", action="store_true", help="print bin probabilities in percent")
    p = sub.add_parser("gof", help="fits plus bootstrap goodness-of-fit p-values")
    _common(p)
    p = sub.add_parser("compare", help="Vuong tests and the k=1 likelihood ratio test")
    _common(p)
    p = sub.add_parser("plotdata", help="CSV of survival curves or Vuong statistics")
    _common(p)
    p.add_argument("--kind", choices=("survival", "vuong"), default="survival")
    p.add_argument("--clamp", type=float, default=None, help="clamp Vuong r_n to +-CLAMP")
    p = sub.add_parser("sweep", help="fit + gof + compare over a grid of datasets and s_min")
    _common(p, sweep=True)
    return parser


def _models(families, estimators):
    families = families or list(FAMILIES)
    models = []
    for fam in dict.fromkeys(families):
        allowed = ESTIMATORS[fam]
        chosen = [e for e in estimators if e in allowed] if estimators else list(allowed)
        if estimators and not chosen:
            if fam == "zipf":
                chosen = ["fixed"]
            else:
                raise ConfigError(f"estimator(s) {estimators} not available for {fam}; use {allowed}")
        models += [(fam, e) for e in chosen]
    return models


def config_from_args(args) -> RunConfig:
    datasets = []
    for sel in args.fixture:
        datasets.append(fixture_from_selector(sel))
    paths = list(args.input)
    if getattr(args, "input_dir", None):
        paths += sorted(str(p) for p in Path(args.input_dir).glob("*.csv"))
    for path in paths:
        text = Path(path).read_text(encoding="utf-8")
        datasets.append(parse_binned_csv(text, {"name": Path(path).stem, "source": str(path)}))
    if not datasets:
        if args.command == "sweep":
            datasets = [fixture_from_selector(k) for k in fixture_keys()]
        else:
            raise ConfigError("no input: give --fixture GROUP:YEAR or --input FILE")
    s_min = [s for group in args.smin for s in group]
    if not s_min:
        s_min = list(SWEEP_S_MIN) if args.command in ("sweep",) else [20]
    seed = args.seed
    if seed is None:
        env = os.environ.get(SEED_ENV)
        try:
            seed = int(env) if env else 0
        except ValueError:
            raise ConfigError(f"${SEED_ENV} must be an integer, got {env!r}") from None
    replicates = args.replicates if args.replicates is not None else DEFAULT_REPLICATES
    cfg = RunConfig(datasets, list(dict.fromkeys(s_min)), _models(args.family, args.estimator),
                    replicates, seed, args.alpha, args.fmt, args.output, max(1, args.jobs))
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (ConfigError, BinnedDataError, OSError, ValueError) as exc:
        err = {"meta": {"tool": "tailbin", "version": __version__, "command": args.command},
               "records": [], "error": _error(exc)}
        sys.stdout.write(json.dumps(err, indent=2, sort_keys=True) + "\n")
        print(f"tailbin: error: {exc}", file=sys.stderr)
        return 2

    if args.command == "fit" and args.table2:
        _emit(table2_text(cfg), cfg.output)
        return 0
    if args.command == "plotdata":
        text, failed = plotdata_csv(cfg, args.kind, args.clamp)
        _emit(text, cfg.output)
        return 1 if failed else 0

    flags = {
        "fit": dict(do_fit=True),
        "gof": dict(do_gof=True),
        "compare": dict(do_fit=False, do_compare=True),
        "sweep": dict(do_gof=True, do_compare=True),
    }[args.command]
    records = run_grid(cfg, **flags)
    report = make_report(args.command, cfg, records)
    _emit(render(report, cfg.fmt), cfg.output)
    return 1 if has_fatal(report) else 0


if __name__ == "__main__":
    sys.exit(main())
