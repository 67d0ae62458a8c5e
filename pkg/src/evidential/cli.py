"""Command-line entry point: ``evidential <command> [options]``.

Commands
--------
analyze    F test, delta-SIC, thresholds, post-data probabilities, verdicts
design     thresholds for a sample size, or the sample size for a threshold
bootstrap  bootstrap distributions of delta-SIC with replicate and EDF files
ncf        noncentral F density and distribution tables over a grid
simulate   averaged bootstrap confidence points for delta-K as cells grow
"""

import argparse
import csv
import io as _io
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import bootstrap as boot
from .errors import EvidentialError, NoSolutionError, SearchExhaustedError, SpecError
from .evidence import (
    EffectSpec,
    classify,
    critical_delta,
    delta_k_hat,
    design_thresholds,
    misleading_probs,
    post_data_p,
    sample_size,
    threshold_tail,
)
from .io import AnalysisConfig, load_csv, write_csv
from .linear_model import compare, fit
from .ncf import NcfParams, ncf_cdf, ncf_pdf, ncf_quantile

DEFAULT_DELTA = 0.5
SIG_FIGS = 4


def fmt(v):
    """Human-table formatting: 4 significant figures for floats."""
    if isinstance(v, (float, np.floating)):
        if math.isnan(v):
            return "nan"
        return f"{float(v):.{SIG_FIGS}g}"
    return str(v)


def render_table(header, rows):
    cells = [list(map(str, header))] + [[fmt(v) for v in row] for row in rows]
    widths = [max(len(r[j]) for r in cells) for j in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def render_csv(header, rows):
    buf = _io.StringIO()
    write_csv(buf, header, rows)
    return buf.getvalue().rstrip("\n")


class Output:
    """Collects report text and sends it to stdout or ``--out``."""

    def __init__(self, fmt_name):
        self.format = fmt_name
        self.parts = []

    def note(self, text):
        if self.format == "table":
            self.parts.append(text)

    def table(self, header, rows, title=None):
        if self.format == "csv":
            self.parts.append(render_csv(header, rows))
        else:
            if title:
                self.parts.append(title)
            self.parts.append(render_table(header, rows))

    def emit(self, out=None):
        text = "\n\n".join(self.parts) + "\n"
        if out:
            Path(out).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)


def _config(args):
    deltas = tuple(args.delta) if args.delta else (DEFAULT_DELTA,)
    if not args.delta and args.command == "analyze":
        print(f"note: no --delta given; using delta = {DEFAULT_DELTA}", file=sys.stderr)
    return AnalysisConfig(
        data=args.data,
        response=args.response,
        factors=_split(args.factors),
        covariates=_split(args.covariates),
        test=args.test,
        interactions=args.interactions,
        deltas=deltas,
        gamma1=args.gamma1,
        gamma2=args.gamma2,
        n_boot=args.nboot,
        seed=args.seed,
        ci_level=args.ci,
        out=args.out,
    )


def _split(text):
    return tuple(t.strip() for t in text.split(",") if t.strip()) if text else ()


# -- analyze ------------------------------------------------------------------


def analysis_rows(config):
    """Summary row and one row per delta of the analysis report."""
    data = load_csv(config)
    res = compare(data.X, data.y, data.spec)
    n, q, r = res.n, res.q, res.r
    favored = 1 if res.delta_sic <= 0 else 2
    rows = []
    for delta in config.deltas:
        effect = EffectSpec(delta, q, r)
        design = design_thresholds(n, effect, config.gamma1, config.gamma2)
        rows.append(
            [
                delta,
                design.lam,
                design.psi1,
                design.psi2,
                design.k1,
                design.k2,
                f"P{3 - favored}",
                post_data_p(res.delta_sic, n, effect, favored),
                str(classify(res.delta_sic, design)),
            ]
        )
    gamma = config.gamma2 if favored == 1 else config.gamma1
    try:
        crit = critical_delta(res.delta_sic, n, q, r, gamma, favored)
    except NoSolutionError:
        crit = float("nan")
    summary = [n, r, q, res.f_stat, res.p_value, res.g_squared, res.delta_sic,
               delta_k_hat(res.delta_sic, n), crit]
    return data, summary, rows


ANALYSIS_HEADER = ["delta", "lambda", "psi1", "psi2", "k1", "k2", "post", "p_post", "verdict"]
SUMMARY_HEADER = ["n", "r", "q", "f", "p", "g_squared", "delta_sic", "delta_k", "critical_delta"]


def cmd_analyze(args):
    config = _config(args)
    data, summary, rows = analysis_rows(config)
    out = Output(args.format)
    if args.format == "csv":
        out.table(SUMMARY_HEADER + ANALYSIS_HEADER, [summary + row for row in rows])
    else:
        dropped = ", ".join(data.X.column_labels[j] for j in data.spec.dropped) or "linear contrasts"
        out.note(f"data: {data.source}\nmodel 1 drops: {dropped}")
        out.table(SUMMARY_HEADER, [summary], title="Nested comparison")
        out.table(ANALYSIS_HEADER, rows, title=f"Evidence design (gamma1={config.gamma1}, gamma2={config.gamma2})")
    out.emit(config.out)
    return 0


# -- design -------------------------------------------------------------------


def _design_qr(args):
    if args.q is not None and args.r is not None:
        return args.q, args.r, None
    if args.q is not None or args.r is not None:
        raise SpecError("give both --q and --r, or neither (they are then read from the data)")
    data = load_csv(_config(args))
    return data.spec.q, data.X.r, data.X.n


DESIGN_HEADER = ["delta", "n", "lambda", "psi1", "psi2", "k1", "k2", "m1", "m2", "w1", "w2", "v1", "v2"]
SIZE_HEADER = ["delta", "which", "k", "gamma", "n", "tail_at_n_minus_1", "tail_at_n"]


def cmd_design(args):
    q, r, n_data = _design_qr(args)
    if not args.delta:
        print(f"note: no --delta given; using delta = {DEFAULT_DELTA}", file=sys.stderr)
    deltas = tuple(args.delta) if args.delta else (DEFAULT_DELTA,)
    status = 0
    out = Output(args.format)
    if args.k1 is None and args.k2 is None:
        n = args.n if args.n is not None else n_data
        if n is None:
            raise SpecError("thresholds mode needs --n (or a data file to take n from)")
        rows = []
        for delta in deltas:
            d = design_thresholds(n, EffectSpec(delta, q, r), args.gamma1, args.gamma2)
            t = misleading_probs(d)
            rows.append([delta, n, d.lam, d.psi1, d.psi2, d.k1, d.k2, t.m1, t.m2, t.w1, t.w2, t.v1, t.v2])
        out.table(DESIGN_HEADER, rows, title=f"Thresholds at n={n}, q={q}, r={r}")
    else:
        if args.k1 is not None and args.k2 is not None:
            raise SpecError("give only one of --k1 and --k2")
        which, k, gamma = ("k1", args.k1, args.gamma2) if args.k1 is not None else ("k2", args.k2, args.gamma1)
        rows = []
        for delta in deltas:
            effect = EffectSpec(delta, q, r)
            try:
                n = sample_size(k, which, effect, gamma, n_min=args.n_min, n_max=args.n_max)
            except SearchExhaustedError as exc:
                print(f"error: delta={delta}: {exc}", file=sys.stderr)
                rows.append([delta, which, k, gamma, "none", float("nan"), float("nan")])
                status = 1
                continue
            before = threshold_tail(k, which, n - 1, effect) if n - 1 > r else float("nan")
            rows.append([delta, which, k, gamma, n, before, threshold_tail(k, which, n, effect)])
        out.table(SIZE_HEADER, rows, title=f"Sample size for fixed {which}, q={q}, r={r}")
    out.emit(args.out)
    return status


# -- bootstrap ----------------------------------------------------------------

BOOT_HEADER = ["method", "n", "n_b", "failures", "mean", "median", "q05", "q95", "a_r", "ci_level", "ci_low", "ci_high"]


def run_bootstrap(method, data, n_b, seed):
    if method == "stratified":
        return boot.stratified_bootstrap(data.y.values, data.layout, data.X, data.spec, n_b, seed)
    full = fit(data.X, data.y)
    fn = boot.parametric_bootstrap if method == "parametric" else boot.residual_bootstrap
    return fn(full, data.X, data.spec, n_b, seed)


def summary_row(s, method):
    return [method, s.n, s.n_b, s.failures, s.mean, s.median, s.quantile(0.05), s.quantile(0.95),
            s.a_r, s.ci_level, s.ci_delta_k[0], s.ci_delta_k[1]]


def write_replicates(path, result):
    write_csv(path, ["index", "delta_sic", "delta_k"],
              ([i, float(v), float(v) / result.n] for i, v in enumerate(result.replicates)))


def write_edf(path, summary):
    reps = summary.sorted_replicates
    write_csv(path, ["delta_sic", "edf"], ([float(v), (i + 1) / reps.size] for i, v in enumerate(reps)))


def read_replicates(path, n, method="loaded", seed=0):
    """Rebuild a :class:`BootstrapResult` from a replicate file written by ``bootstrap``."""
    with open(path, encoding="utf-8", newline="") as fh:
        values = np.array([float(row["delta_sic"]) for row in csv.DictReader(fh)])
    return boot.BootstrapResult(values, n, seed, method, values.size)


def cmd_bootstrap(args):
    config = _config(args)
    data = load_csv(config)
    methods = list(dict.fromkeys(args.method or ["parametric", "stratified"]))
    if "all" in methods:
        methods = list(boot.METHODS)
    out_dir = Path(args.out) if args.out else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for method in methods:
        result = run_bootstrap(method, data, config.n_boot, config.seed)
        s = boot.summarize(result, config.ci_level)
        rows.append(summary_row(s, method))
        if out_dir:
            write_replicates(out_dir / f"replicates_{method}.csv", result)
            write_edf(out_dir / f"edf_{method}.csv", s)
    report = Output(args.format)
    report.table(BOOT_HEADER, rows, title=f"Bootstrap of delta-SIC (seed {config.seed})")
    if out_dir:
        write_csv(out_dir / "summary.csv", BOOT_HEADER, rows)
    report.emit()
    return 0


# -- ncf ----------------------------------------------------------------------

NCF_HEADER = ["curve", "n", "nu1", "nu2", "lambda", "x", "pdf", "cdf"]
QUANTILE_HEADER = ["curve", "n", "nu1", "nu2", "lambda", "prob", "quantile"]


def ncf_curves(q, r, delta2, ns):
    """(label, n, params) for each n plus the central curve at the smallest n."""
    curves = [(f"n={n}", n, NcfParams(q, n - r, n * delta2)) for n in ns]
    n0 = min(ns)
    curves.append(("central", n0, NcfParams(q, n0 - r, 0.0)))
    return curves


def cmd_ncf(args):
    ns = args.n or [24, 36, 48, 60]
    if min(ns) <= args.r:
        raise SpecError(f"every n must exceed r={args.r}")
    curves = ncf_curves(args.q, args.r, args.delta2, ns)
    out = Output(args.format)
    if args.quantiles:
        rows = [[label, n, p.nu1, p.nu2, p.lam, prob, ncf_quantile(p, prob)]
                for label, n, p in curves for prob in args.quantiles]
        out.table(QUANTILE_HEADER, rows)
    else:
        x = np.linspace(0.0, args.xmax, args.points + 1)[1:]
        rows = []
        for label, n, p in curves:
            pdf, cdf = ncf_pdf(p, x), ncf_cdf(p, x)
            rows.extend([label, n, p.nu1, p.nu2, p.lam, float(a), float(b), float(c)] for a, b, c in zip(x, pdf, cdf))
        out.table(NCF_HEADER, rows)
    out.emit(args.out)
    return 0


# -- simulate -----------------------------------------------------------------

SIM_HEADER = ["cell_size", "n", "method", "ci05", "ci50", "ci95", "pseudo_true"]


def cmd_simulate(args):
    config = _config(args)
    data = load_csv(config)
    full = fit(data.X, data.y)
    sizes = [int(s) for s in _split(args.cell_sizes)]
    points = boot.sample_size_curve(
        full, data.X, data.spec, data.layout, sizes,
        n_sim=args.nsim, n_b=config.n_boot, seed=config.seed,
        ci_level=config.ci_level, max_refits=args.max_refits,
    )
    rows = [[p.cell_size, p.n, p.method, p.ci05, p.ci50, p.ci95, p.pseudo_true] for p in points]
    out = Output(args.format)
    out.table(SIM_HEADER, rows, title="Averaged confidence points for delta-K")
    out.emit(config.out)
    return 0


# -- parser -------------------------------------------------------------------


def _data_options(p):
    p.add_argument("--data", default="citrus.csv", help="CSV file (default: bundled citrus data)")
    p.add_argument("--response", default="yield", help="response column")
    p.add_argument("--factors", default="variety,pesticide", help="comma-separated factor columns")
    p.add_argument("--covariates", default="", help="comma-separated numeric covariate columns")
    p.add_argument("--test", default="interaction",
                   help="interaction | drop:<term>[,<term>...] | contrast:<file>")
    p.add_argument("--interactions", action="store_true",
                   help="include the two-factor interaction in the full model for drop/contrast tests")


def _evidence_options(p):
    p.add_argument("--delta", type=float, action="append",
                   help=f"effect size per observation; repeatable (default {DEFAULT_DELTA})")
    p.add_argument("--gamma1", type=float, default=0.05, help="budget for M1 (default 0.05)")
    p.add_argument("--gamma2", type=float, default=0.05, help="budget for M2 (default 0.05)")


def _boot_options(p, n_boot):
    p.add_argument("--nboot", type=int, default=n_boot, help=f"bootstrap replicates (default {n_boot})")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--ci", type=float, default=0.90, help="confidence level for delta-K (default 0.90)")


def _format_option(p, default):
    p.add_argument("--format", choices=("table", "csv"), default=default)


def _probability(text):
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in (0, 1)")
    return v


def build_parser():
    parser = argparse.ArgumentParser(prog="evidential", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="analyze a data set")
    _data_options(p)
    _evidence_options(p)
    _boot_options(p, boot.DEFAULT_N_BOOT)
    _format_option(p, "table")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("design", help="pre-data thresholds or sample size")
    _data_options(p)
    _evidence_options(p)
    _boot_options(p, boot.DEFAULT_N_BOOT)
    _format_option(p, "table")
    p.add_argument("--q", type=int, help="number of restrictions")
    p.add_argument("--r", type=int, help="columns of the full design")
    p.add_argument("--n", type=int, help="sample size (thresholds mode)")
    p.add_argument("--k1", type=float, help="fixed k1 (sample-size mode)")
    p.add_argument("--k2", type=float, help="fixed k2 (sample-size mode)")
    p.add_argument("--n-min", type=int, help="start of the sample-size search")
    p.add_argument("--n-max", type=int, default=10**6, help="end of the sample-size search")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("bootstrap", help="bootstrap delta-SIC")
    _data_options(p)
    _evidence_options(p)
    _boot_options(p, boot.DEFAULT_N_BOOT)
    _format_option(p, "table")
    p.add_argument("--method", action="append", choices=(*boot.METHODS, "all"),
                   help="repeatable (default: parametric and stratified)")
    p.add_argument("--out", help="directory for replicate, EDF and summary CSV files")
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("ncf", help="noncentral F tables")
    p.add_argument("--q", type=int, default=6)
    p.add_argument("--r", type=int, default=12)
    p.add_argument("--delta2", type=float, default=0.25, help="squared effect size; lambda = n * delta2")
    p.add_argument("--n", type=int, nargs="+", help="sample sizes (default 24 36 48 60)")
    p.add_argument("--xmax", type=float, default=6.0)
    p.add_argument("--points", type=int, default=120)
    p.add_argument("--quantiles", type=_probability, nargs="+", help="tabulate quantiles instead of pdf/cdf")
    _format_option(p, "csv")
    p.add_argument("--out", help="write the table here instead of stdout")
    p.set_defaults(func=cmd_ncf)

    p = sub.add_parser("simulate", help="confidence points for delta-K as cells grow")
    _data_options(p)
    _evidence_options(p)
    _boot_options(p, boot.DEFAULT_N_BOOT)
    _format_option(p, "csv")
    p.add_argument("--cell-sizes", default="2,4,8", help="comma-separated observations per cell")
    p.add_argument("--nsim", type=int, default=boot.DEFAULT_N_SIM, help="simulated data sets per cell size")
    p.add_argument("--max-refits", type=int, default=boot.DEFAULT_MAX_REFITS, help="cap on total bootstrap refits")
    p.add_argument("--out", help="write the table here instead of stdout")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (EvidentialError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
