"""Command-line interface.

Subcommands::

    sncpa test FILE        run the tests on a CSV of loss differentials
    sncpa critvals         simulate a critical-value table
    sncpa replicate        rerun a published size or power experiment
    sncpa plot-power       power curves by n as CSV, SVG and PNG

Exit codes: 0 success, 1 input/usage/I-O error, 2 the statistic is
undefined on the data (zero range, singular normalizer, ...).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import limit, plots, reference
from .cache import CriticalValueCache, default_cache_dir, table_filename, write_table
from .dispatch import STAT_CHOICES, TestRequest, run_statistic, stat_label
from .errors import (
    ParseError,
    SncpaError,
    StatisticalDegeneracy,
    UnknownColumn,
)
from .hac import HacConfig
from .montecarlo import STANDARD_N, ExperimentGrid, power_curve, run_grid

log = logging.getLogger("sncpa")

EXIT_OK, EXIT_USAGE, EXIT_DEGENERATE = 0, 1, 2
MIN_ROWS, CAUTION_ROWS = 10, 50
QUICK_REPS = 1000
INDICATIVE_REPS = 1000


class UsageError(SncpaError):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; 2 is reserved for degenerate data."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# input


def read_table(path) -> dict[str, np.ndarray]:
    """Numeric columns of a UTF-8 CSV with a header row."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    except UnicodeDecodeError:
        raise ParseError(f"{path} is not UTF-8 text") from None
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise ParseError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise ParseError(f"duplicate column names in {path}")
    columns: dict[str, list] = {h: [] for h in header}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParseError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        for h, cell in zip(header, row):
            columns[h].append(cell.strip())
    return {h: np.array(v, dtype=object) for h, v in columns.items()}


def numeric_column(table: dict, name: str) -> np.ndarray:
    if name not in table:
        raise UnknownColumn(f"no column {name!r}; available: {', '.join(table)}")
    raw = table[name]
    out = np.empty(len(raw))
    for i, cell in enumerate(raw):
        try:
            out[i] = float(cell)
        except ValueError:
            raise ParseError(f"column {name!r}, data row {i + 1}: {cell!r} is not a number") from None
        if not math.isfinite(out[i]):
            raise ParseError(f"column {name!r}, data row {i + 1}: missing or non-finite value")
    return out


def _split(text: str | None) -> list[str]:
    return [s.strip() for s in text.split(",") if s.strip()] if text else []


def _floats(text: str) -> tuple:
    try:
        return tuple(float(s) for s in _split(text))
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> tuple:
    try:
        return tuple(int(s) for s in _split(text))
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def _cache(args) -> CriticalValueCache:
    return CriticalValueCache(args.cache_dir, allow_simulate=getattr(args, "simulate", False),
                              workers=getattr(args, "workers", 1))


# ---------------------------------------------------------------------------
# test


def _format_result(label: str, result, alpha: float) -> list[str]:
    cv = result.critical_values.get(alpha)
    decision = "reject" if result.decisions.get(alpha) else "do not reject"
    compare = f"|{label}|" if label == "T_DM" else label
    lines = [f"{label:<5} = {result.statistic:.6g}   q={result.q} tau={result.tau} n={result.n}"]
    if cv is not None:
        lines.append(f"      {compare} vs critical value {cv:.6g} at alpha={alpha:g}: {decision}")
    lines.append(f"      critical values: {result.provenance}")
    lines.extend(f"      warning: {w}" for w in result.warnings)
    return lines


def cmd_test(args) -> int:
    table = read_table(args.file)
    loss_col = args.loss_col or ("loss_diff" if "loss_diff" in table else next(iter(table)))
    loss = numeric_column(table, loss_col)
    h_cols = _split(args.h_cols)
    cond = np.column_stack([numeric_column(table, c) for c in h_cols]) if h_cols else None
    n = len(loss)
    if n < 2:
        raise ParseError(f"need at least 2 data rows, got {n}")
    if n < MIN_ROWS:
        log.warning("only %d rows: far too few for the asymptotic critical values", n)
    elif n < CAUTION_ROWS:
        log.warning("only %d rows: treat the asymptotic critical values with caution", n)

    levels = tuple(sorted({args.alpha, 0.10, 0.05, 0.01}, reverse=True))
    hac = HacConfig(bandwidth=args.bandwidth if args.bandwidth is not None else "auto",
                    prewhiten=args.prewhiten)
    request = TestRequest(loss, cond, args.intercept, args.tau, args.force_multistep, levels, hac)
    cache = _cache(args)
    stats = STAT_CHOICES if args.stat == "all" else (args.stat,)

    h_desc = ", ".join((["1"] if args.intercept else []) + h_cols) or "1"
    print(f"file: {args.file}   loss column: {loss_col}   h_t: ({h_desc})")
    results, status = {}, EXIT_OK
    for stat in stats:
        label = stat_label(stat)
        try:
            result = run_statistic(request, stat, cache)
        except StatisticalDegeneracy as exc:
            if len(stats) == 1:
                raise
            print(f"{label:<5}   undefined: {type(exc).__name__}: {exc}")
            status = EXIT_DEGENERATE
            continue
        except SncpaError as exc:
            if len(stats) == 1:
                raise
            print(f"{label:<5}   not computed: {type(exc).__name__}: {exc}")
            status = status or EXIT_USAGE
            continue
        results[label] = result
        print("\n".join(_format_result(label, result, args.alpha)))

    if args.json:
        doc = {"file": str(args.file), "loss_col": loss_col, "h_cols": h_cols,
               "intercept": args.intercept, "alpha": args.alpha,
               "results": {k: v.to_dict() for k, v in results.items()}}
        Path(args.json).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return status


# ---------------------------------------------------------------------------
# critvals

FAMILY_BUILDERS = {
    "range-ratio": lambda q, j: limit.range_ratio(q, j),
    "matrix-cusum": lambda q, j: limit.matrix_cusum(q, j),
    "component-range-sum": lambda q, j: limit.component_range_sum(q, j),
    "shao-scalar": lambda q, j: limit.shao_scalar(j),
}


def cmd_critvals(args) -> int:
    j = _floats(args.noncentrality) if args.noncentrality else None
    family = FAMILY_BUILDERS[args.family](args.q, j)
    if args.reps < QUICK_REPS:
        log.warning("reps=%d: quick table only, tail quantiles carry wide Monte Carlo error",
                    args.reps)
    table = limit.quantile_table(family, args.steps, args.reps, seed=args.seed,
                                 workers=args.workers)
    out = Path(args.out) if args.out else default_cache_dir()
    if out.suffix != ".json":
        out = out / table_filename(table)
    write_table(table, out)
    print(f"{family.label}  N={table.steps}  M={table.reps}  seed={table.seed}  "
          f"redraws={table.redraws}")
    print("prob      quantile      batched s.e.")
    for p, v, s in zip(table.probs, table.values, table.std_errors):
        print(f"{p:<8g}  {v:<12.6g}  {s:.3g}")
    print(f"wrote {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# replicate and plot-power


def _curves_csv(curves: list[dict]) -> str:
    lines = ["statistic,tau,n,power"]
    for c in curves:
        lines.extend(f"{c['statistic']},{c['tau']},{n},{p!r}" for n, p in zip(c["n"], c["power"]))
    return "\n".join(lines) + "\n"


def _named(stem: Path, suffix: str) -> Path:
    # stems carry decimals like "param0.2", so Path.with_suffix would cut them
    return stem.parent / (stem.name + suffix)


def _write_figures(curves: list[dict], stem: Path, title: str) -> list[Path]:
    svg = _named(stem, ".svg")
    svg.write_text(plots.power_svg(curves, title))
    png = plots.power_png(curves, _named(stem, ".png"), title)
    return [svg, png]


def _comparison_csv(rows) -> str:
    lines = ["param,n,statistic,level,ours,reference,abs_diff,tolerance,pass"]
    for c in rows:
        lines.append(f"{c.param},{c.n},{c.statistic},{c.level:g},{c.ours!r},{c.reference!r},"
                     f"{c.diff:.6f},{c.tolerance:.6f},{'pass' if c.passed else 'FAIL'}")
    return "\n".join(lines) + "\n"


def cmd_replicate(args) -> int:
    grid = reference.grid_for(args.table, reps=args.reps, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    indicative = args.reps < INDICATIVE_REPS
    if indicative:
        log.warning("reps=%d: results are indicative only", args.reps)
    report = run_grid(grid, _cache(args), workers=args.workers)
    stem = out / args.table
    _named(stem, ".csv").write_text(report.to_csv())
    _named(stem, ".json").write_text(report.to_json())
    written = [_named(stem, ".csv"), _named(stem, ".json")]
    tag = " (indicative only)" if indicative else ""
    curves = power_curve(report, 0.05)
    for param in grid.params:
        chosen = [c for c in curves if c["param"] == param]
        written += _write_figures(chosen, out / f"{args.table}-param{param:g}",
                                  f"{args.table}, parameter {param:g}, 5% level")

    if args.table.endswith("power"):
        checks = reference.power_checks(curves, grid.reps)
        for c in checks:
            extra = f" inversions={c['inversions']}" if "inversions" in c else ""
            print(f"param={c['param']:g} tau={c['tau']} {c['statistic']:<5} {c['check']:<16}"
                  f" power@n={c['n'][-1]}: {c['power'][-1]:.3f}{extra}  "
                  f"{'pass' if c['passed'] else 'FAIL'}{tag}")
        ok = all(c["passed"] for c in checks)
    else:
        rows = reference.compare_size(report, args.table)
        (out / f"{args.table}-comparison.csv").write_text(_comparison_csv(rows))
        written.append(out / f"{args.table}-comparison.csv")
        rate = reference.pass_rate(rows)
        ok = rate >= reference.CELL_PASS_RATE
        print(f"self-normalized cells within tolerance: {rate:.1%} "
              f"(need {reference.CELL_PASS_RATE:.0%}) {'pass' if ok else 'FAIL'}{tag}")
        hac = [c for c in rows if c.statistic in reference.HAC_STATISTICS]
        print(f"HAC cells within +-{reference.HAC_TOLERANCE}: "
              f"{sum(c.passed for c in hac)}/{len(hac)}")
        over = reference.over_rejection_check(report, args.table)
        print(f"T_GW > 0.075 and Q2 in [0.04, 0.07] at 5%: "
              f"{sum(r['gw_over'] and r['q2_in_band'] for r in over)}/{len(over)} cells")
    print(f"overall: {'pass' if ok else 'FAIL'}{tag}")
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_plot_power(args) -> int:
    drift = args.drift if args.drift is not None else reference.POWER_DRIFT[args.dgp]
    grid = ExperimentGrid(dgp=args.dgp, params=(args.param,), drifts=(drift,),
                          n_values=_ints(args.n_values), taus=_ints(args.taus),
                          reps=args.reps, seed=args.seed)
    report = run_grid(grid, _cache(args), workers=args.workers)
    curves = power_curve(report, 0.05)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = out / f"power-dgp{args.dgp}-param{args.param:g}-drift{drift:g}"
    _named(stem, ".csv").write_text(_curves_csv(curves))
    paths = [_named(stem, ".csv")]
    paths += _write_figures(curves, stem, f"DGP {args.dgp}, parameter {args.param:g}, "
                                          f"drift {drift:g}, 5% level")
    for path in paths:
        print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_common(p, seed_default=None, workers=True):
    p.add_argument("--cache-dir", default=None,
                   help="critical-value cache directory (default $SNCPA_CACHE_DIR or ~/.cache/sncpa)")
    if seed_default is not None:
        p.add_argument("--seed", type=int, default=seed_default)
    if workers:
        p.add_argument("--workers", "--threads", dest="workers", type=int, default=1,
                       help="worker processes (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sncpa", description="Self-normalized conditional predictive ability tests.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("test", help="run tests on a CSV file")
    p.add_argument("file")
    p.add_argument("--loss-col", help="loss-differential column (default loss_diff or the first column)")
    p.add_argument("--h-cols", help="comma-separated conditioning columns")
    p.add_argument("--intercept", action="store_true", help="prepend a ones column to h_t")
    p.add_argument("--tau", type=int, default=1, help="forecast horizon (default 1)")
    p.add_argument("--stat", choices=STAT_CHOICES + ("all",), default="all")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--force-multistep", action="store_true",
                   help="use the multistep statistics even when tau = 1")
    p.add_argument("--bandwidth", type=int, default=None, help="fixed HAC bandwidth")
    p.add_argument("--prewhiten", action="store_true", help="VAR(1) prewhitening for HAC")
    p.add_argument("--simulate", action="store_true",
                   help="simulate missing critical-value tables instead of failing")
    p.add_argument("--json", help="also write the results as JSON to this path")
    _add_common(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("critvals", help="simulate a critical-value table")
    p.add_argument("--family", choices=tuple(FAMILY_BUILDERS), default="matrix-cusum")
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--steps", type=int, default=limit.DEFAULT_STEPS)
    p.add_argument("--reps", type=int, default=limit.DEFAULT_REPS)
    p.add_argument("--noncentrality", help="comma-separated J vector (local alternatives)")
    p.add_argument("--out", help="output file (.json) or directory (default: cache directory)")
    _add_common(p, seed_default=limit.DEFAULT_SEED)
    p.set_defaults(func=cmd_critvals)

    p = sub.add_parser("replicate", help="rerun a published size or power experiment")
    p.add_argument("--table", required=True, choices=reference.TABLE_IDS)
    p.add_argument("--reps", type=int, default=5000)
    p.add_argument("--out", default="replication")
    p.add_argument("--simulate", action="store_true")
    _add_common(p, seed_default=20240501)
    p.set_defaults(func=cmd_replicate)

    p = sub.add_parser("plot-power", help="power curves by n")
    p.add_argument("--dgp", type=int, choices=(1, 2), required=True)
    p.add_argument("--param", type=float, required=True, help="rho (DGP 1) or p (DGP 2)")
    p.add_argument("--drift", type=float, default=None,
                   help="delta or d (default 0.2 for DGP 1, 0.5 for DGP 2)")
    p.add_argument("--n-values", default=",".join(map(str, STANDARD_N)))
    p.add_argument("--taus", default="2,3")
    p.add_argument("--reps", type=int, default=5000)
    p.add_argument("--out", default="power")
    p.add_argument("--simulate", action="store_true")
    _add_common(p, seed_default=20240501)
    p.set_defaults(func=cmd_plot_power)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except StatisticalDegeneracy as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (SncpaError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
