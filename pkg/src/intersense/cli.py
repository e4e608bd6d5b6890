"""Command-line front end.

``intersense run SCENARIO -o OUT`` evaluates the scenario's schemes (every
variant) and writes ``policy.csv``, ``metrics.csv`` and ``summary.txt``.
``intersense compare SCENARIO --schemes a,b -o OUT`` does the same for an
explicit scheme list and names the metrics file ``comparison.csv``.

Exit codes: 0 success, 2 configuration error, 3 infeasible constraint,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path

from . import __version__
from .access import UnboundedAccessError
from .markov import DegenerateChainError, InfeasibleOverheadError
from .optimize import InfeasibleError
from .runner import SimOverrides, evaluate
from .scenario import SCHEMES, ConfigError, load_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERIC = 4

POLICY_HEADER = ["scheme", "variant", "channel", "parameter", "value"]
METRICS_HEADER = ["scheme", "variant", "channel", "metric", "analytic", "empirical", "stderr"]

log = logging.getLogger("intersense")


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return f"{v:.6g}"


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _summary(scenario, results) -> str:
    lines = [f"scenario: {scenario.name}"]
    if scenario.description:
        lines.append(scenario.description)
    lines.append(f"channels: {len(scenario.channels)}  sensing_time: {scenario.sensing_time:.6g}")
    for r in results:
        lines.append("")
        lines.append(f"[{r.scheme} / {r.variant}]")
        if not math.isnan(r.R_analytic):
            lines.append(f"R analytic  = {r.R_analytic:.6g}")
        if r.R_empirical is not None:
            se = f" +/- {r.R_stderr:.2g}" if r.R_stderr is not None else ""
            lines.append(f"R empirical = {r.R_empirical:.6g}{se}")
        for ch, name, val in r.policy:
            lines.append(f"  channel {ch}: {name} = {val:.6g}")
        for note in r.notes:
            lines.append(f"  note: {note}")
    return "\n".join(lines) + "\n"


def _execute(path, schemes, out_dir: Path, ov: SimOverrides, metrics_name: str) -> int:
    scenario = load_scenario(path)
    schemes = schemes or list(scenario.schemes)
    results = []
    for variant, s in scenario.expand():
        for scheme in schemes:
            log.info("evaluating %s / %s", scheme, variant)
            results.append(evaluate(s, scheme, variant, ov))
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(
        out_dir / "policy.csv",
        POLICY_HEADER,
        [[r.scheme, r.variant, ch, name, _fmt(v)] for r in results for ch, name, v in r.policy],
    )
    _write_csv(
        out_dir / metrics_name,
        METRICS_HEADER,
        [[r.scheme, r.variant, ch, m, _fmt(a), _fmt(e), _fmt(se)] for r in results for ch, m, a, e, se in r.metrics],
    )
    text = _summary(scenario, results)
    (out_dir / "summary.txt").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="intersense", description="Sensing and access policies for unslotted primary channels.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("scenario", help="scenario YAML file")
        sp.add_argument("-o", "--output", default="out", help="output directory (default: out)")
        sp.add_argument("--seed", type=int, help="override the simulation seed")
        sp.add_argument("--runs", type=int, help="override the number of simulation runs")
        sp.add_argument("--horizon", type=float, help="override the simulated horizon (time units)")
        sp.add_argument("--no-sim", action="store_true", help="skip Monte-Carlo validation")
        sp.add_argument("--grid-step", type=float, help="override the coarse grid step")
        sp.add_argument("--jobs", type=int, default=1, help="parallel simulation processes (default: 1)")

    common(sub.add_parser("run", help="evaluate the scenario's schemes"))
    cmp = sub.add_parser("compare", help="evaluate several schemes on one scenario")
    common(cmp)
    cmp.add_argument("--schemes", required=True, help=f"comma-separated list from: {', '.join(SCHEMES)}")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        for name in ("runs", "jobs"):
            v = getattr(args, name)
            if v is not None and v < 1:
                raise ConfigError("must be at least 1", f"--{name}")
        if args.horizon is not None and not args.horizon > 0:
            raise ConfigError("must be positive", "--horizon")
        if args.grid_step is not None and not args.grid_step > 0:
            raise ConfigError("must be positive", "--grid-step")
        schemes = None
        if args.command == "compare":
            schemes = [x.strip() for x in args.schemes.split(",") if x.strip()]
            bad = [x for x in schemes if x not in SCHEMES]
            if bad or not schemes:
                raise ConfigError(f"unknown schemes {bad}; expected from {', '.join(SCHEMES)}", "--schemes")
        ov = SimOverrides(
            enabled=not args.no_sim,
            seed=args.seed,
            runs=args.runs,
            horizon=args.horizon,
            jobs=args.jobs,
            grid_step=args.grid_step,
        )
        metrics_name = "comparison.csv" if args.command == "compare" else "metrics.csv"
        return _execute(args.scenario, schemes, Path(args.output), ov, metrics_name)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InfeasibleError, InfeasibleOverheadError, UnboundedAccessError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (DegenerateChainError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # domain validation outside the scenario parser (e.g. limits above u)
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
