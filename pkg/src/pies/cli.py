"""``pies`` command line: run scenarios, validate configs, re-render comparisons."""
from __future__ import annotations

import argparse
import sys
from typing import List, Optional

from .engine import count_formula
from .errors import AuditError, BuildError, ConfigError
from .milp import SolveOptions
from .model import ScenarioConfig, load_model_file
from .scenarios import COMPARISON_COLUMNS, compare, run_scenarios


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pies", description="Day-ahead park energy scheduling with "
                                "flexible loads and ladder carbon trading.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="solve scenarios and write schedules and reports")
    run.add_argument("--config", required=True, help="park config (YAML)")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--scenario", default="1,2,3,4", help="comma-separated subset of 1,2,3,4")
    run.add_argument("--time-limit", type=float, default=120.0, help="solver time limit per scenario, s")
    run.add_argument("--export-mps", action="store_true", help="also write problem.mps per scenario")
    run.add_argument("--seed", type=int, default=None, help="override the synthetic profile seed")
    run.add_argument("--solver", choices=("highs", "bnb"), default="highs",
                     help="highs (default) or the bundled branch-and-bound")

    val = sub.add_parser("validate", help="check a config and print problem sizes")
    val.add_argument("--config", required=True)

    cmp_ = sub.add_parser("compare", help="re-render comparison.csv from stored schedules")
    cmp_.add_argument("--out", required=True)
    return p


def _table(rows) -> str:
    head = "  ".join(f"{c:>24s}" if i > 1 else f"{c:>8s}" for i, c in enumerate(COMPARISON_COLUMNS))
    lines = [head]
    for r in rows:
        cells = []
        for i, c in enumerate(COMPARISON_COLUMNS):
            v = r[c]
            cells.append(f"{v:>8}" if i <= 1 else f"{v:>24.3f}")
        lines.append("  ".join(cells))
    return "\n".join(lines)


def cmd_run(args) -> int:
    opts = SolveOptions(time_limit=args.time_limit, backend=args.solver)
    report = run_scenarios(args.config, args.out, args.scenario, opts, seed=args.seed,
                           export=args.export_mps)
    print(_table([r.row() for r in report.results]))
    for r in report.results:
        if not r.ok:
            print(f"scenario {r.number}: {r.status} ({r.message})", file=sys.stderr)
    print(f"wrote {report.comparison_path}")
    return 0 if report.ok else 1


def cmd_validate(args) -> int:
    model = load_model_file(args.config)
    print(f"{args.config}: ok ({model.grid.periods} periods of {model.grid.step} h)")
    for n in (1, 2, 3, 4):
        if n == 4 and not model.carbon_enabled:
            print("scenario 4: skipped, carbon trading disabled")
            continue
        counts = count_formula(model, ScenarioConfig.numbered(n))
        print(f"scenario {n}: {counts['binaries']} binaries, {counts['continuous']} continuous")
    return 0


def cmd_compare(args) -> int:
    rows = compare(args.out)
    print(_table(rows))
    return 0 if all(r["status"] in ("optimal", "feasible") for r in rows) else 1


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    handler = {"run": cmd_run, "validate": cmd_validate, "compare": cmd_compare}[args.command]
    try:
        return handler(args)
    except (ConfigError, BuildError, AuditError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
