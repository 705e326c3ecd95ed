"""Command-line interface: ``decide | risk | backtest | synth | elicit``.

Exit codes: 0 success, 1 risk bound violated, 2 usage or invalid input,
3 unreadable or invalid data file, 4 numerical failure (root bracketing).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

from judgment_rule import __version__
from judgment_rule.backtest import (
    DEFAULT_INITIAL_CASH,
    DEFAULT_PRE_SAMPLE,
    WEIGHT_MAPPINGS,
    PriceDataError,
    load_prices,
    run_backtest,
    summary_stats,
    synth_prices,
    to_log_returns,
    write_outputs,
    write_prices,
)
from judgment_rule.elicitation import ElicitationError, elicit_interactive
from judgment_rule.general_loss import (
    BracketError,
    ConvexityError,
    decide_general,
    quadratic_model,
    quartic_model,
)
from judgment_rule.judgment_core import Judgment, decide
from judgment_rule.risk_lab import (
    BAND,
    DEFAULT_DRAWS,
    DEFAULT_SEED,
    NOISE_KINDS,
    RiskReport,
    RuleSpec,
    bound_violations,
    theorem3_sweep,
)

EXIT_OK = 0
EXIT_BOUND = 1
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

DEFAULT_ALPHA = 0.05
DEFAULT_JUDGMENT = 0.0
DEFAULT_GRID = "-3:3:0.25"
SYNTH_MONTHS = 206
SYNTH_MEAN = -0.0006
SYNTH_STD = 0.0557


class UsageError(ValueError):
    pass


def fmt(v: float) -> str:
    return f"{v:.6f}"


def parse_grid(spec: str) -> list[float]:
    """``start:stop:step`` with inclusive stop."""
    try:
        start, stop, step = (float(t) for t in spec.split(":"))
    except ValueError:
        raise UsageError(f"grid must look like start:stop:step, got {spec!r}") from None
    if not step > 0.0 or not all(map(math.isfinite, (start, stop, step))):
        raise UsageError(f"grid step must be positive and finite, got {spec!r}")
    if stop < start:
        raise UsageError(f"grid {spec!r} is empty")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 12) for k in range(count)]


def parse_rules(spec: str, judgment: Judgment) -> list[RuleSpec]:
    rules = []
    for token in filter(None, (t.strip() for t in spec.split(","))):
        name, *params = token.split(":")
        try:
            values = [float(p) for p in params]
            if name == "judgment" and not values:
                rules.append(RuleSpec.judgment_rule(judgment))
            elif name == "judgment" and len(values) == 2:
                rules.append(RuleSpec.judgment_rule(Judgment(*values)))
            elif name == "ml" and not values:
                rules.append(RuleSpec.ml())
            elif name == "bayes" and len(values) in (0, 2):
                rules.append(RuleSpec.bayes(*values))
            elif name == "fixed" and len(values) == 1:
                rules.append(RuleSpec.fixed(values[0]))
            else:
                raise UsageError(f"cannot parse rule {token!r}")
        except ValueError as exc:
            raise UsageError(f"bad rule {token!r}: {exc}") from None
    if not rules:
        raise UsageError("no rules given")
    return rules


def read_config(path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment.  Keys use flag names."""
    cfg = {}
    for n, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        cfg[key.replace("-", "_")] = value
    return cfg


def banner(args) -> str:
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command")}
    lines = [f"# judgment-rule {__version__}", f"# command: {args.command}"]
    if "seed" in flags:
        lines.append(f"# seed: {flags['seed']}")
    lines.append("# flags: " + " ".join(f"{k}={v}" for k, v in flags.items()))
    return "\n".join(lines) + "\n"


def _judgment(args) -> Judgment:
    try:
        return Judgment(args.judgment, args.alpha)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------- commands

def _outcome_text(outcome) -> str:
    rows = [
        ("action", fmt(outcome.action)),
        ("branch", outcome.branch.value),
        ("rejected", str(outcome.rejected).lower()),
        ("ci_lower", fmt(outcome.ci_lower)),
        ("ci_upper", fmt(outcome.ci_upper)),
        ("gradient_at_judgment", fmt(outcome.gradient_at_judgment)),
        ("displacement", fmt(outcome.displacement)),
    ]
    return "".join(f"{k:<22}{v}\n" for k, v in rows)


def cmd_decide(args, out) -> int:
    j = _judgment(args)
    if args.loss == "quadratic" and args.se == 1.0:
        outcome = decide(args.x, j, gamma=args.gamma)
    else:
        model = {"quadratic": quadratic_model, "quartic": quartic_model}[args.loss](args.se)
        outcome = decide_general(args.x, j, model)
    if args.json:
        out.write(json.dumps(outcome.as_dict(), sort_keys=True) + "\n")
    else:
        out.write(banner(args))
        out.write(_outcome_text(outcome))
    return EXIT_OK


def _risk_csv(reports: list[RiskReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RiskReport.CSV_FIELDS)
    for r in reports:
        w.writerow(r.csv_row())
    return buf.getvalue()


def cmd_risk(args, out) -> int:
    j = _judgment(args)
    grid = parse_grid(args.grid)
    if args.draws < 1:
        raise UsageError("--draws must be at least 1")
    if args.seed < 0:
        raise UsageError("--seed must be non-negative")
    reports = theorem3_sweep(j, grid, args.draws, args.seed,
                             workers=args.workers, noise=args.noise)
    violations = bound_violations(reports, j.alpha)
    floor = [r.theta for r in reports
             if 0.0 < j.alpha < 1.0 and r.reject_rate < j.alpha - BAND * r.se_reject]

    lines = [banner(args).rstrip("\n")]
    lines.append(f"thetas checked       {len(reports)}")
    lines.append(f"max prob_worse       {fmt(max(r.prob_worse for r in reports))}")
    lines.append(f"bound                prob_worse <= {j.alpha:g} + {BAND:g}*se")
    lines.append("bound violations     " + (" ".join(f"{t:g}" for t in violations) or "none"))
    lines.append("power floor misses   " + (" ".join(f"{t:g}" for t in floor) or "none"))
    if args.noise != "normal":
        lines.append(f"noise                {args.noise} (descriptive only; bound assumes normal draws)")
    verdict = "FAIL" if violations else "PASS"
    lines.append(f"verdict              {verdict}")
    report = "\n".join(lines) + "\n"

    table = _risk_csv(reports)
    if args.out:
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        (d / "risk.csv").write_text(table, encoding="utf-8")
        (d / "risk_report.txt").write_text(report, encoding="utf-8")
        out.write(report)
    else:
        out.write(table)
        sys.stderr.write(report)
    return EXIT_BOUND if violations else EXIT_OK


def _load_returns(args):
    if args.prices:
        prices = load_prices(args.prices)
    else:
        prices = synth_prices(args.months, args.mean, args.std, args.seed)
    return to_log_returns(prices)


def cmd_backtest(args, out) -> int:
    j = _judgment(args)
    rules = parse_rules(args.rules, j)
    if args.weight_mapping not in WEIGHT_MAPPINGS:
        raise UsageError(f"--weight-mapping must be one of {WEIGHT_MAPPINGS}")
    returns = _load_returns(args)
    try:
        result = run_backtest(returns, rules, j, pre_sample=args.pre_sample,
                              initial_cash=args.initial_cash,
                              weight_mapping=args.weight_mapping)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    written = write_outputs(result, args.out, returns, svg=args.svg, banner=banner(args))
    out.write(written[1].read_text(encoding="utf-8"))
    for p in written:
        out.write(f"wrote {p}\n")
    return EXIT_OK


def cmd_synth(args, out) -> int:
    if args.seed < 0:
        raise UsageError("--seed must be non-negative")
    try:
        prices = synth_prices(args.months, args.mean, args.std, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    path = d / "prices.csv"
    write_prices(prices, path)
    st = summary_stats(to_log_returns(prices))
    out.write(banner(args))
    for key in ("obs", "mean", "std", "median", "min", "max"):
        val = st[key]
        out.write(f"{key:<8}{val if key == 'obs' else fmt(val)}\n")
    out.write(f"wrote {path}\n")
    return EXIT_OK


def cmd_elicit(args, out) -> int:
    alpha = elicit_interactive(sys.stdin, out)
    out.write(f"alpha {alpha:.2f}\n")
    if args.x is not None:
        outcome = decide(args.x, Judgment(args.judgment, alpha))
        out.write(_outcome_text(outcome))
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="judgment-rule",
        description="Judgment-anchored decisions, risk checks and backtests.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="flat key = value file supplying flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    def judgment_flags(p):
        p.add_argument("--judgment", type=float, default=DEFAULT_JUDGMENT,
                       help="judgmental action (default 0)")
        p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA,
                       help="confidence level in [0, 1] (default 0.05)")

    p = sub.add_parser("decide", help="apply the rule to one observation")
    p.add_argument("--x", type=float, required=True, help="observed statistic")
    judgment_flags(p)
    p.add_argument("--gamma", type=float, default=0.0, help="boundary randomisation weight")
    p.add_argument("--loss", choices=("quadratic", "quartic"), default="quadratic")
    p.add_argument("--se", type=float, default=1.0, help="standard error of the estimate")
    p.add_argument("--json", action="store_true", help="print JSON instead of text")
    p.set_defaults(func=cmd_decide)

    p = sub.add_parser("risk", help="Monte Carlo sweep of the risk bound")
    judgment_flags(p)
    p.add_argument("--grid", default=DEFAULT_GRID,
                   help="theta grid start:stop:step (write --grid=-3:3:0.25 for negative starts)")
    p.add_argument("--draws", type=int, default=DEFAULT_DRAWS)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--noise", choices=NOISE_KINDS, default="normal")
    p.add_argument("--out", help="directory for risk.csv and risk_report.txt")
    p.set_defaults(func=cmd_risk)

    p = sub.add_parser("backtest", help="expanding-window allocation backtest")
    judgment_flags(p)
    p.add_argument("--prices", help="CSV with header date,close (synthetic data if omitted)")
    p.add_argument("--rules", default="judgment,ml,bayes",
                   help="comma list of judgment[:a:alpha], ml, bayes[:mean:var], fixed:a")
    p.add_argument("--pre-sample", type=int, default=DEFAULT_PRE_SAMPLE)
    p.add_argument("--initial-cash", type=float, default=DEFAULT_INITIAL_CASH)
    p.add_argument("--weight-mapping", default="mean_variance", choices=WEIGHT_MAPPINGS)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="seed for synthetic data")
    p.add_argument("--months", type=int, default=SYNTH_MONTHS)
    p.add_argument("--mean", type=float, default=SYNTH_MEAN)
    p.add_argument("--std", type=float, default=SYNTH_STD)
    p.add_argument("--svg", action="store_true", help="also write backtest.svg")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("synth", help="write a synthetic monthly price file")
    p.add_argument("--months", type=int, default=SYNTH_MONTHS, help="number of monthly returns")
    p.add_argument("--mean", type=float, default=SYNTH_MEAN)
    p.add_argument("--std", type=float, default=SYNTH_STD)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("elicit", help="urn experiment on stdin/stdout")
    p.add_argument("--x", type=float, help="if given, decide with the elicited alpha")
    p.add_argument("--judgment", type=float, default=DEFAULT_JUDGMENT)
    p.set_defaults(func=cmd_elicit)
    return parser


def main(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()

    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        try:
            cfg = read_config(known.config)
        except (OSError, UsageError) as exc:
            sys.stderr.write(f"judgment-rule: config: {exc}\n")
            return EXIT_USAGE
        for sp in parser._subparsers._group_actions[0].choices.values():
            dests = {a.dest for a in sp._actions}
            sp.set_defaults(**{k: v for k, v in cfg.items() if k in dests})

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK

    try:
        return args.func(args, out)
    except UsageError as exc:
        sys.stderr.write(f"judgment-rule {args.command}: {exc}\n")
        return EXIT_USAGE
    except ElicitationError as exc:
        sys.stderr.write(f"judgment-rule elicit: {exc}\n")
        return EXIT_USAGE
    except (PriceDataError, OSError) as exc:
        sys.stderr.write(f"judgment-rule {args.command}: {exc}\n")
        return EXIT_DATA
    except (BracketError, ConvexityError) as exc:
        sys.stderr.write(f"judgment-rule {args.command}: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
