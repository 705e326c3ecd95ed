"""Expanding-window asset allocation backtest.

Monthly closes are turned into log returns.  At each step the window of the
first ``n = pre_sample + s`` returns is reduced to one unit-variance
observation ``xbar = sqrt(n) * mean / sigma`` (``sigma`` is the full-sample
standard deviation, the one deliberate look-ahead), every rule maps ``xbar``
to an action, the action is mapped to a portfolio weight, and wealth is
compounded with the next period's simple return.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

import numpy as np

from judgment_rule.judgment_core import Judgment
from judgment_rule.normal_dist import sample_standard_normal
from judgment_rule.risk_lab import RuleSpec

DEFAULT_PRE_SAMPLE = 84
DEFAULT_INITIAL_CASH = 100.0
WEIGHT_MAPPINGS = ("mean_variance", "raw_action")


class PriceDataError(ValueError):
    """Malformed or invalid price input."""


@dataclass(frozen=True)
class PriceSeries:
    dates: tuple[date, ...]
    closes: np.ndarray

    def __post_init__(self):
        closes = np.asarray(self.closes, dtype=float)
        object.__setattr__(self, "closes", closes)
        object.__setattr__(self, "dates", tuple(self.dates))
        if closes.ndim != 1 or len(closes) != len(self.dates):
            raise PriceDataError("dates and closes must have equal length")
        if len(closes) < 2:
            raise PriceDataError("need at least two prices")
        bad = np.flatnonzero(~np.isfinite(closes) | (closes <= 0.0))
        if bad.size:
            raise PriceDataError(f"non-positive close at position {bad[0] + 1}")
        for i in range(1, len(self.dates)):
            if not self.dates[i] > self.dates[i - 1]:
                raise PriceDataError(
                    f"dates not strictly increasing at position {i + 1}: "
                    f"{self.dates[i - 1]} then {self.dates[i]}")

    def __len__(self):
        return len(self.closes)

    def scaled(self, factor: float) -> "PriceSeries":
        return PriceSeries(self.dates, self.closes * factor)


@dataclass(frozen=True)
class ReturnSeries:
    dates: tuple[date, ...]  # end date of each return period
    log_returns: np.ndarray

    def __len__(self):
        return len(self.log_returns)

    @property
    def simple(self) -> np.ndarray:
        return np.expm1(self.log_returns)


@dataclass(frozen=True)
class WindowStats:
    n: int
    sigma: float
    xbar: float


@dataclass
class BacktestRecord:
    date: date
    n: int
    xbar: float
    actions: dict[str, float]
    weights: dict[str, float]
    values: dict[str, float]  # wealth at the end of the period


@dataclass
class BacktestResult:
    labels: list[str]
    judgment: Judgment
    pre_sample: int
    sigma: float
    initial_cash: float
    weight_mapping: str
    records: list[BacktestRecord] = field(default_factory=list)

    def value_path(self, label: str) -> np.ndarray:
        """Wealth path including the starting cash."""
        return np.array([self.initial_cash] + [r.values[label] for r in self.records])

    def action_path(self, label: str) -> np.ndarray:
        return np.array([r.actions[label] for r in self.records])

    def deviations(self, label: str) -> int:
        """Number of periods where the rule left the judgmental action."""
        return int(np.count_nonzero(self.action_path(label) != self.judgment.action))

    def went_negative(self, label: str) -> bool:
        return bool(np.any(self.value_path(label) <= 0.0))

    def final_value(self, label: str) -> float:
        return float(self.value_path(label)[-1])


def _parse_row(row: list[str], line: int) -> tuple[date, float]:
    if len(row) != 2:
        raise PriceDataError(f"row {line}: expected 2 columns, got {len(row)}")
    try:
        d = date.fromisoformat(row[0].strip())
    except ValueError:
        raise PriceDataError(f"row {line}: bad date {row[0]!r}") from None
    try:
        close = float(row[1])
    except ValueError:
        raise PriceDataError(f"row {line}: bad close {row[1]!r}") from None
    if not math.isfinite(close) or close <= 0.0:
        raise PriceDataError(f"row {line}: close must be positive, got {row[1].strip()}")
    return d, close


def load_prices(path, format: str = "csv") -> PriceSeries:
    """Read a ``date,close`` CSV with ISO dates.

    Row numbers in error messages count the header as row 1.
    """
    if format != "csv":
        raise PriceDataError(f"unsupported price format {format!r}")
    dates, closes = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["date", "close"]:
            raise PriceDataError("row 1: header must be 'date,close'")
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            d, close = _parse_row(row, line)
            if dates and not d > dates[-1]:
                raise PriceDataError(
                    f"row {line}: date {d} is not after {dates[-1]} (duplicate or unsorted)")
            dates.append(d)
            closes.append(close)
    return PriceSeries(tuple(dates), np.array(closes))


def write_prices(p: PriceSeries, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "close"])
        for d, c in zip(p.dates, p.closes):
            w.writerow([d.isoformat(), repr(float(c))])


def to_log_returns(p: PriceSeries) -> ReturnSeries:
    c = p.closes
    return ReturnSeries(p.dates[1:], np.log(c[1:] / c[:-1]))


def summary_stats(r) -> dict[str, float]:
    """Obs, mean, sample std (n - 1), median, min and max of the returns."""
    x = np.asarray(r.log_returns if isinstance(r, ReturnSeries) else r, dtype=float)
    if x.size < 2:
        raise ValueError("summary statistics need at least two returns")
    return {
        "obs": int(x.size),
        "mean": float(np.mean(x)),
        "std": float(np.std(x, ddof=1)),
        "median": float(np.median(x)),
        "min": float(np.min(x)),
        "max": float(np.max(x)),
    }


def full_sample_sigma(r: ReturnSeries) -> float:
    return float(np.std(r.log_returns, ddof=1))


def window_stat(r: ReturnSeries, pre_sample: int, s: int, sigma: float) -> WindowStats:
    n = pre_sample + s
    if not sigma > 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if n < 1 or n > len(r):
        raise ValueError(f"window of {n} returns exceeds series of length {len(r)}")
    mean = float(np.mean(r.log_returns[:n]))
    return WindowStats(n=n, sigma=sigma, xbar=math.sqrt(n) * mean / sigma)


def action_to_weight(action: float, n: int, sigma: float, mapping: str) -> float:
    """Fraction of wealth invested given an action on the transformed scale.

    ``mean_variance`` divides by ``sqrt(n) * sigma`` so the maximum-likelihood
    action becomes the plug-in weight ``mean / sigma**2``.
    """
    if mapping == "mean_variance":
        return action / (math.sqrt(n) * sigma)
    if mapping == "raw_action":
        return action
    raise ValueError(f"weight mapping must be one of {WEIGHT_MAPPINGS}, got {mapping!r}")


def run_backtest(r: ReturnSeries, rules: list[RuleSpec], judgment: Judgment,
                 pre_sample: int = DEFAULT_PRE_SAMPLE,
                 initial_cash: float = DEFAULT_INITIAL_CASH,
                 weight_mapping: str = "mean_variance",
                 sigma: float | None = None) -> BacktestResult:
    """Run every rule through the expanding-window scheme.

    ``judgment`` supplies the judgmental allocation that deviations are
    counted against.  The decision at step ``s`` sees only the first
    ``pre_sample + s`` returns (plus ``sigma``, by default the full-sample
    standard deviation); it is then applied to return ``pre_sample + s + 1``.
    """
    if pre_sample < 2:
        raise ValueError("pre_sample must be at least 2")
    if not rules:
        raise ValueError("at least one rule is required")
    if len(r) < pre_sample + 1:
        raise ValueError(
            f"{len(r)} returns leave no out-of-sample period after a pre-sample of {pre_sample}")
    if weight_mapping not in WEIGHT_MAPPINGS:
        raise ValueError(f"weight mapping must be one of {WEIGHT_MAPPINGS}")
    labels = [rule.label for rule in rules]
    if len(set(labels)) != len(labels):
        raise ValueError(f"rule labels must be unique, got {labels}")

    sigma = full_sample_sigma(r) if sigma is None else sigma
    simple = r.simple
    result = BacktestResult(labels, judgment, pre_sample, sigma, initial_cash, weight_mapping)
    wealth = {lab: initial_cash for lab in labels}

    for s in range(len(r) - pre_sample):
        w = window_stat(r, pre_sample, s, sigma)
        ret = simple[w.n]  # the return right after the window
        actions, weights, values = {}, {}, {}
        for rule, lab in zip(rules, labels):
            a = rule.act(w.xbar)
            wt = action_to_weight(a, w.n, sigma, weight_mapping)
            wealth[lab] = wealth[lab] * (1.0 + wt * ret)
            actions[lab], weights[lab], values[lab] = a, wt, wealth[lab]
        result.records.append(
            BacktestRecord(r.dates[w.n], w.n, w.xbar, actions, weights, values))
    return result


def _add_months(d: date, k: int) -> date:
    m = d.month - 1 + k
    return date(d.year + m // 12, m % 12 + 1, 1)


def synth_prices(n_months: int, mean: float, std: float, seed: int,
                 start: date = date(1999, 1, 1), first_close: float = 100.0) -> PriceSeries:
    """Synthetic monthly closes whose log returns have exactly the given
    sample mean and standard deviation.

    Produces ``n_months`` returns, hence ``n_months + 1`` closes dated on the
    first of consecutive months.
    """
    if n_months < 2:
        raise ValueError("need at least two months to fix a standard deviation")
    if not std > 0.0:
        raise ValueError("std must be positive")
    rng = np.random.default_rng(seed)
    z = np.atleast_1d(sample_standard_normal(rng, size=n_months))
    z = (z - z.mean()) / z.std(ddof=1)
    rets = mean + std * z
    closes = first_close * np.exp(np.concatenate([[0.0], np.cumsum(rets)]))
    dates = tuple(_add_months(start, k) for k in range(n_months + 1))
    return PriceSeries(dates, closes)


def write_backtest_csv(result: BacktestResult, path) -> None:
    header = ["date", "xbar"]
    for kind in ("action", "weight", "value"):
        header += [f"{kind}_{lab}" for lab in result.labels]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for rec in result.records:
            row = [rec.date.isoformat(), repr(rec.xbar)]
            for src in (rec.actions, rec.weights, rec.values):
                row += [repr(float(src[lab])) for lab in result.labels]
            w.writerow(row)


def format_summary(result: BacktestResult, returns: ReturnSeries | None = None) -> str:
    lines = []
    if returns is not None:
        st = summary_stats(returns)
        lines.append("Return summary (monthly log returns)")
        lines.append(f"  obs     {st['obs']}")
        for key in ("mean", "std", "median", "min", "max"):
            lines.append(f"  {key:<7} {st[key] * 100:.6f}%")
    first = result.records[0].date.isoformat() if result.records else "-"
    last = result.records[-1].date.isoformat() if result.records else "-"
    lines.append("Backtest")
    lines.append(f"  pre_sample      {result.pre_sample}")
    lines.append(f"  periods         {len(result.records)} ({first} .. {last})")
    lines.append(f"  sigma           {result.sigma:.6f}")
    lines.append(f"  weight_mapping  {result.weight_mapping}")
    lines.append(f"  judgment        a={result.judgment.action:g} alpha={result.judgment.alpha:g}")
    lines.append(f"  initial_cash    {result.initial_cash:.6f}")
    lines.append("Rules")
    for lab in result.labels:
        final = result.final_value(lab)
        change = (final / result.initial_cash - 1.0) * 100.0
        flag = "  NEGATIVE-WEALTH" if result.went_negative(lab) else ""
        lines.append(
            f"  {lab:<24} final {final:.6f}  change {change:+.6f}%  "
            f"deviations {result.deviations(lab)}{flag}")
    return "\n".join(lines) + "\n"


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def render_svg(result: BacktestResult, width: int = 720, height: int = 360) -> str:
    """Self-contained SVG line chart of the value paths."""
    pad = 40
    paths = {lab: result.value_path(lab) for lab in result.labels}
    lo = min(float(p.min()) for p in paths.values())
    hi = max(float(p.max()) for p in paths.values())
    if hi == lo:
        lo, hi = lo - 1.0, hi + 1.0
    steps = max(len(next(iter(paths.values()))) - 1, 1)

    def xy(i, v):
        x = pad + (width - 2 * pad) * i / steps
        y = height - pad - (height - 2 * pad) * (v - lo) / (hi - lo)
        return f"{x:.2f},{y:.2f}"

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
           f'<text x="4" y="{pad}" font-size="10">{hi:.2f}</text>',
           f'<text x="4" y="{height - pad}" font-size="10">{lo:.2f}</text>']
    for k, (lab, path) in enumerate(paths.items()):
        color = _PALETTE[k % len(_PALETTE)]
        pts = " ".join(xy(i, v) for i, v in enumerate(path))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{width - pad - 150}" y="{pad + 14 * k}" font-size="11" '
                   f'fill="{color}">{lab}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_outputs(result: BacktestResult, out_dir, returns: ReturnSeries | None = None,
                  svg: bool = False, banner: str = "") -> list[Path]:
    """Write ``backtest.csv``, ``backtest_summary.txt`` and optionally ``backtest.svg``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "backtest.csv", out / "backtest_summary.txt"]
    write_backtest_csv(result, written[0])
    written[1].write_text(banner + format_summary(result, returns), encoding="utf-8")
    if svg:
        written.append(out / "backtest.svg")
        written[-1].write_text(render_svg(result), encoding="utf-8")
    return written
