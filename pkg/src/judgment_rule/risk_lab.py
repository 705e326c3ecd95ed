"""Seeded Monte Carlo estimates of risk, rejection rates and the bound
``P(L(theta, rule(X)) > L(theta, a_tilde)) <= alpha``.

Draws are produced in fixed-size chunks; chunk ``i`` uses a generator seeded
with ``seed + i``.  Chunk boundaries depend only on ``n_draws`` and
``chunk_size``, never on the number of workers, and per-chunk moments are
merged in chunk order, so serial and threaded runs agree bit for bit.
Every call with the same seed reuses the same draws, which makes comparisons
across rules and across theta use common random numbers.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from judgment_rule.judgment_core import Judgment, decide_bayes, decide_many, loss
from judgment_rule.normal_dist import standard_normal_draws

log = logging.getLogger(__name__)

DEFAULT_DRAWS = 1_000_000
DEFAULT_SEED = 42
CHUNK_SIZE = 1 << 17
BAND = 3.0  # acceptance band, in standard errors

NOISE_KINDS = ("normal", "t5")


@dataclass(frozen=True)
class RuleSpec:
    """A decision rule the lab can simulate.

    Use the constructors :meth:`judgment_rule`, :meth:`ml`, :meth:`bayes`
    and :meth:`fixed` rather than filling fields by hand.
    """

    kind: str
    judgment: Judgment | None = None
    prior_mean: float = 0.0
    prior_var: float = 1.0
    value: float = 0.0
    name: str | None = None

    def __post_init__(self):
        if self.kind not in ("judgment", "ml", "bayes", "fixed"):
            raise ValueError(f"unknown rule kind {self.kind!r}")
        if self.kind == "judgment" and self.judgment is None:
            raise ValueError("judgment rule needs a Judgment")
        if self.kind == "bayes" and not self.prior_var > 0.0:
            raise ValueError("prior variance must be positive")
        if self.kind == "fixed" and not math.isfinite(self.value):
            raise ValueError("fixed action must be finite")

    @classmethod
    def judgment_rule(cls, j: Judgment, name: str | None = None) -> "RuleSpec":
        return cls("judgment", judgment=j, name=name)

    @classmethod
    def ml(cls, name: str | None = None) -> "RuleSpec":
        return cls("ml", name=name)

    @classmethod
    def bayes(cls, prior_mean: float = 0.0, prior_var: float = 1.0,
              name: str | None = None) -> "RuleSpec":
        return cls("bayes", prior_mean=prior_mean, prior_var=prior_var, name=name)

    @classmethod
    def fixed(cls, a: float, name: str | None = None) -> "RuleSpec":
        return cls("fixed", value=a, name=name)

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.kind == "judgment":
            return f"judgment_{self.judgment.action:g}_{self.judgment.alpha:g}"
        if self.kind == "bayes":
            if (self.prior_mean, self.prior_var) == (0.0, 1.0):
                return "bayes"
            return f"bayes_{self.prior_mean:g}_{self.prior_var:g}"
        if self.kind == "fixed":
            return f"fixed_{self.value:g}"
        return "ml"

    def actions(self, x) -> np.ndarray:
        """Vectorised action for observations ``x``."""
        x = np.asarray(x, dtype=float)
        if self.kind == "judgment":
            return decide_many(x, self.judgment)[0]
        if self.kind == "ml":
            return x.copy()
        if self.kind == "bayes":
            return decide_bayes(x, self.prior_mean, self.prior_var)
        return np.full_like(x, self.value)

    def act(self, x: float) -> float:
        return float(self.actions(np.array([x]))[0])


@dataclass(frozen=True)
class RiskReport:
    theta: float
    n_draws: int
    seed: int
    mean_loss: float
    se_loss: float
    prob_worse: float
    se_prob: float
    reject_rate: float
    se_reject: float

    CSV_FIELDS = ("theta", "mean_loss", "se_loss", "prob_worse", "se_prob", "reject_rate")

    def csv_row(self) -> list[str]:
        return [repr(float(getattr(self, f))) for f in self.CSV_FIELDS]


def _binomial_se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


@lru_cache(maxsize=64)
def _chunk_noise(seed: int, size: int, noise: str) -> np.ndarray:
    if noise == "normal":
        z = standard_normal_draws(seed, size)
    elif noise == "t5":
        # unit-variance Student t with 5 degrees of freedom
        z = np.random.default_rng(seed).standard_t(5, size=size) * math.sqrt(3.0 / 5.0)
    else:
        raise ValueError(f"noise must be one of {NOISE_KINDS}, got {noise!r}")
    z.setflags(write=False)
    return z


def _chunk_sizes(n_draws: int, chunk_size: int) -> list[int]:
    full, rest = divmod(n_draws, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])


def _chunk_stats(rule: RuleSpec, theta: float, a_tilde: float, seed: int,
                 size: int, noise: str) -> tuple[int, float, float, int, int]:
    x = theta + _chunk_noise(seed, size, noise)
    a = rule.actions(x)
    losses = loss(theta, a)
    mean = float(np.mean(losses))
    m2 = float(np.sum((losses - mean) ** 2))
    worse = int(np.count_nonzero(losses > loss(theta, a_tilde)))
    moved = int(np.count_nonzero(a != a_tilde))
    return size, mean, m2, worse, moved


def _merge(parts):
    """Chan et al. pairwise merge of (n, mean, M2), applied in order."""
    n, mean, m2 = 0, 0.0, 0.0
    for nb, mb, m2b, *_ in parts:
        if n == 0:
            n, mean, m2 = nb, mb, m2b
            continue
        tot = n + nb
        delta = mb - mean
        mean = mean + delta * nb / tot
        m2 = m2 + m2b + delta * delta * n * nb / tot
        n = tot
    return n, mean, m2


def mc_risk(rule: RuleSpec, theta: float, judgment: Judgment,
            n_draws: int = DEFAULT_DRAWS, seed: int = DEFAULT_SEED, *,
            workers: int = 1, chunk_size: int = CHUNK_SIZE,
            noise: str = "normal") -> RiskReport:
    """Simulate ``X = theta + Z`` and summarise the losses of ``rule``.

    ``prob_worse`` counts draws whose loss strictly exceeds the loss of the
    judgmental action.  ``reject_rate`` is the share of draws where the rule
    leaves the judgmental action; for the judgment rule that is its test's
    rejection rate.  A fixed rule ignores the data, so its report is exact
    (zero standard errors).
    """
    if n_draws < 1:
        raise ValueError("n_draws must be at least 1")
    if seed < 0:
        raise ValueError("seed must be non-negative")
    a_tilde = judgment.action

    if rule.kind == "fixed":
        value = float(loss(theta, rule.value))
        worse = 1.0 if value > loss(theta, a_tilde) else 0.0
        moved = 1.0 if rule.value != a_tilde else 0.0
        return RiskReport(theta, n_draws, seed, value, 0.0, worse, 0.0, moved, 0.0)

    sizes = _chunk_sizes(n_draws, chunk_size)
    jobs = [(rule, theta, a_tilde, seed + i, size, noise) for i, size in enumerate(sizes)]
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda args: _chunk_stats(*args), jobs))
    else:
        parts = [_chunk_stats(*args) for args in jobs]

    n, mean, m2 = _merge(parts)
    se_loss = math.sqrt(m2 / (n - 1) / n) if n > 1 else 0.0
    p_worse = sum(p[3] for p in parts) / n
    p_move = sum(p[4] for p in parts) / n
    return RiskReport(
        theta=theta,
        n_draws=n,
        seed=seed,
        mean_loss=mean,
        se_loss=se_loss,
        prob_worse=p_worse,
        se_prob=_binomial_se(p_worse, n),
        reject_rate=p_move,
        se_reject=_binomial_se(p_move, n),
    )


def theorem3_sweep(judgment: Judgment, theta_grid, n_draws: int = DEFAULT_DRAWS,
                   seed: int = DEFAULT_SEED, **kwargs) -> list[RiskReport]:
    """Risk reports for the judgment rule at every theta in ``theta_grid``.

    Use :func:`bound_violations` to list the thetas where the estimated
    probability of doing worse than the judgmental action exceeds alpha by
    more than three standard errors.
    """
    grid = list(theta_grid)
    if not grid:
        raise ValueError("theta grid is empty")
    rule = RuleSpec.judgment_rule(judgment)
    reports = [mc_risk(rule, t, judgment, n_draws, seed, **kwargs) for t in grid]
    for t in bound_violations(reports, judgment.alpha):
        log.warning("bound exceeded at theta=%g (alpha=%g)", t, judgment.alpha)
    return reports


def bound_violations(reports, alpha: float) -> list[float]:
    return [r.theta for r in reports if r.prob_worse > alpha + BAND * r.se_prob]


def power_sweep(judgment: Judgment, theta_grid, n_draws: int = DEFAULT_DRAWS,
                seed: int = DEFAULT_SEED, **kwargs) -> list[tuple[float, float, float]]:
    """``(theta, reject_rate, se)`` triples for the judgment rule's test."""
    if not 0.0 < judgment.alpha < 1.0:
        raise ValueError("power sweep needs 0 < alpha < 1")
    rule = RuleSpec.judgment_rule(judgment)
    out = []
    for t in theta_grid:
        r = mc_risk(rule, t, judgment, n_draws, seed, **kwargs)
        out.append((t, r.reject_rate, r.se_reject))
    return out


@dataclass(frozen=True)
class DominanceReport:
    label_a: str
    label_b: str
    favors_a: list[float]
    favors_b: list[float]
    rows: list[tuple[float, float, float, float, float]]  # theta, risk_a, se_a, risk_b, se_b

    @property
    def uniform_dominance(self) -> bool:
        """True when one rule wins somewhere and never loses."""
        return bool(self.favors_a) != bool(self.favors_b)


def dominance_check(rule_a: RuleSpec, rule_b: RuleSpec, judgment: Judgment,
                    theta_grid, n_draws: int = DEFAULT_DRAWS,
                    seed: int = DEFAULT_SEED, **kwargs) -> DominanceReport:
    """Compare risks of two rules on a grid.

    A theta favours a rule when its mean loss is lower by more than three
    combined standard errors ``sqrt(se_a**2 + se_b**2)``.
    """
    grid = list(theta_grid)
    if not grid:
        raise ValueError("theta grid is empty")
    favors_a, favors_b, rows = [], [], []
    for t in grid:
        ra = mc_risk(rule_a, t, judgment, n_draws, seed, **kwargs)
        rb = mc_risk(rule_b, t, judgment, n_draws, seed, **kwargs)
        band = BAND * math.hypot(ra.se_loss, rb.se_loss)
        if ra.mean_loss < rb.mean_loss - band:
            favors_a.append(t)
        elif rb.mean_loss < ra.mean_loss - band:
            favors_b.append(t)
        rows.append((t, ra.mean_loss, ra.se_loss, rb.mean_loss, rb.se_loss))
    return DominanceReport(rule_a.label, rule_b.label, favors_a, favors_b, rows)
