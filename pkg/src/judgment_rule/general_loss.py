"""Judgment rule for a general strictly convex scalar loss.

The gradient of the loss at the estimate is linearised around the true
parameter, so its standard deviation is ``|d2L/(da dtheta)| * se``.  The
standardised statistic

    g(a) = grad(theta_hat, a) / (|cross(theta_hat, a)| * se)

is tested at the judgmental action exactly as in the quadratic case, and a
rejection moves the action to the root of ``g(a) = c`` for the relevant
critical value ``c``.  Roots are found by bracketed bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from judgment_rule.judgment_core import (
    Branch,
    DecisionOutcome,
    Judgment,
    critical_values,
)

MAX_BISECTIONS = 200
MAX_DOUBLINGS = 64
ROOT_TOL = 1e-10


class BracketError(RuntimeError):
    """No sign change found after the allowed number of bracket doublings."""


class ConvexityError(RuntimeError):
    """The gradient was observed to be non-increasing in the action."""


@dataclass(frozen=True)
class LossModel:
    """Gradient and cross-partial of a loss, plus the standard error of theta_hat."""

    grad: Callable[[float, float], float]
    cross: Callable[[float, float], float]
    se: float = 1.0

    def __post_init__(self):
        if not self.se > 0.0:
            raise ValueError(f"standard error must be positive, got {self.se}")

    def statistic(self, theta_hat: float, a: float) -> float:
        scale = abs(self.cross(theta_hat, a)) * self.se
        if scale == 0.0:
            raise ConvexityError(f"cross partial vanishes at a={a}")
        return self.grad(theta_hat, a) / scale


def quadratic_model(se: float = 1.0) -> LossModel:
    return LossModel(grad=lambda t, a: -t + a, cross=lambda t, a: -1.0, se=se)


def quartic_model(se: float = 1.0) -> LossModel:
    """``L = -a*theta + a**4 / 4``."""
    return LossModel(grad=lambda t, a: -t + a ** 3, cross=lambda t, a: -1.0, se=se)


@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float
    tolerance: float = ROOT_TOL

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"empty bracket [{self.lo}, {self.hi}]")


def _bracket_root(f: Callable[[float], float], start: float) -> Bracket:
    """Expand from ``start`` until ``f`` (increasing) changes sign."""
    f0 = f(start)
    direction = 1.0 if f0 < 0.0 else -1.0
    step = max(1.0, abs(start))
    prev, f_prev = start, f0
    for _ in range(MAX_DOUBLINGS):
        cand = start + direction * step
        f_cand = f(cand)
        if direction * (f_cand - f_prev) < 0.0:
            raise ConvexityError(
                f"gradient decreasing between a={prev} and a={cand}")
        if (f_cand >= 0.0) if direction > 0 else (f_cand <= 0.0):
            lo, hi = (prev, cand) if direction > 0 else (cand, prev)
            return Bracket(lo, hi)
        prev, f_prev = cand, f_cand
        step *= 2.0
    raise BracketError(f"no root found within {MAX_DOUBLINGS} doublings from a={start}")


def _bisect(f: Callable[[float], float], br: Bracket) -> float:
    lo, hi = br.lo, br.hi
    f_lo, f_hi = f(lo), f(hi)
    for _ in range(MAX_BISECTIONS):
        if hi - lo <= br.tolerance:
            break
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        f_mid = f(mid)
        if not f_lo <= f_mid <= f_hi:
            raise ConvexityError(f"gradient not monotone near a={mid}")
        if f_mid < 0.0:
            lo, f_lo = mid, f_mid
        elif f_mid > 0.0:
            hi, f_hi = mid, f_mid
        else:
            return mid
    return 0.5 * (lo + hi)


def find_root(f: Callable[[float], float], start: float) -> float:
    """Root of an increasing function, searched outward from ``start``."""
    if f(start) == 0.0:
        return start
    return _bisect(f, _bracket_root(f, start))


def solve_statistic(theta_hat: float, m: LossModel, target: float,
                    start: float) -> float:
    """Action ``a`` with ``m.statistic(theta_hat, a) == target``."""
    return find_root(lambda a: m.statistic(theta_hat, a) - target, start)


def ml_action(theta_hat: float, m: LossModel, start: float = 0.0) -> float:
    """Root of ``grad(theta_hat, a) = 0``."""
    return find_root(lambda a: m.grad(theta_hat, a), start)


def decide_general(theta_hat: float, j: Judgment, m: LossModel) -> DecisionOutcome:
    """Judgment rule for the loss described by ``m``.

    ``observation`` in the outcome is the maximum-likelihood action and the
    interval fields are the action-space confidence bounds.  For the
    quadratic model with ``se = 1`` this reproduces
    :func:`judgment_rule.judgment_core.decide`.

    Raises
    ------
    BracketError
        If a bound cannot be bracketed.
    ConvexityError
        If the gradient is seen to decrease in the action.
    """
    c_lo, c_hi = critical_values(j.alpha)
    a_tilde = j.action
    g_tilde = m.grad(theta_hat, a_tilde)
    stat = m.statistic(theta_hat, a_tilde)
    branch = Branch.C_MINUS if g_tilde <= 0.0 else Branch.C_PLUS

    if j.alpha == 0.0:
        ml = a_tilde  # never computed; interval is the whole line
        lower, upper = -math.inf, math.inf
    else:
        ml = ml_action(theta_hat, m, start=a_tilde)
        if j.alpha == 1.0:
            lower = upper = ml
        else:
            lower = solve_statistic(theta_hat, m, c_lo, start=a_tilde)
            upper = solve_statistic(theta_hat, m, c_hi, start=a_tilde)

    if branch is Branch.C_MINUS and stat < c_lo:
        action, rejected = lower, True
    elif branch is Branch.C_PLUS and stat > c_hi:
        action, rejected = upper, True
    else:
        action, rejected = a_tilde, False

    return DecisionOutcome(
        action=action,
        rejected=rejected,
        branch=branch,
        observation=ml,
        ci_lower=lower,
        ci_upper=upper,
        gradient_at_judgment=g_tilde,
        displacement=action - a_tilde,
    )
