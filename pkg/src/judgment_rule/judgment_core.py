"""Decision environment with quadratic loss and the judgment-anchored rule.

One observation ``x ~ N(theta, 1)`` is available and the loss of action ``a``
is ``-a*theta + a**2 / 2``.  A :class:`Judgment` pairs a judgmental action
with a confidence level.  The rule tests whether the population gradient at
the judgmental action has the sign opposite to the sample gradient; if the
test rejects, the action moves to the nearest edge of the confidence interval
``[x + c(alpha/2), x + c(1 - alpha/2)]``, otherwise it stays put.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from judgment_rule.normal_dist import quantile


class Branch(str, Enum):
    C_MINUS = "C_minus"  # sample gradient -x + a_tilde <= 0
    C_PLUS = "C_plus"    # sample gradient -x + a_tilde > 0


@dataclass(frozen=True)
class Judgment:
    """Judgmental action plus the confidence level that guards it."""

    action: float
    alpha: float

    def __post_init__(self):
        if not math.isfinite(self.action):
            raise ValueError(f"judgmental action must be finite, got {self.action}")
        if not math.isfinite(self.alpha) or not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"confidence level must lie in [0, 1], got {self.alpha}")


@dataclass(frozen=True)
class TestFunctionResult:
    branch: Branch
    reject: float  # one of 0, gamma, 1
    gamma: float


@dataclass(frozen=True)
class DecisionOutcome:
    action: float
    rejected: bool
    branch: Branch
    observation: float
    ci_lower: float
    ci_upper: float
    gradient_at_judgment: float
    displacement: float

    def as_dict(self) -> dict:
        return {
            "action": self.action,
            "rejected": self.rejected,
            "branch": self.branch.value,
            "observation": self.observation,
            "ci_lower": self.ci_lower,
            "ci_upper": self.ci_upper,
            "gradient_at_judgment": self.gradient_at_judgment,
            "displacement": self.displacement,
        }


def loss(theta, a):
    """Quadratic loss ``-a*theta + 0.5*a**2``."""
    return -a * theta + 0.5 * a * a


def gradient(theta_hat, a):
    """Derivative of :func:`loss` with respect to the action."""
    return -theta_hat + a


def critical_values(alpha: float) -> tuple[float, float]:
    """Return ``(c(alpha/2), c(1 - alpha/2))``.

    ``alpha = 0`` gives ``(-inf, inf)``; ``alpha = 1`` gives ``(0, 0)``.
    """
    if alpha == 0.0:
        return -math.inf, math.inf
    if alpha == 1.0:
        return 0.0, 0.0
    return quantile(alpha / 2.0), quantile(1.0 - alpha / 2.0)


def test_judgment(x: float, j: Judgment, gamma: float = 0.0) -> TestFunctionResult:
    """Conditional one-sided test of the gradient sign at the judgmental action."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    c_lo, c_hi = critical_values(j.alpha)
    g = gradient(x, j.action)
    if g <= 0.0:
        branch = Branch.C_MINUS
        if g < c_lo:
            reject = 1.0
        elif g == c_lo:
            reject = gamma
        else:
            reject = 0.0
    else:
        branch = Branch.C_PLUS
        if g > c_hi:
            reject = 1.0
        elif g == c_hi:
            reject = gamma
        else:
            reject = 0.0
    return TestFunctionResult(branch=branch, reject=reject, gamma=gamma)


# pytest would otherwise try to collect the function above
test_judgment.__test__ = False


def decide(x: float, j: Judgment, gamma: float = 0.0) -> DecisionOutcome:
    """Apply the judgment rule to a single observation.

    On a boundary tie (``-x + a_tilde`` equal to a critical value) the
    rejection action coincides with the judgmental action, so the result does
    not depend on ``gamma``; only a full rejection moves the action.

    >>> round(decide(3.0, Judgment(0.0, 0.05)).action, 6)
    1.040036
    """
    if not math.isfinite(x):
        raise ValueError(f"observation must be finite, got {x}")
    c_lo, c_hi = critical_values(j.alpha)
    result = test_judgment(x, j, gamma)
    moved = result.reject == 1.0
    if not moved:
        action = j.action
    elif result.branch is Branch.C_MINUS:
        action = x + c_lo
    else:
        action = x + c_hi
    return DecisionOutcome(
        action=action,
        rejected=moved,
        branch=result.branch,
        observation=x,
        ci_lower=x + c_lo,
        ci_upper=x + c_hi,
        gradient_at_judgment=gradient(x, j.action),
        displacement=action - j.action,
    )


def decide_many(x, j: Judgment) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`decide` with ``gamma = 0``.

    Returns ``(actions, rejected)`` arrays.  Agrees elementwise with
    :func:`decide`.
    """
    x = np.asarray(x, dtype=float)
    c_lo, c_hi = critical_values(j.alpha)
    g = -x + j.action
    down = (g <= 0.0) & (g < c_lo)
    up = (g > 0.0) & (g > c_hi)
    actions = np.full_like(x, j.action)
    actions[down] = x[down] + c_lo
    actions[up] = x[up] + c_hi
    return actions, down | up


def decide_ml(x: float) -> float:
    """Maximum-likelihood action: the observation itself."""
    return x


def decide_bayes(x, prior_mean: float = 0.0, prior_var: float = 1.0):
    """Posterior mean of theta under a normal prior and unit-variance likelihood.

    This is the minimiser of posterior expected quadratic loss.
    """
    if not prior_var > 0.0:
        raise ValueError(f"prior variance must be positive, got {prior_var}")
    return (prior_var * x + prior_mean) / (prior_var + 1.0)
