"""Decisions anchored on a judgmental action and a confidence level."""

__version__ = "0.1.0"

from judgment_rule.judgment_core import (  # noqa: E402
    Branch,
    DecisionOutcome,
    Judgment,
    decide,
    decide_bayes,
    decide_ml,
    gradient,
    loss,
)

__all__ = [
    "Branch",
    "DecisionOutcome",
    "Judgment",
    "decide",
    "decide_bayes",
    "decide_ml",
    "gradient",
    "loss",
]
