"""Two-urn betting experiment for eliciting the confidence level.

Bet ``k`` caps the black (losing) balls in urn 1 at ``k`` and guarantees at
least ``k`` red (winning) balls in urn 2; both urns hold 100 balls.  The
chosen bet maps to ``alpha = k / 100``.
"""

from __future__ import annotations

from dataclasses import dataclass

N_BALLS = 100
MAX_ATTEMPTS = 3


class ElicitationError(ValueError):
    """No valid bet was entered within the allowed attempts."""


@dataclass(frozen=True)
class Bet:
    index: int

    def __post_init__(self):
        if isinstance(self.index, bool) or not isinstance(self.index, int):
            raise ValueError(f"bet must be an integer, got {self.index!r}")
        if not 0 <= self.index <= N_BALLS:
            raise ValueError(f"bet must lie in [0, {N_BALLS}], got {self.index}")

    @property
    def urn1_black_max(self) -> int:
        return self.index

    @property
    def urn2_red_min(self) -> int:
        return self.index


def bet_to_alpha(b: Bet | int) -> float:
    if not isinstance(b, Bet):
        b = Bet(b)
    return b.index / N_BALLS


def alpha_to_bet(alpha: float) -> Bet:
    """Inverse of :func:`bet_to_alpha`; alpha must sit on the 1/100 grid."""
    k = round(alpha * N_BALLS)
    if not 0 <= k <= N_BALLS or k / N_BALLS != alpha:
        raise ValueError(f"alpha {alpha} is not one of 0, 0.01, ..., 1")
    return Bet(k)


def bet_row(k: int) -> tuple[str, str, str, str]:
    """(urn 1 white, urn 1 black, urn 2 white, urn 2 red) for bet ``k``."""
    Bet(k)
    if k == 0 or k == N_BALLS:
        rest = str(N_BALLS - k)
        return rest, str(k), rest, str(k)
    rest = N_BALLS - k
    return f"≥{rest}", f"≤{k}", f"≤{rest}", f"≥{k}"


def render_bet_table() -> str:
    lines = [
        "        |    Urn 1      |    Urn 2",
        "  Bet   | White | Black | White |  Red",
        "--------+-------+-------+-------+------",
    ]
    for k in range(N_BALLS + 1):
        cells = bet_row(k)
        lines.append(f"  {k:>4}  | " + " | ".join(f"{c:>5}" for c in cells))
    return "\n".join(lines) + "\n"


NARRATIVE = """\
Two urns hold 100 balls each. Urn 1 has white and black balls; urn 2 has
white and red balls. You will not be told which urn the ball comes from.
  black ball: you lose EUR 100
  red ball:   you win the euro amount that is worth as much to you as
              losing EUR 100 hurts
  white ball: nothing happens
Picking bet k means urn 1 has at most k black balls and urn 2 has at
least k red balls. Bet 0 means you never take the bet.
"""


def elicit_interactive(input_stream, output_stream, max_attempts: int = MAX_ATTEMPTS) -> float:
    """Show the table, read one bet, return its alpha.

    Raises
    ------
    ElicitationError
        After ``max_attempts`` invalid or missing answers.
    """
    output_stream.write(render_bet_table())
    output_stream.write("\n" + NARRATIVE)
    for attempt in range(1, max_attempts + 1):
        output_stream.write(f"Choose a bet between 0 and {N_BALLS}: ")
        output_stream.flush()
        line = input_stream.readline()
        if not line:
            output_stream.write("\n")
            break
        text = line.strip()
        try:
            bet = Bet(int(text))
        except ValueError:
            left = max_attempts - attempt
            output_stream.write(f"invalid bet {text!r}; {left} attempt(s) left\n")
            continue
        alpha = bet_to_alpha(bet)
        output_stream.write(f"bet {bet.index} -> alpha = {alpha:.2f}\n")
        return alpha
    raise ElicitationError("no valid bet entered")
