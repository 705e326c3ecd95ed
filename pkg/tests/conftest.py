import math

import mpmath
import pytest

mpmath.mp.dps = 40


def ncdf_oracle(z: float) -> float:
    """Normal CDF from the erf Taylor series evaluated at 40 digits."""
    x = mpmath.mpf(z) / mpmath.sqrt(2)
    term = x
    total = x
    n = 0
    while abs(term) > mpmath.mpf(10) ** -45 * max(1, abs(total)):
        n += 1
        term *= -x * x / n
        total += term / (2 * n + 1)
    return float(mpmath.mpf("0.5") + total / mpmath.sqrt(mpmath.pi))


def bisect_quantile(p: float, tol: float = 1e-12) -> float:
    """Quantile by bisection on the high-precision CDF."""
    lo, hi = -40.0, 40.0
    target = mpmath.mpf(p)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mpmath.ncdf(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@pytest.fixture
def tmp_prices(tmp_path):
    def write(rows, header="date,close"):
        path = tmp_path / "prices.csv"
        path.write_text(header + "\n" + "\n".join(rows) + "\n", encoding="utf-8")
        return path
    return write


ACCEPTANCE_LINES: dict[str, str] = {}


@pytest.fixture
def criterion(request):
    """Record a PASS/FAIL line for an acceptance criterion.

    The line is written as FAIL first and upgraded once the test body
    finishes, so an assertion error leaves the FAIL line in place.
    """
    name = request.node.name
    ACCEPTANCE_LINES[name] = f"FAIL  {name}"

    def passed(detail: str = ""):
        ACCEPTANCE_LINES[name] = f"PASS  {name}" + (f"  ({detail})" if detail else "")

    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES.values(), key=lambda s: s.split()[1]):
        terminalreporter.write_line(line)
