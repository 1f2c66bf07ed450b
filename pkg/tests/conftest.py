import numpy as np
import pytest
from scipy import integrate

from carbon_rotation.growth import PINE, SPRUCE, PriceSchedule, stem_increment
from carbon_rotation.presets import build_problem


def quad_volume(curve, t):
    """Stem volume by adaptive quadrature of the increment."""
    return integrate.quad(lambda s: stem_increment(curve, s), 0.0, t, epsabs=0, epsrel=1e-13, limit=200)[0]


def quad_discounted(curve, t, r):
    return integrate.quad(lambda s: stem_increment(curve, s) * np.exp(-r * s), 0.0, t,
                          epsabs=0, epsrel=1e-13, limit=200)[0]


def brute_force_argmax(f, lo, hi, step=0.01):
    """Argmax of a vectorized f on a fixed grid; ties go to the first (shortest) node."""
    grid = np.arange(lo, hi + 0.5 * step, step)
    vals = np.asarray(f(grid))
    i = int(np.argmax(vals))
    return float(grid[i]), float(vals[i])


@pytest.fixture
def curves():
    return {"pine": PINE, "spruce": SPRUCE}


@pytest.fixture
def constant_price():
    return PriceSchedule.constant(60.0)


@pytest.fixture
def faustmann_pine(constant_price):
    return build_problem("pine", "fire", p_c=0.0, damage_rate=0.0, price=constant_price)


# --- acceptance report ------------------------------------------------------------------

ACCEPTANCE_RESULTS: dict[int, tuple[str, str, str]] = {}


def record_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    ACCEPTANCE_RESULTS[number] = (title, status, detail)
    print(f"criterion {number:>2} [{status}] {title}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        title, status, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number:>2} [{status}] {title}: {detail}")
