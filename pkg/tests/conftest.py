import numpy as np
import pytest

from ricci_spectral_lab.catalog import phi_field
from ricci_spectral_lab.geometry import ConformalGrid

BUMP = "bump(0.5, 0.5, 0.05, 0.25)"


def bump_torus(n, expr=BUMP):
    g = ConformalGrid.torus(n)
    x, y = g.coordinates()
    return g.with_phi(phi_field(expr, x, y, g.extent, True))


def phi_rectangle(n, expr):
    g = ConformalGrid.rectangle(n)
    x, y = g.coordinates()
    return g.with_phi(phi_field(expr, x, y, g.extent, False))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, echoed in the terminal summary
CRITERIA_LINES = []


def record_criterion(number, title, ok, err, tol, detail=""):
    line = f"criterion {number} ({title}): {'PASS' if ok else 'FAIL'} err={err:.3e} tol={tol:.3e}"
    if detail:
        line += f" [{detail}]"
    CRITERIA_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
