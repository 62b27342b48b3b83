import numpy as np
import pytest

from pintlab.model import (
    AffinePropagator,
    backward_euler_propagator,
    heat1d_system,
    trapezoidal_propagator,
)

# Coarse interval width shared by the heat benchmarks; the number of
# intervals p varies per test, the propagators do not.
HEAT_SPAN = 0.2


@pytest.fixture(scope="session")
def heat_setups():
    """(ivp, coarse, fine) for the two heat benchmark sizes.

    Fine: trapezoidal, 100 substeps. Coarse: one backward Euler step.
    Cost ratio 100:1 in solve units.
    """
    out = {}
    for n in (4, 8):
        ivp = heat1d_system(
            n_interior=n, length=1.0, boundary_left=23.0, boundary_right=23.0,
            initial_temp=30.0, t_final=HEAT_SPAN,
        )
        coarse = backward_euler_propagator(ivp, HEAT_SPAN, 1)
        fine = trapezoidal_propagator(ivp, HEAT_SPAN, 100)
        out[n] = (ivp, coarse, fine)
    return out


@pytest.fixture()
def literal_scalar_pair():
    """The worked scalar example: coarse multiplies by 0.8, fine by 0.77880."""
    coarse = AffinePropagator(np.array([[0.8]]), np.zeros(1), 1.0)
    fine = AffinePropagator(np.array([[0.77880]]), np.zeros(1), 25.0)
    return coarse, fine


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance checklist (one line per criterion) after the run."""
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for num, ok, detail in sorted(RESULTS):
        terminalreporter.write_line(
            f"criterion {num:2d} {'PASS' if ok else 'FAIL'}  {detail}")
