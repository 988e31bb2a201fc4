import numpy as np
import pytest

from mfac.plants import EX4_PHI1, EX4_PHI2, EX4_PHI3, get_plant, plant_step
from mfac.signals import SampleHistory

# input amplitudes that keep each open-loop plant bounded over 10^3 steps
INPUT_SCALE = {"ex1": 0.3, "ex1_1": 0.3, "ex2": 5.0, "ex3": 0.3}


def random_history(plant_id, steps=1000, seed=0, w_scale=0.1):
    """Bounded trajectory driven by uniform random inputs and disturbances.

    ex4 is open-loop unstable, so its input cancels the output dynamics and
    places y(k+1) at a random target in [-1, 1].
    """
    plant = get_plant(plant_id)
    rng = np.random.default_rng(seed)
    h = SampleHistory(1, plant.m_y, plant.m_u)
    for k in (1, 2):
        h.push_sample(k, y=rng.uniform(-0.2, 0.2, plant.m_y), w=np.zeros(plant.m_y))
    h.push_sample(1, u=rng.uniform(-0.2, 0.2, plant.m_u))
    for k in range(2, steps + 2):
        if plant_id == "ex4":
            target = rng.uniform(-1, 1, 2)
            u = np.linalg.solve(EX4_PHI3, target - EX4_PHI1 @ h.y[k] - EX4_PHI2 @ h.y[k - 1])
        else:
            u = rng.uniform(-INPUT_SCALE[plant_id], INPUT_SCALE[plant_id], plant.m_u)
        h.push_sample(k, u=u)
        w = rng.uniform(-w_scale, w_scale, plant.m_y)
        h.push_sample(k + 1, y=plant_step(plant_id, h, k, u, w), w=w)
    return h


@pytest.fixture
def ex1_history():
    return random_history("ex1", steps=50, seed=3)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report_line():
    """Collect one pass/fail line per acceptance criterion for the terminal summary."""
    def record(number, passed, detail):
        _ACCEPTANCE_LINES.append(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
        print(_ACCEPTANCE_LINES[-1])
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
