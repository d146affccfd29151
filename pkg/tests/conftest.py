import json

import numpy as np
import pytest

from timefuel import LtiSystem, build_spectrum, validate_problem
from timefuel.simulate import SwitchingSchedule


@pytest.fixture
def example_spec():
    """Second-order stable system with k = 1 used throughout the suite."""
    system = LtiSystem(build_spectrum([(-1, 1), (-2, 1)]), (1.0, 1.0))
    return validate_problem(system, [0.6, 0.4], 1.0)


@pytest.fixture
def example_problem_file(tmp_path):
    path = tmp_path / "problem.json"
    path.write_text(
        json.dumps(
            {
                "eigenvalues": [[-1, 1], [-2, 1]],
                "b": [1, 1],
                "x0": [0.6, 0.4],
                "k": 1,
            }
        )
    )
    return path


def random_system(rng, n):
    """Mixed stable/unstable spectrum with small integer data."""
    pool = [c for c in range(-4, 5) if c != 0]
    scaled = rng.choice(pool, size=n, replace=False)
    l = int(rng.integers(1, 3))
    gains = rng.uniform(0.5, 2.0, size=n) * rng.choice([-1.0, 1.0], size=n)
    spectrum = build_spectrum([(int(c), l) for c in scaled])
    return LtiSystem(spectrum, tuple(gains))


def random_schedule(rng, max_bangs=3, max_segment=0.4, allow_lead=True):
    """Random admissible schedule: bangs separated by off periods."""
    bangs = int(rng.integers(1, max_bangs + 1))
    levels = []
    if allow_lead and rng.random() < 0.5:
        levels.append(0)
    for i in range(bangs):
        levels.append(int(rng.choice([-1, 1])))
        if i + 1 < bangs:
            levels.append(0)
    durations = rng.uniform(0.05, max_segment, size=len(levels))
    breakpoints = np.concatenate([[0.0], np.cumsum(durations)])
    return SwitchingSchedule(tuple(breakpoints), tuple(levels))
