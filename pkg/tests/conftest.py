"""Shared fixtures: tracks with analytic ground truth and small search spaces."""

import numpy as np
import pytest

from raceopt.param_space import ORIGINAL_BOUNDS, build_space
from raceopt.track import builtin_track


@pytest.fixture(scope="session")
def circle_track():
    return builtin_track("circle")


@pytest.fixture(scope="session")
def oval_track():
    return builtin_track("oval")


@pytest.fixture(scope="session")
def pp_space_oval(oval_track):
    return build_space("purepursuit", ORIGINAL_BOUNDS, 100, track=oval_track)


@pytest.fixture(scope="session")
def slow_unit(pp_space_oval):
    """Midpoint candidate slowed down to the velocity lower bounds."""
    u = np.full(pp_space_oval.n, 0.5)
    u[2] = 0.0
    u[3] = 0.0
    return u
