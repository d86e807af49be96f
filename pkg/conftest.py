import os

import hypothesis
import numpy as np
import pytest

import duality_common
import polyfun

np.seterr(all="warn")

# Numerical examples can take a while; timing is not what is being tested.
hypothesis.settings.register_profile("dev", deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.register_profile("debugger", report_multiple_bugs=False, deadline=None)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "dev"))

PROBLEMS_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "problems")


def problem_path(name):
    return os.path.join(PROBLEMS_DIR, name + ".json")


@pytest.fixture
def problems_dir():
    return PROBLEMS_DIR


@pytest.fixture
def example1():
    return duality_common.load_problem(problem_path("example1"))[0]


@pytest.fixture
def quadratic_1d():
    return duality_common.load_problem(problem_path("quadratic_1d"))[0]


@pytest.fixture
def anisotropic_2d():
    return duality_common.load_problem(problem_path("anisotropic_2d"))[0]


@pytest.fixture
def isotropic_2d():
    return duality_common.load_problem(problem_path("isotropic_2d"))[0]


@pytest.fixture
def separable_3d():
    return duality_common.load_problem(problem_path("separable_quartic_3d"))[0]


@pytest.fixture
def convex_1d():
    return polyfun.PolynomialFunction(1, [(1.0, [2])])
