import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from acpdas import ModelParams, assemble, build_uniform_mesh, initial_wellmixed  # noqa: E402
from acpdas.pdas import (build_saddle_system, fix_known_values,  # noqa: E402
                         update_active_sets)


def make_system(n=4, N=2, epsilon=0.1, tau=0.01, noise=0.05, seed=0, active=None):
    """Reduced saddle system of the first sweep from well-mixed data."""
    mesh = build_uniform_mesh(n)
    fem = assemble(mesh)
    params = ModelParams(N, epsilon)
    st = initial_wellmixed(mesh, params, noise, seed, tau=tau)
    sets = update_active_sets(st, params.threshold(fem.h))
    if active is not None:
        sets = type(sets)(active=active)
    st = fix_known_values(sets, st)
    return build_saddle_system(sets, st, fem, params), fem, params


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
