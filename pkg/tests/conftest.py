import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

from isinganneal.ising import IsingInstance

FROZEN = json.loads((Path(__file__).parent / "oracles" / "frozen.json").read_text())


@pytest.fixture(scope="session")
def frozen():
    return FROZEN


def ferro_chain(b: int, J: float = 1.0) -> IsingInstance:
    return IsingInstance.from_edges(b, [(i, i + 1, J) for i in range(b - 1)])


def triangle(J: float) -> IsingInstance:
    return IsingInstance.from_edges(3, [(0, 1, J), (1, 2, J), (0, 2, J)])


@st.composite
def instances(draw, min_b=1, max_b=6, fields=True, integral=False):
    b = draw(st.integers(min_b, max_b))
    pairs = [(i, j) for i in range(b) for j in range(i + 1, b)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs))) if pairs else []
    if integral:
        w = st.sampled_from([-1.0, 1.0])
    else:
        w = st.floats(-2.0, 2.0, allow_nan=False)
    edges = [(i, j, draw(w)) for i, j in chosen]
    h = None
    if fields:
        h = draw(st.lists(st.floats(-1.0, 1.0, allow_nan=False), min_size=b, max_size=b))
    return IsingInstance.from_edges(b, edges, h=h)


@st.composite
def spin_vectors(draw, b):
    return np.array(draw(st.lists(st.sampled_from([-1, 1]), min_size=b, max_size=b)), dtype=np.int8)


# -- acceptance summary ------------------------------------------------------

ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
