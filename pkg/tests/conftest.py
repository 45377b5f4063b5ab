import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from gtqc.graphs import Graph

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@st.composite
def graphs(draw, min_nodes=1, max_nodes=8, connected=False):
    """Random simple graph; ``connected`` adds a random spanning tree first."""
    n = draw(st.integers(min_nodes, max_nodes))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    chosen = set()
    if connected:
        for v in range(1, n):
            u = draw(st.integers(0, v - 1))
            chosen.add((u, v))
    if pairs:
        extra = draw(st.lists(st.sampled_from(pairs), max_size=len(pairs), unique=True))
        chosen.update(extra)
    return Graph(n, sorted(chosen))


@st.composite
def graphs_with_perm(draw, **kw):
    g = draw(graphs(**kw))
    perm = draw(st.permutations(range(g.n_nodes)))
    return g, np.array(perm)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
