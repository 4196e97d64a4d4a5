import numpy as np
import pytest
from hypothesis import strategies as st

from bargw.tree import ObservedForest


def random_tree(rng, depth, keep=0.8, values=True):
    """Random hereditary tree: each daughter of an observed cell is kept with prob ``keep``."""
    nodes = [1]
    frontier = [1]
    for _ in range(depth):
        nxt = []
        for k in frontier:
            for c in (2 * k, 2 * k + 1):
                if rng.random() < keep:
                    nxt.append(c)
        nodes.extend(nxt)
        frontier = nxt
    vals = rng.normal(0.5, 0.3, size=len(nodes)) if values else None
    return nodes, vals


def random_forest(rng, m, depth, keep=0.8, values=True):
    trees, vals = zip(*(random_tree(rng, depth, keep, values) for _ in range(m)))
    return ObservedForest(list(trees), list(vals) if values else None, depth=depth)


@st.composite
def forests(draw, max_m=4, max_depth=4, values=True):
    seed = draw(st.integers(0, 2**32 - 1))
    m = draw(st.integers(1, max_m))
    depth = draw(st.integers(1, max_depth))
    keep = draw(st.floats(0.3, 1.0))
    return random_forest(np.random.default_rng(seed), m, depth, keep, values)


@pytest.fixture
def hand_tree():
    """Seven-slot tree with cell 5 missing."""
    return ObservedForest([[1, 2, 3, 4, 6, 7]], [[1.0, 2.0, 3.0, 4.0, 6.0, 7.0]])


# -- acceptance bookkeeping ------------------------------------------------------

ACCEPTANCE: dict[int, list[tuple[str, str]]] = {}


def record(criterion: int, ok, detail: str) -> bool:
    """Note the outcome of (part of) an acceptance criterion and echo it."""
    status = "PASS" if ok is True else ("SKIP" if ok is None else "FAIL")
    ACCEPTANCE.setdefault(criterion, []).append((status, detail))
    print(f"criterion {criterion}: {status}  {detail}")
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[crit]
        statuses = {s for s, _ in parts}
        status = "FAIL" if "FAIL" in statuses else ("PASS" if "PASS" in statuses else "SKIP")
        shown = [d for s, d in parts if s == "FAIL"] if status == "FAIL" else [d for _, d in parts]
        if len(parts) > 1:
            n_ok = sum(s == "PASS" for s, _ in parts)
            shown.insert(0, f"{n_ok}/{len(parts)} parts pass")
        terminalreporter.write_line(f"criterion {crit}: {status}  " + "; ".join(shown))
