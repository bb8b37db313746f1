import numpy as np
import pytest

from consgraph.catalog import InteractionHistory, ItemRecord
from consgraph.vectors import EmbeddingMatrix

# Published pairwise similarities of the two worked filtering cases, with the
# threshold that separates accepted from rejected pairs in each.
CASES = {
    "beauty": {"tau": 0.3, "S": {(1, 2): 0.4441, (1, 3): 0.2527, (1, 4): 0.4608,
                                 (2, 3): 0.2125, (2, 4): 0.4477, (3, 4): 0.2049}},
    "yelp": {"tau": 0.5, "S": {(1, 2): 0.5926, (1, 3): 0.4699, (1, 4): 0.5121,
                               (2, 3): 0.4865, (2, 4): 0.5150, (3, 4): 0.3932}},
}


def case_similarity(name):
    s = np.eye(4)
    for (i, j), v in CASES[name]["S"].items():
        s[i - 1, j - 1] = s[j - 1, i - 1] = v
    return s


def case_embeddings(name):
    """Vectors whose Gram matrix is the published similarity matrix."""
    chol = np.linalg.cholesky(case_similarity(name))
    return EmbeddingMatrix(["n1", "n2", "n3", "n4"], chol)


def case_history():
    return InteractionHistory("case", tuple((f"n{k}", k) for k in range(1, 5)))


@pytest.fixture
def small_catalog():
    return {
        "i1": ItemRecord("i1", [("title", "Lego Set")]),
        "i2": ItemRecord("i2", [("title", "Lego Castle"), ("brand", "Lego")]),
        "i3": ItemRecord("i3", [("title", "Game Console")]),
        "i4": ItemRecord("i4", [("title", "Face Cream")]),
        "i5": ItemRecord("i5", [("title", "Night Cream")]),
    }


def basis(dim, k):
    v = np.zeros(dim)
    v[k] = 1.0
    return v


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
