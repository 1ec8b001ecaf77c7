import numpy as np
import pytest

from qwabsorb import _backend
from qwabsorb.walk import LabeledGraph

BACKENDS = sorted(_backend.available_backends())


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run the test once per available kernel backend."""
    monkeypatch.setattr(_backend, "kernels", _backend.available_backends()[request.param])
    return request.param


def z4z2_cayley() -> LabeledGraph:
    """Cayley graph of Z4 x Z2 with labels 1 = g, 2 = h, 3 = g^-1.

    Vertex ``g^k h^j`` is index ``k + 4 j``.
    """
    table = np.zeros((3, 8), dtype=np.int64)
    for j in range(2):
        for k in range(4):
            v = k + 4 * j
            table[0, v] = (k + 1) % 4 + 4 * j
            table[1, v] = k + 4 * (1 - j)
            table[2, v] = (k - 1) % 4 + 4 * j
    return LabeledGraph(table)


def cycle_graph(size: int) -> LabeledGraph:
    """Cycle Z_size with label 1 = +1 (R) and label 2 = -1 (L)."""
    v = np.arange(size)
    return LabeledGraph(np.stack([(v + 1) % size, (v - 1) % size]))


@pytest.fixture
def cayley():
    return z4z2_cayley()
