import numpy as np
import pytest

from sbm_lab.model import GraphSample, make_rng


def random_graph(n, p, seed):
    rng = make_rng(seed)
    iu = np.triu_indices(n, 1)
    keep = rng.random(len(iu[0])) < p
    return GraphSample.from_edges(n, np.stack([iu[0][keep], iu[1][keep]], axis=1))


@pytest.fixture
def small_graph():
    return random_graph
