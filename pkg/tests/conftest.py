import numpy as np
import pytest

from flinng.index import FlinngConfig, FlinngIndex
from flinng.lsh import HashFamilySpec


def random_token_points(n, n_tokens, seed, universe=10**9):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        p = np.unique(rng.integers(0, universe, n_tokens).astype(np.uint64))
        if p.size:
            out.append(p)
    return out


def small_index(n=50, B=8, R=3, m=16, l_bits=10, seed=3, points=None):
    points = points if points is not None else random_token_points(n, 40, seed)
    spec = HashFamilySpec("minhash", m=m, l_bits=l_bits, seed=seed)
    cfg = FlinngConfig(num_cells=B, repetitions=R, hash_spec=spec, metric="jaccard")
    return points, FlinngIndex.build(points, cfg)


@pytest.fixture(scope="session")
def token_corpus_50():
    return small_index()
