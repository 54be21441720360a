"""Shared hypothesis strategies and random generators for probability vectors."""

import numpy as np
from hypothesis import strategies as st

from app.core.majorization import ProbVec, make_prob_vec


def prob_vecs(min_dim: int = 1, max_dim: int = 8, allow_zeros: bool = True):
    """Integer weights renormalized into a ProbVec; integer weights keep sums exact enough to reason about."""
    low = 0 if allow_zeros else 1
    return (
        st.lists(st.integers(min_value=low, max_value=1000), min_size=min_dim, max_size=max_dim)
        .filter(lambda ws: sum(ws) > 0)
        .map(lambda ws: make_prob_vec(ws, policy="renormalize"))
    )


def entangled_prob_vecs(min_dim: int = 2, max_dim: int = 8):
    return prob_vecs(max(2, min_dim), max_dim, allow_zeros=False)


def random_prob_vec(rng: np.random.Generator, dim: int, sparsity: float = 0.0) -> ProbVec:
    weights = rng.random(dim)
    if sparsity:
        weights[rng.random(dim) < sparsity] = 0.0
        if not weights.any():
            weights[0] = 1.0
    return make_prob_vec(weights, policy="renormalize")
