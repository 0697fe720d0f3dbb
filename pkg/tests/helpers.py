"""Random small instances shared by the test modules."""

import numpy as np

from catmml.data import CategoricalDataset
from catmml.model import MixtureModel


def random_instance(rng, n_max=20, K_max=3, L_max=3, C_max=4, T_max=3, weighted=False):
    """Return ``(data, model, rows, theta_nested)`` for a random small problem."""
    n = int(rng.integers(1, n_max + 1))
    K = int(rng.integers(1, K_max + 1))
    L = int(rng.integers(1, L_max + 1))
    cats = [int(rng.integers(2, C_max + 1)) for _ in range(L)]
    trials = [int(rng.integers(1, T_max + 1)) for _ in range(L)]
    blocks, rows = [], [[] for _ in range(n)]
    for C, T in zip(cats, trials):
        b = rng.multinomial(T, rng.dirichlet(np.ones(C)), size=n)
        blocks.append(b)
        for i in range(n):
            rows[i].append([int(x) for x in b[i]])
    weights = rng.uniform(0.2, 3.0, size=n) if weighted else None
    data = CategoricalDataset(np.hstack(blocks), cats, trials, weights=weights)
    alpha = rng.dirichlet(np.ones(K))
    theta_nested = [[list(rng.dirichlet(np.ones(C))) for C in cats] for _ in range(K)]
    theta = np.array([np.concatenate(t) for t in theta_nested])
    model = MixtureModel(alpha, theta, cats, trials)
    return data, model, rows, theta_nested


def nested_theta(model):
    return [[list(b[k]) for b in model.theta_blocks()] for k in range(model.K)]
