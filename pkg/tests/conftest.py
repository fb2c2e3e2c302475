"""Shared fixtures and random-model builders."""

import numpy as np
import pytest

from tvdp import load_example, parse_model


@pytest.fixture
def machine():
    return load_example("machine")


@pytest.fixture
def threestate():
    return load_example("threestate")


def random_model_doc(rng, max_states=3, max_actions=2, horizon=None,
                     vector_cost=False, discount=None, radius=None, min_states=2):
    """A random valid model document in dict form."""
    n = int(rng.integers(min_states, max_states + 1))
    states = [f"s{i}" for i in range(n)]
    actions = {
        s: [f"a{k}" for k in range(int(rng.integers(1, max_actions + 1)))]
        for s in states
    }
    kernel = {
        s: {a: [float(x) for x in rng.dirichlet(np.ones(n))] for a in actions[s]}
        for s in states
    }
    cost = {}
    for s in states:
        cost[s] = {}
        for a in actions[s]:
            if vector_cost and rng.random() < 0.5:
                cost[s][a] = [float(x) for x in rng.uniform(0.0, 10.0, n)]
            else:
                cost[s][a] = float(rng.uniform(0.0, 10.0))
    doc = {
        "states": states,
        "actions": actions,
        "kernel": kernel,
        "cost": cost,
        "discount": float(rng.uniform(0.3, 0.95)) if discount is None else discount,
        "radius": float(rng.uniform(0.0, 2.0)) if radius is None else radius,
    }
    if horizon is not None:
        doc["horizon"] = int(horizon)
        if rng.random() < 0.5:
            doc["terminal_cost"] = [float(x) for x in rng.uniform(0.0, 5.0, n)]
    return doc


def random_model(rng, **kwargs):
    return parse_model(random_model_doc(rng, **kwargs))


def random_oracle_instance(rng, max_size=8):
    """A random (mu, levels, radius) triple with occasional ties and zeros."""
    n = int(rng.integers(2, max_size + 1))
    mu = rng.dirichlet(np.full(n, rng.choice([0.3, 1.0, 3.0])))
    if rng.random() < 0.2:
        mu[int(rng.integers(0, n))] = 0.0
        mu /= mu.sum()
    lv = rng.normal(0.0, 10.0, n)
    if rng.random() < 0.3 and n >= 3:
        lv[int(rng.integers(0, n))] = lv[int(rng.integers(0, n))]
    pick = rng.random()
    if pick < 0.1:
        r = 0.0
    elif pick < 0.2:
        r = 2.0
    else:
        r = float(rng.uniform(0.0, 2.0))
    return mu, lv, r
