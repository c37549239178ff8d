"""Shared fixtures: small graphs and deterministic generators."""

import numpy as np
import pytest

from hygraph.data import GraphDataset, generate_hierarchy


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def path_graph():
    """0 -> 1 -> 2 with simple features."""
    return GraphDataset(
        n=3,
        features=np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]),
        edges=np.array([[0, 1], [1, 2]]),
        labels=np.array([0, 1, 1]),
        classes=2,
    )


@pytest.fixture
def star_graph():
    """Center 0 with leaves 1..3 (edges point outward)."""
    return GraphDataset(
        n=4,
        features=np.array([[0.1, 0.2], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]),
        edges=np.array([[0, 1], [0, 2], [0, 3]]),
        labels=np.array([0, 1, 1, 1]),
        classes=2,
    )


@pytest.fixture
def triangle_edges():
    return np.array([[0, 1], [1, 2], [2, 0]])


@pytest.fixture
def square_edges():
    return np.array([[0, 1], [1, 2], [2, 3], [3, 0]])


@pytest.fixture(scope="session")
def hierarchy_small():
    return generate_hierarchy(depth=3, branching=3, classes=3, noise=2.0, seed=5)
