"""Random test problems with a known solution."""
from __future__ import annotations

import itertools

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ..core import EllipsoidSurface, Hyperplane, PairwiseDistance, ProblemInstance, Sphere


def complex_gaussian(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def gen_circle_problem(n: int, m: int, seed) -> ProblemInstance:
    """Spheres with Gaussian centres passing through a Gaussian ``x*``."""
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((m, n))
    x_star = rng.standard_normal(n)
    radii = np.linalg.norm(x_star - centers, axis=1)
    cons = [Sphere(c, r) for c, r in zip(centers, radii)]
    return ProblemInstance(n, cons, known_solution=x_star)


def gen_phase_retrieval(n: int, m: int, seed) -> ProblemInstance:
    """Magnitude-only measurements ``b_i = |a_i^H x*|`` with complex Gaussian data."""
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    rng = np.random.default_rng(seed)
    A = complex_gaussian(rng, (m, n))
    x_star = complex_gaussian(rng, n)
    b = np.abs(A.conj() @ x_star)
    cons = [EllipsoidSurface(a, bi) for a, bi in zip(A, b)]
    return ProblemInstance(n, cons, field="complex", known_solution=x_star)


def gen_linear_system(n: int, m: int, seed) -> ProblemInstance:
    if n < 1 or m < n:
        raise ValueError("need m >= n >= 1")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    x_star = rng.standard_normal(n)
    b = A @ x_star
    return ProblemInstance(n, [Hyperplane(a, bi) for a, bi in zip(A, b)], known_solution=x_star)


def gen_graph_realization(n_v: int, d: int, edge_count: int, seed, retries: int = 100) -> ProblemInstance:
    """Distance constraints on a random connected edge set over Gaussian points in ``R^d``."""
    pairs = list(itertools.combinations(range(n_v), 2))
    if n_v < 2 or d < 1:
        raise ValueError("need at least two points and d >= 1")
    if not (n_v - 1 <= edge_count <= len(pairs)):
        raise ValueError(f"edge_count must lie in [{n_v - 1}, {len(pairs)}]")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n_v, d))
    for _ in range(retries):
        chosen = sorted(rng.choice(len(pairs), size=edge_count, replace=False))
        edges = [pairs[k] for k in chosen]
        rows, cols = zip(*edges)
        graph = coo_matrix((np.ones(len(edges)), (rows, cols)), shape=(n_v, n_v))
        if connected_components(graph, directed=False)[0] == 1:
            break
    else:
        raise RuntimeError(f"no connected edge set found in {retries} attempts")
    cons = [
        PairwiseDistance(i, j, float(np.linalg.norm(X[i] - X[j])), d, n_v) for i, j in edges
    ]
    return ProblemInstance(n_v * d, cons, known_solution=X.ravel())
