"""Shared builders for the test suite."""

import numpy as np
import pytest

from steadystate import build_system, polynomial_field


def random_system(rng, n, max_degree=3, n_terms=3, structural=True, zeta_scale=0.2):
    """Small random mechanical system with SPD matrices.

    Frequencies kept around O(1), damping ratios positive and moderate;
    nonlinear terms of degree 2..max_degree with small coefficients.
    """
    Q = rng.standard_normal((n, n))
    M = Q @ Q.T + n * np.eye(n)
    Q = rng.standard_normal((n, n))
    K = Q @ Q.T + n * np.eye(n)
    if structural:
        c_M = 0.02 + 0.05 * rng.random()
        c_K = 0.02 + zeta_scale * rng.random()
        C = c_M * M + c_K * K
    else:
        S = rng.standard_normal((n, n)) * 0.1
        C = 0.3 * (M + K) / n + (S - S.T)
    terms = []
    dim = 2 * n
    for _ in range(n_terms):
        deg = int(rng.integers(2, max_degree + 1))
        e = [0] * dim
        for _ in range(deg):
            e[int(rng.integers(0, dim))] += 1
        coeff = 0.3 * rng.standard_normal(n)
        terms.append((tuple(e), coeff))
    return build_system(M, C, K, terms=terms)


def identity_lift(dim):
    """Identity polynomial map, used as the trivial reduction lift."""
    eye = np.eye(dim)
    terms = [
        (tuple(1 if k == j else 0 for k in range(dim)), eye[:, j]) for j in range(dim)
    ]
    return polynomial_field(dim, dim, terms, min_degree=1)


def first_order_field(system):
    """R(z) = (v, -M^{-1}(K x + C v + f(x, v))): the B = I vector field."""
    n = system.n
    Minv = np.linalg.inv(system.M)
    lin = np.block(
        [
            [np.zeros((n, n)), np.eye(n)],
            [-Minv @ system.K, -Minv @ system.C],
        ]
    )
    terms = []
    for j in range(2 * n):
        e = [0] * (2 * n)
        e[j] = 1
        terms.append((tuple(e), lin[:, j]))
    for exponents, coeff in system.nonlinearity.terms:
        terms.append((exponents, np.concatenate([np.zeros(n), -Minv @ coeff])))
    return polynomial_field(2 * n, 2 * n, terms, min_degree=1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
