import itertools

import numpy as np
import pytest

from domain.kds.errors import DimensionError, InvalidInputError
from domain.kds.oracle import finite_diff_grad
from domain.kds.simplex import (on_simplex, project_simplex, project_simplex_batch, projection_vjp,
                                project_simplex_threshold_batch, projection_vjp_batch, simplex_threshold_batch)


@pytest.mark.parametrize("v, expected", [
    ([0.2, 0.8], [0.2, 0.8]),
    ([5.0, 5.0, 5.0], [1 / 3, 1 / 3, 1 / 3]),
    ([0.5, 0.3, -0.1], [0.6, 0.4, 0.0]),
])
def test_project_simplex_examples(v, expected):
    np.testing.assert_allclose(project_simplex(v), expected, atol=1e-12)


def test_project_simplex_rejects_bad_input():
    with pytest.raises(InvalidInputError):
        project_simplex([0.1, np.nan])
    with pytest.raises(InvalidInputError):
        project_simplex([np.inf, 0.0])
    with pytest.raises(DimensionError):
        project_simplex(np.array([]))
    with pytest.raises(DimensionError):
        project_simplex(np.zeros((2, 2)))


def test_projection_lands_on_simplex(rng):
    V = rng.normal(scale=3.0, size=(7, 10000))
    P = project_simplex_batch(V)
    assert np.all(P >= 0)
    np.testing.assert_allclose(P.sum(axis=0), 1.0, atol=1e-9)


def test_projection_is_idempotent_and_nonexpansive(rng):
    U = rng.normal(size=(5, 2000))
    V = rng.normal(size=(5, 2000))
    PU, PV = project_simplex_batch(U), project_simplex_batch(V)
    assert np.max(np.abs(project_simplex_batch(PU) - PU)) <= 1e-12
    assert np.all(np.linalg.norm(PU - PV, axis=0) <= np.linalg.norm(U - V, axis=0) + 1e-12)


def test_projection_preserves_order(rng):
    V = rng.normal(size=(6, 500))
    P = project_simplex_batch(V)
    for i, j in itertools.combinations(range(6), 2):
        larger = V[i] >= V[j]
        assert np.all(P[i][larger] >= P[j][larger])


def test_projection_matches_grid_search(rng):
    step = 0.01
    grid = np.array([(a, b, 1.0 - a - b) for a in np.arange(0, 1 + 1e-9, step)
                     for b in np.arange(0, 1 - a + 1e-9, step)])
    grid[:, 2] = np.clip(grid[:, 2], 0.0, None)
    for _ in range(50):
        v = rng.normal(size=3)
        best = grid[np.argmin(np.sum((grid - v) ** 2, axis=1))]
        assert np.linalg.norm(project_simplex(v) - best) <= 2 * step


def test_batch_matches_single_columns(rng):
    V = rng.normal(size=(4, 25))
    P = project_simplex_batch(V)
    for i in range(V.shape[1]):
        np.testing.assert_array_equal(P[:, i], project_simplex(V[:, i]))


def test_threshold_shift_reproduces_projection(rng):
    V = rng.normal(size=(5, 30))
    tau = simplex_threshold_batch(V)
    np.testing.assert_allclose(np.maximum(V - tau, 0.0), project_simplex_batch(V), atol=1e-12)
    P, tau_joint = project_simplex_threshold_batch(V)
    np.testing.assert_array_equal(P, project_simplex_batch(V))
    np.testing.assert_array_equal(tau_joint, tau)


@pytest.mark.parametrize("v, g, expected", [
    ([5.0, 5.0, 5.0], [1.0, 0.0, 0.0], [2 / 3, -1 / 3, -1 / 3]),
    ([0.5, 0.3, -0.1], [1.0, 1.0, 1.0], [0.0, 0.0, 0.0]),
    ([0.5, 0.3, -0.1], [1.0, 0.0, 0.0], [0.5, -0.5, 0.0]),
])
def test_projection_vjp_examples(v, g, expected):
    np.testing.assert_allclose(projection_vjp(v, g), expected, atol=1e-12)


def test_projection_vjp_matches_finite_differences(rng):
    checked = 0
    while checked < 50:
        v = rng.normal(size=int(rng.integers(2, 7)))
        g = rng.normal(size=len(v))
        p = project_simplex(v)
        # stay away from the kinks of the projection
        if np.min(np.abs(v - simplex_threshold_batch(v[:, None])[0])) < 1e-4:
            continue
        numeric = finite_diff_grad(lambda u: float(g @ project_simplex(u)), v, h=1e-6)
        analytic = projection_vjp(v, g)
        assert np.linalg.norm(numeric - analytic) <= 1e-5 * max(1.0, np.linalg.norm(analytic))
        assert on_simplex(p)
        checked += 1


def test_projection_vjp_shape_mismatch():
    with pytest.raises(DimensionError):
        projection_vjp_batch(np.zeros((3, 2)), np.zeros((3, 1)))
    with pytest.raises(DimensionError):
        projection_vjp([1.0, 2.0], [1.0])


@pytest.mark.parametrize("v, expected", [
    ([1e16, 1e16], [0.5, 0.5]),
    ([1e16, 0.0], [1.0, 0.0]),
    ([3e15, 3e15 + 0.5], [0.25, 0.75]),
    ([-1e16, -1e16 + 4.0, -1e16], [0.0, 1.0, 0.0]),
])
def test_large_magnitudes_stay_on_simplex(v, expected):
    p = project_simplex(v)
    np.testing.assert_allclose(p, expected, atol=1e-12)
    assert on_simplex(p)


def test_large_random_columns_stay_on_simplex(rng):
    V = rng.normal(scale=1e15, size=(6, 200))
    V[:, :50] = 1e16 + rng.integers(-4, 5, size=(6, 50)) * 2.0
    P = project_simplex_batch(V)
    assert np.all(P >= 0)
    np.testing.assert_allclose(P.sum(axis=0), 1.0, atol=1e-9)
