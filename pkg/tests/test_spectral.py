import numpy as np
import pytest

from domain.kds.errors import DimensionError, InvalidInputError
from domain.kds.oracle import bipartite_laplacian
from domain.kds.spectral import (check_codes, cluster_pipeline, clustering_accuracy, harmonic_extend, kmeans,
                                 reduced_adjacency, schur_laplacian, spectral_embed)
from domain.kds.verify import _random_codes


def test_reduced_adjacency_examples():
    G = reduced_adjacency(np.eye(3))
    np.testing.assert_array_equal(G.adjacency, np.eye(3))
    np.testing.assert_array_equal(schur_laplacian(G), np.zeros((3, 3)))

    G = reduced_adjacency(np.array([[1.0, 1.0], [0.0, 0.0]]))
    np.testing.assert_array_equal(G.adjacency, [[2.0, 0.0], [0.0, 0.0]])
    np.testing.assert_array_equal(G.atom_degrees, [2.0, 0.0])


def test_shared_point_gives_path_laplacian(chain_codes):
    L = schur_laplacian(reduced_adjacency(chain_codes))
    np.testing.assert_allclose(L, 0.25 * np.array([[1, -1, 0], [-1, 2, -1], [0, -1, 1]]), atol=1e-15)


def test_schur_laplacian_is_laplacian(rng):
    X = _random_codes(rng, 8, 60)
    L = schur_laplacian(reduced_adjacency(X))
    np.testing.assert_allclose(L, L.T, atol=1e-14)
    np.testing.assert_allclose(L @ np.ones(8), 0.0, atol=1e-12)
    assert np.linalg.eigvalsh(L).min() >= -1e-10


def test_schur_laplacian_matches_explicit_elimination(rng):
    m, n = 7, 40
    X = _random_codes(rng, m, n)
    L = bipartite_laplacian(X)
    L_YY, L_YA, L_AA = L[:n, :n], L[:n, n:], L[n:, n:]
    eliminated = L_AA - L_YA.T @ np.linalg.solve(L_YY, L_YA)
    np.testing.assert_allclose(schur_laplacian(reduced_adjacency(X)), eliminated, atol=1e-10)


def test_check_codes_rejects_bad_columns():
    with pytest.raises(InvalidInputError):
        check_codes(np.array([[0.5], [0.4]]))
    with pytest.raises(InvalidInputError):
        check_codes(np.array([[1.5], [-0.5]]))
    with pytest.raises(DimensionError):
        check_codes(np.ones(3))


def test_embedding_of_chain(chain_codes):
    emb = spectral_embed(chain_codes, 3)
    np.testing.assert_allclose(emb.eigenvalues, [0.0, 0.25, 0.75], atol=1e-12)
    np.testing.assert_allclose(emb.Q_Y, emb.Q_A @ chain_codes, atol=1e-14)
    np.testing.assert_allclose(emb.Q_A @ emb.Q_A.T, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(np.abs(emb.Q_A[0]), 1 / np.sqrt(3), atol=1e-12)


def test_embedding_separates_blocks(two_block_codes):
    X, truth = two_block_codes
    emb = spectral_embed(X, 2)
    np.testing.assert_allclose(emb.eigenvalues, [0.0, 0.0], atol=1e-10)
    np.testing.assert_allclose(emb.Q_A[0], emb.Q_A[0, 0], atol=1e-12)
    side = np.sign(emb.Q_Y[1])
    assert len(np.unique(side[truth == 0])) == 1
    assert len(np.unique(side[truth == 1])) == 1
    assert side[0] != side[-1]


def test_normalized_embedding_is_degree_orthonormal(rng):
    X = _random_codes(rng, 6, 50)
    emb = spectral_embed(X, 3, mode="normalized")
    D = np.diag(X.sum(axis=1))
    np.testing.assert_allclose(emb.Q_A @ D @ emb.Q_A.T, np.eye(3), atol=1e-10)
    assert emb.eigenvalues[0] == pytest.approx(0.0, abs=1e-10)


def test_unused_atoms_are_left_out(rng):
    X = np.zeros((4, 30))
    X[:3] = rng.dirichlet(np.ones(3), size=30).T
    emb = spectral_embed(X, 2)
    np.testing.assert_array_equal(emb.active, [True, True, True, False])
    np.testing.assert_array_equal(emb.Q_A[:, 3], 0.0)

    atoms = np.array([[0.0, 1.0, 2.0, 0.1],
                      [0.0, 0.0, 0.0, 0.0]])
    _, atom_labels = cluster_pipeline(X, 2, seed=0, atoms=atoms)
    assert atom_labels[3] == atom_labels[0]


def test_embed_rejects_bad_arguments(chain_codes):
    with pytest.raises(DimensionError):
        spectral_embed(chain_codes, 4)
    with pytest.raises(DimensionError):
        spectral_embed(chain_codes, 0)
    with pytest.raises(InvalidInputError):
        spectral_embed(chain_codes, 2, mode="random-walk")


def test_harmonic_extend_examples():
    Q_A = np.array([[1.0, -1.0, 3.0]])
    np.testing.assert_allclose(harmonic_extend(Q_A, np.array([[0.5], [0.5], [0.0]])), [[0.0]])
    np.testing.assert_allclose(harmonic_extend(Q_A, np.eye(3)[:, [2]]), [[3.0]])
    with pytest.raises(DimensionError):
        harmonic_extend(Q_A, np.ones((2, 1)))


def test_kmeans_pairs():
    P = np.array([[0.0, 0.0, 5.0, 5.0],
                  [0.0, 0.1, 5.0, 5.1]])
    labels, inertia = kmeans(P, 2, seed=0)
    assert labels[0] == labels[1] != labels[2] == labels[3]
    assert inertia == pytest.approx(0.01)


def test_kmeans_extreme_cluster_counts(rng):
    P = rng.normal(size=(2, 12))
    labels, inertia = kmeans(P, 1)
    np.testing.assert_array_equal(labels, 0)
    assert inertia == pytest.approx(float(np.sum((P - P.mean(axis=1, keepdims=True)) ** 2)))
    labels, inertia = kmeans(P, 12)
    assert len(np.unique(labels)) == 12
    assert inertia == pytest.approx(0.0, abs=1e-24)
    with pytest.raises(DimensionError):
        kmeans(P, 13)


def test_kmeans_is_deterministic(rng):
    P = rng.normal(size=(3, 80))
    first = kmeans(P, 4, replicates=5, seed=11)
    second = kmeans(P, 4, replicates=5, seed=11)
    np.testing.assert_array_equal(first[0], second[0])
    assert first[1] == second[1]


def test_clustering_accuracy_examples():
    assert clustering_accuracy([0, 1, 1, 2], [0, 1, 1, 2]) == 1.0
    assert clustering_accuracy([1, 1, 0, 0], [0, 0, 1, 1]) == 1.0
    assert clustering_accuracy([0, 1, 0, 1], [0, 0, 1, 1]) == 0.5
    with pytest.raises(DimensionError):
        clustering_accuracy([0, 1], [0, 1, 1])


@pytest.mark.parametrize("mode", ["quadratic", "normalized"])
@pytest.mark.parametrize("include_atoms", [True, False])
def test_cluster_pipeline_recovers_blocks(two_block_codes, mode, include_atoms):
    X, truth = two_block_codes
    labels, atom_labels = cluster_pipeline(X, 2, seed=0, mode=mode, include_atoms=include_atoms)
    assert clustering_accuracy(labels, truth) == 1.0
    assert len(set(atom_labels[:3])) == 1 and len(set(atom_labels[3:])) == 1
    assert atom_labels[0] == labels[0]
    assert atom_labels[3] == labels[-1]


def test_extended_points_lie_between_their_atoms(rng):
    X = _random_codes(rng, 6, 40)
    Q_A = rng.normal(size=(3, 6))
    Q_Y = harmonic_extend(Q_A, X)
    for i in range(40):
        support = X[:, i] > 0
        assert np.all(Q_Y[:, i] >= Q_A[:, support].min(axis=1) - 1e-12)
        assert np.all(Q_Y[:, i] <= Q_A[:, support].max(axis=1) + 1e-12)
