"""
Spectral clustering on the bipartite point-atom graph with edge weights x_ij.

Eliminating the data vertices leaves the m x m Laplacian L_A = D_A - X X^T, so the
eigenproblem never touches an n x n matrix; data embeddings are recovered as
Q_Y = Q_A X.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh
from scipy.optimize import linear_sum_assignment

from domain.kds.errors import DimensionError, InvalidInputError
from kds_cfg import KMEANS_MAX_ITER, KMEANS_REPLICATES, SEED, SIMPLEX_TOL, SPECTRAL_MODE, ZERO_DEGREE_TOL

SPECTRAL_MODES = ("quadratic", "normalized")


@dataclass
class ReducedGraph:
    adjacency: np.ndarray     # m x m, X X^T
    atom_degrees: np.ndarray  # row sums of X


@dataclass
class Embedding:
    Q_A: np.ndarray         # k x m
    Q_Y: np.ndarray         # k x n
    eigenvalues: np.ndarray
    active: np.ndarray      # atoms kept in the eigenproblem


def check_codes(X, tol=SIMPLEX_TOL):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise DimensionError(f"codes must be an m x n matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("codes contain non-finite entries")
    if np.any(X < -1e-12):
        raise InvalidInputError(f"codes contain negative entries (min {X.min():.3g})")
    worst = float(np.max(np.abs(X.sum(axis=0) - 1.0)))
    if worst > tol:
        raise InvalidInputError(f"code columns must sum to 1, worst deviation {worst:.3g}")
    return X


def reduced_adjacency(X):
    X = check_codes(X)
    return ReducedGraph(adjacency=X @ X.T, atom_degrees=X.sum(axis=1))


def schur_laplacian(G):
    return np.diag(G.atom_degrees) - G.adjacency


def _align_kernel(vals, vecs, metric):
    """Rotate a degenerate zero eigenspace so that its first vector is the constant one."""
    tol = 1e-9 * max(1.0, float(np.max(np.abs(vals))))
    r = int(np.count_nonzero(vals <= tol))
    if r < 2:
        return vecs
    ones = np.ones(vecs.shape[0])
    ones /= np.sqrt(ones @ metric @ ones)
    coeffs = vecs[:, :r].T @ metric @ ones
    if np.linalg.norm(coeffs) < 0.5:
        return vecs
    rotation, _ = np.linalg.qr(np.column_stack([coeffs, np.eye(r)]))
    vecs = vecs.copy()
    vecs[:, :r] = vecs[:, :r] @ rotation
    return vecs


def _fix_signs(vecs):
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.where(vecs[idx, np.arange(vecs.shape[1])] < 0, -1.0, 1.0)
    return vecs * signs


def spectral_embed(X, k, mode=SPECTRAL_MODE):
    X = check_codes(X)
    m = X.shape[0]
    if mode not in SPECTRAL_MODES:
        raise InvalidInputError(f"mode must be one of {SPECTRAL_MODES}, got {mode!r}")
    if k < 1 or k > m:
        raise DimensionError(f"k = {k} must satisfy 1 <= k <= m = {m}")

    G = reduced_adjacency(X)
    L = schur_laplacian(G)
    active = G.atom_degrees > ZERO_DEGREE_TOL
    n_active = int(np.count_nonzero(active))
    if n_active < m:
        logging.warning(f"{m - n_active} atoms carry no code weight and are left out of the eigenproblem")
    if n_active < k:
        raise DimensionError(f"only {n_active} atoms carry weight, cannot embed into k = {k} dimensions")

    L_active = L[np.ix_(active, active)]
    if mode == "quadratic":
        metric = np.eye(n_active)
        vals, vecs = eigh(L_active)
    else:
        metric = np.diag(G.atom_degrees[active])
        vals, vecs = eigh(L_active, metric)

    vecs = _fix_signs(_align_kernel(vals, vecs, metric)[:, :k])
    Q_A = np.zeros((k, m))
    Q_A[:, active] = vecs.T
    return Embedding(Q_A=Q_A, Q_Y=harmonic_extend(Q_A, X), eigenvalues=vals[:k], active=active)


def harmonic_extend(Q_A, X):
    Q_A = np.asarray(Q_A, dtype=float)
    X = np.asarray(X, dtype=float)
    if Q_A.ndim != 2 or X.ndim != 2 or Q_A.shape[1] != X.shape[0]:
        raise DimensionError(f"cannot extend a {Q_A.shape} atom embedding with codes of shape {X.shape}")
    return Q_A @ X


def _kmeans_pp(P, k, rng):
    N = len(P)
    chosen = [int(rng.integers(N))]
    d2 = np.sum((P - P[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(N, p=d2 / total))
        else:
            idx = int(rng.choice(np.setdiff1d(np.arange(N), chosen)))
        chosen.append(idx)
        d2 = np.minimum(d2, np.sum((P - P[idx]) ** 2, axis=1))
    return P[chosen].copy()


def _lloyd(P, centers, max_iter):
    N, k = len(P), len(centers)
    labels = None
    for _ in range(max_iter):
        dist = np.sum((P[:, np.newaxis, :] - centers[np.newaxis, :, :]) ** 2, axis=2)
        new_labels = np.argmin(dist, axis=1)

        # empty clusters take the point farthest from its centroid
        counts = np.bincount(new_labels, minlength=k)
        cost = dist[np.arange(N), new_labels]
        for c in np.flatnonzero(counts == 0):
            movable = counts[new_labels] > 1
            far = int(np.argmax(np.where(movable, cost, -1.0)))
            counts[new_labels[far]] -= 1
            new_labels[far] = c
            counts[c] = 1
            cost[far] = 0.0

        converged = labels is not None and np.array_equal(labels, new_labels)
        labels = new_labels
        centers = np.array([P[labels == c].mean(axis=0) for c in range(k)])
        if converged:
            break
    inertia = float(np.sum((P - centers[labels]) ** 2))
    return labels, centers, inertia


def kmeans(points, k_clusters, replicates=KMEANS_REPLICATES, seed=SEED, max_iter=KMEANS_MAX_ITER,
           return_centers=False):
    """
    Lloyd's algorithm with k-means++ seeding; columns of `points` are the points.

    Runs `replicates` seeded restarts and keeps the lowest inertia.
    """
    P = np.asarray(points, dtype=float)
    if P.ndim != 2:
        raise DimensionError(f"points must be a dim x N matrix, got shape {P.shape}")
    P = P.T
    N = len(P)
    if k_clusters < 1 or k_clusters > N:
        raise DimensionError(f"k_clusters = {k_clusters} must satisfy 1 <= k <= N = {N}")
    if replicates < 1:
        raise InvalidInputError(f"replicates must be positive, got {replicates}")

    best = None
    for child in np.random.SeedSequence(seed).spawn(replicates):
        rng = np.random.default_rng(child)
        labels, centers, inertia = _lloyd(P, _kmeans_pp(P, k_clusters, rng), max_iter)
        if best is None or inertia < best[2]:
            best = (labels, centers, inertia)
    labels, centers, inertia = best
    if return_centers:
        return labels, inertia, centers.T
    return labels, inertia


def clustering_accuracy(pred, truth):
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise DimensionError(f"label vectors differ in shape: {pred.shape} vs {truth.shape}")
    if len(pred) == 0:
        raise InvalidInputError("accuracy of an empty labeling is undefined")
    _, p_idx = np.unique(pred, return_inverse=True)
    _, t_idx = np.unique(truth, return_inverse=True)
    confusion = np.zeros((p_idx.max() + 1, t_idx.max() + 1))
    np.add.at(confusion, (p_idx, t_idx), 1)
    rows, cols = linear_sum_assignment(confusion, maximize=True)
    return float(confusion[rows, cols].sum() / len(pred))


def cluster_pipeline(X, k, replicates=KMEANS_REPLICATES, seed=SEED, mode=SPECTRAL_MODE, include_atoms=True,
                     atoms=None):
    """
    Embed, run k-means and split the labels into (data labels, atom labels).

    Atoms left out of the eigenproblem take the label of the nearest used atom in
    data space when `atoms` is given, otherwise the most frequent data label.
    """
    emb = spectral_embed(X, k, mode)
    n = emb.Q_Y.shape[1]
    active = emb.active

    if include_atoms:
        points = np.concatenate([emb.Q_Y, emb.Q_A[:, active]], axis=1)
        labels, inertia = kmeans(points, k, replicates, seed)
        data_labels = labels[:n]
        active_labels = labels[n:]
    else:
        data_labels, inertia, centers = kmeans(emb.Q_Y, k, replicates, seed, return_centers=True)
        Q_active = emb.Q_A[:, active]
        dist = np.sum((Q_active[:, :, np.newaxis] - centers[:, np.newaxis, :]) ** 2, axis=0)
        active_labels = np.argmin(dist, axis=1)

    atom_labels = np.zeros(len(active), dtype=int)
    atom_labels[active] = active_labels
    dropped = np.flatnonzero(~active)
    if len(dropped):
        if atoms is not None:
            atoms = np.asarray(atoms, dtype=float)
            used = np.flatnonzero(active)
            for j in dropped:
                nearest = used[np.argmin(np.sum((atoms[:, used] - atoms[:, j:j + 1]) ** 2, axis=0))]
                atom_labels[j] = atom_labels[nearest]
        else:
            atom_labels[dropped] = np.bincount(data_labels, minlength=k).argmax()
    logging.info(f"Clustered {n} points and {len(active)} atoms into {k} groups (mode={mode}, inertia={inertia:.6g})")
    return data_labels, atom_labels
