"""
Euclidean projection onto the probability simplex and its vector-Jacobian product.

Vectors are 1-D arrays; batches are 2-D arrays whose columns are the vectors.
"""
import numpy as np

from domain.kds.errors import DimensionError, InvalidInputError


def _check_batch(V):
    V = np.asarray(V, dtype=float)
    if V.ndim != 2:
        raise DimensionError(f"expected a 2-D batch, got shape {V.shape}")
    if V.shape[0] == 0:
        raise DimensionError("cannot project onto the simplex in dimension m = 0")
    if not np.all(np.isfinite(V)):
        raise InvalidInputError("projection input contains non-finite entries")
    return V


def _shifted_threshold_batch(V):
    """(column max, tau of the column shifted so its max is 0); P(v) = P(v - c 1) for any c."""
    m = V.shape[0]
    shift = V.max(axis=0)
    S = V - shift[np.newaxis, :]
    # stable sort on -S keeps ties in index order
    order = np.argsort(-S, axis=0, kind='stable')
    U = np.take_along_axis(S, order, axis=0)
    cssv = np.cumsum(U, axis=0) - 1.0
    ind = np.arange(1, m + 1, dtype=float)[:, np.newaxis]
    cond = U - cssv / ind > 0
    # the leading entry is 0 after the shift, so rho >= 1
    rho = np.maximum(np.count_nonzero(cond, axis=0), 1)
    cols = np.arange(V.shape[1])
    return shift, S, cssv[rho - 1, cols] / rho


def simplex_threshold_batch(V):
    """
    Shift tau per column such that max(v - tau, 0) sums to one.

    Sort-and-threshold rule: with u the column sorted in decreasing order,
    rho = max{j : u_j - (sum_{i<=j} u_i - 1) / j > 0} and
    tau = (sum_{i<=rho} u_i - 1) / rho, computed on each column shifted by its max.
    """
    V = _check_batch(V)
    shift, _, tau = _shifted_threshold_batch(V)
    return shift + tau


def project_simplex_threshold_batch(V):
    """Projection of every column together with its threshold tau."""
    V = _check_batch(V)
    shift, S, tau = _shifted_threshold_batch(V)
    return np.maximum(S - tau[np.newaxis, :], 0.0), shift + tau


def project_simplex_batch(V):
    return project_simplex_threshold_batch(V)[0]


def project_simplex(v):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise DimensionError(f"expected a vector, got shape {v.shape}")
    return project_simplex_batch(v[:, np.newaxis])[:, 0]


def projection_vjp_batch(V, G, projected=None):
    """
    J^T g for each column, J the projection Jacobian on the active set.

    On A = {i : P(v)_i > 0} the Jacobian is I - 11^T/|A|, zero elsewhere;
    J is symmetric so J^T g = J g. `projected` may pass P(V) when the caller
    already has it.
    """
    V = _check_batch(V)
    G = np.asarray(G, dtype=float)
    if G.shape != V.shape:
        raise DimensionError(f"cotangent shape {G.shape} does not match input shape {V.shape}")
    P = project_simplex_batch(V) if projected is None else projected
    active = P > 0
    n_active = np.count_nonzero(active, axis=0)
    mean_active = np.where(active, G, 0.0).sum(axis=0) / n_active
    return np.where(active, G - mean_active[np.newaxis, :], 0.0)


def projection_vjp(v, g):
    v = np.asarray(v, dtype=float)
    g = np.asarray(g, dtype=float)
    if v.ndim != 1 or g.shape != v.shape:
        raise DimensionError(f"vjp expects two vectors of equal length, got {v.shape} and {g.shape}")
    return projection_vjp_batch(v[:, np.newaxis], g[:, np.newaxis])[:, 0]


def on_simplex(x, tol=1e-9):
    x = np.asarray(x, dtype=float)
    return bool(np.all(x >= -tol) and abs(x.sum() - 1.0) <= tol)
