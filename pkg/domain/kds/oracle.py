"""
Slow reference implementations used to cross-check the fast paths.

Nothing here calls the simplex, encoder or spectral routines it is compared against.
"""
import itertools

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog, minimize

from domain.kds.delaunay import make_delaunay_model, sample_delaunay_model
from domain.kds.errors import DimensionError, InfeasibleError, InvalidInputError, NumericalError
from domain.kds.spectral import Embedding
from kds_cfg import DELAUNAY_TOL, NAIVE_EMBEDDING_MAX_NODES, ORACLE_MAX_ITER, PROGRAM13_MAX_ATOMS, ZERO_DEGREE_TOL


def michelot_projection(v):
    """Simplex projection by repeatedly discarding coordinates below the running threshold."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or len(v) == 0:
        raise DimensionError(f"expected a nonempty vector, got shape {v.shape}")
    active = np.ones(len(v), dtype=bool)
    while True:
        tau = (v[active].sum() - 1.0) / np.count_nonzero(active)
        keep = active & (v > tau)
        if np.count_nonzero(keep) == np.count_nonzero(active):
            return np.maximum(v - tau, 0.0), tau
        active = keep


def _objective(A, y, x, lam):
    r = y - A @ x
    dist = np.sum((A - y[:, np.newaxis]) ** 2, axis=0)
    return 0.5 * float(r @ r) + lam * float(x @ dist), A.T @ (A @ x - y) + lam * dist


def oracle_encode(A, y, lam, tol=1e-10, max_iter=ORACLE_MAX_ITER):
    """Plain projected gradient with step sigma_max(A)^-2, run to stationarity."""
    if not tol > 0:
        raise InvalidInputError(f"tol must be positive, got {tol}")
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    if A.ndim != 2 or y.shape != (A.shape[0],):
        raise DimensionError(f"oracle_encode needs A (d x m) and y of length d, got {A.shape} and {y.shape}")
    sigma = np.linalg.svd(A, compute_uv=False)[0]
    if sigma == 0:
        raise InvalidInputError("step size undefined for an all-zero dictionary")
    step = 1.0 / sigma ** 2

    x = np.full(A.shape[1], 1.0 / A.shape[1])
    value, grad = _objective(A, y, x, lam)
    for _ in range(max_iter):
        x_next, _ = michelot_projection(x - step * grad)
        value_next, grad_next = _objective(A, y, x_next, lam)
        decrease = value - value_next
        x, value, grad = x_next, value_next, grad_next
        residual = np.linalg.norm(x - michelot_projection(x - grad)[0])
        if decrease < tol * max(1.0, abs(value)) and residual < tol:
            return x
    raise NumericalError(f"oracle_encode did not reach tol={tol} within {max_iter} iterations")


def finite_diff_grad(f, x, h=1e-6):
    """Central differences of a scalar function, one coordinate at a time; keeps the shape of x."""
    if not h > 0:
        raise InvalidInputError(f"h must be positive, got {h}")
    x = np.array(x, dtype=float)
    grad = np.zeros_like(x)
    flat_x, flat_g = x.reshape(-1), grad.reshape(-1)
    for i in range(flat_x.size):
        keep = flat_x[i]
        flat_x[i] = keep + h
        up = f(x)
        flat_x[i] = keep - h
        down = f(x)
        flat_x[i] = keep
        flat_g[i] = (up - down) / (2 * h)
    return grad


def bipartite_laplacian(X):
    """(n + m) x (n + m) Laplacian of the point-atom graph, data vertices first."""
    X = np.asarray(X, dtype=float)
    m, n = X.shape
    W = np.zeros((n + m, n + m))
    W[:n, n:] = X.T
    W[n:, :n] = X
    return np.diag(W.sum(axis=1)) - W


def naive_embedding(X, k, mode="quadratic"):
    """Embedding from the full Laplacian with explicit elimination of the data block."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionError(f"codes must be an m x n matrix, got shape {X.shape}")
    m, n = X.shape
    if n + m > NAIVE_EMBEDDING_MAX_NODES:
        raise InvalidInputError(f"naive embedding of {n + m} vertices exceeds the {NAIVE_EMBEDDING_MAX_NODES} limit")
    if k < 1 or k > m:
        raise DimensionError(f"k = {k} must satisfy 1 <= k <= m = {m}")

    L = bipartite_laplacian(X)
    L_YY, L_YA = L[:n, :n], L[:n, n:]
    L_AY, L_AA = L[n:, :n], L[n:, n:]
    data_degrees = np.diag(L_YY)
    if np.any(data_degrees <= 0):
        raise InvalidInputError("every data point needs a positive degree")
    schur = L_AA - L_AY @ np.diag(1.0 / data_degrees) @ L_YA

    active = np.diag(L_AA) > ZERO_DEGREE_TOL
    if np.count_nonzero(active) < k:
        raise DimensionError(f"only {np.count_nonzero(active)} atoms carry weight, cannot embed into k = {k}")
    S = schur[np.ix_(active, active)]
    if mode == "quadratic":
        vals, vecs = np.linalg.eigh(S)
    elif mode == "normalized":
        scale = 1.0 / np.sqrt(np.diag(L_AA)[active])
        vals, vecs = np.linalg.eigh(scale[:, np.newaxis] * S * scale[np.newaxis, :])
        vecs = scale[:, np.newaxis] * vecs
    else:
        raise InvalidInputError(f"unknown mode {mode!r}")

    Q_A = np.zeros((k, m))
    Q_A[:, active] = vecs[:, :k].T
    Q_Y = -(Q_A @ L_AY) / data_degrees[np.newaxis, :]
    return Embedding(Q_A=Q_A, Q_Y=Q_Y, eigenvalues=vals[:k], active=active)


def theorem2_deltas(A_part, Aprime_part, y):
    """(max squared distance from y to A_part, min squared distance from y to Aprime_part)."""
    y = np.asarray(y, dtype=float)
    parts = []
    for name, part in (("A", A_part), ("A'", Aprime_part)):
        part = np.asarray(part, dtype=float)
        if part.ndim != 2 or part.shape[1] == 0:
            raise InvalidInputError(f"part {name} must be a nonempty d x p matrix, got shape {part.shape}")
        if part.shape[0] != y.shape[0]:
            raise DimensionError(f"part {name} has dimension {part.shape[0]}, y has {y.shape[0]}")
        parts.append(np.sum((part - y[:, np.newaxis]) ** 2, axis=0))
    return float(parts[0].max()), float(parts[1].min())


def _reconstruction_code(D, y):
    m = D.shape[1]
    result = minimize(lambda x: float(np.sum((y - D @ x) ** 2)), np.full(m, 1.0 / m),
                      jac=lambda x: -2.0 * D.T @ (y - D @ x), method='SLSQP', bounds=[(0.0, 1.0)] * m,
                      constraints=[{'type': 'eq', 'fun': lambda x: x.sum() - 1.0, 'jac': lambda x: np.ones(m)}],
                      options={'ftol': 1e-14, 'maxiter': 1000})
    return _to_simplex(result.x)


def _to_simplex(x):
    x = np.clip(x, 0.0, None)
    return x / x.sum()


def _face_minimizer(D_S, y, c_S, epsilon, tol):
    """
    Minimizer of c_S . x on the affine face {sum x = 1} with ||y - D_S x|| = epsilon (or the only
    feasible point when the slice is a single point); None when the slice is empty or the
    face is degenerate. Positivity is checked by the caller.
    """
    s = D_S.shape[1]
    x0 = np.full(s, 1.0 / s)
    N = null_space(np.ones((1, s)))
    B = D_S @ N
    U, sigma, Vt = np.linalg.svd(B, full_matrices=False)
    if sigma.size < s - 1 or sigma[-1] <= tol * max(1.0, sigma[0]):
        return None
    r0 = D_S @ x0 - y
    r0_par = U @ (U.T @ r0)
    slack = epsilon ** 2 - float(np.sum((r0 - r0_par) ** 2))
    if slack < -tol * max(1.0, epsilon):
        return None
    h = U @ ((Vt @ (N.T @ c_S)) / sigma)
    u = np.zeros_like(r0) if np.linalg.norm(h) <= tol else -np.sqrt(max(slack, 0.0)) * h / np.linalg.norm(h)
    z = Vt.T @ ((U.T @ (u - r0_par)) / sigma)
    return x0 + N @ z


def solve_program_13(D, y, epsilon, part_sizes=None, tol=1e-9):
    """
    min sum_j x_j ||y - d_j||^2 over simplex codes with ||y - D x|| <= epsilon.

    The objective is linear, so the minimizer is a feasible vertex or lies on a face
    where the ball constraint is active. Every support of at most d + 1 atoms is solved
    in closed form on its face and the cheapest feasible candidate wins.
    """
    D = np.asarray(D, dtype=float)
    y = np.asarray(y, dtype=float)
    if D.ndim != 2 or y.shape != (D.shape[0],):
        raise DimensionError(f"need D (d x m) and y of length d, got {D.shape} and {y.shape}")
    d, m = D.shape
    if m > PROGRAM13_MAX_ATOMS:
        raise InvalidInputError(f"program is limited to {PROGRAM13_MAX_ATOMS} atoms, got {m}")
    if part_sizes is not None and sum(part_sizes) != m:
        raise DimensionError(f"part sizes {tuple(part_sizes)} do not add up to {m} atoms")
    if not epsilon >= 0:
        raise InvalidInputError(f"epsilon must be nonnegative, got {epsilon}")

    def residual(x):
        return float(np.linalg.norm(y - D @ x))

    c = np.sum((D - y[:, np.newaxis]) ** 2, axis=0)
    feasible_tol = tol * max(1.0, float(np.max(np.abs(D))), float(np.max(np.abs(y))))
    best, best_value = None, None
    for size in range(1, min(m, d + 1) + 1):
        for support in itertools.combinations(range(m), size):
            S = list(support)
            if size == 1:
                x_S = np.ones(1)
            else:
                x_S = _face_minimizer(D[:, S], y, c[S], epsilon, tol)
                if x_S is None or np.any(x_S < -tol):
                    continue
            x = np.zeros(m)
            x[S] = np.clip(x_S, 0.0, None)
            x /= x.sum()
            value = float(c @ x)
            if residual(x) > epsilon + feasible_tol:
                continue
            if best is None or value < best_value - tol * max(1.0, abs(best_value)):
                best, best_value = x, value

    if best is None:
        closest = _reconstruction_code(D, y)
        raise InfeasibleError(f"no simplex code reconstructs y within epsilon={epsilon:.6g} "
                              f"(best residual {residual(closest):.6g})")
    return best


def _orient(a, b, c):
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def brute_force_delaunay(points, tol=DELAUNAY_TOL):
    """All counter-clockwise triangles whose circumcircle contains no other point; for points in general position."""
    P = np.asarray(points, dtype=float)
    if P.ndim != 2 or P.shape[0] != 2:
        raise DimensionError(f"points must be a 2 x m matrix, got shape {P.shape}")
    P = P.T
    span = np.max(P.max(axis=0) - P.min(axis=0))
    P = (P - P.min(axis=0)) / span
    lifted = np.column_stack([P, np.sum(P ** 2, axis=1), np.ones(len(P))])
    triangles = []
    for i, j, k in itertools.combinations(range(len(P)), 3):
        area = _orient(P[i], P[j], P[k])
        if abs(area) <= tol:
            continue
        tri = (i, j, k) if area > 0 else (i, k, j)
        rows = lifted[list(tri)]
        empty = True
        for q in range(len(P)):
            if q in tri:
                continue
            # sign of the 4x4 lifted determinant: positive for q inside the circumcircle
            if np.linalg.det(np.vstack([rows, lifted[q]])) > tol:
                empty = False
                break
        if empty:
            triangles.append(tri)
    return np.array(sorted(triangles), dtype=int).reshape(-1, 3)


def theorem1_instance(seed, n=60, atoms_per_cluster=5, offset=5.0):
    """Two clusters of atoms in unit boxes at least `offset` apart, points drawn without noise."""
    rng = np.random.default_rng(seed)
    left = rng.uniform(0.0, 1.0, size=(2, atoms_per_cluster))
    right = rng.uniform(0.0, 1.0, size=(2, atoms_per_cluster)) + np.array([[offset + rng.uniform()], [0.0]])
    atoms = np.hstack([left, right])
    cluster = np.repeat([0, 1], atoms_per_cluster)
    model = make_delaunay_model(atoms, cluster)
    Y, truth = sample_delaunay_model(model, n, seed=rng.integers(2 ** 32))
    return model, Y, truth


def program_13_exact_value(D, y):
    """Optimal value of the program at epsilon = 0, solved as a linear program."""
    D = np.asarray(D, dtype=float)
    y = np.asarray(y, dtype=float)
    c = np.sum((D - y[:, np.newaxis]) ** 2, axis=0)
    result = linprog(c, A_eq=np.vstack([D, np.ones((1, D.shape[1]))]), b_eq=np.append(y, 1.0),
                     bounds=(0.0, None), method='highs')
    if result.status == 2:
        raise InfeasibleError("y is not a convex combination of the atoms")
    if not result.success:
        raise NumericalError(f"linear program failed: {result.message}")
    return float(result.fun)


def theorem2_instance(seed, atoms_per_part=5, offset=3.0, noise_sigma=0.05, slack=1e-3):
    """
    Dictionary [A, A'] with y near conv(A); epsilon is the residual of the code that generated y plus `slack`.

    Returns (D, y, epsilon, part_sizes, certificate).
    """
    rng = np.random.default_rng(seed)
    A = rng.uniform(0.0, 1.0, size=(2, atoms_per_part))
    A_prime = rng.uniform(0.0, 1.0, size=(2, atoms_per_part)) + np.array([[offset], [0.0]])
    certificate = rng.dirichlet(np.ones(atoms_per_part))
    noise = rng.normal(scale=noise_sigma, size=2)
    y = A @ certificate + noise
    epsilon = float(np.linalg.norm(noise)) + slack
    return np.hstack([A, A_prime]), y, epsilon, (atoms_per_part, atoms_per_part), certificate
