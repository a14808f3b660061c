"""
Cross-check suites comparing the fast paths with the reference implementations in oracle.
"""
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from domain.kds import encoder, oracle, simplex, spectral, trainer
from domain.kds.delaunay import delaunay_connectivity, separation_stats
from domain.kds.errors import InvalidInputError

BOUNDARY_MARGIN = 1e-4
FD_STEPS = (1e-4, 1e-5, 1e-6)


@dataclass
class SuiteResult:
    name: str
    checked: int = 0
    skipped: int = 0
    failures: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self):
        return self.checked > 0 and not self.failures

    def fail(self, message):
        self.failures.append(message)


def suite_projection(seed=0, draws=10000):
    """Simplex membership, KKT conditions, idempotence, nonexpansiveness and the vjp against differences."""
    result = SuiteResult("projection")
    rng = np.random.default_rng(seed)
    for i in range(draws):
        m = int(rng.integers(1, 7))
        v = rng.normal(scale=2.0, size=m)
        w = rng.normal(scale=2.0, size=m)
        p = simplex.project_simplex(v)
        result.checked += 1

        reference, tau = oracle.michelot_projection(v)
        if np.max(np.abs(p - reference)) > 1e-9:
            result.fail(f"draw {i}: projection differs from reference by {np.max(np.abs(p - reference)):.3g}")
            continue
        if not simplex.on_simplex(p):
            result.fail(f"draw {i}: projection left the simplex")
        # KKT: v - p is constant on the support and no larger off it
        gap = v - p
        support = p > 0
        if np.ptp(gap[support]) > 1e-9 or np.any(gap[~support] > gap[support].max() + 1e-9):
            result.fail(f"draw {i}: KKT conditions violated")
        if np.max(np.abs(simplex.project_simplex(p) - p)) > 1e-12:
            result.fail(f"draw {i}: projection is not idempotent")
        if np.linalg.norm(p - simplex.project_simplex(w)) > np.linalg.norm(v - w) + 1e-12:
            result.fail(f"draw {i}: projection expanded a distance")

        if i % 20 == 0 and np.min(np.abs(v - tau)) > BOUNDARY_MARGIN:
            g = rng.normal(size=m)
            numeric = oracle.finite_diff_grad(lambda u: float(g @ oracle.michelot_projection(u)[0]), v, h=1e-6)
            analytic = simplex.projection_vjp(v, g)
            if np.max(np.abs(numeric - analytic)) > 1e-5:
                result.fail(f"draw {i}: vjp differs from finite differences by {np.max(np.abs(numeric - analytic)):.3g}")
    return result


def _random_problem(rng, m):
    d = m + 2
    A = rng.normal(size=(d, m))
    y = A @ rng.dirichlet(np.ones(m)) + rng.normal(scale=0.3, size=d)
    return A, y


def suite_encoder(seed=0, instances=50, T=1000):
    """loss(encode, T layers) against the fully converged reference minimizer."""
    result = SuiteResult("encoder")
    rng = np.random.default_rng(seed)
    for i in range(instances):
        m = int(rng.integers(2, 7))
        A, y = _random_problem(rng, m)
        lam = float(rng.choice([0.0, 0.5, 5.0]))
        x, _ = encoder.encode(A, y, encoder.EncoderParams(lam=lam, T=T))
        reference = oracle.oracle_encode(A, y, lam, tol=1e-10)
        gap = encoder.loss(A, y, x, lam) - encoder.loss(A, y, reference, lam)
        result.checked += 1
        if gap > 1e-6:
            result.fail(f"instance {i} (m={m}, lambda={lam}): encoder loss exceeds reference by {gap:.3g}")
    return result


def gradient_error(A, y, params):
    """Smallest norm-wise relative error of grad_dictionary over the finite-difference steps."""
    _, tape = encoder.encode(A, y, params)

    def objective(A_):
        x, _ = encoder.encode(A_, y, params)
        return encoder.loss(A_, y, x, params.lam)

    analytic = trainer.grad_dictionary(A, y, tape, params.lam)
    errors = []
    for h in FD_STEPS:
        numeric = oracle.finite_diff_grad(objective, A, h=h)
        scale = max(np.linalg.norm(numeric), np.linalg.norm(analytic), 1e-8)
        errors.append(np.linalg.norm(numeric - analytic) / scale)
    return min(errors), tape.boundary_margin()


def suite_gradient(seed=0, instances=50, max_draws=2000):
    """
    Dictionary gradient against central differences over T in {1, 5, 20} and lambda in {0, 0.5, 5}.

    Instances with a pre-projection coordinate within BOUNDARY_MARGIN of its threshold are
    redrawn, since the objective is not differentiable there.
    """
    result = SuiteResult("gradient")
    rng = np.random.default_rng(seed)
    grid = [(T, lam) for T in (1, 5, 20) for lam in (0.0, 0.5, 5.0)]
    draws = 0
    while result.checked < instances and draws < max_draws:
        T, lam = grid[(result.checked + result.skipped) % len(grid)]
        draws += 1
        m = int(rng.integers(2, 6))
        A, y = _random_problem(rng, m)
        alpha = 0.9 / np.linalg.svd(A, compute_uv=False)[0] ** 2
        params = encoder.EncoderParams(lam=lam, T=T, alpha=alpha)
        _, tape = encoder.encode(A, y, params)
        if tape.boundary_margin() < BOUNDARY_MARGIN:
            result.skipped += 1
            continue
        error, _ = gradient_error(A, y, params)
        result.checked += 1
        if error > 1e-5:
            result.fail(f"T={T}, lambda={lam}, m={m}: relative gradient error {error:.3g}")
    if result.checked < instances:
        result.fail(f"only {result.checked} of {instances} instances cleared the boundary margin")
    return result


def _random_codes(rng, m, n, per_point=3):
    X = np.zeros((m, n))
    for i in range(n):
        support = rng.choice(m, size=min(per_point, m), replace=False)
        X[support, i] = rng.dirichlet(np.ones(len(support)))
    return X


def _two_block_codes(rng, m1, m2, n1, n2):
    X = np.zeros((m1 + m2, n1 + n2))
    X[:m1, :n1] = _random_codes(rng, m1, n1)
    X[m1:, n1:] = _random_codes(rng, m2, n2)
    return X, np.repeat([0, 1], [n1, n2])


def suite_embedding(seed=0, instances=20):
    """Reduced-Laplacian embedding against the full bipartite Laplacian."""
    result = SuiteResult("embedding")
    rng = np.random.default_rng(seed)
    for i in range(instances):
        m = int(rng.integers(3, 31))
        n = int(rng.integers(m, 501))
        X = _random_codes(rng, m, n)
        k = min(3, m)
        fast = spectral.spectral_embed(X, k)
        naive = oracle.naive_embedding(X, k)
        L = oracle.bipartite_laplacian(X)
        Q = np.hstack([naive.Q_Y, naive.Q_A])
        full_energy = float(np.trace(Q @ L @ Q.T))
        L_A = spectral.schur_laplacian(spectral.reduced_adjacency(X))
        reduced_energy = float(np.trace(fast.Q_A @ L_A @ fast.Q_A.T))
        result.checked += 1
        if abs(full_energy - reduced_energy) > 1e-8 * max(1.0, abs(full_energy)):
            result.fail(f"instance {i} (m={m}, n={n}): energies {full_energy:.12g} vs {reduced_energy:.12g}")

    for i in range(3):
        X, truth = _two_block_codes(rng, 4 + i, 5, 40 + 10 * i, 50)
        fast_labels, _ = spectral.cluster_pipeline(X, 2, seed=seed)
        naive_labels, _ = spectral.kmeans(oracle.naive_embedding(X, 2).Q_Y, 2, seed=seed)
        result.checked += 1
        if spectral.clustering_accuracy(fast_labels, truth) < 1.0 or spectral.clustering_accuracy(naive_labels, truth) < 1.0:
            result.fail(f"two-block fixture {i}: blocks not separated")
    return result


def theorem1_check(seed):
    """
    Cluster one generated Delaunay instance from its true codes.

    Returns the accuracy, or None when the instance misses the separation or connectivity preconditions.
    """
    model, Y, truth = oracle.theorem1_instance(seed)
    if len(np.unique(truth.labels)) < 2:
        return None
    stats = separation_stats(model, Y, truth)
    _, report = delaunay_connectivity(model, truth)
    if not stats.separated or not report.delaunay_connected:
        return None
    labels, _ = spectral.cluster_pipeline(truth.true_codes, 2, seed=seed)
    return spectral.clustering_accuracy(labels, truth.labels)


def suite_theorem1(seed=0, instances=100, max_draws=1000):
    """Exact recovery of separated, Delaunay-connected clusters from true codes."""
    result = SuiteResult("theorem1")
    s = seed * max_draws
    while result.checked < instances and s < (seed + 1) * max_draws:
        acc = theorem1_check(s)
        s += 1
        if acc is None:
            result.skipped += 1
            continue
        result.checked += 1
        if acc < 1.0:
            result.fail(f"instance seed {s - 1}: ACC {acc:.4f}")
    if result.checked < instances:
        result.fail(f"only {result.checked} of {instances} instances met the preconditions")
    return result


def theorem2_check(seed, support_threshold=1e-6):
    """
    Solve the constrained program on one generated instance.

    Returns the mass placed on foreign atoms, or None when the instance misses Delta2 > Delta1.
    """
    D, y, epsilon, (m, p), certificate = oracle.theorem2_instance(seed)
    delta1, delta2 = oracle.theorem2_deltas(D[:, :m], D[:, m:], y)
    if not delta2 > delta1:
        return None
    if np.linalg.norm(y - D[:, :m] @ certificate) > epsilon + 1e-12:
        raise InvalidInputError(f"instance seed {seed}: certificate does not reconstruct y within epsilon")
    x = oracle.solve_program_13(D, y, epsilon, (m, p))
    return float(x[m:].max()) if x[m:].max() > support_threshold else 0.0


def exact_program_gap(seed):
    """
    Objective gap of solve_program_13 at epsilon = 0 against the linear program, on the
    noise-free point of one generated instance.
    """
    D, _, _, (m, p), certificate = oracle.theorem2_instance(seed)
    y = D[:, :m] @ certificate
    x = oracle.solve_program_13(D, y, 0.0, (m, p))
    c = np.sum((D - y[:, np.newaxis]) ** 2, axis=0)
    return float(c @ x) - oracle.program_13_exact_value(D, y)


def suite_theorem2(seed=0, instances=100, max_draws=1000, exact_every=10):
    """
    Support of the constrained program stays on the atoms of the point's own cluster.

    Every `exact_every`-th checked instance also solves the program at epsilon = 0 and
    compares its value with the linear program.
    """
    result = SuiteResult("theorem2")
    s = seed * max_draws
    while result.checked < instances and s < (seed + 1) * max_draws:
        foreign = theorem2_check(s)
        s += 1
        if foreign is None:
            result.skipped += 1
            continue
        result.checked += 1
        if foreign > 0:
            result.fail(f"instance seed {s - 1}: weight {foreign:.3g} on a foreign atom")
        if result.checked % exact_every == 0:
            gap = exact_program_gap(s - 1)
            if abs(gap) > 1e-6:
                result.fail(f"instance seed {s - 1}: epsilon = 0 value differs from the linear program by {gap:.3g}")
    if result.checked < instances:
        result.fail(f"only {result.checked} of {instances} instances met Delta2 > Delta1")
    return result


SUITES = {
    "projection": suite_projection,
    "encoder": suite_encoder,
    "gradient": suite_gradient,
    "embedding": suite_embedding,
    "theorem1": suite_theorem1,
    "theorem2": suite_theorem2,
}


def run_suite(name, seed=0):
    if name not in SUITES:
        raise InvalidInputError(f"unknown suite {name!r}, choose from {sorted(SUITES)}")
    start = time.perf_counter()
    result = SUITES[name](seed=seed)
    result.seconds = time.perf_counter() - start
    logging.info(f"Suite {name}: {result.checked} checked, {result.skipped} skipped, "
                 f"{len(result.failures)} failures in {result.seconds:.1f}s")
    return result
