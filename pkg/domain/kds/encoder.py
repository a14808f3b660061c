"""
Relaxed loss, its x-gradient and the unrolled accelerated projected gradient encoder.

    L(A, y, x) = 1/2 ||y - Ax||^2 + lambda * sum_j x_j ||y - a_j||^2   for x on the simplex, +inf otherwise

The encoder runs exactly T iterations from x^(0) = x~^(0) = 0:

    x^(t+1)  = P_S(x~^(t) - alpha * grad_x L(A, y, x~^(t)))
    x~^(t+1) = x^(t+1) + gamma^(t) * (x^(t+1) - x^(t))

Matrices hold points as columns: A is d x m, Y is d x b, codes are m x b.
"""
import asyncio
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from domain.kds.errors import DimensionError, InvalidInputError, NumericalError
from domain.kds.simplex import project_simplex_threshold_batch
from kds_cfg import ETA_RULE, LAMBDA, LAYERS, POWER_ITER_MAX, POWER_ITER_TOL, SIMPLEX_TOL, SUPPORT_THRESHOLD

ETA_RULES = ("standard", "printed")


@dataclass
class EncoderParams:
    lam: float = LAMBDA
    T: int = LAYERS
    alpha: float | None = None  # None means sigma_max(A)^-2
    learn_alpha: bool = False
    eta_rule: str = ETA_RULE

    def validate(self):
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise InvalidInputError(f"lambda must be a finite nonnegative number, got {self.lam}")
        if int(self.T) != self.T or self.T < 1:
            raise InvalidInputError(f"T must be a positive integer, got {self.T}")
        if self.alpha is not None and not (math.isfinite(self.alpha) and self.alpha > 0):
            raise InvalidInputError(f"alpha must be positive, got {self.alpha}")
        if self.eta_rule not in ETA_RULES:
            raise InvalidInputError(f"eta_rule must be one of {ETA_RULES}, got {self.eta_rule!r}")
        return self


@dataclass
class MomentumSchedule:
    eta: np.ndarray    # eta^(0..T)
    gamma: np.ndarray  # gamma^(0..T-1)


class TapeRecord(NamedTuple):
    x: np.ndarray
    x_tilde: np.ndarray
    pre_projection: np.ndarray
    active: np.ndarray
    x_next: np.ndarray


@dataclass
class EncoderTape:
    """Forward state of one encode call, consumed by the backward pass."""
    alpha: float
    lam: float
    gamma: np.ndarray
    x: np.ndarray               # (T + 1, m, b): x^(0..T)
    x_tilde: np.ndarray         # (T, m, b): x~^(0..T-1)
    pre_projection: np.ndarray  # (T, m, b): argument of each projection
    thresholds: np.ndarray      # (T, b): projection shift tau, P(z) = max(z - tau, 0)
    shape: tuple                # (d, m, b)

    def __len__(self):
        return len(self.pre_projection)

    @property
    def records(self):
        return [
            TapeRecord(self.x[t], self.x_tilde[t], self.pre_projection[t], self.x[t + 1] > 0, self.x[t + 1])
            for t in range(len(self))
        ]

    def boundary_margin(self):
        """Smallest distance of a pre-projection coordinate from the activation threshold."""
        return float(np.min(np.abs(self.pre_projection - self.thresholds[:, np.newaxis, :])))

    def replay(self, A, Y):
        """
        Re-run the recurrence from x^(0) with the recorded step size, lambda and momentum.

        Every step's projection argument, threshold and iterate must match the record
        bitwise; returns x^(T).
        """
        A = check_dictionary(A)
        Y = check_data(Y, A.shape[0])
        if (A.shape[0], A.shape[1], Y.shape[1]) != tuple(self.shape):
            raise DimensionError(f"tape was recorded for shape {self.shape}, got A {A.shape} and Y {Y.shape}")
        operators = _step_operators(A, Y, self.lam)
        x = np.zeros(self.x.shape[1:])
        x_tilde = np.zeros_like(x)
        if not np.array_equal(x, self.x[0]):
            raise NumericalError("tape does not start from x^(0) = 0")
        for t in range(len(self)):
            z, tau, x_next = _step(operators, self.alpha, x_tilde)
            for name, replayed, recorded in (("x~", x_tilde, self.x_tilde[t]), ("z", z, self.pre_projection[t]),
                                             ("tau", tau, self.thresholds[t]), ("x", x_next, self.x[t + 1])):
                if not np.array_equal(replayed, recorded):
                    raise NumericalError(f"replay diverges from the tape at step {t} in {name}")
            x_tilde = x_next + self.gamma[t] * (x_next - x)
            x = x_next
        return x

def check_dictionary(A):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise DimensionError(f"dictionary must be a d x m matrix with d, m >= 1, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError("dictionary contains non-finite entries")
    return A


def check_data(Y, d=None):
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, np.newaxis]
    if Y.ndim != 2 or Y.shape[1] < 1:
        raise DimensionError(f"data must be a d x n matrix with n >= 1, got shape {Y.shape}")
    if d is not None and Y.shape[0] != d:
        raise DimensionError(f"data dimension {Y.shape[0]} does not match dictionary dimension {d}")
    if not np.all(np.isfinite(Y)):
        raise InvalidInputError("data contains non-finite entries")
    return Y


def duplicate_atoms(A, tol=1e-12):
    A = check_dictionary(A)
    pairs = []
    for j in range(A.shape[1]):
        dist = np.linalg.norm(A[:, j + 1:] - A[:, j:j + 1], axis=0)
        pairs.extend((j, j + 1 + int(k)) for k in np.flatnonzero(dist < tol))
    return pairs


def atom_distances(A, Y):
    """W[j, i] = ||y_i - a_j||^2."""
    W = np.empty((A.shape[1], Y.shape[1]))
    for j in range(A.shape[1]):
        W[j] = np.sum((Y - A[:, j:j + 1]) ** 2, axis=0)
    return W


def smooth_loss_batch(A, Y, X, lam):
    R = Y - A @ X
    return 0.5 * np.sum(R ** 2, axis=0) + lam * np.sum(X * atom_distances(A, Y), axis=0)


def loss_batch(A, Y, X, lam):
    A = check_dictionary(A)
    Y = check_data(Y, A.shape[0])
    X = np.asarray(X, dtype=float)
    if X.shape != (A.shape[1], Y.shape[1]):
        raise DimensionError(f"codes shape {X.shape} does not match ({A.shape[1]}, {Y.shape[1]})")
    values = smooth_loss_batch(A, Y, X, lam)
    feasible = np.all(X >= -SIMPLEX_TOL, axis=0) & (np.abs(X.sum(axis=0) - 1.0) <= SIMPLEX_TOL)
    return np.where(feasible, values, np.inf)


def loss(A, y, x, lam):
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if y.ndim != 1 or x.ndim != 1:
        raise DimensionError("loss expects y and x as vectors")
    return float(loss_batch(A, y[:, np.newaxis], x[:, np.newaxis], lam)[0])


def loss_grad_x(A, y, x, lam):
    A = check_dictionary(A)
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if y.shape != (A.shape[0],) or x.shape != (A.shape[1],):
        raise DimensionError(f"loss_grad_x expects y of length {A.shape[0]} and x of length {A.shape[1]}")
    return A.T @ (A @ x - y) + lam * atom_distances(A, y[:, np.newaxis])[:, 0]


def default_step_size(A, tol=POWER_ITER_TOL, max_iter=POWER_ITER_MAX):
    """sigma_max(A)^-2 by power iteration on A^T A."""
    A = check_dictionary(A)
    if not np.any(A):
        raise InvalidInputError("step size undefined for an all-zero dictionary")
    AtA = A.T @ A
    v = np.random.default_rng(0).normal(size=A.shape[1])
    v /= np.linalg.norm(v)
    lam_max = 0.0
    for _ in range(max_iter):
        w = AtA @ v
        lam_max = float(v @ w)
        if np.linalg.norm(w - lam_max * v) <= tol * lam_max:
            break
        v = w / np.linalg.norm(w)
    else:
        logging.warning(f"power iteration stopped after {max_iter} iterations (sigma_max^2 ~ {lam_max:.6g})")
    return 1.0 / lam_max


def momentum_schedule(T, eta_rule=ETA_RULE):
    if int(T) != T or T < 1:
        raise InvalidInputError(f"T must be a positive integer, got {T}")
    if eta_rule not in ETA_RULES:
        raise InvalidInputError(f"eta_rule must be one of {ETA_RULES}, got {eta_rule!r}")
    eta = np.zeros(T + 1)
    for t in range(T):
        if eta_rule == "standard":
            eta[t + 1] = (1.0 + math.sqrt(1.0 + 4.0 * eta[t] ** 2)) / 2.0
        else:
            eta[t + 1] = (1.0 + math.sqrt(1.0 + 4.0 * eta[t])) / 2.0
    gamma = (eta[:-1] - 1.0) / eta[1:]
    return MomentumSchedule(eta=eta, gamma=gamma)


def resolve_step_size(A, params, alpha=None):
    if alpha is not None:
        return float(alpha)
    if params.alpha is not None:
        return float(params.alpha)
    return default_step_size(A)


def _step_operators(A, Y, lam):
    """(A^T A, A^T Y, lambda * W), the data-dependent parts of the x-gradient."""
    return A.T @ A, A.T @ Y, lam * atom_distances(A, Y)


def _step(operators, alpha, x_tilde):
    AtA, AtY, lam_W = operators
    z = x_tilde - alpha * (AtA @ x_tilde - AtY + lam_W)
    x_next, tau = project_simplex_threshold_batch(z)
    return z, tau, x_next


def encode_batch(A, Y, params, alpha=None, record=True):
    """
    Encode every column of Y with T unrolled iterations.

    Returns the m x b code matrix and, when `record` is set, the EncoderTape.
    `alpha` overrides params.alpha (the trainer passes its current step size).
    """
    A = check_dictionary(A)
    Y = check_data(Y, A.shape[0])
    params.validate()
    alpha = resolve_step_size(A, params, alpha)
    T = int(params.T)
    lam = float(params.lam)
    gamma = momentum_schedule(T, params.eta_rule).gamma

    m, b = A.shape[1], Y.shape[1]
    operators = _step_operators(A, Y, lam)

    x = np.zeros((m, b))
    x_tilde = np.zeros((m, b))
    if record:
        xs = np.empty((T + 1, m, b))
        x_tildes = np.empty((T, m, b))
        zs = np.empty((T, m, b))
        taus = np.empty((T, b))
        xs[0] = x
    for t in range(T):
        z, tau, x_next = _step(operators, alpha, x_tilde)
        if record:
            x_tildes[t] = x_tilde
            zs[t] = z
            taus[t] = tau
            xs[t + 1] = x_next
        x_tilde = x_next + gamma[t] * (x_next - x)
        x = x_next

    if not record:
        return x, None
    tape = EncoderTape(alpha=alpha, lam=lam, gamma=gamma, x=xs, x_tilde=x_tildes,
                       pre_projection=zs, thresholds=taus, shape=(A.shape[0], m, b))
    return x, tape


def encode(A, y, params, alpha=None):
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise DimensionError(f"encode expects a single data vector, got shape {y.shape}")
    X, tape = encode_batch(A, y[:, np.newaxis], params, alpha=alpha)
    return X[:, 0], tape


async def encode_all_async(A, Y, params, alpha=None, workers=1, chunk=4096):
    """Encode all columns of Y in chunks; chunks are joined in order, so output does not depend on workers."""
    A = check_dictionary(A)
    Y = check_data(Y, A.shape[0])
    alpha = resolve_step_size(A, params, alpha)
    if workers <= 1:
        return _encode_chunks(A, Y, params, alpha, chunk)

    bounds = _chunk_bounds(Y.shape[1], chunk)
    limiter = asyncio.Semaphore(workers)

    async def encode_chunk(lo, hi):
        async with limiter:
            codes, _ = await asyncio.to_thread(encode_batch, A, Y[:, lo:hi], params, alpha, False)
            return codes

    parts = await asyncio.gather(*(encode_chunk(lo, hi) for lo, hi in bounds))
    return np.concatenate(parts, axis=1)


def _chunk_bounds(n, chunk):
    return [(i, min(i + chunk, n)) for i in range(0, n, chunk)]


def _encode_chunks(A, Y, params, alpha, chunk):
    parts = [encode_batch(A, Y[:, lo:hi], params, alpha, record=False)[0] for lo, hi in _chunk_bounds(Y.shape[1], chunk)]
    return np.concatenate(parts, axis=1)


def encode_all(A, Y, params, alpha=None, workers=1, chunk=4096):
    """Synchronous form of encode_all_async; must not be called from a running event loop when workers > 1."""
    if workers <= 1:
        A = check_dictionary(A)
        Y = check_data(Y, A.shape[0])
        return _encode_chunks(A, Y, params, resolve_step_size(A, params, alpha), chunk)
    return asyncio.run(encode_all_async(A, Y, params, alpha=alpha, workers=workers, chunk=chunk))


def support_sizes(X, threshold=SUPPORT_THRESHOLD):
    return np.count_nonzero(np.asarray(X) > threshold, axis=0)
