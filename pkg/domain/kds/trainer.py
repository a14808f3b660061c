"""
Dictionary learning by backpropagation through the decoder and the unrolled encoder.
"""
import asyncio
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from tqdm import tqdm

from domain.kds.encoder import (EncoderParams, EncoderTape, atom_distances, check_data, check_dictionary,
                                default_step_size, encode_all, encode_batch, smooth_loss_batch)
from domain.kds.errors import DimensionError, InvalidInputError, NumericalError
from domain.kds.simplex import projection_vjp_batch
import kds_cfg
from kds_cfg import (ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON, ATOMS, BATCH_SIZE, DIVERGENCE_FACTOR, EPOCHS,
                     LEARNING_RATE, SEED)


@dataclass
class TrainConfig:
    m: int = ATOMS
    epochs: int = EPOCHS
    batch_size: int = BATCH_SIZE
    learning_rate: float = LEARNING_RATE
    adam_beta1: float = ADAM_BETA1
    adam_beta2: float = ADAM_BETA2
    adam_epsilon: float = ADAM_EPSILON
    seed: int = SEED
    encoder: EncoderParams = field(default_factory=EncoderParams)
    final_encode_T: int | None = None
    workers: int = 1
    deterministic: bool = True

    def validate(self, n=None):
        if self.m < 1 or self.epochs < 1 or self.batch_size < 1:
            raise InvalidInputError(f"m, epochs and batch_size must be positive (m={self.m}, "
                                    f"epochs={self.epochs}, batch_size={self.batch_size})")
        if not self.learning_rate > 0:
            raise InvalidInputError(f"learning_rate must be positive, got {self.learning_rate}")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise InvalidInputError(f"Adam betas must lie in (0, 1), got {self.adam_beta1}, {self.adam_beta2}")
        if not self.adam_epsilon > 0:
            raise InvalidInputError(f"Adam epsilon must be positive, got {self.adam_epsilon}")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidInputError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.final_encode_T is not None and self.final_encode_T < 1:
            raise InvalidInputError(f"final_encode_T must be positive, got {self.final_encode_T}")
        if n is not None:
            if self.batch_size > n:
                raise InvalidInputError(f"batch_size {self.batch_size} exceeds the number of points {n}")
            if self.m > n:
                raise InvalidInputError(f"m = {self.m} atoms cannot be drawn from {n} points")
        self.encoder.validate()
        return self


@dataclass
class TrainResult:
    atoms: np.ndarray
    codes: np.ndarray
    loss_history: list
    alpha: float | None = None
    encode_seconds: float = 0.0


class Adam:
    def __init__(self, shape, learning_rate, beta1, beta2, epsilon):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.step_count = 0

    def step(self, param, grad):
        self.step_count += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad ** 2
        m_hat = self.m / (1 - self.beta1 ** self.step_count)
        v_hat = self.v / (1 - self.beta2 ** self.step_count)
        return param - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)


def decode_batch(A, X):
    A = check_dictionary(A)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != A.shape[1]:
        raise DimensionError(f"codes shape {X.shape} does not match {A.shape[1]} atoms")
    return A @ X


def decode(A, x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionError(f"decode expects a code vector, got shape {x.shape}")
    return decode_batch(A, x[:, np.newaxis])[:, 0]


def _check_tape(A, Y, tape):
    if not isinstance(tape, EncoderTape):
        raise InvalidInputError("grad_dictionary needs the EncoderTape returned by encode")
    d, m, b = tape.shape
    if A.shape != (d, m) or Y.shape != (d, b):
        raise DimensionError(f"tape recorded d={d}, m={m}, b={b} but got A {A.shape} and Y {Y.shape}")


def backward_batch(A, Y, tape):
    """
    Summed gradients of sum_i L(A, y_i, x_i^(T)(A, y_i)) w.r.t. A and the step size.

    The step size is treated as an independent parameter (not as a function of A).
    Returns (d x m gradient, scalar alpha gradient).
    """
    A = check_dictionary(A)
    Y = check_data(Y, A.shape[0])
    _check_tape(A, Y, tape)
    T = len(tape)
    alpha, lam, gamma = tape.alpha, tape.lam, tape.gamma

    W = atom_distances(A, Y)
    x_T = tape.x[T]
    R = A @ x_T - Y
    grad_A = R @ x_T.T + 2.0 * lam * (A * x_T.sum(axis=1) - Y @ x_T.T)
    grad_alpha = 0.0

    # u[t]: adjoint of x^(t)
    u = np.zeros_like(tape.x)
    u[T] = A.T @ R + lam * W
    for t in reversed(range(T)):
        z = tape.pre_projection[t]
        x_tilde = tape.x_tilde[t]
        zeta = projection_vjp_batch(z, u[t + 1], projected=tape.x[t + 1])
        zeta_sum = zeta.sum(axis=1)

        # z = x~ - alpha * (A^T A x~ - A^T y + lam * w(A))
        grad_A -= alpha * (A @ (x_tilde @ zeta.T) + A @ (zeta @ x_tilde.T))
        grad_A += alpha * (Y @ zeta.T)
        grad_A -= 2.0 * alpha * lam * (A * zeta_sum - Y @ zeta.T)
        grad_alpha -= float(np.sum(zeta * (x_tilde - z))) / alpha

        if t >= 1:
            u_tilde = zeta - alpha * (A.T @ (A @ zeta))
            u[t] += (1.0 + gamma[t - 1]) * u_tilde
            u[t - 1] -= gamma[t - 1] * u_tilde
    return grad_A, grad_alpha


def grad_dictionary_batch(A, Y, tape):
    """Mean per-point dictionary gradient over the batch."""
    grad_A, _ = backward_batch(A, Y, tape)
    return grad_A / tape.shape[2]


def grad_dictionary(A, y, tape, lam):
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise DimensionError(f"grad_dictionary expects a single data vector, got shape {y.shape}")
    if tape.lam != lam:
        raise InvalidInputError(f"tape was recorded with lambda={tape.lam}, got lambda={lam}")
    return backward_batch(A, y[:, np.newaxis], tape)[0]


def grad_step_size(A, y, tape):
    y = np.asarray(y, dtype=float)
    return backward_batch(A, y[:, np.newaxis], tape)[1]


def init_dictionary(Y, m, seed):
    Y = check_data(Y)
    n = Y.shape[1]
    if m < 1 or m > n:
        raise InvalidInputError(f"cannot draw m = {m} distinct columns from n = {n} points")
    columns = np.random.default_rng(seed).choice(n, size=m, replace=False)
    return Y[:, columns].copy()


def suggest_atom_count(cover_eps, intrinsic_dim, C=1.0):
    """m = C * eps^(-1/d) * log(eps^(-1/d)), the covering heuristic; C must be supplied by the caller."""
    if not 0 < cover_eps < 1 or intrinsic_dim < 1:
        raise InvalidInputError(f"need 0 < cover_eps < 1 and intrinsic_dim >= 1, got {cover_eps}, {intrinsic_dim}")
    r = cover_eps ** (-1.0 / intrinsic_dim)
    return max(1, math.ceil(C * r * math.log(r)))


def _chunk_gradients(A, Yc, params, alpha):
    Xc, tape = encode_batch(A, Yc, params, alpha=alpha)
    loss_sum = float(np.sum(smooth_loss_batch(A, Yc, Xc, params.lam)))
    grad_A, grad_alpha = backward_batch(A, Yc, tape)
    return loss_sum, grad_A, grad_alpha


async def _gather_chunk_gradients(A, Yb, params, alpha, chunks):
    return await asyncio.gather(*(asyncio.to_thread(_chunk_gradients, A, Yb[:, lo:hi], params, alpha)
                                  for lo, hi in chunks))


def _batch_gradients(A, Yb, params, alpha, workers):
    """Encode and backprop one batch; returns (summed loss, summed A-gradient, summed alpha-gradient)."""
    if workers <= 1:
        parts = [_chunk_gradients(A, Yb, params, alpha)]
    else:
        step = math.ceil(Yb.shape[1] / workers)
        chunks = [(lo, min(lo + step, Yb.shape[1])) for lo in range(0, Yb.shape[1], step)]
        parts = asyncio.run(_gather_chunk_gradients(A, Yb, params, alpha, chunks))

    # gather keeps chunk order, so the reduction order is fixed
    loss_sum, grad_A, grad_alpha = 0.0, np.zeros_like(A), 0.0
    for part_loss, part_A, part_alpha in parts:
        loss_sum += part_loss
        grad_A += part_A
        grad_alpha += part_alpha
    return loss_sum, grad_A, grad_alpha


def train(Y, config):
    Y = check_data(Y)
    n = Y.shape[1]
    config.validate(n)
    params = config.encoder
    workers = 1 if config.deterministic else max(1, config.workers)

    A = init_dictionary(Y, config.m, config.seed)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence(config.seed).spawn(1)[0])
    adam_A = Adam(A.shape, config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_epsilon)
    adam_rho = Adam((), config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_epsilon)
    rho = math.log(params.alpha if params.alpha is not None else default_step_size(A))

    initial_loss = None
    loss_history = []
    logging.info(f"Training {config.m} atoms on {n} points: epochs={config.epochs}, batch={config.batch_size}, "
                 f"T={params.T}, lambda={params.lam}, lr={config.learning_rate}")

    with tqdm(total=config.epochs, desc="Training", unit="epoch", disable=not kds_cfg.SHOW_PROGRESS) as pbar:
        for epoch in range(config.epochs):
            order = shuffle_rng.permutation(n)
            epoch_loss = 0.0
            for lo in range(0, n, config.batch_size):
                Yb = Y[:, order[lo:lo + config.batch_size]]
                if params.learn_alpha:
                    alpha = math.exp(rho)
                elif params.alpha is not None:
                    alpha = params.alpha
                else:
                    alpha = default_step_size(A)

                loss_sum, grad_A, grad_alpha = _batch_gradients(A, Yb, params, alpha, workers)
                epoch_loss += loss_sum
                b = Yb.shape[1]
                A = adam_A.step(A, grad_A / b)
                if not np.all(np.isfinite(A)):
                    raise NumericalError(f"training diverged: non-finite atoms after epoch {epoch + 1}")
                if params.learn_alpha:
                    rho = float(adam_rho.step(rho, alpha * grad_alpha / b))

            epoch_loss /= n
            if not math.isfinite(epoch_loss):
                raise NumericalError(f"training diverged: epoch {epoch + 1} loss is {epoch_loss}")
            if initial_loss is None:
                initial_loss = epoch_loss
            elif epoch_loss > DIVERGENCE_FACTOR * max(initial_loss, np.finfo(float).tiny):
                raise NumericalError(f"training diverged: epoch {epoch + 1} loss {epoch_loss:.6g} exceeds "
                                     f"{DIVERGENCE_FACTOR:g} x initial loss {initial_loss:.6g}")
            loss_history.append(epoch_loss)
            pbar.set_postfix(loss=f"{epoch_loss:.6g}")
            pbar.update(1)

    final_params = params
    if config.final_encode_T is not None:
        final_params = EncoderParams(lam=params.lam, T=config.final_encode_T, alpha=params.alpha,
                                     learn_alpha=params.learn_alpha, eta_rule=params.eta_rule)
    alpha = math.exp(rho) if params.learn_alpha else None
    start = time.perf_counter()
    codes = encode_all(A, Y, final_params, alpha=alpha, workers=workers)
    encode_seconds = time.perf_counter() - start
    logging.info(f"Training finished: final epoch loss {loss_history[-1]:.6g}")
    return TrainResult(atoms=A, codes=codes, loss_history=loss_history, alpha=alpha, encode_seconds=encode_seconds)
