"""
Synthetic datasets and preprocessing. Data matrices are d x n with points as columns.
"""
import logging

import numpy as np

from domain.kds.encoder import check_data
from domain.kds.errors import InvalidInputError
from kds_cfg import MOONS_NOISE

PREPROCESS_MODES = ("minmax", "standardize", "unitnorm")


def _split_counts(n):
    return (n + 1) // 2, n // 2


def gen_two_moons(n, noise_sigma=MOONS_NOISE, seed=0):
    """
    Two interleaved unit semicircles: the upper arc centred at (0, 0), the lower one at (1, 0.5).

    Angles are uniform on [0, pi]; labels are 0 for the upper moon (ceil(n/2) points)
    and 1 for the lower one.
    """
    if n < 2:
        raise InvalidInputError(f"two moons needs n >= 2, got {n}")
    if noise_sigma < 0:
        raise InvalidInputError(f"noise_sigma must be nonnegative, got {noise_sigma}")
    rng = np.random.default_rng(seed)
    n_upper, n_lower = _split_counts(n)
    t_upper = rng.uniform(0.0, np.pi, n_upper)
    t_lower = rng.uniform(0.0, np.pi, n_lower)
    upper = np.vstack([np.cos(t_upper), np.sin(t_upper)])
    lower = np.vstack([1.0 - np.cos(t_lower), 0.5 - np.sin(t_lower)])
    Y = np.hstack([upper, lower])
    labels = np.concatenate([np.zeros(n_upper, dtype=int), np.ones(n_lower, dtype=int)])
    if noise_sigma > 0:
        Y = Y + rng.normal(scale=noise_sigma, size=Y.shape)
    return Y, labels


def gen_concentric_circles(n, delta, seed=0, noise_sigma=0.0):
    """Circles of radii 1 (label 0) and 1 - delta (label 1) centred at the origin, half the mass each."""
    if not 0 <= delta <= 1:
        raise InvalidInputError(f"delta must lie in [0, 1], got {delta}")
    if n < 2:
        raise InvalidInputError(f"concentric circles needs n >= 2, got {n}")
    rng = np.random.default_rng(seed)
    n_outer, n_inner = _split_counts(n)
    theta = rng.uniform(0.0, 2 * np.pi, n)
    radii = np.concatenate([np.ones(n_outer), np.full(n_inner, 1.0 - delta)])
    Y = radii * np.vstack([np.cos(theta), np.sin(theta)])
    labels = np.concatenate([np.zeros(n_outer, dtype=int), np.ones(n_inner, dtype=int)])
    if noise_sigma > 0:
        Y = Y + rng.normal(scale=noise_sigma, size=Y.shape)
    return Y, labels


def gen_unit_circle(n, noise_sigma=0.0, seed=0):
    if n < 1:
        raise InvalidInputError(f"unit circle needs n >= 1, got {n}")
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2 * np.pi, n)
    Y = np.vstack([np.cos(theta), np.sin(theta)])
    if noise_sigma > 0:
        Y = Y + rng.normal(scale=noise_sigma, size=Y.shape)
    return Y, np.zeros(n, dtype=int)


def preprocess(Y, mode):
    Y = check_data(Y)
    if mode == "minmax":
        low, high = Y.min(), Y.max()
        if high == low:
            raise InvalidInputError("minmax scaling of constant data is undefined")
        return (Y - low) / (high - low)

    if mode == "standardize":
        mean = Y.mean(axis=1, keepdims=True)
        std = Y.std(axis=1, keepdims=True)
        flat = np.flatnonzero(std[:, 0] == 0)
        if len(flat):
            raise InvalidInputError(f"cannot standardize: coordinate {int(flat[0])} is constant")
        return (Y - mean) / std

    if mode == "unitnorm":
        norms = np.linalg.norm(Y, axis=0)
        zero = norms == 0
        if np.any(zero):
            logging.warning(f"unitnorm left {int(zero.sum())} zero columns unchanged: {np.flatnonzero(zero)[:10].tolist()}")
        return Y / np.where(zero, 1.0, norms)

    raise InvalidInputError(f"preprocess mode must be one of {PREPROCESS_MODES}, got {mode!r}")
