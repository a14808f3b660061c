import numpy as np
import pytest

from domain.kds import trainer
from domain.kds.datagen import gen_two_moons
from domain.kds.encoder import EncoderParams, encode, encode_batch, loss, smooth_loss_batch
from domain.kds.errors import DimensionError, InvalidInputError, NumericalError
from domain.kds.oracle import finite_diff_grad
from domain.kds.trainer import (TrainConfig, backward_batch, decode, decode_batch, grad_dictionary,
                                grad_dictionary_batch, grad_step_size, init_dictionary, suggest_atom_count, train)
from domain.kds.verify import gradient_error


def _objective(y, params):
    def f(A):
        x, _ = encode(A, y, params)
        return loss(A, y, x, params.lam)
    return f


def test_decode_examples():
    np.testing.assert_allclose(decode(np.eye(2), [0.3, 0.7]), [0.3, 0.7])
    np.testing.assert_allclose(decode(np.array([[0.0, 1.0]]), [0.75, 0.25]), [0.25])


def test_decode_batch_matches_loops(rng):
    A = rng.normal(size=(3, 4))
    X = rng.dirichlet(np.ones(4), size=6).T
    expected = np.zeros((3, 6))
    for i in range(6):
        for j in range(4):
            expected[:, i] += X[j, i] * A[:, j]
    np.testing.assert_allclose(decode_batch(A, X), expected, atol=1e-14)
    with pytest.raises(DimensionError):
        decode_batch(A, X[:3])


def test_grad_dictionary_single_layer_line():
    A = np.array([[0.2, 1.3]])
    y = np.array([0.7])
    params = EncoderParams(lam=0.0, T=1, alpha=0.5)
    _, tape = encode(A, y, params)
    analytic = grad_dictionary(A, y, tape, 0.0)
    numeric = finite_diff_grad(_objective(y, params), A, h=1e-5)
    assert np.linalg.norm(numeric - analytic) <= 1e-7 * np.linalg.norm(numeric)


def test_grad_dictionary_random_instance():
    params = None
    for seed in range(100):
        rng = np.random.default_rng(seed)
        A = rng.normal(size=(3, 5))
        y = A @ rng.dirichlet(np.ones(5)) + rng.normal(scale=0.3, size=3)
        alpha = 0.9 / np.linalg.svd(A, compute_uv=False)[0] ** 2
        params = EncoderParams(lam=0.7, T=10, alpha=alpha)
        _, tape = encode(A, y, params)
        if tape.boundary_margin() >= 1e-4:
            break
    error, margin = gradient_error(A, y, params)
    assert margin >= 1e-4
    assert error <= 1e-5


def test_distance_term_gradient_with_codes_held_fixed(rng):
    A = rng.normal(size=(2, 4))
    Y = rng.normal(size=(2, 3))
    X = rng.dirichlet(np.ones(4), size=3).T
    lam = 0.8

    def distance_term(A_):
        return lam * float(np.sum(X * np.sum((Y[:, None, :] - A_[:, :, None]) ** 2, axis=0)))

    expected = 2 * lam * (A * X.sum(axis=1) - Y @ X.T)
    np.testing.assert_allclose(finite_diff_grad(distance_term, A), expected, atol=1e-7)


def test_batch_gradient_is_mean_of_point_gradients(rng):
    A = rng.normal(size=(2, 4))
    Y = rng.normal(size=(2, 5))
    params = EncoderParams(lam=0.5, T=6)
    _, tape = encode_batch(A, Y, params)
    mean = grad_dictionary_batch(A, Y, tape)
    per_point = []
    for i in range(5):
        _, t = encode(A, Y[:, i], params)
        per_point.append(grad_dictionary(A, Y[:, i], t, 0.5))
    np.testing.assert_allclose(mean, np.mean(per_point, axis=0), atol=1e-12)


def test_grad_dictionary_checks_tape(rng):
    A = rng.normal(size=(2, 3))
    y = rng.normal(size=2)
    _, tape = encode(A, y, EncoderParams(lam=0.5, T=3))
    with pytest.raises(InvalidInputError):
        grad_dictionary(A, y, tape, 0.4)
    with pytest.raises(DimensionError):
        grad_dictionary(rng.normal(size=(2, 4)), y, tape, 0.5)
    with pytest.raises(InvalidInputError):
        backward_batch(A, y[:, None], None)


def test_step_size_gradient_matches_finite_differences():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        A = rng.normal(size=(3, 4))
        y = rng.normal(size=3)
        alpha = 0.5 / np.linalg.svd(A, compute_uv=False)[0] ** 2
        _, tape = encode(A, y, EncoderParams(lam=0.3, T=5, alpha=alpha))
        if tape.boundary_margin() >= 1e-4:
            break

    def f(a):
        x, _ = encode(A, y, EncoderParams(lam=0.3, T=5, alpha=float(a[0])))
        return loss(A, y, x, 0.3)

    numeric = finite_diff_grad(f, np.array([alpha]), h=1e-7 * alpha / 1e-3)[0]
    assert grad_step_size(A, y, tape) == pytest.approx(numeric, rel=1e-4, abs=1e-8)


def test_init_dictionary(rng):
    Y = rng.normal(size=(2, 10))
    A = init_dictionary(Y, 10, seed=3)
    assert sorted(map(tuple, A.T)) == sorted(map(tuple, Y.T))
    np.testing.assert_array_equal(init_dictionary(Y, 4, seed=3), init_dictionary(Y, 4, seed=3))
    assert init_dictionary(Y, 1, seed=0).shape == (2, 1)
    with pytest.raises(InvalidInputError):
        init_dictionary(Y, 11, seed=0)


def test_suggest_atom_count():
    assert suggest_atom_count(0.01, 1) == 461
    assert suggest_atom_count(0.01, 2) == 24
    with pytest.raises(InvalidInputError):
        suggest_atom_count(1.5, 1)


def _small_config(**overrides):
    values = dict(m=10, epochs=200, batch_size=10, learning_rate=1e-2, seed=0,
                  encoder=EncoderParams(lam=0.5, T=5))
    values.update(overrides)
    return TrainConfig(**values)


def test_training_lowers_the_loss():
    Y, _ = gen_two_moons(50, 0.05, seed=1)
    result = train(Y, _small_config())
    assert len(result.loss_history) == 200
    assert result.loss_history[-1] <= result.loss_history[0]
    assert result.atoms.shape == (2, 10)
    assert np.all(result.codes >= 0)
    np.testing.assert_allclose(result.codes.sum(axis=0), 1.0, atol=1e-9)
    assert result.alpha is None


def test_training_is_deterministic():
    Y, _ = gen_two_moons(40, 0.05, seed=2)
    first = train(Y, _small_config(epochs=5))
    second = train(Y, _small_config(epochs=5))
    np.testing.assert_array_equal(first.atoms, second.atoms)
    np.testing.assert_array_equal(first.codes, second.codes)
    assert first.loss_history == second.loss_history


def test_parallel_batch_gradients_match_single_worker(rng):
    A = rng.normal(size=(2, 6))
    Yb = rng.normal(size=(2, 23))
    params = EncoderParams(lam=0.5, T=8)
    single = trainer._batch_gradients(A, Yb, params, 0.05, workers=1)
    pooled = trainer._batch_gradients(A, Yb, params, 0.05, workers=4)
    assert pooled[0] == pytest.approx(single[0], rel=1e-12)
    np.testing.assert_allclose(pooled[1], single[1], rtol=1e-10, atol=1e-12)
    assert pooled[2] == pytest.approx(single[2], rel=1e-10, abs=1e-12)


def test_atoms_at_the_data_reconstruct_it():
    Y, _ = gen_two_moons(10, 0.0, seed=4)
    config = _small_config(m=10, epochs=3, learning_rate=1e-4, encoder=EncoderParams(lam=0.0, T=300))
    A0 = init_dictionary(Y, 10, config.seed)
    X0, _ = encode_batch(A0, Y, config.encoder, record=False)
    result = train(Y, config)
    initial = float(np.mean(smooth_loss_batch(A0, Y, X0, 0.0)))
    final = float(np.mean(smooth_loss_batch(result.atoms, Y, result.codes, 0.0)))
    assert initial <= 1e-3
    assert final <= 1e-3


def test_learned_step_size_stays_positive():
    Y, _ = gen_two_moons(40, 0.05, seed=5)
    result = train(Y, _small_config(epochs=5, encoder=EncoderParams(lam=0.5, T=5, learn_alpha=True)))
    assert result.alpha is not None and result.alpha > 0


def test_final_encode_can_use_more_layers():
    Y, _ = gen_two_moons(40, 0.05, seed=6)
    result = train(Y, _small_config(epochs=2, final_encode_T=50))
    assert result.codes.shape == (10, 40)


def test_training_rejects_bad_configs():
    Y, _ = gen_two_moons(20, 0.05, seed=0)
    with pytest.raises(InvalidInputError):
        train(Y, _small_config(batch_size=21))
    with pytest.raises(InvalidInputError):
        train(Y, _small_config(m=21))
    with pytest.raises(InvalidInputError):
        train(Y, _small_config(learning_rate=0.0))


def test_non_finite_atoms_stop_training(monkeypatch):
    Y, _ = gen_two_moons(20, 0.05, seed=0)

    def broken(A, Yb, params, alpha, workers):
        return 1.0, np.full_like(A, np.nan), 0.0

    monkeypatch.setattr(trainer, "_batch_gradients", broken)
    with pytest.raises(NumericalError):
        train(Y, _small_config(epochs=2))
