import numpy as np
import pytest

from domain.kds import trainer, verify
from domain.kds.errors import InvalidInputError
from domain.kds.simplex import projection_vjp_batch


def test_projection_suite():
    result = verify.suite_projection(seed=0)
    assert result.passed, result.failures[:5]
    assert result.checked == 10000


def test_gradient_suite():
    result = verify.suite_gradient(seed=0)
    assert result.passed, result.failures[:5]
    assert result.checked == 50


def test_gradient_suite_catches_a_wrong_projection_derivative(monkeypatch):
    def flipped(V, G, projected=None):
        return -projection_vjp_batch(V, G, projected)

    monkeypatch.setattr(trainer, "projection_vjp_batch", flipped)
    result = verify.suite_gradient(seed=0, instances=9)
    assert not result.passed


def test_separated_connected_clusters_are_recovered():
    result = verify.suite_theorem1(seed=0)
    assert result.passed, result.failures[:5]
    assert result.checked == 100


def test_constrained_program_support_stays_in_own_cluster():
    result = verify.suite_theorem2(seed=0)
    assert result.passed, result.failures[:5]
    assert result.checked == 100


def test_single_instance_checks():
    acc = verify.theorem1_check(0)
    assert acc is None or acc == 1.0
    foreign = verify.theorem2_check(0)
    assert foreign is None or foreign == 0.0


def test_run_suite_records_time():
    result = verify.run_suite("embedding", seed=1)
    assert result.passed
    assert result.seconds > 0
    with pytest.raises(InvalidInputError):
        verify.run_suite("everything")


def test_failures_mark_a_suite_as_failed():
    result = verify.SuiteResult("demo", checked=3)
    assert result.passed
    result.fail("boom")
    assert not result.passed
    assert not verify.SuiteResult("empty").passed


def test_two_block_fixture_shapes():
    X, truth = verify._two_block_codes(np.random.default_rng(0), 3, 4, 10, 12)
    assert X.shape == (7, 22)
    assert np.all(X[3:, :10] == 0) and np.all(X[:3, 10:] == 0)
    np.testing.assert_allclose(X.sum(axis=0), 1.0)
    assert list(truth).count(0) == 10
