import pytest
from hypothesis import given
from hypothesis import strategies as st

from veriml.models.base import TrainConfig
from veriml.protocol.task import (
    ConfigError,
    TaskSpec,
    batch,
    batch_indices,
    iteration_position,
    prepare_data,
    steps_per_epoch,
    validate_distinct,
)
from veriml.r1cs import BN254, M61

from .conftest import small_task


@pytest.mark.parametrize("kind", ["linreg", "logreg", "svm", "kmeans", "nn", "tree"])
def test_json_roundtrip_and_digest(kind):
    spec, _ = small_task(kind)
    back = TaskSpec.from_json(spec.to_json())
    assert back.to_json() == spec.to_json()
    assert back.digest() == spec.digest()
    assert spec.with_(batch_seed=99).digest() != spec.digest()


def test_default_field_and_env(monkeypatch):
    spec, _ = small_task("linreg")
    assert spec.p == BN254.modulus
    monkeypatch.setenv("VERIML_FIELD", "M61")
    assert spec.p == M61.modulus
    assert spec.with_(field="bn254").p == BN254.modulus


def test_bad_specs():
    with pytest.raises(ConfigError):
        TaskSpec("forest", TrainConfig(), {})
    with pytest.raises(ConfigError):
        TaskSpec("linreg", TrainConfig(), {"d": 1}, interval=0)
    with pytest.raises(ConfigError):
        TaskSpec.from_json({"kind": "linreg"})
    spec = TaskSpec("linreg", TrainConfig(frac_bits=32), {"d": 13}, field="M61")
    with pytest.raises(ConfigError):
        spec.check_field()


@given(st.integers(1, 200), st.integers(1, 20), st.integers(0, 2**32), st.integers(0, 5))
def test_epoch_batches_are_disjoint(n, b, seed, epoch):
    if b > n:
        with pytest.raises(ValueError):
            steps_per_epoch(n, b)
        return
    sched = [batch_indices(seed, epoch, s, b, n) for s in range(steps_per_epoch(n, b))]
    assert validate_distinct(sched)
    assert all(len(x) == b and all(0 <= r < n for r in x) for x in sched)
    assert not validate_distinct(sched + [sched[0]])


def test_iteration_position():
    assert iteration_position(1, 10, 3) == (0, 0)
    assert iteration_position(3, 10, 3) == (0, 2)
    assert iteration_position(4, 10, 3) == (1, 0)


def test_prepare_data_checks_digest_and_holdout():
    spec, ds = small_task("linreg")
    with pytest.raises(ConfigError):
        prepare_data(spec.with_(dataset_digest="00" * 32), ds)
    data = prepare_data(spec.with_(holdout=10), ds)
    assert data.train.n == ds.n - 10 and data.holdout.n == 10
    X, Y = batch(spec, prepare_data(spec, ds), 1)
    assert len(X) == len(Y) == spec.cfg.batch_size
