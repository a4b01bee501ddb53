import hashlib

import pytest

from veriml.models.base import ModelState
from veriml.payment import Ledger
from veriml.protocol.prediction import (
    MODEL_OFFSET,
    delivery_accuracy_attestation,
    model_hash,
    native_predictions,
    pack_model,
    prediction_protocol,
)

L_ = 8


def test_pack_model_offset_binary():
    assert pack_model([-1, 0]) == (MODEL_OFFSET - 1).to_bytes(8, "little") + MODEL_OFFSET.to_bytes(8, "little")
    assert model_hash([5]) == hashlib.sha256((MODEL_OFFSET + 5).to_bytes(8, "little")).digest()
    with pytest.raises(ValueError):
        pack_model([MODEL_OFFSET])


def test_native_predictions():
    X = [[256, 0], [0, 256]]
    assert native_predictions("linreg", [512, -256], X, L_) == [512, -256]
    assert native_predictions("logreg", [512, -256], X, L_) == [1, 0]


@pytest.mark.parametrize("kind", ["linreg", "logreg"])
def test_prediction_protocol_accepts_and_pays(kind):
    st = ModelState(kind, [300, -200], L_)
    X = [[100, 50], [10, 200], [255, 255]]
    ledger = Ledger({"client": 3, "server": 0})
    tr = prediction_protocol(st, X, ledger=ledger, fee=3, server_rng=b"r" * 64)
    assert tr.accepted, tr.reason
    assert tr.results == native_predictions(kind, st.params, X, L_)
    assert ledger.balance("server") == 3 and ledger.balance("client") == 0
    assert tr.events == ["prove", "verify", "escrow", "redeem"]


def test_prediction_wrong_model_hash_refused():
    st = ModelState("svm", [3, 4], L_)
    tr = prediction_protocol(st, [[1, 1]], expected_model_hash=b"\x00" * 32, server_rng=b"q" * 64)
    assert not tr.accepted and tr.reason == "model-hash-mismatch" and tr.ledger is None


def test_prediction_needs_wide_field():
    from veriml.r1cs import M61

    with pytest.raises(ValueError):
        prediction_protocol(ModelState("linreg", [1], L_), [[1]], field_cfg=M61)


def test_prediction_rejects_nonlinear():
    with pytest.raises(ValueError):
        prediction_protocol(ModelState("kmeans", [1], L_), [[1]])


def test_accuracy_attestation():
    st = ModelState("logreg", [256, -256], L_)
    X = [[200, 10], [10, 200], [150, 20], [30, 40]]
    Y = [1, 0, 1, 1]  # three of four right
    assert delivery_accuracy_attestation(st, X, Y, 0.75)
    assert not delivery_accuracy_attestation(st, X, Y, 0.8)
    assert not delivery_accuracy_attestation(st, X, Y, 0.5, declared_hash=b"\x01" * 32)
    with pytest.raises(ValueError):
        delivery_accuracy_attestation(st, X, Y, 1.5)
