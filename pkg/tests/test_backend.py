import numpy as np
import pytest

from veriml.backend import DigestMismatch, LayoutMismatch, Proof, UnsatisfiedError, get_backend
from veriml.r1cs import BN254, M61, Circuit


def cube_circuit(field=M61, label="cube"):
    c = Circuit(field, label)
    x = c.public_input("x")
    y = c.public_output("y")
    x2 = c.mul(x, x)
    c.enforce(x2, x, y)
    yi = y.single_wire()

    @c.solver
    def _(z):
        z[yi] = z.eval(x2) * z.eval(x)

    return c.freeze()


@pytest.mark.parametrize("field", [M61, BN254])
def test_prove_verify_roundtrip(field):
    c = cube_circuit(field)
    be = get_backend()
    ek, vk = be.keygen(c)
    z = c.solve({"x": 3})
    proof = be.prove(ek, {"x": 3}, z)
    assert be.verify(vk, {"x": 3, "y": 27}, proof)
    assert not be.verify(vk, {"x": 3, "y": 28}, proof)
    blob = proof.to_bytes(field.modulus)
    back = Proof.from_bytes(blob, field.modulus)
    assert back.circuit_digest == proof.circuit_digest
    assert np.array_equal(back.small, proof.small) and back.big == proof.big
    assert be.verify(vk, {"x": 3, "y": 27}, back)


def test_tampered_proof_rejected():
    c = cube_circuit()
    be = get_backend()
    ek, vk = be.keygen(c)
    proof = be.prove(ek, {"x": 4}, c.solve({"x": 4}))
    proof.small[0] += 1
    assert not be.verify(vk, {"x": 4, "y": 64}, proof)


def test_wrong_circuit_and_layout():
    be = get_backend()
    ek, vk = be.keygen(cube_circuit(label="a"))
    _, vk_other = be.keygen(cube_circuit(BN254, "b"))
    proof = be.prove(ek, {"x": 2}, ek.circuit.solve({"x": 2}))
    with pytest.raises(DigestMismatch):
        be.verify(vk_other, {"x": 2, "y": 8}, proof)
    with pytest.raises(LayoutMismatch):
        be.verify(vk, {"x": 2}, proof)


def test_unsatisfied_assignment_cannot_be_proved():
    c = cube_circuit()
    be = get_backend()
    ek, _ = be.keygen(c)
    z = c.solve({"x": 2})
    z[c.inputs["y"][0]] = 9  # 2^3 = 8
    with pytest.raises(UnsatisfiedError):
        be.prove(ek, {"x": 2}, z)


def test_bad_proof_bytes():
    with pytest.raises(ValueError):
        Proof.from_bytes(b"XXXX", M61.modulus)
    be = get_backend()
    ek, _ = be.keygen(cube_circuit())
    blob = be.prove(ek, {"x": 2}, ek.circuit.solve({"x": 2})).to_bytes(M61.modulus)
    with pytest.raises(ValueError):
        Proof.from_bytes(blob + b"\x00", M61.modulus)
    with pytest.raises(ValueError):
        get_backend("groth16")
