import pytest
from hypothesis import given
from hypothesis import strategies as st

from veriml.r1cs import (
    BN254,
    M61,
    Circuit,
    CircuitFrozen,
    count,
    default_field,
    evaluate,
    field_by_name,
    lc_sum,
    measure,
)


def product_circuit(field=M61):
    c = Circuit(field, "xy")
    x, y = c.public_input("x"), c.public_input("y")
    out = c.public_output("out")
    c.enforce(x, y, out)
    return c.freeze()


def test_satisfied_and_violation_index():
    c = product_circuit()
    z = c.solve({"x": 3, "y": 5})
    z[3] = 15
    assert evaluate(c, z)
    z[3] = 16
    res = evaluate(c, z)
    assert not res and res.first_violation == 0


def test_frozen_circuit_refuses_changes():
    c = product_circuit()
    with pytest.raises(CircuitFrozen):
        c.new_wire()


def test_public_wires_first():
    c = Circuit(M61)
    c.witness_input("w")
    with pytest.raises(Exception):
        c.public_input("x")


def test_counts():
    c = Circuit(M61)
    a, b = c.public_input("a"), c.public_input("b")
    with measure(c) as m:
        c.mul(a, b)
        c.mul(a, 3)  # constant product is free
    assert m.cost.constraints == 1
    assert count(c).public_wires == 3  # the constant wire + two inputs


def test_digest_changes_with_constraints():
    c1, c2 = product_circuit(), product_circuit()
    assert c1.digest() == c2.digest()
    c3 = Circuit(M61, "xy")
    x, y = c3.public_input("x"), c3.public_input("y")
    out = c3.public_output("out")
    c3.enforce(x + 1, y, out)
    assert c3.freeze().digest() != c1.digest()
    assert product_circuit(BN254).digest() != c1.digest()


def test_field_names(monkeypatch):
    assert field_by_name("m31").modulus == 2**31 - 1
    assert field_by_name("p101").modulus == 101
    assert field_by_name("101").name == "p101"
    with pytest.raises(ValueError):
        field_by_name("nope")
    monkeypatch.setenv("VERIML_FIELD", "m61")
    assert default_field() == M61
    monkeypatch.delenv("VERIML_FIELD")
    assert default_field() == BN254


@given(st.lists(st.integers(-(1 << 40), 1 << 40), min_size=1, max_size=8),
       st.lists(st.integers(-(1 << 40), 1 << 40), min_size=8, max_size=8))
def test_inner_product_matches_integers(xs, ys):
    ys = ys[: len(xs)]
    c = Circuit(BN254)
    X, Y = c.public_input("x", len(xs)), c.public_input("y", len(xs))
    out = lc_sum(c.mul(a, b) for a, b in zip(X, Y))
    c.freeze()
    z = c.solve({"x": xs, "y": ys})
    assert evaluate(c, z)
    assert z.signed(z.eval(out)) == sum(a * b for a, b in zip(xs, ys))


def test_big_values_fall_back_to_exact_check():
    c = Circuit(BN254)
    x = c.public_input("x")
    sq = c.mul(x, x)
    c.freeze()
    z = c.solve({"x": (1 << 120) + 7})
    assert evaluate(c, z)
    z[sq.single_wire()] = z[sq.single_wire()] + 1
    assert not evaluate(c, z)
