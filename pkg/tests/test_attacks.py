from __future__ import annotations

import pytest

from securehhl.attacks import AttackKind, apply_attacks, describe, normalize_spec, parse_attack
from securehhl.circuit import CircuitError, Operation
from securehhl.defense import build_secure_hhl
from securehhl.engine import exact_distribution
from securehhl.hhl import HhlParams, LinearSystem, build_hhl
from securehhl.metrics import marginal

SYSTEM = LinearSystem.canonical()


def test_empty_spec_is_identity():
    c = build_hhl(SYSTEM)
    out, levels = apply_attacks(c, {})
    assert out is c and levels == (0, 0, 0, 0)


def test_iia_prepends_x():
    c = build_hhl(SYSTEM)
    out, levels = apply_attacks(c, {"ancilla": AttackKind.IIA})
    assert out.ops[0] == Operation.x(0) and out.ops[1:] == c.ops
    assert levels == (0, 0, 0, 0)


def test_hea_sets_level():
    out, levels = apply_attacks(build_hhl(SYSTEM), {"b": "hea"})
    assert levels == (0, 0, 0, 2)
    assert len(out) == len(build_hhl(SYSTEM))


def test_unknown_label():
    with pytest.raises(CircuitError):
        apply_attacks(build_hhl(SYSTEM), {"new_ancilla": "iia"})


def test_hea_needs_three_levels():
    with pytest.raises(CircuitError):
        apply_attacks(build_hhl(SYSTEM, HhlParams(levels=2)), {"b": "hea"})


def test_parse_attack():
    assert parse_attack("clock1=HEA") == ("clock1", AttackKind.HEA)
    for bad in ("clock1", "=iia", "b=zap"):
        with pytest.raises(ValueError):
            parse_attack(bad)


def test_normalize_and_describe():
    spec = normalize_spec({"b": "IIA", "ancilla": AttackKind.HEA})
    assert list(spec) == ["ancilla", "b"]
    assert describe(spec) == "HEA on ancilla, IIA on b"
    assert describe({}) == "no attack"


@pytest.mark.parametrize("role", ["ancilla", "clock0", "clock1", "b"])
def test_hea_wire_always_reads_one(role):
    # add an end-of-circuit measurement of the victim on the defended circuit
    c, levels = apply_attacks(build_secure_hhl(SYSTEM), {role: "hea"})
    d = exact_distribution(c, levels)
    if role == "b":
        assert marginal(d, (7,)) == pytest.approx({"1": 1.0})
    elif role in ("clock0", "clock1"):
        pos = 5 if role == "clock0" else 6
        assert marginal(d, (pos,)) == pytest.approx({"1": 1.0})
    else:
        assert marginal(d, (0,)) == pytest.approx({"1": 1.0})
