"""Defended HHL circuit and decoding of the 7-bit detection readout.

Layout of the defended circuit (five wires, new ancilla last)::

    part 2    b defense         -> c_b_defense       (m1, m2, m3)
    parts 3-6 state prep, QPE, IQFT, rotation (unchanged)
    part 7    ancilla defense   -> c_ancilla_defense (ancilla, new ancilla)
    parts 8-9 uncompute
    part 10   b measurement     -> c_b
    part 11   clock defense     -> c_clock_defense   (clock0, clock1)

The detection code is ``c_ancilla_defense + c_b_defense + c_clock_defense``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .attacks import AttackKind, normalize_spec
from .circuit import Circuit, CircuitBuilder, Operation
from .hhl import ANCILLA, B, CLOCK0, CLOCK1, WIRE_LABELS, HhlParams, LinearSystem, hhl_sections

NEW_ANCILLA = "new_ancilla"
C_ANCILLA = "c_ancilla_defense"
C_B_DEFENSE = "c_b_defense"
C_CLOCK = "c_clock_defense"
C_B = "c_b"

NO_ATTACK_CODES = ("1000000", "0100000")
CONVERGED, ITERATING = NO_ATTACK_CODES

IIA, HEA = AttackKind.IIA, AttackKind.HEA

# Part 2 as (gate, wire labels, register bit).  m1 -> bit 0, m2 -> bit 1, m3 -> bit 2.
PART2 = (
    ("measure", (NEW_ANCILLA,), 0),
    ("reset", (NEW_ANCILLA,), None),
    ("cnot", (B, ANCILLA), None),
    ("measure", (ANCILLA,), 2),
    ("reset", (ANCILLA,), None),
    ("x", (B,), None),
    ("cnot", (B, NEW_ANCILLA), None),
    ("x", (NEW_ANCILLA,), None),
    ("measure", (NEW_ANCILLA,), 1),
    ("reset", (NEW_ANCILLA,), None),
    ("x", (B,), None),
)


class DefenseError(ValueError):
    pass


def _part2_ops(steps: Iterable[tuple], wires: Mapping[str, int]) -> list[Operation]:
    ops = []
    for gate, labels, bit in steps:
        ids = [wires[label] for label in labels]
        if gate == "measure":
            ops.append(Operation.measure(ids[0], C_B_DEFENSE, bit))
        elif gate == "reset":
            ops.append(Operation.reset(ids[0]))
        elif gate == "cnot":
            ops.append(Operation.cnot(*ids))
        elif gate == "x":
            ops.append(Operation.x(ids[0]))
        else:
            raise DefenseError(f"unsupported part-2 gate {gate!r}")
    return ops


def _cancel_seam(first: list[Operation], second: list[Operation]) -> tuple[list[Operation], list[Operation]]:
    """Drop self-cancelling gate pairs where ``first`` ends and ``second`` begins.

    Part 2 ends with X(b) and the prep of b = (0, 1) starts with X(b); the
    pair is the identity on every level, leakage included.
    """
    first, second = list(first), list(second)
    while (first and second and first[-1].is_gate and second[0].is_gate
           and first[-1].inverse() == second[0]):
        first.pop()
        second.pop(0)
    return first, second


def build_secure_hhl(system: LinearSystem, params: HhlParams = HhlParams(),
                     part2: Sequence[tuple] = PART2) -> Circuit:
    """Build the defended HHL circuit.

    ``part2`` replaces the b-defense sequence; it exists so tests can feed a
    corrupted sequence and watch the truth tables fail.
    """
    builder = CircuitBuilder()
    wires = {label: builder.add_wire(label, params.levels) for label in WIRE_LABELS}
    wires[NEW_ANCILLA] = builder.add_wire(NEW_ANCILLA, 3)
    builder.add_register(C_ANCILLA, 2)
    builder.add_register(C_B_DEFENSE, 3)
    builder.add_register(C_CLOCK, 2)
    builder.add_register(C_B, 1)

    sec = hhl_sections(system, params, wires)
    guard, body = _cancel_seam(_part2_ops(part2, wires), sec.body)
    builder.extend(guard)
    builder.barrier()
    builder.extend(body)

    anc, new = wires[ANCILLA], wires[NEW_ANCILLA]
    builder.x(new)
    builder.cnot(anc, new)
    builder.measure(anc, C_ANCILLA, 0)
    builder.measure(new, C_ANCILLA, 1)
    builder.barrier()

    builder.extend(sec.uncompute)
    builder.barrier()
    builder.measure(wires[B], C_B, 0)
    builder.measure(wires[CLOCK0], C_CLOCK, 0)
    builder.measure(wires[CLOCK1], C_CLOCK, 1)
    return builder.build()


def split_readout(readout: str) -> dict[str, str]:
    """Split a defended-circuit readout ``aa bbb cc [b]`` into its registers."""
    s = readout.replace(" ", "")
    if len(s) not in (7, 8):
        raise DefenseError(f"expected 7 or 8 bits, got {len(s)}")
    out = {C_ANCILLA: s[0:2], C_B_DEFENSE: s[2:5], C_CLOCK: s[5:7]}
    if len(s) == 8:
        out[C_B] = s[7]
    return out


def detection_code(readout: str) -> str:
    """First seven bits of a defended readout (drops the b result)."""
    return readout.replace(" ", "")[:7]


def format_code(code: str) -> str:
    s = code.replace(" ", "")
    return f"{s[0:2]} {s[2:5]} {s[5:7]}"


# ---------------------------------------------------------------------------
# truth tables

def _row(**attacks: AttackKind) -> frozenset:
    return frozenset(attacks.items())


ANCILLA_OK = frozenset({"10", "01"})

# c_ancilla_defense expectations (HEA rows only; resets cure IIA).
TABLE_ANCILLA = {
    _row(): ANCILLA_OK,
    _row(ancilla=HEA): frozenset({"11"}),
    _row(new_ancilla=HEA): frozenset({"01", "11"}),
    _row(ancilla=HEA, new_ancilla=HEA): frozenset({"11"}),
}

TABLE_B = {
    _row(): "000",
    _row(b=HEA): "010",
    _row(b=IIA): "011",
    _row(ancilla=HEA): "001",
    _row(ancilla=IIA): "001",
    _row(new_ancilla=HEA): "110",
    _row(new_ancilla=IIA): "100",
    _row(ancilla=HEA, b=HEA): "011",
    _row(ancilla=IIA, b=IIA): "010",
    _row(ancilla=HEA, new_ancilla=HEA): "111",
    _row(ancilla=IIA, new_ancilla=IIA): "101",
    _row(new_ancilla=HEA, b=HEA): "110",
    _row(new_ancilla=IIA, b=IIA): "111",
    _row(ancilla=HEA, new_ancilla=HEA, b=HEA): "111",
    _row(ancilla=IIA, new_ancilla=IIA, b=IIA): "110",
}

TABLE_CLOCK = {
    _row(): "00",
    _row(clock0=HEA): "10",
    _row(clock0=IIA): "10",
    _row(clock1=HEA): "01",
    _row(clock1=IIA): "01",
    _row(clock0=HEA, clock1=HEA): "11",
    _row(clock0=IIA, clock1=IIA): "11",
}

TABLE_ROLES = {
    C_ANCILLA: frozenset({ANCILLA, NEW_ANCILLA}),
    C_B_DEFENSE: frozenset({ANCILLA, NEW_ANCILLA, B}),
    C_CLOCK: frozenset({CLOCK0, CLOCK1}),
}

def defense_truth_table(spec: Mapping[str, AttackKind | str] | None) -> dict[str, frozenset[str]]:
    """Expected register values for one table row.

    Returns a mapping register name -> set of admissible values covering
    every table the row appears in.  The empty spec is the no-attack row of
    all three tables.
    """
    row = frozenset(normalize_spec(spec).items())
    out: dict[str, frozenset[str]] = {}
    if row in TABLE_ANCILLA:
        out[C_ANCILLA] = TABLE_ANCILLA[row]
    if row in TABLE_B:
        out[C_B_DEFENSE] = frozenset({TABLE_B[row]})
    if row in TABLE_CLOCK:
        out[C_CLOCK] = frozenset({TABLE_CLOCK[row]})
    if not out:
        raise DefenseError(f"attack {dict(row)} is not covered by the defense tables")
    return out


@dataclass(frozen=True)
class TableRow:
    """One row of the defense tables, checked against a register's marginal.

    Rows with a single expected value need probability 1 on it.  Rows with
    several values only constrain the support; ``must_include`` additionally
    requires one value to occur.
    """

    table: str
    register: str
    title: str
    spec: Mapping[str, AttackKind]
    expected: frozenset[str]
    must_include: str | None = None

    @property
    def row_id(self) -> str:
        return f"{self.table}:{self.title}"

    def holds(self, marginal: Mapping[str, float], atol: float = 1e-9) -> bool:
        support = {k for k, p in marginal.items() if p > atol}
        if len(self.expected) == 1:
            (value,) = self.expected
            return abs(marginal.get(value, 0.0) - 1.0) <= atol
        if not support <= self.expected:
            return False
        return self.must_include is None or self.must_include in support


ROLE_ORDER = (ANCILLA, NEW_ANCILLA, CLOCK0, CLOCK1, B)


def _title(row: frozenset) -> str:
    if not row:
        return "No attack"
    by_kind: dict[AttackKind, list[str]] = {}
    for role, kind in sorted(row, key=lambda x: (ROLE_ORDER.index(x[0]), x[1].value)):
        by_kind.setdefault(kind, []).append(role.replace("_", " "))
    return "; ".join(f"{kind} on {' and '.join(roles)}" for kind, roles in by_kind.items())


def table_rows() -> list[TableRow]:
    """All 27 rows of the three tables (5 + 15 + 7)."""
    rows = [
        TableRow("ancilla", C_ANCILLA, "No attack, HHL converges", {}, ANCILLA_OK, "10"),
        TableRow("ancilla", C_ANCILLA, "No attack, HHL continues to update", {}, ANCILLA_OK, "01"),
    ]
    rows += [TableRow("ancilla", C_ANCILLA, _title(r), dict(r), v) for r, v in TABLE_ANCILLA.items() if r]
    rows += [TableRow("b", C_B_DEFENSE, _title(r), dict(r), frozenset({v})) for r, v in TABLE_B.items()]
    rows += [TableRow("clock", C_CLOCK, _title(r), dict(r), frozenset({v})) for r, v in TABLE_CLOCK.items()]
    return rows


# ---------------------------------------------------------------------------
# classification

class Verdict(str, Enum):
    NO_ATTACK_CONVERGED = "NoAttackConverged"
    NO_ATTACK_ITERATING = "NoAttackIterating"
    ATTACK_DETECTED = "AttackDetected"


@dataclass(frozen=True)
class Diagnosis:
    verdict: Verdict
    raw: str
    attribution: tuple[tuple[tuple[str, AttackKind], ...], ...] = field(default=())

    @property
    def attack(self) -> bool:
        return self.verdict is Verdict.ATTACK_DETECTED

    def candidates(self) -> list[dict[str, AttackKind]]:
        return [dict(c) for c in self.attribution]


def _consistent(row: frozenset, regs: Mapping[str, str], skip: str) -> bool:
    """Check ``row`` against the other registers, using only what the tables state.

    The ancilla table constrains c_ancilla_defense only for HEA on the ancillas, and a
    row that appears in the b table fixes c_b_defense.  Clock rows share no role
    with the other tables.
    """
    if skip != C_ANCILLA:
        hea = frozenset((r, k) for r, k in row if k is HEA and r in TABLE_ROLES[C_ANCILLA])
        if hea and regs[C_ANCILLA] not in TABLE_ANCILLA[hea]:
            return False
    if skip != C_B_DEFENSE and row in TABLE_B and regs[C_B_DEFENSE] != TABLE_B[row]:
        return False
    return True


def _matches(register: str, value: str) -> list[frozenset]:
    if register == C_ANCILLA:
        return [r for r, vals in TABLE_ANCILLA.items() if r and value in vals]
    table = TABLE_B if register == C_B_DEFENSE else TABLE_CLOCK
    return [r for r, v in table.items() if r and v == value]


_NO_ATTACK_VALUE = {C_ANCILLA: ANCILLA_OK, C_B_DEFENSE: {"000"}, C_CLOCK: {"00"}}


def _attribute(regs: Mapping[str, str]) -> list[frozenset]:
    found: list[frozenset] = []
    for reg in (C_ANCILLA, C_B_DEFENSE, C_CLOCK):
        rows = _matches(reg, regs[reg])
        kept = [r for r in rows if _consistent(r, regs, skip=reg)]
        if not kept and regs[reg] not in _NO_ATTACK_VALUE[reg]:
            # The register itself flags an attack; report every reading of
            # it rather than dropping it because another register disagrees.
            kept = rows
        for r in kept:
            if r not in found:
                found.append(r)
    return found


def _row_key(row: frozenset):
    return (len(row), sorted((r, k.value) for r, k in row))


def classify(raw: str) -> Diagnosis:
    """Decode a 7-bit detection code ``aa bbb cc`` (spaces optional)."""
    code = raw.replace(" ", "")
    if len(code) != 7 or set(code) - {"0", "1"}:
        raise DefenseError(f"detection code must be 7 binary digits, got {raw!r}")
    if code == CONVERGED:
        return Diagnosis(Verdict.NO_ATTACK_CONVERGED, code)
    if code == ITERATING:
        return Diagnosis(Verdict.NO_ATTACK_ITERATING, code)
    rows = sorted(_attribute(split_readout(code)), key=_row_key)
    attribution = tuple(tuple(sorted(r, key=lambda x: x[0])) for r in rows)
    return Diagnosis(Verdict.ATTACK_DETECTED, code, attribution)
