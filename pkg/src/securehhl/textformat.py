"""Line-oriented text dump of a :class:`~securehhl.circuit.Circuit`.

Grammar, one statement per line::

    wire <id> levels=<2|3> label=<label>
    creg <name> width=<n>
    x <w> | h <w> | reset <w> | barrier
    ry <w> <angle>
    cphase <control> <target> <angle>
    cnot <control> <target>
    cu <control> <target> <re,im,re,im,...>     (16 entries of the 4x4 matrix)
    measure <w> -> <register>[<bit>]

Angles carry 10 decimals.  Controlled-unitary entries use the shortest
float repr so the payload survives a round trip exactly.  Blank lines and
lines starting with ``#`` are ignored by the parser.
"""
from __future__ import annotations

import re

import numpy as np

from .circuit import (
    Circuit,
    CircuitError,
    ClassicalRegister,
    Operation,
    OpKind,
    WireSpec,
    _check_op,
)


class ParseError(CircuitError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def _angle(theta: float) -> str:
    s = f"{theta:.10f}"
    return "0.0000000000" if s == "-0.0000000000" else s


def _num(v: float) -> str:
    v = float(v)
    return "0.0" if v == 0 else repr(v)


def dump_text(circuit: Circuit) -> str:
    lines = [f"wire {w.id} levels={w.levels} label={w.label}" for w in circuit.wires]
    lines += [f"creg {r.name} width={r.width}" for r in circuit.cregs]
    for op in circuit.ops:
        k = op.kind
        ws = " ".join(map(str, op.wires))
        if k in (OpKind.X, OpKind.H, OpKind.RESET, OpKind.CNOT):
            lines.append(f"{k.value} {ws}")
        elif k in (OpKind.RY, OpKind.CPHASE):
            lines.append(f"{k.value} {ws} {_angle(op.angle)}")
        elif k is OpKind.CU:
            entries = ",".join(f"{_num(z.real)},{_num(z.imag)}" for z in op.matrix.reshape(-1))
            lines.append(f"cu {ws} {entries}")
        elif k is OpKind.MEASURE:
            lines.append(f"measure {ws} -> {op.dest[0]}[{op.dest[1]}]")
        else:
            lines.append("barrier")
    return "\n".join(lines) + "\n"


_WIRE = re.compile(r"^wire (\d+) levels=(\d+) label=(\S+)$")
_CREG = re.compile(r"^creg (\S+) width=(\d+)$")
_MEASURE = re.compile(r"^measure (\d+) -> ([^\s\[\]]+)\[(\d+)\]$")


def _ints(tokens, lineno, count):
    if len(tokens) != count:
        raise ParseError(lineno, f"expected {count} wire id(s), got {len(tokens)}")
    try:
        return tuple(int(t) for t in tokens)
    except ValueError:
        raise ParseError(lineno, f"bad wire id in {tokens}") from None


def _float(token, lineno):
    try:
        return float(token)
    except ValueError:
        raise ParseError(lineno, f"bad number {token!r}") from None


def _parse_cu_payload(token, lineno):
    vals = [_float(t, lineno) for t in token.split(",")]
    if len(vals) != 32:
        raise ParseError(lineno, f"cu needs 16 re,im entries, got {len(vals) / 2:g}")
    m = (np.array(vals[0::2]) + 1j * np.array(vals[1::2])).reshape(4, 4)
    block = m.copy()
    block[2:, 2:] = 0
    if not np.allclose(block, np.diag([1, 1, 0, 0]), atol=1e-12):
        raise ParseError(lineno, "cu matrix is not of controlled form diag(I, U)")
    return m[2:, 2:]


def _parse_op(line: str, lineno: int) -> Operation:
    m = _MEASURE.match(line)
    if m:
        return Operation.measure(int(m.group(1)), m.group(2), int(m.group(3)))
    tokens = line.split()
    head, args = tokens[0], tokens[1:]
    try:
        kind = OpKind(head)
    except ValueError:
        raise ParseError(lineno, f"unknown statement {head!r}") from None
    if kind is OpKind.BARRIER:
        if args:
            raise ParseError(lineno, "barrier takes no arguments")
        return Operation.barrier()
    if kind in (OpKind.X, OpKind.H, OpKind.RESET):
        return Operation(kind, _ints(args, lineno, 1))
    if kind is OpKind.CNOT:
        return Operation(kind, _ints(args, lineno, 2))
    if kind is OpKind.RY:
        if len(args) != 2:
            raise ParseError(lineno, "ry expects <wire> <angle>")
        return Operation(kind, _ints(args[:1], lineno, 1), angle=_float(args[1], lineno))
    if kind is OpKind.CPHASE:
        if len(args) != 3:
            raise ParseError(lineno, "cphase expects <control> <target> <angle>")
        return Operation(kind, _ints(args[:2], lineno, 2), angle=_float(args[2], lineno))
    if kind is OpKind.CU:
        if len(args) != 3:
            raise ParseError(lineno, "cu expects <control> <target> <entries>")
        return Operation.cu(_parse_cu_payload(args[2], lineno), *_ints(args[:2], lineno, 2))
    raise ParseError(lineno, f"malformed {head} statement")


def parse_text(text: str) -> Circuit:
    wires: list[WireSpec] = []
    cregs: list[ClassicalRegister] = []
    ops: list[Operation] = []
    written: set = set()
    shell = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            if line.startswith("wire "):
                m = _WIRE.match(line)
                if not m:
                    raise ParseError(lineno, f"malformed wire declaration {line!r}")
                if ops:
                    raise ParseError(lineno, "wire declared after operations")
                wid = int(m.group(1))
                if wid != len(wires):
                    raise ParseError(lineno, f"wire ids must be dense; expected {len(wires)}, got {wid}")
                wires.append(WireSpec(wid, int(m.group(2)), m.group(3)))
                continue
            if line.startswith("creg "):
                m = _CREG.match(line)
                if not m:
                    raise ParseError(lineno, f"malformed register declaration {line!r}")
                if ops:
                    raise ParseError(lineno, "register declared after operations")
                if any(r.name == m.group(1) for r in cregs):
                    raise ParseError(lineno, f"duplicate register {m.group(1)!r}")
                cregs.append(ClassicalRegister(m.group(1), int(m.group(2))))
                continue
            op = _parse_op(line, lineno)
            if shell is None:
                shell = Circuit(tuple(wires), tuple(cregs))
            _check_op(shell, op, written)
            ops.append(op)
        except ParseError:
            raise
        except CircuitError as exc:
            raise ParseError(lineno, str(exc)) from None
    return Circuit(tuple(wires), tuple(cregs), tuple(ops))
