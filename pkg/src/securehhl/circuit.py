"""Circuit intermediate representation.

A :class:`Circuit` is an immutable value: typed wires, named classical
registers and an ordered tuple of :class:`Operation`.  ``append`` returns a
new circuit; :class:`CircuitBuilder` is the mutable, single-threaded way to
assemble one op at a time.

Register bits are indexed left to right: bit 0 is the leftmost character
when the register is rendered.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

UNITARY_ATOL = 1e-10
# Angles are dumped with 10 decimals, so structural equality tolerates that.
PARAM_ATOL = 1e-9


class CircuitError(ValueError):
    """Raised for any structurally invalid circuit or operation."""


class OpKind(str, Enum):
    X = "x"
    H = "h"
    RY = "ry"
    CPHASE = "cphase"
    CNOT = "cnot"
    CU = "cu"
    MEASURE = "measure"
    RESET = "reset"
    BARRIER = "barrier"


ARITY = {
    OpKind.X: 1,
    OpKind.H: 1,
    OpKind.RY: 1,
    OpKind.CPHASE: 2,
    OpKind.CNOT: 2,
    OpKind.CU: 2,
    OpKind.MEASURE: 1,
    OpKind.RESET: 1,
    OpKind.BARRIER: 0,
}

GATE_KINDS = frozenset(
    {OpKind.X, OpKind.H, OpKind.RY, OpKind.CPHASE, OpKind.CNOT, OpKind.CU}
)


@dataclass(frozen=True)
class WireSpec:
    id: int
    levels: int = 3
    label: str = ""

    def __post_init__(self):
        if self.levels not in (2, 3):
            raise CircuitError(f"wire {self.id}: levels must be 2 or 3, got {self.levels}")
        if not self.label:
            object.__setattr__(self, "label", f"q{self.id}")


@dataclass(frozen=True)
class ClassicalRegister:
    name: str
    width: int

    def __post_init__(self):
        if self.width < 1:
            raise CircuitError(f"register {self.name!r}: width must be >= 1")
        if not self.name or any(ch.isspace() or ch in "[]" for ch in self.name):
            raise CircuitError(f"invalid register name {self.name!r}")

    def render(self, bits: Sequence[int]) -> str:
        return "".join("1" if b else "0" for b in bits)


def _close(a: complex | float, b: complex | float) -> bool:
    return abs(a - b) <= PARAM_ATOL


@dataclass(frozen=True, eq=False)
class Operation:
    """One gate, measurement, reset or barrier.

    ``wires`` lists controls before targets.  ``unitary`` holds the 2x2
    payload of a controlled unitary in row-major order; ``dest`` is the
    ``(register, bit)`` written by a measurement.
    """

    kind: OpKind
    wires: tuple[int, ...] = ()
    angle: float | None = None
    unitary: tuple[complex, ...] | None = None
    dest: tuple[str, int] | None = None

    def __post_init__(self):
        kind = OpKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "wires", tuple(int(w) for w in self.wires))
        if len(self.wires) != ARITY[kind]:
            raise CircuitError(
                f"{kind.value} expects {ARITY[kind]} wire(s), got {len(self.wires)}"
            )
        if len(set(self.wires)) != len(self.wires):
            raise CircuitError(f"{kind.value}: repeated wire in {self.wires}")
        if kind in (OpKind.RY, OpKind.CPHASE):
            if self.angle is None:
                raise CircuitError(f"{kind.value} requires an angle")
            object.__setattr__(self, "angle", float(self.angle))
        elif self.angle is not None:
            raise CircuitError(f"{kind.value} takes no angle")
        if kind is OpKind.CU:
            if self.unitary is None:
                raise CircuitError("cu requires a 2x2 unitary payload")
            u = np.asarray(self.unitary, dtype=complex).reshape(-1)
            if u.size != 4:
                raise CircuitError("cu payload must have 4 entries")
            m = u.reshape(2, 2)
            if not np.allclose(m @ m.conj().T, np.eye(2), atol=UNITARY_ATOL, rtol=0):
                raise CircuitError("cu payload is not unitary")
            object.__setattr__(self, "unitary", tuple(complex(v) for v in u))
        elif self.unitary is not None:
            raise CircuitError(f"{kind.value} takes no unitary payload")
        if kind is OpKind.MEASURE:
            if self.dest is None:
                raise CircuitError("measure requires exactly one (register, bit) destination")
            reg, bit = self.dest
            object.__setattr__(self, "dest", (str(reg), int(bit)))
        elif self.dest is not None:
            raise CircuitError(f"{kind.value} has no classical destination")

    # constructors
    @classmethod
    def x(cls, w: int) -> Operation:
        return cls(OpKind.X, (w,))

    @classmethod
    def h(cls, w: int) -> Operation:
        return cls(OpKind.H, (w,))

    @classmethod
    def ry(cls, theta: float, w: int) -> Operation:
        return cls(OpKind.RY, (w,), angle=theta)

    @classmethod
    def cphase(cls, theta: float, control: int, target: int) -> Operation:
        return cls(OpKind.CPHASE, (control, target), angle=theta)

    @classmethod
    def cnot(cls, control: int, target: int) -> Operation:
        return cls(OpKind.CNOT, (control, target))

    @classmethod
    def cu(cls, u, control: int, target: int) -> Operation:
        return cls(OpKind.CU, (control, target), unitary=tuple(np.asarray(u, dtype=complex).reshape(-1)))

    @classmethod
    def measure(cls, w: int, register: str, bit: int) -> Operation:
        return cls(OpKind.MEASURE, (w,), dest=(register, bit))

    @classmethod
    def reset(cls, w: int) -> Operation:
        return cls(OpKind.RESET, (w,))

    @classmethod
    def barrier(cls) -> Operation:
        return cls(OpKind.BARRIER)

    @property
    def is_gate(self) -> bool:
        return self.kind in GATE_KINDS

    @property
    def matrix(self) -> np.ndarray:
        """The gate's 2^k x 2^k matrix; the first wire is most significant."""
        k = self.kind
        if k is OpKind.X:
            return np.array([[0, 1], [1, 0]], dtype=complex)
        if k is OpKind.H:
            return np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
        if k is OpKind.RY:
            c, s = math.cos(self.angle / 2), math.sin(self.angle / 2)
            return np.array([[c, -s], [s, c]], dtype=complex)
        if k is OpKind.CPHASE:
            return np.diag([1, 1, 1, cmath.exp(1j * self.angle)])
        if k is OpKind.CNOT:
            return np.array(
                [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
            )
        if k is OpKind.CU:
            m = np.eye(4, dtype=complex)
            m[2:, 2:] = np.asarray(self.unitary).reshape(2, 2)
            return m
        raise CircuitError(f"{k.value} has no unitary matrix")

    def inverse(self) -> Operation:
        k = self.kind
        if k in (OpKind.X, OpKind.H, OpKind.CNOT, OpKind.BARRIER):
            return self
        if k in (OpKind.RY, OpKind.CPHASE):
            return replace(self, angle=-self.angle)
        if k is OpKind.CU:
            u = np.asarray(self.unitary).reshape(2, 2)
            return replace(self, unitary=tuple(u.conj().T.reshape(-1)))
        raise CircuitError(f"cannot invert non-unitary operation {k.value}")

    def __eq__(self, other):
        if not isinstance(other, Operation):
            return NotImplemented
        if (self.kind, self.wires, self.dest) != (other.kind, other.wires, other.dest):
            return False
        if (self.angle is None) != (other.angle is None):
            return False
        if self.angle is not None and not _close(self.angle, other.angle):
            return False
        if self.unitary is not None:
            return all(_close(a, b) for a, b in zip(self.unitary, other.unitary))
        return True

    def __hash__(self):
        return hash((self.kind, self.wires, self.dest))

    def __repr__(self):
        parts = [self.kind.value, *map(str, self.wires)]
        if self.angle is not None:
            parts.append(f"{self.angle:.6g}")
        if self.dest is not None:
            parts.append(f"-> {self.dest[0]}[{self.dest[1]}]")
        return f"Operation({' '.join(parts)})"


@dataclass(frozen=True)
class Circuit:
    wires: tuple[WireSpec, ...]
    cregs: tuple[ClassicalRegister, ...] = ()
    ops: tuple[Operation, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "wires", tuple(self.wires))
        object.__setattr__(self, "cregs", tuple(self.cregs))
        object.__setattr__(self, "ops", tuple(self.ops))
        for i, w in enumerate(self.wires):
            if w.id != i:
                raise CircuitError(f"wire ids must be dense 0..n-1; position {i} has id {w.id}")
        names = [r.name for r in self.cregs]
        if len(set(names)) != len(names):
            raise CircuitError(f"duplicate register names in {names}")
        written: set[tuple[str, int]] = set()
        for op in self.ops:
            _check_op(self, op, written)

    @property
    def num_wires(self) -> int:
        return len(self.wires)

    @property
    def radices(self) -> tuple[int, ...]:
        return tuple(w.levels for w in self.wires)

    def register(self, name: str) -> ClassicalRegister:
        for r in self.cregs:
            if r.name == name:
                return r
        raise CircuitError(f"unknown register {name!r}")

    def wire(self, label: str) -> int:
        """Id of the wire carrying ``label``."""
        for w in self.wires:
            if w.label == label:
                return w.id
        raise CircuitError(f"no wire labelled {label!r}")

    def labels(self) -> dict[str, int]:
        return {w.label: w.id for w in self.wires}

    @property
    def readout_width(self) -> int:
        return sum(r.width for r in self.cregs)

    def register_slices(self) -> dict[str, slice]:
        """Position of each register inside the concatenated readout string."""
        out, pos = {}, 0
        for r in self.cregs:
            out[r.name] = slice(pos, pos + r.width)
            pos += r.width
        return out

    def append(self, op: Operation) -> Circuit:
        return append(self, op)

    def with_ops(self, ops: Iterable[Operation]) -> Circuit:
        return Circuit(self.wires, self.cregs, tuple(ops))

    def __len__(self):
        return len(self.ops)


def _check_op(circuit: Circuit, op: Operation, written: set[tuple[str, int]]) -> None:
    n = len(circuit.wires)
    for w in op.wires:
        if not 0 <= w < n:
            raise CircuitError(f"{op.kind.value}: unknown wire id {w}")
    if op.kind is OpKind.MEASURE:
        reg, bit = op.dest
        r = circuit.register(reg)
        if not 0 <= bit < r.width:
            raise CircuitError(f"bit {bit} out of range for register {reg!r} (width {r.width})")
        if op.dest in written:
            raise CircuitError(f"duplicate measure destination {reg}[{bit}]")
        written.add(op.dest)


def append(circuit: Circuit, op: Operation) -> Circuit:
    """Return ``circuit`` with ``op`` appended; the input is left unchanged."""
    written = {o.dest for o in circuit.ops if o.dest is not None}
    _check_op(circuit, op, written)
    new = object.__new__(Circuit)
    object.__setattr__(new, "wires", circuit.wires)
    object.__setattr__(new, "cregs", circuit.cregs)
    object.__setattr__(new, "ops", circuit.ops + (op,))
    return new


def inverted(segment: Circuit | Sequence[Operation]) -> Circuit | tuple[Operation, ...]:
    """Reverse a measurement-free segment and invert each gate.

    Accepts either a :class:`Circuit` (returns a circuit over the same wires
    and registers) or a bare sequence of operations (returns a tuple).
    """
    ops = segment.ops if isinstance(segment, Circuit) else tuple(segment)
    for op in ops:
        if op.kind in (OpKind.MEASURE, OpKind.RESET):
            raise CircuitError(f"segment contains non-unitary operation {op.kind.value}")
    inv = tuple(op.inverse() for op in reversed(ops))
    if isinstance(segment, Circuit):
        return segment.with_ops(inv)
    return inv


@dataclass
class CircuitBuilder:
    """Mutable helper that validates each op as it is added."""

    wires: list[WireSpec] = field(default_factory=list)
    cregs: list[ClassicalRegister] = field(default_factory=list)
    ops: list[Operation] = field(default_factory=list)
    _written: set = field(default_factory=set, repr=False)

    def add_wire(self, label: str = "", levels: int = 3) -> int:
        wid = len(self.wires)
        self.wires.append(WireSpec(wid, levels, label))
        return wid

    def add_register(self, name: str, width: int) -> str:
        if any(r.name == name for r in self.cregs):
            raise CircuitError(f"duplicate register {name!r}")
        self.cregs.append(ClassicalRegister(name, width))
        return name

    def _shell(self) -> Circuit:
        return Circuit(tuple(self.wires), tuple(self.cregs))

    def add(self, op: Operation) -> CircuitBuilder:
        _check_op(self._shell(), op, self._written)
        self.ops.append(op)
        return self

    def extend(self, ops: Iterable[Operation]) -> CircuitBuilder:
        for op in ops:
            self.add(op)
        return self

    def x(self, w):
        return self.add(Operation.x(w))

    def h(self, w):
        return self.add(Operation.h(w))

    def ry(self, theta, w):
        return self.add(Operation.ry(theta, w))

    def cphase(self, theta, c, t):
        return self.add(Operation.cphase(theta, c, t))

    def cnot(self, c, t):
        return self.add(Operation.cnot(c, t))

    def cu(self, u, c, t):
        return self.add(Operation.cu(u, c, t))

    def measure(self, w, register, bit):
        return self.add(Operation.measure(w, register, bit))

    def reset(self, w):
        return self.add(Operation.reset(w))

    def barrier(self):
        return self.add(Operation.barrier())

    def build(self) -> Circuit:
        return Circuit(tuple(self.wires), tuple(self.cregs), tuple(self.ops))
