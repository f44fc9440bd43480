"""Four-wire HHL circuit for 2x2 Hermitian systems.

Wire order is fixed: ancilla (0), clock0 (1), clock1 (2), b (3).  The
Hamiltonian simulation is exact: ``exp(i A t)`` is formed from the closed
form eigendecomposition and embedded as a controlled unitary.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import Circuit, CircuitBuilder, Operation, inverted

ANCILLA, CLOCK0, CLOCK1, B = "ancilla", "clock0", "clock1", "b"
WIRE_LABELS = (ANCILLA, CLOCK0, CLOCK1, B)
RESULT_REGISTER = "c"

HERMITIAN_ATOL = 1e-12
REPRESENTABLE_ATOL = 1e-9


class HhlError(ValueError):
    pass


@dataclass(frozen=True)
class LinearSystem:
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=complex).reshape(2, 2)
        b = np.array(self.b, dtype=complex).reshape(2)
        if not np.allclose(A, A.conj().T, atol=HERMITIAN_ATOL, rtol=0):
            raise HhlError("A must be Hermitian")
        if abs(np.linalg.norm(b) - 1) > 1e-12:
            raise HhlError(f"b must have unit norm, got {np.linalg.norm(b):.3g}")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @classmethod
    def canonical(cls) -> LinearSystem:
        return cls(np.array([[0.75, 0.25], [0.25, 0.75]]), np.array([0.0, 1.0]))

    def __eq__(self, other):
        return (isinstance(other, LinearSystem)
                and np.array_equal(self.A, other.A) and np.array_equal(self.b, other.b))

    def __hash__(self):
        return hash((self.A.tobytes(), self.b.tobytes()))


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: tuple[float, float]
    eigenvectors: tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True)
class HhlParams:
    n_clock: int = 2
    t: float = math.pi
    C: float = 1.0
    levels: int = 3  # radix used for every wire

    def __post_init__(self):
        if self.n_clock != 2:
            raise HhlError("only the two-clock-qubit layout is supported")
        if self.levels not in (2, 3):
            raise HhlError("levels must be 2 or 3")


def _unit_phase(v: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v)
    lead = v[0] if abs(v[0]) > 1e-12 else v[1]
    return v * (abs(lead) / lead)


def eigendecompose(A) -> EigenDecomposition:
    """Closed-form eigendecomposition of a 2x2 Hermitian matrix.

    Eigenvalues are returned in ascending order; a degenerate spectrum gets
    the standard basis.
    """
    A = np.asarray(A, dtype=complex)
    if A.shape != (2, 2) or not np.allclose(A, A.conj().T, atol=HERMITIAN_ATOL, rtol=0):
        raise HhlError("eigendecompose needs a 2x2 Hermitian matrix")
    a, d, c = A[0, 0].real, A[1, 1].real, A[0, 1]
    mean = (a + d) / 2
    radius = math.hypot((a - d) / 2, abs(c))
    lo, hi = mean - radius, mean + radius
    if radius < 1e-14:
        e0, e1 = np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)
    elif abs(c) < 1e-14:
        e0, e1 = (np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)) if a <= d else \
                 (np.array([0, 1], dtype=complex), np.array([1, 0], dtype=complex))
    else:
        # (A - lam I) v = 0 is solved by v = (c, lam - a)
        e0 = _unit_phase(np.array([c, lo - a], dtype=complex))
        e1 = _unit_phase(np.array([c, hi - a], dtype=complex))
    return EigenDecomposition((lo, hi), (e0, e1))


def evolution_unitary(decomp: EigenDecomposition, t: float, power: int = 1) -> np.ndarray:
    """``sum_i exp(i * lam_i * t * power) |u_i><u_i|``."""
    U = np.zeros((2, 2), dtype=complex)
    for lam, u in zip(decomp.eigenvalues, decomp.eigenvectors):
        U += cmath.exp(1j * lam * t * power) * np.outer(u, u.conj())
    return U


def scaled_eigenvalues(system: LinearSystem, params: HhlParams) -> tuple[int, ...]:
    """Integer clock encodings of the eigenvalues; raises if not exact."""
    decomp = eigendecompose(system.A)
    scale = params.t * 2**params.n_clock / (2 * math.pi)
    out = []
    for lam in decomp.eigenvalues:
        v = lam * scale
        k = round(v)
        if abs(v - k) > REPRESENTABLE_ATOL or not 1 <= k <= 2**params.n_clock - 1:
            raise HhlError(
                f"eigenvalue {lam:.6g} scales to {v:.6g}; need an integer in [1, {2**params.n_clock - 1}]"
            )
        out.append(k)
    return tuple(out)


def ry_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


# Clock wire carrying binary weight 2**j after the inverse QFT, indexed by
# label.  clock0 controls the first power of U, clock1 the second.
CLOCK_POWER = {CLOCK0: 0, CLOCK1: 1}


def state_prep_ops(b: np.ndarray, b_wire: int, ancilla_wire: int) -> list[Operation]:
    b0, b1 = complex(b[0]), complex(b[1])
    if abs(b0) < 1e-12:
        return [Operation.x(b_wire)]
    if abs(b1) < 1e-12:
        return []
    ops = [Operation.ry(2 * math.atan2(abs(b1), abs(b0)), b_wire)]
    phase = cmath.phase(b1) - cmath.phase(b0)
    if abs(cmath.exp(1j * phase) - 1) > 1e-12:
        # relative phase on |b=1>: a controlled global phase on the idle ancilla
        ops.append(Operation.cu(cmath.exp(1j * phase) * np.eye(2), b_wire, ancilla_wire))
    return ops


def qpe_ops(system: LinearSystem, params: HhlParams, wires: dict[str, int]) -> list[Operation]:
    decomp = eigendecompose(system.A)
    clocks = sorted(CLOCK_POWER, key=CLOCK_POWER.get)
    ops = [Operation.h(wires[c]) for c in clocks]
    for c in clocks:
        U = evolution_unitary(decomp, params.t, 2 ** CLOCK_POWER[c])
        ops.append(Operation.cu(U, wires[c], wires[B]))
    return ops


def iqft_ops(params: HhlParams, wires: dict[str, int]) -> list[Operation]:
    """Inverse QFT without swaps, produced by inverting the forward network.

    With clock ``j`` controlling ``U**(2**j)``, the swap-free inverse QFT
    leaves clock ``j`` holding bit ``n-1-j`` of the eigenvalue encoding.
    """
    n = params.n_clock
    by_power = sorted(CLOCK_POWER, key=CLOCK_POWER.get)
    q = [wires[c] for c in by_power]
    qft = []
    for j in range(n):
        qft.append(Operation.h(q[j]))
        for k in range(j + 1, n):
            qft.append(Operation.cphase(math.pi / 2 ** (k - j), q[k], q[j]))
    return list(inverted(qft))


def encoding_bit_wire(weight_bit: int, params: HhlParams, wires: dict[str, int]) -> int:
    """Clock wire that holds bit ``weight_bit`` of the eigenvalue after the IQFT."""
    n = params.n_clock
    for label, power in CLOCK_POWER.items():
        if n - 1 - power == weight_bit:
            return wires[label]
    raise HhlError(f"no clock holds bit {weight_bit}")


def rotation_ops(params: HhlParams, wires: dict[str, int]) -> list[Operation]:
    ops = []
    for bit in range(params.n_clock):
        ratio = params.C / 2**bit
        if ratio > 1:
            raise HhlError(f"C={params.C} too large for eigenvalue weight {2**bit}")
        theta = 2 * math.asin(ratio)
        ops.append(Operation.cu(ry_matrix(theta), encoding_bit_wire(bit, params, wires), wires[ANCILLA]))
    return ops


@dataclass
class HhlSections:
    """Operation lists of each HHL phase; reused by the defended builder."""

    prep: list[Operation]
    qpe: list[Operation]
    iqft: list[Operation]
    rotation: list[Operation]
    uncompute: list[Operation] = field(default_factory=list)

    @property
    def body(self) -> list[Operation]:
        return [*self.prep, Operation.barrier(), *self.qpe, Operation.barrier(), *self.iqft,
                Operation.barrier(), *self.rotation, Operation.barrier()]


def hhl_sections(system: LinearSystem, params: HhlParams, wires: dict[str, int]) -> HhlSections:
    scaled_eigenvalues(system, params)
    prep = state_prep_ops(system.b, wires[B], wires[ANCILLA])
    qpe = qpe_ops(system, params, wires)
    iqft = iqft_ops(params, wires)
    rot = rotation_ops(params, wires)
    return HhlSections(prep, qpe, iqft, rot, list(inverted(qpe + iqft)))


def build_hhl(system: LinearSystem, params: HhlParams = HhlParams(),
              include_measurements: bool = True) -> Circuit:
    """Build the HHL circuit.

    When ``include_measurements`` is set, ancilla and b are measured into a
    2-bit register ``c`` rendered b first, ancilla second.
    """
    builder = CircuitBuilder()
    wires = {label: builder.add_wire(label, params.levels) for label in WIRE_LABELS}
    sec = hhl_sections(system, params, wires)
    builder.extend(sec.body)
    builder.extend(sec.uncompute)
    if include_measurements:
        builder.add_register(RESULT_REGISTER, 2)
        builder.barrier()
        builder.measure(wires[B], RESULT_REGISTER, 0)
        builder.measure(wires[ANCILLA], RESULT_REGISTER, 1)
    return builder.build()


def reference_solution(system: LinearSystem) -> tuple[np.ndarray, float]:
    """Classical ``x = A^-1 b`` and the ratio ``|x0|^2 / |x1|^2``."""
    A, b = system.A, system.b
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    if abs(det) < 1e-12:
        raise HhlError("A is singular")
    inv = np.array([[A[1, 1], -A[0, 1]], [-A[1, 0], A[0, 0]]]) / det
    x = inv @ b
    p1 = abs(x[1]) ** 2
    ratio = math.inf if p1 == 0 else abs(x[0]) ** 2 / p1
    return x, ratio
