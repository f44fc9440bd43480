"""Mixed-radix statevector engine with leakage-aware semantics.

Every wire has 2 or 3 levels.  Amplitudes are indexed with wire 0 as the
least-significant digit.  Internally the amplitude vector is viewed as a
tensor of shape ``radices[::-1]`` so wire ``w`` lives on axis ``n - 1 - w``.

Leakage rules (level 2):

* a gate acts only on basis components where every touched wire is at
  level 0 or 1; any component with a touched wire at level 2 is left as is;
* measurement reports '1' for levels 1 and 2 and keeps both components;
* reset maps level 1 to level 0 and leaves level 2 alone.

Noise is trajectory based and therefore only available through
:func:`run_shot` / :func:`sample_counts`.
"""
from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .circuit import Circuit, Operation, OpKind, WireSpec

NORM_ATOL = 1e-9
# Branches lighter than this are numerical dust and are dropped.
BRANCH_EPS = 1e-14
MAX_LEAVES = 2**20

_PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
_PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_PAULI_XZ = _PAULI_X @ _PAULI_Z


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class NoiseConfig:
    p_depol: float = 0.0
    p_readout: float = 0.0
    enabled: bool = True

    def __post_init__(self):
        for name in ("p_depol", "p_readout"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")

    @property
    def active(self) -> bool:
        return self.enabled and (self.p_depol > 0 or self.p_readout > 0)


NOISELESS = NoiseConfig(enabled=False)


@dataclass
class StateVector:
    amplitudes: np.ndarray
    radices: tuple[int, ...]

    @property
    def num_wires(self) -> int:
        return len(self.radices)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.radices[::-1])

    def axis(self, wire: int) -> int:
        return self.num_wires - 1 - wire

    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def copy(self) -> StateVector:
        return StateVector(self.amplitudes.copy(), self.radices)

    def level_masses(self, wire: int) -> np.ndarray:
        """Probability mass of each level of ``wire``."""
        probs = np.abs(self.amplitudes) ** 2
        return np.array([probs[ix].sum() for ix in _level_index(self.radices, wire)])

    def index_of(self, levels: Sequence[int]) -> int:
        idx, stride = 0, 1
        for lv, r in zip(levels, self.radices):
            idx += lv * stride
            stride *= r
        return idx


def init_state(wires: Sequence[WireSpec], initial_levels: Sequence[int] | None = None) -> StateVector:
    radices = tuple(w.levels for w in wires)
    levels = tuple(initial_levels) if initial_levels is not None else (0,) * len(radices)
    if len(levels) != len(radices):
        raise ValueError(f"expected {len(radices)} initial levels, got {len(levels)}")
    for w, lv in zip(wires, levels):
        if not 0 <= lv < w.levels:
            raise ValueError(f"wire {w.id} has {w.levels} levels; cannot start at level {lv}")
    amps = np.zeros(math.prod(radices), dtype=complex)
    state = StateVector(amps, radices)
    amps[state.index_of(levels)] = 1.0
    return state


@lru_cache(maxsize=None)
def _digits(radices: tuple[int, ...]) -> np.ndarray:
    """``(size, n)`` array with the level of every wire for each flat index."""
    idx = np.arange(math.prod(radices))
    out = np.empty((idx.size, len(radices)), dtype=np.int64)
    for w, r in enumerate(radices):
        out[:, w] = idx % r
        idx = idx // r
    return out


@lru_cache(maxsize=None)
def _level_index(radices: tuple[int, ...], wire: int) -> tuple[np.ndarray, ...]:
    """Flat indices at which ``wire`` sits on each level."""
    col = _digits(radices)[:, wire]
    return tuple(np.flatnonzero(col == lv) for lv in range(radices[wire]))


@lru_cache(maxsize=None)
def _gate_index(radices: tuple[int, ...], wires: tuple[int, ...]) -> np.ndarray:
    """``(2**k, m)`` gather table for a gate on ``wires``.

    Row ``r`` lists the flat indices whose touched digits spell ``r`` (first
    wire most significant); columns enumerate the untouched digits.
    """
    digits = _digits(radices)
    strides = np.cumprod((1,) + radices[:-1])
    base = np.flatnonzero((digits[:, list(wires)] == 0).all(axis=1)) if wires else np.arange(len(digits))
    k = len(wires)
    rows = []
    for r in range(2**k):
        off = sum(((r >> (k - 1 - j)) & 1) * int(strides[w]) for j, w in enumerate(wires))
        rows.append(base + off)
    return np.stack(rows)


def _apply_matrix_inplace(amps: np.ndarray, radices: tuple[int, ...],
                          wires: Sequence[int], mat: np.ndarray) -> None:
    # Only the {0,1} block of the touched wires is rotated; level-2 entries
    # are never gathered and so stay put.
    ix = _gate_index(radices, tuple(wires))
    amps[ix] = mat @ amps[ix]


def apply_operation(state: StateVector, op: Operation) -> StateVector:
    """Apply a gate and return the new state; the input is not modified."""
    if not op.is_gate:
        if op.kind is OpKind.BARRIER:
            return state.copy()
        raise SimulationError(f"apply_operation handles gates only, got {op.kind.value}")
    out = state.copy()
    _apply_matrix_inplace(out.amplitudes, out.radices, op.wires, op.matrix)
    return out


def _project(state: StateVector, wire: int, levels: Sequence[int]) -> tuple[float, StateVector]:
    """Project ``wire`` onto ``levels``; returns (probability, renormalized state)."""
    by_level = _level_index(state.radices, wire)
    out = state.copy()
    p = 0.0
    for lv, ix in enumerate(by_level):
        if lv in levels:
            p += float(np.vdot(out.amplitudes[ix], out.amplitudes[ix]).real)
        else:
            out.amplitudes[ix] = 0
    if p > 0:
        out.amplitudes /= math.sqrt(p)
    return p, out


def _shift_level(state: StateVector, wire: int, src: int, dst: int) -> StateVector:
    """Move the ``src`` slice of ``wire`` onto ``dst`` (``dst`` must be empty)."""
    out = state.copy()
    by_level = _level_index(state.radices, wire)
    out.amplitudes[by_level[dst]] = out.amplitudes[by_level[src]]
    out.amplitudes[by_level[src]] = 0
    return out


def _outcome_levels(bit: int, radix: int) -> tuple[int, ...]:
    return (0,) if bit == 0 else tuple(range(1, radix))


def measure(state: StateVector, wire: int, rng: np.random.Generator,
            p_readout: float = 0.0) -> tuple[StateVector, int]:
    """Sample a measurement of ``wire``.

    Returns the post-measurement state and the recorded bit (after an
    optional readout flip).  Levels 1 and 2 both read as 1 and stay
    distinct in the post-measurement state.
    """
    masses = state.level_masses(wire)
    p1 = float(masses[1:].sum())
    bit = 1 if rng.random() < p1 else 0
    _, post = _project(state, wire, _outcome_levels(bit, state.radices[wire]))
    if p_readout > 0 and rng.random() < p_readout:
        bit ^= 1
    return post, bit


def reset(state: StateVector, wire: int, rng: np.random.Generator) -> StateVector:
    """Measure ``wire`` level by level, then send level 1 to level 0."""
    masses = state.level_masses(wire)
    level = int(rng.choice(len(masses), p=masses / masses.sum()))
    _, post = _project(state, wire, (level,))
    return _shift_level(post, wire, 1, 0) if level == 1 else post


def _depolarize(state: StateVector, wire: int, p: float, rng: np.random.Generator) -> None:
    r = rng.random()
    if r >= p:
        return
    pauli = (_PAULI_X, _PAULI_Z, _PAULI_XZ)[min(int(3 * r / p), 2)]
    _apply_matrix_inplace(state.amplitudes, state.radices, (wire,), pauli)


@dataclass
class ClassicalState:
    bits: dict[str, list[int]]

    @classmethod
    def for_circuit(cls, circuit: Circuit) -> ClassicalState:
        return cls({r.name: [0] * r.width for r in circuit.cregs})

    def write(self, register: str, bit: int, value: int) -> None:
        self.bits[register][bit] = value

    def readout(self, circuit: Circuit) -> str:
        return "".join(r.render(self.bits[r.name]) for r in circuit.cregs)


@dataclass
class _Compiled:
    kind: OpKind
    wires: tuple[int, ...]
    index: np.ndarray | None  # gather table for gates
    matrix: np.ndarray | None
    dest: tuple[str, int] | None


def _compile(circuit: Circuit) -> list[_Compiled]:
    radices = circuit.radices
    out = []
    for op in circuit.ops:
        if op.kind is OpKind.BARRIER:
            continue
        if op.is_gate:
            out.append(_Compiled(op.kind, op.wires, _gate_index(radices, op.wires), op.matrix, None))
        else:
            out.append(_Compiled(op.kind, op.wires, None, None, op.dest))
    return out


def _run(circuit: Circuit, program: list[_Compiled], initial_levels, rng, noise: NoiseConfig) -> str:
    state = init_state(circuit.wires, initial_levels)
    cls = ClassicalState.for_circuit(circuit)
    p_depol = noise.p_depol if noise.enabled else 0.0
    p_read = noise.p_readout if noise.enabled else 0.0
    for step in program:
        if step.matrix is not None:
            amps = state.amplitudes
            amps[step.index] = step.matrix @ amps[step.index]
            if p_depol:
                for w in step.wires:
                    _depolarize(state, w, p_depol, rng)
        elif step.kind is OpKind.MEASURE:
            state, bit = measure(state, step.wires[0], rng, p_read)
            cls.write(*step.dest, bit)
        else:
            state = reset(state, step.wires[0], rng)
    return cls.readout(circuit)


def run_shot(circuit: Circuit, initial_levels: Sequence[int] | None = None,
             seed: int | Sequence[int] = 0, noise: NoiseConfig = NOISELESS) -> str:
    """Execute one shot and return the concatenated register readout."""
    rng = np.random.default_rng(seed)
    return _run(circuit, _compile(circuit), initial_levels, rng, noise)


def _shot_range(args) -> Counter:
    circuit, initial_levels, seed, noise, start, stop = args
    program = _compile(circuit)
    counts: Counter = Counter()
    for i in range(start, stop):
        rng = np.random.default_rng([seed, i])
        counts[_run(circuit, program, initial_levels, rng, noise)] += 1
    return counts


def sample_counts(circuit: Circuit, initial_levels: Sequence[int] | None = None, shots: int = 1000,
                  seed: int = 0, noise: NoiseConfig = NOISELESS, workers: int = 1) -> Counter:
    """Histogram of ``shots`` independent executions.

    Shot ``i`` draws from an RNG seeded with ``(seed, i)``, so the result does
    not depend on ``workers``.
    """
    if shots < 0:
        raise ValueError("shots must be non-negative")
    if workers <= 1 or shots < 2 * workers:
        return _shot_range((circuit, initial_levels, seed, noise, 0, shots))
    bounds = np.linspace(0, shots, workers + 1).astype(int)
    jobs = [(circuit, initial_levels, seed, noise, int(a), int(b)) for a, b in zip(bounds, bounds[1:])]
    total: Counter = Counter()
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for part in pool.map(_shot_range, jobs):
            total.update(part)
    return total


def _branches(circuit: Circuit, initial_levels):
    """Depth-first walk of the measurement/reset branch tree.

    Yields ``(probability, classical state, final state)`` per leaf.
    """
    program = _compile(circuit)
    stack = [(0, 1.0, init_state(circuit.wires, initial_levels), ClassicalState.for_circuit(circuit))]
    while stack:
        pc, prob, state, cls = stack.pop()
        amps = state.amplitudes
        while pc < len(program) and program[pc].matrix is not None:
            ix = program[pc].index
            amps[ix] = program[pc].matrix @ amps[ix]
            pc += 1
        if pc == len(program):
            yield prob, cls, state
            continue
        step = program[pc]
        w = step.wires[0]
        radix = state.radices[w]
        if step.kind is OpKind.MEASURE:
            outcomes = [(bit, _outcome_levels(bit, radix)) for bit in (0, 1)]
        else:
            # reset decoheres the wire completely: one branch per level
            outcomes = [(lv, (lv,)) for lv in range(radix)]
        for value, levels in outcomes:
            p, post = _project(state, w, levels)
            if p * prob <= BRANCH_EPS:
                continue
            child = ClassicalState({k: list(v) for k, v in cls.bits.items()})
            if step.kind is OpKind.MEASURE:
                child.write(*step.dest, value)
            elif value == 1:
                post = _shift_level(post, w, 1, 0)
            stack.append((pc + 1, prob * p, post, child))


def exact_distribution(circuit: Circuit, initial_levels: Sequence[int] | None = None,
                       max_leaves: int = MAX_LEAVES) -> dict[str, float]:
    """Exact readout distribution by enumerating every measurement branch.

    Noise is not supported here; use :func:`sample_counts` for noisy runs.
    """
    dist: dict[str, float] = {}
    for leaves, (prob, cls, _) in enumerate(_branches(circuit, initial_levels), start=1):
        if leaves > max_leaves:
            raise SimulationError(f"branch count exceeded cap of {max_leaves} leaves")
        key = cls.readout(circuit)
        dist[key] = dist.get(key, 0.0) + prob
    return dict(sorted(dist.items()))


def final_states(circuit: Circuit, initial_levels: Sequence[int] | None = None
                 ) -> list[tuple[float, str, StateVector]]:
    """Leaf branches ``(probability, readout, state)`` of the exact branch tree."""
    return [(p, cls.readout(circuit), s) for p, cls, s in _branches(circuit, initial_levels)]


def normalize_counts(counts: Mapping[str, int]) -> dict[str, float]:
    total = sum(counts.values())
    if total <= 0:
        raise ValueError("empty histogram")
    return {k: v / total for k, v in sorted(counts.items())}
