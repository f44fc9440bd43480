from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from securehhl.attacks import apply_attacks
from securehhl.circuit import CircuitBuilder, Operation, OpKind
from securehhl.defense import build_secure_hhl
from securehhl.engine import (
    NOISELESS, NoiseConfig, SimulationError, StateVector, apply_operation, exact_distribution,
    final_states, init_state, measure, normalize_counts, reset, run_shot, sample_counts,
)
from securehhl.hhl import LinearSystem, build_hhl
from securehhl.metrics import variational_distance

from test_circuit import gate_ops

SYSTEM = LinearSystem.canonical()


def wires(*levels):
    b = CircuitBuilder()
    for lv in levels:
        b.add_wire(levels=lv)
    return b


def state_from(levels_to_amp, radices):
    sv = StateVector(np.zeros(math.prod(radices), dtype=complex), radices)
    for lv, a in levels_to_amp.items():
        sv.amplitudes[sv.index_of(lv)] = a
    return sv


# ---------------------------------------------------------------------------
# reference: loop-based qubit simulator, independent of the engine's gather tables

def ref_apply(amps, n, op):
    k = len(op.wires)
    m = op.matrix
    out = np.zeros_like(amps)
    for j in range(2**n):
        bits = [(j >> w) & 1 for w in range(n)]
        col = sum(bits[w] << (k - 1 - i) for i, w in enumerate(op.wires))
        for row in range(2**k):
            nb = list(bits)
            for i, w in enumerate(op.wires):
                nb[w] = (row >> (k - 1 - i)) & 1
            out[sum(b << w for w, b in enumerate(nb))] += m[row, col] * amps[j]
    return out


class TestInit:
    def test_ground(self):
        sv = init_state(wires(2, 2).build().wires, (0, 0))
        assert sv.amplitudes[0] == 1 and sv.norm() == 1

    def test_level_two(self):
        sv = init_state(wires(3).build().wires, (2,))
        assert sv.amplitudes[2] == 1

    def test_level_two_on_qubit(self):
        with pytest.raises(ValueError):
            init_state(wires(2).build().wires, (2,))

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            init_state(wires(2, 2).build().wires, (0,))

    def test_wire0_least_significant(self):
        sv = init_state(wires(3, 2).build().wires, (1, 1))
        assert sv.amplitudes[1 + 3] == 1


class TestGates:
    def test_x_on_level_two_is_identity(self):
        sv = init_state(wires(3).build().wires, (2,))
        assert np.array_equal(apply_operation(sv, Operation.x(0)).amplitudes, sv.amplitudes)

    def test_cnot_control_at_level_two(self):
        sv = init_state(wires(3, 3).build().wires, (2, 0))
        out = apply_operation(sv, Operation.cnot(0, 1))
        assert np.array_equal(out.amplitudes, sv.amplitudes)

    def test_cnot_target_at_level_two(self):
        sv = init_state(wires(3, 3).build().wires, (1, 2))
        out = apply_operation(sv, Operation.cnot(0, 1))
        assert np.array_equal(out.amplitudes, sv.amplitudes)

    def test_cnot_flips_in_subspace(self):
        sv = init_state(wires(3, 3).build().wires, (1, 0))
        out = apply_operation(sv, Operation.cnot(0, 1))
        assert out.amplitudes[out.index_of((1, 1))] == pytest.approx(1)

    def test_h_on_zero(self):
        sv = init_state(wires(3).build().wires)
        out = apply_operation(sv, Operation.h(0))
        assert np.allclose(out.amplitudes, [1 / math.sqrt(2), 1 / math.sqrt(2), 0], atol=1e-12)
        assert abs(out.norm() - 1) < 1e-12

    def test_input_not_mutated(self):
        sv = init_state(wires(2).build().wires)
        apply_operation(sv, Operation.x(0))
        assert sv.amplitudes[0] == 1

    def test_rejects_measure(self):
        sv = init_state(wires(2).build().wires)
        with pytest.raises(SimulationError):
            apply_operation(sv, Operation.measure(0, "c", 0))

    def test_leaked_branch_untouched_in_superposition(self):
        # (|0> + |2>)/sqrt2: X must move only the |0> half
        sv = state_from({(0,): 1 / math.sqrt(2), (2,): 1 / math.sqrt(2)}, (3,))
        out = apply_operation(sv, Operation.x(0))
        assert np.allclose(out.amplitudes, [0, 1 / math.sqrt(2), 1 / math.sqrt(2)])


@settings(max_examples=80, deadline=None)
@given(st.lists(gate_ops(3), min_size=1, max_size=8), st.integers(0, 2**31 - 1),
       st.lists(st.sampled_from([2, 3]), min_size=3, max_size=3))
def test_prop_embedding_matches_qubit_reference(seg, seed, levels):
    rng = np.random.default_rng(seed)
    q = rng.normal(size=8) + 1j * rng.normal(size=8)
    q /= np.linalg.norm(q)
    radices = tuple(levels)
    sv = StateVector(np.zeros(math.prod(radices), dtype=complex), radices)
    for j in range(8):
        sv.amplitudes[sv.index_of([(j >> w) & 1 for w in range(3)])] = q[j]
    for op in seg:
        q = ref_apply(q, 3, op)
        sv = apply_operation(sv, op)
        assert abs(sv.norm() - 1) < 1e-9
    got = np.array([sv.amplitudes[sv.index_of([(j >> w) & 1 for w in range(3)])] for j in range(8)])
    assert np.max(np.abs(got - q)) < 1e-10


@settings(max_examples=60, deadline=None)
@given(st.lists(gate_ops(3), max_size=10), st.integers(0, 2**31 - 1))
def test_prop_unitarity_with_leakage(seg, seed):
    rng = np.random.default_rng(seed)
    amps = rng.normal(size=27) + 1j * rng.normal(size=27)
    sv = StateVector(amps / np.linalg.norm(amps), (3, 3, 3))
    for op in seg:
        sv = apply_operation(sv, op)
        assert abs(sv.norm() - 1) < 1e-9


class TestMeasure:
    def test_level_two_reads_one_and_stays(self):
        sv = init_state(wires(3).build().wires, (2,))
        post, bit = measure(sv, 0, np.random.default_rng(0))
        assert bit == 1 and post.amplitudes[2] == pytest.approx(1)

    def test_half_half(self):
        c = wires(2).h(0)
        c.add_register("c", 1)
        assert exact_distribution(c.measure(0, "c", 0).build()) == pytest.approx({"0": 0.5, "1": 0.5})

    def test_masses_with_leakage(self):
        sv = state_from({(0,): 0.5, (1,): 0.5, (2,): math.sqrt(0.5)}, (3,))
        assert sv.level_masses(0) == pytest.approx([0.25, 0.25, 0.5])
        rng = np.random.default_rng(7)
        ones, posts = 0, []
        for _ in range(4000):
            post, bit = measure(sv, 0, rng)
            ones += bit
            if bit:
                posts.append(post)
        assert ones / 4000 == pytest.approx(0.75, abs=0.03)
        # '1' keeps both elevated levels, renormalised
        assert posts[0].level_masses(0) == pytest.approx([0, 1 / 3, 2 / 3])

    def test_readout_flip(self):
        c = wires(2).x(0)
        c.add_register("c", 1)
        c = c.measure(0, "c", 0).build()
        assert run_shot(c, noise=NoiseConfig(p_readout=1.0)) == "0"
        assert run_shot(c, noise=NoiseConfig(p_readout=1.0, enabled=False)) == "1"


class TestReset:
    def test_one_to_zero(self):
        sv = init_state(wires(3).build().wires, (1,))
        assert reset(sv, 0, np.random.default_rng(0)).amplitudes[0] == pytest.approx(1)

    def test_level_two_survives(self):
        sv = init_state(wires(3).build().wires, (2,))
        assert reset(sv, 0, np.random.default_rng(0)).amplitudes[2] == pytest.approx(1)

    def test_entangled_partner_left_mixed(self):
        b = wires(3, 3).h(0).cnot(0, 1).reset(0)
        b.add_register("c", 2)
        c = b.measure(0, "c", 0).measure(1, "c", 1).build()
        assert exact_distribution(c) == pytest.approx({"00": 0.5, "01": 0.5})

    def test_reset_decoheres(self):
        # (|1> + |2>)/sqrt2 must end up in exactly one level, never a mix
        sv = state_from({(1,): 1 / math.sqrt(2), (2,): 1 / math.sqrt(2)}, (3,))
        outs = [reset(sv, 0, np.random.default_rng(s)) for s in range(200)]
        for o in outs:
            m = o.level_masses(0)
            assert sorted(np.round(m, 12)) == [0, 0, 1]
        assert {int(np.argmax(o.level_masses(0))) for o in outs} == {0, 2}


class TestRunShot:
    def test_x_measure(self):
        b = wires(2).x(0)
        b.add_register("c", 1)
        c = b.measure(0, "c", 0).build()
        assert {run_shot(c, seed=s) for s in range(20)} == {"1"}

    def test_bell(self):
        b = wires(2, 2).h(0).cnot(0, 1)
        b.add_register("c", 2)
        c = b.measure(0, "c", 0).measure(1, "c", 1).build()
        assert {run_shot(c, seed=s) for s in range(50)} == {"00", "11"}

    def test_unwritten_bits_read_zero(self):
        b = wires(2).x(0)
        b.add_register("c", 3)
        c = b.measure(0, "c", 1).build()
        assert run_shot(c) == "010"

    def test_defended_no_attack_codes(self):
        c = build_secure_hhl(SYSTEM)
        codes = {run_shot(c, seed=s)[:7] for s in range(200)}
        assert codes <= {"1000000", "0100000"}

    def test_seed_reproducible(self):
        c = build_secure_hhl(SYSTEM)
        noise = NoiseConfig(0.05, 0.05)
        assert [run_shot(c, seed=s, noise=noise) for s in range(30)] == \
               [run_shot(c, seed=s, noise=noise) for s in range(30)]


class TestExact:
    def test_h_measure(self):
        b = wires(2).h(0)
        b.add_register("c", 1)
        assert exact_distribution(b.measure(0, "c", 0).build()) == pytest.approx({"0": 0.5, "1": 0.5})

    def test_hhl_baseline(self):
        d = exact_distribution(build_hhl(SYSTEM))
        assert d == pytest.approx({"00": 3 / 16, "10": 3 / 16, "01": 1 / 16, "11": 9 / 16}, abs=1e-12)

    def test_hhl_ancilla_at_level_one(self):
        d = exact_distribution(build_hhl(SYSTEM), (1, 0, 0, 0))
        assert d == pytest.approx({"00": 1 / 16, "10": 9 / 16, "01": 3 / 16, "11": 3 / 16}, abs=1e-12)

    def test_cap(self):
        b = wires(2, 2, 2)
        b.add_register("c", 3)
        for w in range(3):
            b.h(w).measure(w, "c", w)
        with pytest.raises(SimulationError):
            exact_distribution(b.build(), max_leaves=4)

    @pytest.mark.parametrize("spec", [{}, {"b": "hea"}, {"clock0": "iia"}, {"ancilla": "hea", "b": "iia"}])
    def test_sums_to_one(self, spec):
        c, lv = apply_attacks(build_secure_hhl(SYSTEM), spec)
        assert abs(sum(exact_distribution(c, lv).values()) - 1) < 1e-9

    def test_final_states_normalised(self):
        for p, _, s in final_states(build_secure_hhl(SYSTEM)):
            assert p > 0 and abs(s.norm() - 1) < 1e-9


def _walk(circuit, levels, seed, check):
    """Step through every op on one random branch, calling ``check(state)`` after each."""
    rng = np.random.default_rng(seed)
    sv = init_state(circuit.wires, levels)
    for op in circuit.ops:
        if op.kind is OpKind.MEASURE:
            sv, _ = measure(sv, op.wires[0], rng)
        elif op.kind is OpKind.RESET:
            sv = reset(sv, op.wires[0], rng)
        elif op.kind is not OpKind.BARRIER:
            sv = apply_operation(sv, op)
        check(sv)


@pytest.mark.parametrize("seed", range(5))
def test_norm_drift_defended(seed):
    drift = []
    _walk(build_secure_hhl(SYSTEM), None, seed, lambda s: drift.append(abs(s.norm() - 1)))
    assert max(drift) < 1e-9


@pytest.mark.parametrize("role", ["ancilla", "clock0", "clock1", "b", "new_ancilla"])
def test_hea_absorption(role):
    c = build_secure_hhl(SYSTEM)
    c, levels = apply_attacks(c, {role: "hea"})
    w = c.wire(role)
    for seed in range(3):
        masses = []
        _walk(c, levels, seed, lambda s: masses.append(s.level_masses(w)[2]))
        assert min(masses) > 1 - 1e-12


@pytest.mark.parametrize("defended, role", [
    *((False, r) for r in ("ancilla", "clock0", "clock1", "b")),
    *((True, r) for r in ("ancilla", "clock0", "clock1", "b", "new_ancilla")),
])
def test_iia_equals_level_one_start(defended, role):
    c = build_secure_hhl(SYSTEM) if defended else build_hhl(SYSTEM)
    attacked, _ = apply_attacks(c, {role: "iia"})
    levels = [0] * c.num_wires
    levels[c.wire(role)] = 1
    a = exact_distribution(attacked)
    b = exact_distribution(c, levels)
    assert a.keys() == b.keys()
    assert max(abs(a[k] - b[k]) for k in a) <= 1e-12


class TestSampling:
    def test_defended_tv(self):
        c = build_secure_hhl(SYSTEM)
        counts = sample_counts(c, shots=10_000, seed=3)
        assert variational_distance(normalize_counts(counts), exact_distribution(c)) <= 0.03

    def test_attacked_tv(self):
        c, lv = apply_attacks(build_secure_hhl(SYSTEM), {"clock1": "iia"})
        counts = sample_counts(c, lv, shots=4000, seed=1)
        assert variational_distance(normalize_counts(counts), exact_distribution(c, lv)) <= 0.04

    def test_workers_do_not_change_result(self):
        c = build_hhl(SYSTEM)
        assert sample_counts(c, shots=60, seed=5, workers=2) == sample_counts(c, shots=60, seed=5)

    def test_seed_changes_result(self):
        c = build_hhl(SYSTEM)
        assert sample_counts(c, shots=300, seed=1) != sample_counts(c, shots=300, seed=2)

    def test_negative_shots(self):
        with pytest.raises(ValueError):
            sample_counts(build_hhl(SYSTEM), shots=-1)


class TestNoise:
    @pytest.mark.parametrize("bad", [-0.1, 1.5])
    def test_range(self, bad):
        with pytest.raises(ValueError):
            NoiseConfig(p_depol=bad)

    def test_inactive(self):
        assert not NOISELESS.active
        assert not NoiseConfig().active
        assert NoiseConfig(0.01).active

    def test_depolarizing_leaves_leakage(self):
        b = wires(3)
        b.add_register("c", 1)
        for _ in range(20):
            b.x(0)
        c = b.measure(0, "c", 0).build()
        counts = sample_counts(c, (2,), shots=200, seed=0, noise=NoiseConfig(p_depol=0.5))
        assert counts == {"1": 200}

    def test_depolarizing_rate(self):
        # 1 X gate, then measure; X or XZ flips the outcome: 2/3 of p
        b = wires(2).x(0)
        b.add_register("c", 1)
        c = b.measure(0, "c", 0).build()
        counts = sample_counts(c, shots=6000, seed=0, noise=NoiseConfig(p_depol=0.3))
        assert counts["0"] / 6000 == pytest.approx(0.2, abs=0.02)
