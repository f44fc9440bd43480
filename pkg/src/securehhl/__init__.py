"""Leakage-aware simulation of HHL under initialization attacks, with a detection circuit."""
from __future__ import annotations

from .attacks import AttackKind, apply_attacks, parse_attack
from .circuit import (
    Circuit, CircuitBuilder, CircuitError, ClassicalRegister, Operation, OpKind, WireSpec,
    append, inverted,
)
from .defense import (
    Diagnosis, TableRow, Verdict, build_secure_hhl, classify, defense_truth_table, table_rows,
)
from .engine import (
    NOISELESS, NoiseConfig, StateVector, apply_operation, exact_distribution, final_states,
    init_state, run_shot, sample_counts,
)
from .harness import ExperimentConfig, ExperimentResult, run_reproduction_suite, run_experiment
from .hhl import HhlParams, LinearSystem, build_hhl, eigendecompose, reference_solution
from .metrics import CountsHistogram, UndefinedRatio, marginal, solution_ratio, variational_distance
from .textformat import ParseError, dump_text, parse_text

__all__ = [
    "AttackKind", "apply_attacks", "parse_attack",
    "Circuit", "CircuitBuilder", "CircuitError", "ClassicalRegister", "Operation", "OpKind",
    "WireSpec", "append", "inverted",
    "Diagnosis", "TableRow", "Verdict", "build_secure_hhl", "classify", "defense_truth_table",
    "table_rows",
    "NOISELESS", "NoiseConfig", "StateVector", "apply_operation", "exact_distribution",
    "final_states", "init_state", "run_shot", "sample_counts",
    "ExperimentConfig", "ExperimentResult", "run_reproduction_suite", "run_experiment",
    "HhlParams", "LinearSystem", "build_hhl", "eigendecompose", "reference_solution",
    "CountsHistogram", "UndefinedRatio", "marginal", "solution_ratio", "variational_distance",
    "ParseError", "dump_text", "parse_text",
]
