"""Improper-initialization (IIA) and higher-energy (HEA) fault models.

Attacks are addressed by wire label.  IIA prepends an ``X`` on the victim
wire; HEA starts the victim at level 2 (the pulse that would get it there
is not modelled, only its end state).
"""
from __future__ import annotations

from enum import Enum
from typing import Mapping

from .circuit import Circuit, CircuitError, Operation


class AttackKind(str, Enum):
    IIA = "iia"
    HEA = "hea"

    def __str__(self):
        return self.value.upper()


KNOWN_ROLES = ("ancilla", "clock0", "clock1", "b", "new_ancilla")

AttackSpec = Mapping[str, AttackKind]


def normalize_spec(spec: Mapping[str, AttackKind | str] | None) -> dict[str, AttackKind]:
    """Coerce kind strings (``"iia"``/``"HEA"``) and return a sorted plain dict."""
    out = {}
    for role, kind in (spec or {}).items():
        out[str(role)] = kind if isinstance(kind, AttackKind) else AttackKind(str(kind).lower())
    return dict(sorted(out.items()))


def parse_attack(text: str) -> tuple[str, AttackKind]:
    """Parse ``role=kind`` as used on the command line."""
    role, sep, kind = text.partition("=")
    if not sep or not role:
        raise ValueError(f"attack must look like role=iia|hea, got {text!r}")
    try:
        return role.strip(), AttackKind(kind.strip().lower())
    except ValueError:
        raise ValueError(f"unknown attack kind {kind!r}; use iia or hea") from None


def apply_attacks(circuit: Circuit, spec: Mapping[str, AttackKind | str] | None
                  ) -> tuple[Circuit, tuple[int, ...]]:
    """Return the attacked circuit and the per-wire initial levels."""
    spec = normalize_spec(spec)
    labels = circuit.labels()
    levels = [0] * circuit.num_wires
    prefix = []
    for role, kind in spec.items():
        if role not in labels:
            raise CircuitError(f"attack targets unknown wire label {role!r}")
        wid = labels[role]
        if kind is AttackKind.IIA:
            prefix.append(Operation.x(wid))
        else:
            if circuit.wires[wid].levels < 3:
                raise CircuitError(f"HEA on {role!r} needs a 3-level wire")
            levels[wid] = 2
    if not prefix:
        return circuit, tuple(levels)
    return circuit.with_ops((*prefix, *circuit.ops)), tuple(levels)


def describe(spec: Mapping[str, AttackKind | str] | None) -> str:
    spec = normalize_spec(spec)
    if not spec:
        return "no attack"
    return ", ".join(f"{kind} on {role}" for role, kind in spec.items())
