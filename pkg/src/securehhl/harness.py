"""Experiment runner: config ingestion, seeded execution and report emission.

A config is a flat ``key = value`` file.  Complex numbers are written as
``re,im`` (a bare real is accepted too); ``t`` also accepts ``pi`` and
``pi/<k>``.  Recognised keys::

    A00 A01 A10 A11 b0 b1 n_clock t C shots seed mode defended
    attack noise_depol noise_readout out name

``attack`` may repeat or hold a comma separated list of ``role=kind``.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import re
import time
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .attacks import AttackKind, apply_attacks, normalize_spec, parse_attack
from .circuit import Circuit
from .defense import (
    C_ANCILLA, C_B, C_B_DEFENSE, C_CLOCK, NEW_ANCILLA, NO_ATTACK_CODES, PART2,
    build_secure_hhl, classify, defense_truth_table, detection_code, split_readout, table_rows,
)
from .engine import NoiseConfig, exact_distribution, normalize_counts, sample_counts
from .hhl import WIRE_LABELS, HhlParams, LinearSystem, build_hhl, scaled_eigenvalues
from .metrics import UndefinedRatio, format_ratio, marginal, solution_ratio, variational_distance

MODES = ("exact", "sampled")
DEFAULT_SHOTS = 1000

# (b, ancilla) positions inside each readout layout
UNDEFENDED_BA = (0, 1)
DEFENDED_BA = (7, 0)


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class ExperimentConfig:
    A: tuple[complex, ...] = (0.75, 0.25, 0.25, 0.75)
    b: tuple[complex, ...] = (0.0, 1.0)
    n_clock: int = 2
    t: float = math.pi
    C: float = 1.0
    shots: int = DEFAULT_SHOTS
    seed: int = 0
    attacks: Mapping[str, AttackKind] = field(default_factory=dict)
    defended: bool = False
    p_depol: float = 0.0
    p_readout: float = 0.0
    mode: str = "exact"
    out: str | None = None
    name: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "A", tuple(complex(z) for z in self.A))
        object.__setattr__(self, "b", tuple(complex(z) for z in self.b))
        object.__setattr__(self, "attacks", normalize_spec(self.attacks))

    @property
    def system(self) -> LinearSystem:
        return LinearSystem(np.array(self.A).reshape(2, 2), np.array(self.b))

    @property
    def params(self) -> HhlParams:
        return HhlParams(n_clock=self.n_clock, t=self.t, C=self.C)

    @property
    def noise(self) -> NoiseConfig:
        return NoiseConfig(self.p_depol, self.p_readout)

    @property
    def experiment_id(self) -> str:
        if self.name:
            return self.name
        kind = "defended" if self.defended else "undefended"
        attack = "-".join(f"{k.value}-{r}" for r, k in self.attacks.items()) or "no-attack"
        return f"{kind}-{attack}-{self.mode}"

    def validate(self) -> None:
        """Raise :class:`ConfigError` for anything the builders would reject."""
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "sampled" and self.shots <= 0:
            raise ConfigError("shots must be positive")
        roles = WIRE_LABELS + ((NEW_ANCILLA,) if self.defended else ())
        for role in self.attacks:
            if role not in roles:
                raise ConfigError(f"unknown attack target {role!r}; choose from {', '.join(roles)}")
        try:
            self.noise
            scaled_eigenvalues(self.system, self.params)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.mode == "exact" and self.noise.active:
            raise ConfigError("noise needs sampled mode")

    def to_json(self) -> dict[str, Any]:
        return {
            "A": [[z.real, z.imag] for z in self.A],
            "b": [[z.real, z.imag] for z in self.b],
            "n_clock": self.n_clock, "t": self.t, "C": self.C,
            "shots": self.shots, "seed": self.seed,
            "attacks": {r: k.value for r, k in self.attacks.items()},
            "defended": self.defended,
            "noise": {"p_depol": self.p_depol, "p_readout": self.p_readout},
            "mode": self.mode,
        }


def _complex(text: str) -> complex:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) == 1:
        return complex(float(parts[0]), 0.0)
    if len(parts) == 2:
        return complex(float(parts[0]), float(parts[1]))
    raise ValueError(f"expected 're,im', got {text!r}")


def _time(text: str) -> float:
    m = re.fullmatch(r"\s*pi\s*(?:/\s*([0-9.]+))?\s*", text)
    if m:
        return math.pi / float(m.group(1) or 1)
    return float(text)


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


_SCALAR_KEYS = {
    "n_clock": ("n_clock", int), "t": ("t", _time), "C": ("C", float),
    "shots": ("shots", int), "seed": ("seed", int), "mode": ("mode", str),
    "defended": ("defended", _bool), "noise_depol": ("p_depol", float),
    "noise_readout": ("p_readout", float), "out": ("out", str), "name": ("name", str),
}
_MATRIX_KEYS = ("A00", "A01", "A10", "A11")
_VECTOR_KEYS = ("b0", "b1")


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse the flat key/value format on top of ``base`` (defaults if omitted)."""
    cfg = base or ExperimentConfig()
    A, b = list(cfg.A), list(cfg.b)
    attacks = dict(cfg.attacks)
    updates: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not value:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        try:
            if key in _MATRIX_KEYS:
                A[_MATRIX_KEYS.index(key)] = _complex(value)
            elif key in _VECTOR_KEYS:
                b[_VECTOR_KEYS.index(key)] = _complex(value)
            elif key == "attack":
                for item in filter(None, (s.strip() for s in value.split(","))):
                    role, kind = parse_attack(item)
                    attacks[role] = kind
            elif key in _SCALAR_KEYS:
                attr, conv = _SCALAR_KEYS[key]
                updates[attr] = conv(value)
            else:
                raise ConfigError(f"unknown key {key!r}")
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    return replace(cfg, A=tuple(A), b=tuple(b), attacks=attacks, **updates)


def load_config(path: str | Path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    return parse_config(Path(path).read_text(), base)


# ---------------------------------------------------------------------------
# baseline cache

def baseline_key(system: LinearSystem, params: HhlParams) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(system.A, dtype=complex).tobytes())
    h.update(np.ascontiguousarray(system.b, dtype=complex).tobytes())
    h.update(repr((params.n_clock, params.t, params.C, params.levels)).encode())
    return h.hexdigest()[:16]


def no_attack_baseline(system: LinearSystem, params: HhlParams,
                       cache_dir: str | Path | None = None) -> dict[str, float]:
    """Exact undefended (b, ancilla) distribution, cached on disk when asked."""
    path = Path(cache_dir) / f"baseline-{baseline_key(system, params)}.json" if cache_dir else None
    if path is not None and path.exists():
        return json.loads(path.read_text())["distribution"]
    dist = exact_distribution(build_hhl(system, params))
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps({"key": path.stem, "distribution": dist}, sort_keys=True))
        tmp.replace(path)
    return dist


# ---------------------------------------------------------------------------
# single experiment

@dataclass
class ExperimentResult:
    config: ExperimentConfig
    distribution: dict[str, float]
    counts: dict[str, int] | None
    ba_distribution: dict[str, float]
    ratio: float | None
    distance: float
    registers: dict[str, dict[str, float]] = field(default_factory=dict)
    diagnosis: dict[str, float] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)
    # kept off the JSON document so reruns produce identical bytes
    elapsed_s: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.config.experiment_id,
            "config": self.config.to_json(),
            "distributions": {"readout": self.distribution, "b_ancilla": self.ba_distribution,
                              **{f"register:{k}": v for k, v in sorted(self.registers.items())}},
            "counts": self.counts,
            "metrics": {
                "solution_ratio": self.ratio,
                "solution_ratio_display": format_ratio(self.ratio),
                "variational_distance": self.distance,
                "baseline": "undefended-no-attack-exact",
            },
            "diagnosis": self.diagnosis,
            "flags": self.flags,
            "violations": self.violations,
        }


def build_circuit(config: ExperimentConfig, part2: Sequence[tuple] = PART2) -> tuple[Circuit, tuple[int, ...]]:
    """Circuit for ``config`` with its attacks applied, plus initial levels."""
    system, params = config.system, config.params
    circuit = build_secure_hhl(system, params, part2) if config.defended else build_hhl(system, params)
    return apply_attacks(circuit, config.attacks)


def _expectation_violations(config: ExperimentConfig, registers: Mapping[str, Mapping[str, float]]) -> list[str]:
    if not config.defended or config.mode != "exact":
        return []
    out = []
    if not config.attacks:
        full = registers["detection"]
        stray = [k for k, p in full.items() if p > 1e-9 and k not in NO_ATTACK_CODES]
        if stray:
            out.append(f"no-attack run produced detection codes {stray}")
        return out
    try:
        expected = defense_truth_table(config.attacks)
    except ValueError:
        return []
    for reg, values in expected.items():
        support = {k for k, p in registers[reg].items() if p > 1e-9}
        if len(values) == 1:
            (v,) = values
            if abs(registers[reg].get(v, 0.0) - 1.0) > 1e-9:
                out.append(f"{reg}: expected {v} with probability 1, got {dict(registers[reg])}")
        elif not support <= values:
            out.append(f"{reg}: support {sorted(support)} outside {sorted(values)}")
    return out


def run_experiment(config: ExperimentConfig, cache_dir: str | Path | None = None,
                   part2: Sequence[tuple] = PART2) -> ExperimentResult:
    """Build, attack and execute one configuration and score it against the baseline."""
    config.validate()
    start = time.perf_counter()
    circuit, levels = build_circuit(config, part2)
    counts = None
    if config.mode == "exact":
        dist = exact_distribution(circuit, levels)
    else:
        raw = sample_counts(circuit, levels, config.shots, config.seed, config.noise)
        counts = dict(sorted(raw.items()))
        dist = normalize_counts(raw)

    ba = marginal(dist, DEFENDED_BA if config.defended else UNDEFENDED_BA)
    flags = []
    try:
        ratio = solution_ratio(ba)
    except UndefinedRatio:
        ratio = None
        flags.append("undefined_ratio")
    baseline = no_attack_baseline(config.system, config.params, cache_dir)
    distance = variational_distance(_renormalized(ba), baseline)

    registers: dict[str, dict[str, float]] = {}
    diagnosis: dict[str, float] = {}
    if config.defended:
        for reg in (C_ANCILLA, C_B_DEFENSE, C_CLOCK, C_B):
            registers[reg] = _register_marginal(dist, reg)
        registers["detection"] = _collect(dist, detection_code)
        # probability mass in exact mode, shot counts when sampled
        weights = counts if counts is not None else dist
        verdicts: Counter = Counter()
        for readout, w in weights.items():
            verdicts[classify(detection_code(readout)).verdict.value] += w
        diagnosis = dict(sorted(verdicts.items()))

    result = ExperimentResult(config, dist, counts, ba, ratio, distance, registers, diagnosis, flags)
    result.violations = _expectation_violations(config, registers)
    result.elapsed_s = time.perf_counter() - start
    return result


def _collect(dist: Mapping[str, float], key) -> dict[str, float]:
    out: dict[str, float] = {}
    for k, p in dist.items():
        kk = key(k)
        out[kk] = out.get(kk, 0.0) + p
    return dict(sorted(out.items()))


def _register_marginal(dist: Mapping[str, float], register: str) -> dict[str, float]:
    return _collect(dist, lambda k: split_readout(k)[register])


def _renormalized(dist: Mapping[str, float]) -> dict[str, float]:
    # exact branch sums drop dust below the pruning threshold
    total = math.fsum(dist.values())
    return {k: v / total for k, v in dist.items()}


# ---------------------------------------------------------------------------
# output

def _csv(dist: Mapping[str, float]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["readout", "probability"])
    for k, p in sorted(dist.items()):
        w.writerow([k, repr(float(p))])
    return buf.getvalue()


def _dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_result(result: ExperimentResult, out_dir: str | Path) -> list[Path]:
    """Write ``<id>.json`` plus one CSV per histogram; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rid = result.config.experiment_id
    paths = [out / f"{rid}.json"]
    paths[0].write_text(_dumps(result.to_json()))
    hists = {"readout": result.distribution, "b_ancilla": result.ba_distribution}
    for name, dist in hists.items():
        p = out / f"{rid}.{name}.csv"
        p.write_text(_csv(dist))
        paths.append(p)
    return paths


# ---------------------------------------------------------------------------
# fixed suite

# Reference simulator distances under IIA; each acceptance band is the midpoint +-0.06.
REFERENCE_DISTANCES = {
    ("ancilla",): (0.4980, 0.5180),
    ("clock0",): (0.4450, 0.5010),
    ("clock1",): (0.2489, 0.2520),
    ("clock0", "clock1"): (0.2210, 0.2300),
    ("b",): (0.5080, 0.5360),
}
DISTANCE_HALF_WIDTH = 0.06
BASELINE_SAMPLED_BAND = (1 / 11, 1 / 7.5)  # ratio 1:7.5 .. 1:11
NOISE_SWEEP = (0.0, 0.01, 0.03)
NOISE_READOUT = 0.01
NOISE_FLOOR = 0.7


def distance_band(roles: Iterable[str]) -> tuple[float, float]:
    lo, hi = REFERENCE_DISTANCES[tuple(roles)]
    mid = (lo + hi) / 2
    return mid - DISTANCE_HALF_WIDTH, mid + DISTANCE_HALF_WIDTH


@dataclass
class CheckResult:
    id: str
    passed: bool
    detail: dict[str, Any]

    def to_json(self) -> dict[str, Any]:
        return {"id": self.id, "status": "PASS" if self.passed else "FAIL", **self.detail}


def _slug(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")


@dataclass
class SuiteReport:
    checks: list[CheckResult]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[str]:
        return [c.id for c in self.checks if not c.passed]

    def to_json(self) -> dict[str, Any]:
        checks = sorted(self.checks, key=lambda c: c.id)
        return {
            "summary": {"total": len(checks), "passed": sum(c.passed for c in checks),
                        "failed": [c.id for c in checks if not c.passed]},
            "checks": [c.to_json() for c in checks],
        }


def run_reproduction_suite(out_dir: str | Path, shots: int = DEFAULT_SHOTS, seed: int = 0,
                          noise_shots: int = 10_000, part2: Sequence[tuple] = PART2) -> SuiteReport:
    """Run the fixed reproduction suite and write ``report.json`` under ``out_dir``.

    Per-experiment JSON/CSV files go to ``out_dir/experiments``; the no-attack
    baseline is cached in ``out_dir/cache``.
    """
    out = Path(out_dir)
    data_dir, cache = out / "experiments", out / "cache"
    checks: list[CheckResult] = []

    def run(cfg: ExperimentConfig) -> ExperimentResult:
        res = run_experiment(cfg, cache, part2)
        write_result(res, data_dir)
        return res

    exact = run(ExperimentConfig(name="baseline-exact"))
    sampled = run(ExperimentConfig(name="baseline-sampled", mode="sampled", shots=shots, seed=seed))
    checks.append(CheckResult("baseline/exact-ratio", exact.ratio is not None and abs(exact.ratio - 1 / 9) <= 1e-9,
                              {"ratio": exact.ratio, "display": format_ratio(exact.ratio), "expected": 1 / 9}))
    lo, hi = BASELINE_SAMPLED_BAND
    checks.append(CheckResult("baseline/sampled-ratio", sampled.ratio is not None and lo <= sampled.ratio <= hi,
                              {"ratio": sampled.ratio, "display": format_ratio(sampled.ratio),
                               "shots": shots, "band": ["1:11", "1:7.5"]}))

    for roles in REFERENCE_DISTANCES:
        res = run(ExperimentConfig(attacks={r: "iia" for r in roles}, name="iia-" + "-".join(roles)))
        lo, hi = distance_band(roles)
        checks.append(CheckResult(f"distance/iia-{'-'.join(roles)}", lo <= res.distance <= hi,
                                  {"distance": res.distance, "band": [lo, hi],
                                   "reference": list(REFERENCE_DISTANCES[roles]), "ratio": format_ratio(res.ratio)}))

    for row in table_rows():
        name = f"{row.table}-{_slug(row.title)}"
        res = run(ExperimentConfig(attacks=row.spec, defended=True, name=name))
        m = res.registers[row.register]
        checks.append(CheckResult(f"defense/{name}", row.holds(m),
                                  {"register": row.register, "expected": sorted(row.expected),
                                   "observed": {k: p for k, p in m.items() if p > 1e-12}}))

    base = run(ExperimentConfig(defended=True, name="defended-no-attack"))
    stray = {k: p for k, p in base.registers["detection"].items() if p > 1e-9 and k not in NO_ATTACK_CODES}
    checks.append(CheckResult("defense/no-attack-codes", not stray, {"stray": stray}))
    tv = variational_distance(_renormalized(base.ba_distribution), exact.distribution)
    checks.append(CheckResult("defense/transparency", tv <= 1e-9, {"b_ancilla_distance": tv}))

    retained = []
    for p in NOISE_SWEEP:
        res = run(ExperimentConfig(defended=True, mode="sampled", shots=noise_shots, seed=seed,
                                   p_depol=p, p_readout=NOISE_READOUT, name=f"noise-depol-{p:g}"))
        retained.append(sum(res.registers["detection"].get(c, 0.0) for c in NO_ATTACK_CODES))
    monotone = all(a >= b for a, b in zip(retained, retained[1:]))
    checks.append(CheckResult("noise/monotone", monotone, {"p_depol": list(NOISE_SWEEP), "retained": retained}))
    at = retained[NOISE_SWEEP.index(0.01)]
    checks.append(CheckResult("noise/floor", at >= NOISE_FLOOR, {"p_depol": 0.01, "retained": at,
                                                                "floor": NOISE_FLOOR}))

    report = SuiteReport(checks)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(_dumps(report.to_json()))
    return report
