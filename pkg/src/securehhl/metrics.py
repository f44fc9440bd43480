"""Solution ratio and total-variation distance over readout distributions."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

NORMALIZATION_ATOL = 1e-6


class UndefinedRatio(ValueError):
    """The post-selected '11' outcome has zero mass."""


@dataclass
class CountsHistogram:
    counts: Counter = field(default_factory=Counter)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def add(self, key: str, n: int = 1) -> None:
        if n < 0:
            raise ValueError("counts must be non-negative")
        self.counts[key] += n

    def merge(self, other: CountsHistogram) -> CountsHistogram:
        return CountsHistogram(self.counts + other.counts)

    def distribution(self) -> dict[str, float]:
        total = self.total
        if total == 0:
            raise ValueError("empty histogram")
        return {k: v / total for k, v in sorted(self.counts.items())}


def _as_distribution(data: Mapping[str, float] | CountsHistogram) -> dict[str, float]:
    if isinstance(data, CountsHistogram):
        return data.distribution()
    total = float(sum(data.values()))
    if total <= 0:
        raise ValueError("distribution has no mass")
    return {k: v / total for k, v in data.items()}


def marginal(dist: Mapping[str, float], positions: Sequence[int]) -> dict[str, float]:
    """Marginal over the readout characters at ``positions`` (in that order)."""
    out: dict[str, float] = {}
    for key, p in dist.items():
        sub = "".join(key[i] for i in positions)
        out[sub] = out.get(sub, 0.0) + p
    return dict(sorted(out.items()))


def solution_ratio(data: Mapping[str, float] | CountsHistogram) -> float:
    """``P("01") / P("11")`` on a (b, ancilla) readout.

    Counts are accepted as well as probabilities.  Reported in tables as
    ``1 : 1/ratio``.
    """
    dist = _as_distribution(data)
    p11 = dist.get("11", 0.0)
    if p11 <= 0:
        raise UndefinedRatio("no mass on '11'; the post-selected ratio is undefined")
    return dist.get("01", 0.0) / p11


def format_ratio(ratio: float | None) -> str:
    if ratio is None:
        return "undefined"
    if ratio == 0:
        return "1:inf"
    return f"1:{1 / ratio:.4f}"


def variational_distance(p: Mapping[str, float], q: Mapping[str, float]) -> float:
    """Total variation distance ``0.5 * sum |p(k) - q(k)|``; missing keys are 0."""
    for name, d in (("p", p), ("q", q)):
        s = math.fsum(d.values())
        if abs(s - 1) > NORMALIZATION_ATOL or any(v < -NORMALIZATION_ATOL for v in d.values()):
            raise ValueError(f"{name} is not a normalized distribution (sum={s:.9g})")
    keys = set(p) | set(q)
    return 0.5 * math.fsum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)
