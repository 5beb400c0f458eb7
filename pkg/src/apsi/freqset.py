"""
Tolerance-aware algebra on sets of harmonic frequencies.

Two frequencies estimated at resolution delta are treated as the same line
when they differ by less than 2*delta.  A set is kept in canonical form:
sorted, with neighbours at least 2*delta apart.  Binary operations use the
coarser of the two resolutions.

>>> a = FrequencySet((1.0, 2.0, 3.0), 0.001)
>>> b = FrequencySet((2.0005, 5.0), 0.001)
>>> [round(w, 6) for w in intersect(a, b)]
[2.00025]
>>> difference(a, b).frequencies
(1.0, 3.0)
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

from .errors import DecorrelationFailed, InvalidArgument


@dataclass(frozen=True)
class FrequencySet:
    frequencies: tuple[float, ...]
    delta: float

    def __post_init__(self):
        f = tuple(float(w) for w in self.frequencies)
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise InvalidArgument(f"delta must be > 0, got {self.delta}")
        if any(not math.isfinite(w) or w < 0 for w in f):
            raise InvalidArgument("frequencies must be finite and >= 0")
        for a, b in zip(f, f[1:]):
            if not b - a >= 2 * self.delta:
                raise InvalidArgument(
                    f"frequencies {a} and {b} closer than 2*delta; use FrequencySet.canonical"
                )
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "delta", float(self.delta))

    @classmethod
    def canonical(cls, values: Iterable[float], delta: float) -> "FrequencySet":
        """Build a set from arbitrary values, collapsing clusters to their mean."""
        return cls(tuple(_collapse(sorted(float(v) for v in values), delta)), delta)

    @classmethod
    def empty(cls, delta: float) -> "FrequencySet":
        return cls((), delta)

    def __len__(self):
        return len(self.frequencies)

    def __iter__(self):
        return iter(self.frequencies)

    def __bool__(self):
        return bool(self.frequencies)

    def contains(self, omega: float) -> bool:
        return any(abs(w - omega) < 2 * self.delta for w in self.frequencies)

    # interchange formats

    def to_dict(self) -> dict:
        return {"delta": self.delta, "frequencies": list(self.frequencies)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "FrequencySet":
        try:
            return cls(tuple(d["frequencies"]), d["delta"])
        except (KeyError, TypeError) as exc:
            raise InvalidArgument(f"malformed frequency set: {exc}") from None

    def to_text(self) -> str:
        return f"delta={self.delta!r}: " + ",".join(repr(w) for w in self.frequencies)

    @classmethod
    def from_text(cls, text: str) -> "FrequencySet":
        head, _, body = text.partition(":")
        head = head.strip()
        if not head.startswith("delta="):
            raise InvalidArgument(f"expected 'delta=<v>: ...', got {text!r}")
        try:
            delta = float(head[len("delta="):])
            values = [float(v) for v in body.split(",") if v.strip()]
        except ValueError as exc:
            raise InvalidArgument(str(exc)) from None
        return cls(tuple(values), delta)


def _collapse(values: Sequence[float], delta: float) -> list[float]:
    # repeat until no neighbours are within 2*delta; each pass merges runs
    out = list(values)
    while True:
        merged, run = [], [out[0]] if out else []
        for w in out[1:]:
            if w - run[-1] < 2 * delta:
                run.append(w)
            else:
                merged.append(sum(run) / len(run))
                run = [w]
        if run:
            merged.append(sum(run) / len(run))
        if len(merged) == len(out):
            return merged
        out = merged


def _match(a: FrequencySet, b: FrequencySet, delta: float):
    """Greedy ascending matching of members closer than 2*delta.

    Returns (pairs, unmatched_a, unmatched_b).
    """
    fa, fb = a.frequencies, b.frequencies
    i = j = 0
    pairs, ua, ub = [], [], []
    while i < len(fa) and j < len(fb):
        if abs(fa[i] - fb[j]) < 2 * delta:
            pairs.append((fa[i], fb[j]))
            i += 1
            j += 1
        elif fa[i] < fb[j]:
            ua.append(fa[i])
            i += 1
        else:
            ub.append(fb[j])
            j += 1
    ua.extend(fa[i:])
    ub.extend(fb[j:])
    return pairs, ua, ub


def union(a: FrequencySet, b: FrequencySet) -> FrequencySet:
    delta = max(a.delta, b.delta)
    pairs, ua, ub = _match(a, b, delta)
    values = [0.5 * (x + y) for x, y in pairs] + ua + ub
    return FrequencySet.canonical(values, delta)


def intersect(a: FrequencySet, b: FrequencySet) -> FrequencySet:
    delta = max(a.delta, b.delta)
    pairs, _, _ = _match(a, b, delta)
    return FrequencySet.canonical([0.5 * (x + y) for x, y in pairs], delta)


def difference(a: FrequencySet, b: FrequencySet) -> FrequencySet:
    delta = max(a.delta, b.delta)
    keep = [w for w in a.frequencies if not any(abs(w - v) < 2 * delta for v in b.frequencies)]
    # a coarser delta from b can bring survivors of a within 2*delta
    return FrequencySet.canonical(keep, delta)


def set_equal(a: FrequencySet, b: FrequencySet) -> bool:
    tol = 2 * max(a.delta, b.delta)
    return len(a) == len(b) and all(
        abs(x - y) < tol for x, y in zip(a.frequencies, b.frequencies)
    )


def decorrelate(inputs: Sequence[FrequencySet]) -> tuple[FrequencySet, list[FrequencySet]]:
    """
    Split correlated input sets into the common link set and the
    conditional (link-free) sets of each input.

    The conditional sets must be pairwise disjoint; otherwise
    DecorrelationFailed lists the frequencies they still share.
    """
    if len(inputs) < 2:
        raise InvalidArgument("decorrelate needs at least two input sets")
    link = reduce(intersect, inputs)
    conditional = [difference(s, link) for s in inputs]
    residual = []
    for i in range(len(conditional)):
        for j in range(i + 1, len(conditional)):
            residual.extend(intersect(conditional[i], conditional[j]).frequencies)
    if residual:
        raise DecorrelationFailed(sorted(residual))
    return link, conditional
