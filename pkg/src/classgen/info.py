"""Discrete mutual information and KL divergence, in nats.

Two routes to the same quantity: ``plugin_mi`` works on empirical counts and
``exact_mi`` on a fully specified joint pmf.  The experiment engine uses the
first, the enumeration oracle the second.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import InfiniteDivergenceError, InvalidArgumentError

CORRECTIONS = ("none", "miller_madow")
DEFAULT_BINS = 21
PMF_TOLERANCE = 1e-12


@dataclass(frozen=True)
class JointCounts:
    """Counts of (u, v) pairs; u is a mask bit, v any hashable code."""

    table: Mapping

    def __post_init__(self):
        table = {key: int(c) for key, c in dict(self.table).items() if c}
        if any(c < 0 for c in table.values()):
            raise InvalidArgumentError("counts must be non-negative")
        object.__setattr__(self, "table", table)

    @classmethod
    def from_samples(cls, u, v) -> "JointCounts":
        u, v = list(u), list(v)
        if len(u) != len(v):
            raise InvalidArgumentError("u and v samples differ in length")
        return cls(Counter(zip(_hashable(u), _hashable(v))))

    @property
    def total(self) -> int:
        return sum(self.table.values())


@dataclass(frozen=True)
class JointPmf:
    probabilities: Mapping

    def __post_init__(self):
        probs = {key: float(p) for key, p in dict(self.probabilities).items()}
        if any(p < 0 or not math.isfinite(p) for p in probs.values()):
            raise InvalidArgumentError("probabilities must be finite and non-negative")
        total = math.fsum(probs.values())
        if abs(total - 1.0) > PMF_TOLERANCE:
            raise InvalidArgumentError(f"pmf sums to {total!r}, not 1")
        object.__setattr__(self, "probabilities", probs)

    @classmethod
    def from_counts(cls, counts: JointCounts) -> "JointPmf":
        total = counts.total
        return cls({key: c / total for key, c in counts.table.items()})

    def marginals(self):
        pu, pv = {}, {}
        for (u, v), p in self.probabilities.items():
            pu[u] = pu.get(u, 0.0) + p
            pv[v] = pv.get(v, 0.0) + p
        return pu, pv


def _hashable(values):
    return [tuple(x) if isinstance(x, (list, np.ndarray)) else (x.item() if isinstance(x, np.generic) else x)
            for x in values]


def plugin_mi(counts: JointCounts, correction: str = "none") -> float:
    """Mutual information of the empirical joint distribution.

    ``miller_madow`` adds (|U|-1)(|V|-1) / (2N) over the observed supports.
    The result is clamped at zero.
    """
    if correction not in CORRECTIONS:
        raise InvalidArgumentError(f"unknown correction {correction!r}")
    total = counts.total
    if total <= 0:
        raise InvalidArgumentError("cannot estimate MI from zero samples")
    cu, cv = Counter(), Counter()
    for (u, v), c in counts.table.items():
        cu[u] += c
        cv[v] += c
    mi = 0.0
    if len(cu) > 1 and len(cv) > 1:
        # integer numerator/denominator: exact independence gives log(1.0) == 0.0
        mi = math.fsum(c / total * math.log((c * total) / (cu[u] * cv[v]))
                       for (u, v), c in counts.table.items())
    if correction == "miller_madow":
        mi += (len(cu) - 1) * (len(cv) - 1) / (2.0 * total)
    return max(mi, 0.0)


def _log_ratio(p: float, q: float, log_q: float) -> float:
    # the ratio form is exact (0) for independent factors; logs only when the ratio is unrepresentable
    ratio = p / q if q > 0 else math.inf
    if 0 < ratio < math.inf:
        return math.log(ratio)
    return math.log(p) - log_q


def exact_mi(pmf: JointPmf) -> float:
    pu, pv = pmf.marginals()
    pu = {k: p for k, p in pu.items() if p > 0}
    pv = {k: p for k, p in pv.items() if p > 0}
    if len(pu) < 2 or len(pv) < 2:
        return 0.0
    mi = math.fsum(p * _log_ratio(p, pu[u] * pv[v], math.log(pu[u]) + math.log(pv[v]))
                   for (u, v), p in pmf.probabilities.items() if p > 0)
    return max(mi, 0.0)


def entropy(probabilities) -> float:
    values = probabilities.values() if isinstance(probabilities, Mapping) else probabilities
    return max(-math.fsum(p * math.log(p) for p in values if p > 0), 0.0)


def _aligned(p, q):
    if isinstance(p, JointPmf):
        p = p.probabilities
    if isinstance(q, JointPmf):
        q = q.probabilities
    if isinstance(p, Mapping) != isinstance(q, Mapping):
        raise InvalidArgumentError("p and q must both be mappings or both sequences")
    if isinstance(p, Mapping):
        keys = sorted(set(p) | set(q), key=repr)
        p_arr = np.array([float(p.get(k, 0.0)) for k in keys])
        q_arr = np.array([float(q.get(k, 0.0)) for k in keys])
    else:
        p_arr = np.asarray(p, dtype=float).ravel()
        q_arr = np.asarray(q, dtype=float).ravel()
        if p_arr.shape != q_arr.shape:
            raise InvalidArgumentError("p and q have different supports")
    for name, arr in (("p", p_arr), ("q", q_arr)):
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise InvalidArgumentError(f"{name} has negative or non-finite entries")
        if abs(math.fsum(arr) - 1.0) > 1e-9:
            raise InvalidArgumentError(f"{name} does not sum to 1")
    return p_arr, q_arr


def kl_divergence(p, q) -> float:
    """D(p || q) with 0 log 0 = 0.

    Raises InfiniteDivergenceError when p has mass where q has none.
    """
    p_arr, q_arr = _aligned(p, q)
    support = p_arr > 0
    if np.any(q_arr[support] == 0):
        raise InfiniteDivergenceError("p is not absolutely continuous with respect to q")
    p_s, q_s = p_arr[support], q_arr[support]
    with np.errstate(over="ignore", under="ignore"):
        ratio = p_s / q_s
    safe = np.isfinite(ratio) & (ratio > 0)
    logs = np.where(safe, np.log(np.where(safe, ratio, 1.0)), np.log(p_s) - np.log(q_s))
    terms = p_s * logs
    return max(math.fsum(terms), 0.0)


def quantize(samples, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Uniform bins over [-1, 1]; +1 falls in the last bin."""
    if bins < 2:
        raise InvalidArgumentError("need at least two bins")
    x = np.asarray(samples, dtype=float)
    if np.any(np.abs(x) > 1.0 + 1e-9) or np.any(np.isnan(x)):
        raise InvalidArgumentError("samples must lie in [-1, 1]")
    codes = np.floor((np.clip(x, -1.0, 1.0) + 1.0) / 2.0 * bins).astype(np.int64)
    return np.minimum(codes, bins - 1)
