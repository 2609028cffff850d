"""Empirical statistics of quantized sequences: k-types, the weighted
complexity cost, conditional empirical entropy, divergences, jump counts,
and the LZ78 codelength."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .sources import WeightTable


@dataclass(frozen=True)
class KType:
    """Counts of overlapping (k+1)-windows of a symbol sequence.

    counts[a^{k+1}] is the number of windows equal to that tuple; the total
    over all tuples is n - k.  Dividing by n - k gives the (k+1)-th order
    empirical distribution.
    """

    k: int
    counts: dict[tuple[int, ...], int]
    n: int

    @property
    def total(self) -> int:
        return self.n - self.k

    def probs(self) -> dict[tuple[int, ...], float]:
        t = self.total
        return {key: c / t for key, c in self.counts.items()}

    def context_counts(self) -> dict[tuple[int, ...], int]:
        """Marginal over the first k symbols of each window."""
        out: dict[tuple[int, ...], int] = {}
        for key, c in self.counts.items():
            ctx = key[:-1]
            out[ctx] = out.get(ctx, 0) + c
        return out


def k_type(u: np.ndarray, k: int) -> KType:
    """Empirical distribution of the overlapping length-(k+1) windows of u."""
    u = np.asarray(u, dtype=np.int64)
    n = len(u)
    if n <= k:
        raise ValueError(f"sequence of length {n} has no windows of order k={k}")
    counts: dict[tuple[int, ...], int] = {}
    for i in range(k, n):
        key = tuple(int(v) for v in u[i - k: i + 1])
        counts[key] = counts.get(key, 0) + 1
    return KType(k=k, counts=counts, n=n)


def complexity_cost(u: np.ndarray, w: WeightTable) -> float:
    """Weighted empirical cost sum_w w[a^{k+1}] * phat(a^{k+1} | u).

    Any window with infinite weight makes the cost +inf; that marks the
    sequence infeasible for the projector and solver rather than erroring.
    """
    kt = k_type(u, w.k)
    total = 0.0
    for key, c in kt.counts.items():
        weight = w[key]
        if math.isinf(weight):
            return math.inf
        total += weight * c
    return total / kt.total


def cond_empirical_entropy(u: np.ndarray, k: int) -> float:
    """Order-k conditional empirical entropy of u, in bits.

    The context marginal is taken over the same n - k windows, so the
    conditional rows normalize exactly and the value is nonnegative.
    """
    kt = k_type(u, k)
    ctx_counts = kt.context_counts()
    total = 0.0
    for key, c in kt.counts.items():
        total += c * math.log2(c / ctx_counts[key[:-1]])
    return -total / kt.total


def count_jumps(u: np.ndarray) -> int:
    """Number of positions i >= 2 with u_i != u_{i-1}."""
    u = np.asarray(u)
    if len(u) < 2:
        raise ValueError("need a sequence of length >= 2")
    return int(np.count_nonzero(u[1:] != u[:-1]))


def l1_distance(p: Mapping, q: Mapping) -> float:
    """Total variation style l1 distance between two discrete distributions."""
    keys = set(p) | set(q)
    return float(sum(abs(p.get(key, 0.0) - q.get(key, 0.0)) for key in keys))


def kl_divergence(p: Mapping, q: Mapping) -> float:
    """KL divergence in bits; +inf when absolute continuity fails."""
    total = 0.0
    for key, pv in p.items():
        if pv == 0.0:
            continue
        qv = q.get(key, 0.0)
        if qv == 0.0:
            return math.inf
        total += pv * math.log2(pv / qv)
    return total


def lz78_length(u: np.ndarray, alphabet_size: int) -> int:
    """LZ78 codelength of u in bits.

    The sequence is parsed incrementally into phrases, each the shortest
    phrase not seen before; phrase j costs ceil(log2 j) bits for a pointer
    into the j previous parse-tree nodes (the empty root included) plus one
    literal of ceil(log2 alphabet_size) bits.  A final phrase that repeats
    an existing node is charged the same way, which keeps the code uniquely
    decodable given the length.
    """
    u = np.asarray(u, dtype=np.int64)
    if len(u) < 1:
        raise ValueError("need a nonempty sequence")
    if alphabet_size < 1 or (u.min() < 0 or u.max() >= alphabet_size):
        raise ValueError("symbols must lie in [0, alphabet_size)")
    literal_bits = math.ceil(math.log2(alphabet_size))
    dictionary: dict[tuple[int, ...], int] = {}
    bits = 0
    phrases = 0
    phrase: tuple[int, ...] = ()
    for symbol in u:
        candidate = phrase + (int(symbol),)
        if candidate in dictionary:
            phrase = candidate
            continue
        phrases += 1
        dictionary[candidate] = phrases
        bits += _pointer_bits(phrases) + literal_bits
        phrase = ()
    if phrase:
        # input ended inside a known phrase: emit it as one more phrase
        phrases += 1
        bits += _pointer_bits(phrases) + literal_bits
    return bits


def _pointer_bits(j: int) -> int:
    return math.ceil(math.log2(j)) if j > 1 else 0


def lz78_entropy_slack(n: int, b: int, k: int) -> float:
    """Per-symbol slack between the LZ78 rate and the order-k empirical
    entropy for alphabets of size 2^b; +inf where the bound is vacuous."""
    log_n = math.log2(n)
    eps = (2 * b + math.log2(2.0 ** b + (2.0 ** b - 1.0) / b * log_n - 2.0)) / log_n
    denom = (1.0 - eps) * log_n - b
    if denom <= 0:
        return math.inf
    return b * (k * b + b + 3) / denom
