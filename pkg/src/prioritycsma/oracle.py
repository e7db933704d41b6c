"""Brute-force transmission law by enumerating every priority ordering.

Independent of the simulator's per-node minimum shortcut: each of the
``(sum X)!`` orderings of individual messages is equally likely, and a node
transmits iff the best-ranked message in its closed neighbourhood is its own.
"""
from __future__ import annotations

import math
from collections import Counter
from fractions import Fraction
from itertools import permutations

from .graph import InterferenceGraph


def transmission_law(counts, g: InterferenceGraph) -> dict[frozenset, Fraction]:
    """Exact distribution of the transmitted set for queue vector ``counts``."""
    owners = [i for i, c in enumerate(counts) for _ in range(int(c))]
    total = math.factorial(len(owners))
    tally: Counter = Counter()
    for order in permutations(owners):
        first = {}
        for rank, node in enumerate(order):
            first.setdefault(node, rank)
        sent = frozenset(
            i for i in first
            if all(first.get(j, math.inf) > first[i] for j in g.adjacency[i])
        )
        tally[sent] += 1
    return {s: Fraction(c, total) for s, c in tally.items()}


def marginals(law: dict[frozenset, Fraction], n: int) -> list[Fraction]:
    out = [Fraction(0)] * n
    for s, prob in law.items():
        for i in s:
            out[i] += prob
    return out


def exact_phi(counts, g: InterferenceGraph) -> list[Fraction]:
    """Rate function in exact rational arithmetic (``0/0 = 0``)."""
    out = []
    for i in range(g.node_count):
        den = sum(int(counts[j]) for j in g.closed_neighborhoods[i])
        out.append(Fraction(int(counts[i]), den) if den else Fraction(0))
    return out
