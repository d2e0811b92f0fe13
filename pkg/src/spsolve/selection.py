"""Index-selection rules for successive projection.

Indices are 0-based. Greedy ties go to the smallest index (``np.argmax``
semantics). Random rules draw from a caller-owned ``numpy.random.Generator``.
"""
from __future__ import annotations

from enum import Enum
from typing import Optional

import numpy as np

from .core import ProblemInstance, gradient_norm_at_solution


class Rule(str, Enum):
    CYCLIC = "cp"
    RANDOM = "rp"
    PERMUTED = "rpp"
    NONUNIFORM = "nrp"
    GREEDY = "gp"
    NORMALIZED_GREEDY = "ngp"
    MEAN = "mp"

    @property
    def is_sequential(self) -> bool:
        return self is not Rule.MEAN

    @property
    def is_greedy(self) -> bool:
        return self in (Rule.GREEDY, Rule.NORMALIZED_GREEDY)


ALL_RULES = tuple(Rule)
SEQUENTIAL_RULES = tuple(r for r in Rule if r.is_sequential)


class MeanRuleError(ValueError):
    pass


def nonuniform_weights(problem: ProblemInstance, norms=None) -> np.ndarray:
    """Sampling probabilities proportional to squared gradient norms at the solution."""
    if norms is None:
        norms = gradient_norms(problem)
    sq = np.asarray(norms, dtype=float) ** 2
    return sq / sq.sum()


def gradient_norms(problem: ProblemInstance) -> np.ndarray:
    return np.array([gradient_norm_at_solution(c) for c in problem.constraints])


class SelectionRule:
    """A selection strategy together with its running state.

    Build one per solver run with :func:`make_rule`; the state (cycle
    position, current permutation) is not meant to be shared.
    """

    def __init__(self, variant: Rule, m: int, weights=None, norms=None):
        self.variant = Rule(variant)
        self.m = int(m)
        if self.m < 1:
            raise ValueError("m must be positive")
        self.weights = None
        self.norms = None
        if self.variant is Rule.NONUNIFORM:
            w = np.asarray(weights, dtype=float)
            if w.shape != (self.m,) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
                raise ValueError("weights must be a probability vector of length m")
            self.weights = w
            self._cdf = np.cumsum(w)
            self._cdf[-1] = 1.0
        if self.variant is Rule.NORMALIZED_GREEDY:
            nv = np.asarray(norms, dtype=float)
            if nv.shape != (self.m,) or np.any(nv <= 0):
                raise ValueError("norms must be a strictly positive vector of length m")
            self.norms = nv
        self.position = 0
        self.permutation: Optional[np.ndarray] = None

    def __repr__(self):
        return f"SelectionRule({self.variant.value!r}, m={self.m})"

    def next_index(self, residuals, k: int, rng: Optional[np.random.Generator] = None) -> int:
        v = self.variant
        if v is Rule.CYCLIC:
            return k % self.m
        if v is Rule.GREEDY:
            return int(np.argmax(np.abs(residuals)))
        if v is Rule.NORMALIZED_GREEDY:
            return int(np.argmax(np.abs(residuals) / self.norms))
        if v is Rule.MEAN:
            raise MeanRuleError("Mean is a full-step rule, not an index rule")
        if rng is None:
            raise ValueError(f"rule {v.value} needs a random generator")
        if v is Rule.RANDOM:
            return int(rng.integers(self.m))
        if v is Rule.NONUNIFORM:
            return int(min(np.searchsorted(self._cdf, rng.random(), side="right"), self.m - 1))
        # randomly permuted: fresh permutation at the start of every cycle
        if self.permutation is None or self.position == 0:
            self.permutation = rng.permutation(self.m)
        i = int(self.permutation[self.position])
        self.position = (self.position + 1) % self.m
        return i


def make_rule(variant, problem: ProblemInstance, norms=None) -> SelectionRule:
    """Selection rule for ``problem``.

    NRP weights and NGP normalizers come from the closed-form gradient norms
    unless ``norms`` is given (needed for families outside that table).
    """
    variant = Rule(variant)
    weights = None
    if variant in (Rule.NONUNIFORM, Rule.NORMALIZED_GREEDY):
        if norms is None:
            norms = gradient_norms(problem)
        if variant is Rule.NONUNIFORM:
            weights = nonuniform_weights(problem, norms)
    return SelectionRule(variant, problem.m, weights=weights, norms=norms)


def next_index(rule: SelectionRule, residuals, k: int, rng=None) -> int:
    return rule.next_index(residuals, k, rng)
