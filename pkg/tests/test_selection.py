import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_linear_problem
from spsolve.core import Hyperplane, ProblemInstance, Sphere, Subspace, UnsupportedFamilyError
from spsolve.selection import (
    MeanRuleError,
    Rule,
    SelectionRule,
    make_rule,
    next_index,
    nonuniform_weights,
)


def test_nonuniform_weight_examples():
    two = ProblemInstance(2, [Sphere([0, 0], 1), Sphere([5, 0], 2)])
    npt.assert_allclose(nonuniform_weights(two), [0.2, 0.8], rtol=1e-14)
    rows = ProblemInstance(2, [Hyperplane([1, 0], 0), Hyperplane([0, 2], 0), Hyperplane([2, 0], 1)])
    npt.assert_allclose(nonuniform_weights(rows), [1 / 9, 4 / 9, 4 / 9], rtol=1e-14)
    eq = ProblemInstance(2, [Hyperplane([3, 4], 0), Hyperplane([0, 5], 1), Hyperplane([5, 0], 2)])
    npt.assert_allclose(nonuniform_weights(eq), [1 / 3] * 3, rtol=1e-14)


def test_nonuniform_weights_unsupported():
    prob = ProblemInstance(2, [Subspace(np.eye(2)[:, :1])])
    with pytest.raises(UnsupportedFamilyError):
        nonuniform_weights(prob)
    # a caller-supplied norm vector works around the missing table entry
    assert make_rule("nrp", prob, norms=[1.0]).weights[0] == 1.0


def test_greedy_examples():
    gp = SelectionRule(Rule.GREEDY, 3)
    assert next_index(gp, [0.1, -0.5, 0.3], 0) == 1  # 0-based: the second entry
    ngp = SelectionRule(Rule.NORMALIZED_GREEDY, 2, norms=[1, 4])
    assert next_index(ngp, [2, 2], 0) == 0


def test_greedy_ties_go_to_smallest_index():
    gp = SelectionRule(Rule.GREEDY, 4)
    assert next_index(gp, [1, -3, 3, 3], 0) == 1
    ngp = SelectionRule(Rule.NORMALIZED_GREEDY, 3, norms=[2, 1, 1])
    assert next_index(ngp, [2, 1, 1], 0) == 0


def test_cyclic_example():
    cp = SelectionRule(Rule.CYCLIC, 3)
    assert [next_index(cp, None, k) for k in range(4)] == [0, 1, 2, 0]


def test_mean_is_not_an_index_rule():
    mp = SelectionRule(Rule.MEAN, 3)
    with pytest.raises(MeanRuleError, match="Mean is a full-step rule, not an index rule"):
        next_index(mp, [0, 0, 0], 0, np.random.default_rng(0))


def test_random_rules_need_rng():
    with pytest.raises(ValueError):
        next_index(SelectionRule(Rule.RANDOM, 3), None, 0)


def test_rule_validation():
    with pytest.raises(ValueError):
        SelectionRule(Rule.NONUNIFORM, 2, weights=[0.5, 0.6])
    with pytest.raises(ValueError):
        SelectionRule(Rule.NORMALIZED_GREEDY, 2, norms=[1.0, 0.0])


def _frequencies(rule, draws, rng):
    counts = np.zeros(rule.m)
    for k in range(draws):
        counts[rule.next_index(None, k, rng)] += 1
    return counts / draws


def test_uniform_frequencies():
    m, draws = 7, 100_000
    freq = _frequencies(SelectionRule(Rule.RANDOM, m), draws, np.random.default_rng(1))
    sd = np.sqrt((1 / m) * (1 - 1 / m) / draws)
    assert np.all(np.abs(freq - 1 / m) <= 3 * sd)


def test_nonuniform_frequencies():
    w = np.array([0.05, 0.15, 0.3, 0.5])
    draws = 100_000
    freq = _frequencies(SelectionRule(Rule.NONUNIFORM, 4, weights=w), draws, np.random.default_rng(2))
    sd = np.sqrt(w * (1 - w) / draws)
    assert np.all(np.abs(freq - w) <= 3 * sd)


def test_permuted_covers_every_index_each_cycle():
    m = 9
    rule = SelectionRule(Rule.PERMUTED, m)
    rng = np.random.default_rng(3)
    seen = [rule.next_index(None, k, rng) for k in range(10 * m)]
    cycles = [sorted(seen[c * m:(c + 1) * m]) for c in range(10)]
    assert all(c == list(range(m)) for c in cycles)
    # fresh permutations, not the same one repeated
    assert len({tuple(seen[c * m:(c + 1) * m]) for c in range(10)}) > 1


@settings(max_examples=50, deadline=None)
@given(
    res=st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=12),
    scale=st.floats(1e-6, 1e6),
)
def test_greedy_scale_invariant_and_deterministic(res, scale):
    m = len(res)
    norms = np.linspace(1.0, 3.0, m)
    r = np.array(res)
    for rule in (SelectionRule(Rule.GREEDY, m), SelectionRule(Rule.NORMALIZED_GREEDY, m, norms=norms)):
        i = rule.next_index(r, 0)
        assert rule.next_index(r, 5) == i
        # scaling may create exact ties only if values were tied already
        if len(set(np.abs(r) / (norms if rule.norms is not None else 1))) == m:
            assert rule.next_index(scale * r, 0) == i


def test_make_rule_uses_table_norms(rng):
    prob = random_linear_problem(rng, 3, 6)
    rule = make_rule("ngp", prob)
    npt.assert_allclose(rule.norms, [np.linalg.norm(c.a) for c in prob.constraints])
    rule = make_rule("nrp", prob)
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-12)
