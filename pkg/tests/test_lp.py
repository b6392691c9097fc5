import pickle

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import enumerate_binaries, vertex_enumeration
from thermopf.errors import CaseError, NodeLimitError
from thermopf.lp import LinearProgram, solve_lp, solve_milp

INF = np.inf


def lp(c, a=None, b=None, lo=None, up=None, binaries=()):
    c = np.asarray(c, float)
    n = len(c)
    a = np.zeros((0, n)) if a is None else np.asarray(a, float)
    b = np.zeros(0) if b is None else np.asarray(b, float)
    return LinearProgram(c, a, b, np.asarray(lo, float), np.asarray(up, float), binaries)


def random_lp(rng, n=3, m=2):
    a = rng.uniform(-3, 3, (m, n))
    lo = rng.uniform(-5, 0, n)
    up = lo + rng.uniform(0.5, 6, n)
    if rng.random() < 0.8:
        b = a @ rng.uniform(lo, up)
    else:
        b = rng.uniform(-30, 30, m)  # often infeasible
    return lp(rng.uniform(-5, 5, n), a, b, lo, up)


def check_solution(problem, out):
    x = out.values
    assert np.max(np.abs(problem.a_eq @ x - problem.b_eq), initial=0.0) <= 1e-7
    assert np.all(x >= problem.lower - 1e-9) and np.all(x <= problem.upper + 1e-9)
    between = np.sum((x > problem.lower + 1e-9) & (x < problem.upper - 1e-9))
    assert between <= problem.a_eq.shape[0]


def test_single_bounded_variable():
    out = solve_lp(lp([1.0], lo=[3.0], up=[10.0]))
    assert out.optimal and out.values[0] == 3.0 and out.objective_value == 3.0


def test_degenerate_segment_returns_vertex():
    problem = lp([-1.0, -1.0], [[1.0, 1.0]], [1.0], [0, 0], [1, 1])
    out = solve_lp(problem)
    assert out.objective_value == pytest.approx(-1.0)
    assert sorted(np.round(out.values, 12)) == [0.0, 1.0]


def test_infeasible_and_unbounded():
    assert solve_lp(lp([1.0, 1.0], [[1.0, 1.0]], [5.0], [0, 0], [1, 1])).status == "infeasible"
    out = solve_lp(lp([-1.0, 0.0], [[1.0, -1.0]], [0.0], [0, 0], [INF, INF]))
    assert out.status == "unbounded"


def test_free_variables():
    # min |shifted| style: x free, y >= 0, x - y = -2, minimise y + 0.5 x on x >= -4
    problem = lp([0.5, 1.0], [[1.0, -1.0]], [-2.0], [-INF, 0.0], [INF, INF])
    out = solve_lp(problem.with_bounds([-4.0, 0.0], [INF, INF]))
    assert out.values == pytest.approx([-2.0, 0.0])
    free = solve_lp(lp([1.0, 1.0], [[1.0, 1.0]], [3.0], [-INF, 1.0], [INF, 2.0]))
    assert free.objective_value == pytest.approx(3.0)


def test_random_lps_match_vertex_enumeration():
    rng = np.random.default_rng(11)
    for _ in range(50):
        problem = random_lp(rng)
        expected = vertex_enumeration(problem.objective, problem.a_eq, problem.b_eq, problem.lower, problem.upper)
        out = solve_lp(problem)
        if expected is None:
            assert out.status == "infeasible"
            continue
        assert out.optimal
        assert out.objective_value == pytest.approx(expected, abs=1e-7)
        check_solution(problem, out)


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 6), m=st.integers(0, 3))
@settings(max_examples=60)
def test_bland_trace_monotone(seed, n, m):
    rng = np.random.default_rng(seed)
    problem = random_lp(rng, n, min(m, n - 1))
    out = solve_lp(problem, rule="bland")
    if out.optimal:
        trace = np.array(out.objective_trace)
        assert np.all(np.diff(trace) <= 1e-9 * max(1.0, np.max(np.abs(trace), initial=1.0)))
        check_solution(problem, out)
        assert solve_lp(problem).objective_value == pytest.approx(out.objective_value, abs=1e-7)


def test_deterministic_bytes():
    rng = np.random.default_rng(5)
    problem = random_lp(rng, 6, 3)
    first, second = solve_lp(problem), solve_lp(problem)
    assert pickle.dumps(first) == pickle.dumps(second)


@pytest.mark.parametrize("kwargs, match", [
    (dict(c=[1.0, 2.0], a=[[1.0]], b=[1.0], lo=[0, 0], up=[1, 1]), "shape"),
    (dict(c=[1.0], a=[[1.0]], b=[1.0, 2.0], lo=[0], up=[1]), "rows"),
    (dict(c=[1.0], lo=[0, 0], up=[1]), "bounds"),
    (dict(c=[1.0], lo=[2.0], up=[1.0]), "lower"),
    (dict(c=[1.0, 1.0], lo=[0, 0], up=[1, 2], binaries=(1,)), "binary"),
])
def test_dimension_and_bound_errors(kwargs, match):
    with pytest.raises(CaseError, match=match):
        lp(**kwargs)


def test_unknown_rule():
    with pytest.raises(CaseError):
        solve_lp(lp([1.0], lo=[0], up=[1]), rule="steepest")


def test_milp_integral_relaxation_is_returned():
    problem = lp([1.0, 2.0], [[1.0, 1.0]], [1.0], [0, 0], [1, 1], binaries=(0, 1))
    out = solve_milp(problem)
    assert out.nodes == 1
    assert out.values == pytest.approx([1.0, 0.0])


def test_milp_exclusive_binaries():
    # a1 + a2 + s = 1 with slack s >= 0
    problem = lp([-1.0, -1.0, 0.0], [[1.0, 1.0, 1.0]], [1.0], [0, 0, 0], [1, 1, 1], binaries=(0, 1))
    out = solve_milp(problem)
    assert out.objective_value == pytest.approx(-1.0)
    assert out.values[0] + out.values[1] == pytest.approx(1.0)


def test_milp_fractional_relaxation_branches():
    # knapsack: relaxation is fractional
    c = [-5.0, -4.0, -3.0, 0.0]
    problem = lp(c, [[2.0, 3.0, 1.0, 1.0]], [4.0], [0, 0, 0, 0], [1, 1, 1, INF], binaries=(0, 1, 2))
    out = solve_milp(problem)
    assert out.objective_value == pytest.approx(-8.0)
    assert out.nodes > 1


def test_random_milps_match_enumeration():
    rng = np.random.default_rng(23)
    for _ in range(20):
        n_bin, n_cont, m = 4, 3, 2
        n = n_bin + n_cont
        a = np.round(rng.uniform(-3, 3, (m, n)), 3)
        lo = np.concatenate([np.zeros(n_bin), rng.uniform(-3, 0, n_cont)])
        up = np.concatenate([np.ones(n_bin), lo[n_bin:] + rng.uniform(1, 5, n_cont)])
        x0 = np.concatenate([rng.integers(0, 2, n_bin), rng.uniform(lo[n_bin:], up[n_bin:])])
        c = np.round(rng.uniform(-5, 5, n), 3)
        problem = lp(c, a, a @ x0, lo, up, binaries=tuple(range(n_bin)))
        expected = enumerate_binaries(c, a, a @ x0, lo, up, list(range(n_bin)))
        out = solve_milp(problem)
        assert out.optimal
        assert out.objective_value == pytest.approx(expected, abs=1e-9)
        bins = out.values[:n_bin]
        assert np.all(np.abs(bins - np.round(bins)) <= 1e-6)
        check_solution(problem, out)
        inc = np.array(out.incumbent_trace)
        assert np.all(np.diff(inc) <= 0)
        assert all(out.objective_value <= b + 1e-9 * max(1.0, abs(b)) for b in out.pruned_bounds)


def test_node_limit_is_explicit():
    rng = np.random.default_rng(2)
    n = 12
    w = rng.uniform(1, 2, n)
    problem = lp(np.concatenate([-w * 1.01, [0.0]]), [np.concatenate([w, [1.0]])], [w.sum() / 2],
                 np.zeros(n + 1), np.concatenate([np.ones(n), [INF]]), binaries=tuple(range(n)))
    with pytest.raises(NodeLimitError):
        solve_milp(problem, node_limit=3)
