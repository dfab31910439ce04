import random
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import random_instance, to_fond
from pastplan.compiler import compile_goal
from pastplan.fond import ground, parse_domain, parse_problem
from pastplan.formula import parse_formula
from pastplan.pipeline import PlayConfig, play
from pastplan.planner import (
    MODES,
    STRONG,
    STRONG_CYCLIC,
    enumerate_traces,
    export_dot,
    plan,
    policy_from_json,
    policy_to_json,
    reachable_states,
    verify_policy,
)

SCENARIOS = "src/pastplan/data/scenarios/"

# one action that may fail and leave the state unchanged
RETRY = """
(define (domain retry)
  (:requirements :strips :non-deterministic)
  (:predicates (p) (q))
  (:action try :parameters () :precondition (and) :effect (oneof (p) (and))))
"""

# the goal atom q is never added
DEAD = """
(define (domain dead)
  (:requirements :strips)
  (:predicates (p) (q))
  (:action go :parameters () :precondition (and) :effect (p)))
"""


def model_of(text, init="", goal="(q)"):
    d = parse_domain(text)
    p = parse_problem(f"(define (problem x) (:domain {d.name}) (:init {init}) (:goal {goal}))", d)
    return ground(d, p)


@pytest.fixture(scope="module")
def runs():
    out = {}
    for scn in ("ball_only", "soda_cans"):
        for mode in MODES:
            out[scn, mode] = play(PlayConfig(SCENARIOS + scn + ".scn", mode=mode))
    return out


def test_g0_single_action(runs):
    for mode in MODES:
        r = runs["ball_only", mode]
        assert r.policy.actions == {"moveto robot1 ball ballposition"}
        assert len(r.policy) == 1


def test_goal_already_true():
    m = model_of(DEAD, "(q)")
    for mode in MODES:
        pol = plan(m, mode)
        assert pol and len(pol) == 0
        assert verify_policy(m, pol, parse_formula("q"), 1).valid


def test_unreachable_goal():
    m = model_of(DEAD)
    for mode in MODES:
        res = plan(m, mode)
        assert not res
        assert res.mode == mode


def test_unknown_mode():
    with pytest.raises(ValueError):
        plan(model_of(DEAD), "weak")


def test_strong_cyclic_only():
    m = model_of(RETRY, goal="(p)")
    assert not plan(m, STRONG)
    pol = plan(m, STRONG_CYCLIC)
    assert pol.table == {frozenset(): "try"}
    assert verify_policy(m, pol, parse_formula("p"), 3).valid


def test_g1_verifies_across_kick_outcomes(runs):
    r = runs["soda_cans", STRONG_CYCLIC]
    assert "kick robot1 ball ballposition goal1 goalposition" in r.policy.actions
    assert r.verdict.valid and r.verdict.traces_checked == 2
    statuses = [s for _, _, s in enumerate_traces(r.model, r.policy, 10)]
    assert statuses == ["goal", "goal"]


def test_g0_traces_length_one(runs):
    r = runs["ball_only", STRONG]
    traces = list(enumerate_traces(r.model, r.policy, 5))
    assert [(len(a), s) for _, a, s in traces] == [(1, "goal")]


def test_corrupted_policy_gives_counterexample(runs):
    for mode in MODES:
        r = runs["soda_cans", mode]
        table = dict(r.policy.table)
        del table[next(s for s in r.policy.states() if s in table and s != r.policy.initial)]
        broken = replace(r.policy, table=table)
        verdict = verify_policy(r.model, broken, r.goal, 20, r.cmap.memory_names)
        assert not verdict.valid
        assert verdict.counterexample


def test_horizon_must_be_positive(runs):
    r = runs["ball_only", STRONG]
    with pytest.raises(ValueError):
        verify_policy(r.model, r.policy, r.goal, 0)


def test_dot_empty_policy():
    pol = plan(model_of(DEAD, "(q)"), STRONG)
    dot = export_dot(pol)
    assert dot.count("[label=") == 1 and "->" not in dot and "peripheries=2" in dot


def test_dot_g0(runs):
    r = runs["ball_only", STRONG]
    dot = export_dot(r.policy, r.cmap.memory_names)
    assert dot.count("shape=box") == 1
    assert dot.count("->") == 1
    assert len([ln for ln in dot.splitlines() if ln.strip().startswith("s") and "->" not in ln]) == 2
    assert "mem_" not in dot


def test_dot_g1_branches(runs):
    # frozen from enumeration: strong is a three-step chain, strong-cyclic
    # branches on the kick and has six runtime-fluent combinations
    strong = export_dot(runs["soda_cans", STRONG].policy)
    cyclic = export_dot(runs["soda_cans", STRONG_CYCLIC].policy)
    assert strong.count("->") == 3 and "[0]" not in strong
    assert cyclic.count("->") == 5
    assert cyclic.count("[0]") == 1 and cyclic.count("[1]") == 1
    assert len(runs["soda_cans", STRONG_CYCLIC].policy.states()) == 6


def test_json_round_trip(runs):
    for r in runs.values():
        text = policy_to_json(r.policy)
        back = policy_from_json(text)
        assert back.table == r.policy.table
        assert back.successors == r.policy.successors
        assert back.goals == r.policy.goals
        assert policy_to_json(back) == text


def test_export_is_deterministic():
    a = play(PlayConfig(SCENARIOS + "four_posts.scn", mode=STRONG_CYCLIC))
    b = play(PlayConfig(SCENARIOS + "four_posts.scn", mode=STRONG_CYCLIC))
    assert policy_to_json(a.policy) == policy_to_json(b.policy)
    assert export_dot(a.policy) == export_dot(b.policy)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_strong_implies_cyclic_and_plans_verify(seed):
    inst = random_instance(random.Random(seed))
    d, p = to_fond(inst)
    d2, p2, cmap = compile_goal(d, p, inst.goal)
    m = ground(d2, p2)
    horizon = reachable_states(m)
    strong = plan(m, STRONG)
    cyclic = plan(m, STRONG_CYCLIC)
    if strong:
        assert cyclic
        assert verify_policy(m, strong, inst.goal, horizon, cmap.memory_names).valid
    if cyclic:
        assert verify_policy(m, cyclic, inst.goal, horizon, cmap.memory_names).valid


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_policy_closure(seed):
    inst = random_instance(random.Random(seed))
    d, p = to_fond(inst)
    d2, p2, _ = compile_goal(d, p, inst.goal)
    m = ground(d2, p2)
    for mode in MODES:
        pol = plan(m, mode)
        if not pol:
            continue
        for s, name in pol.table.items():
            assert name in {a.name for a in m.actions}
            for t in pol.successors[s]:
                assert t in pol.table or t in pol.goals
