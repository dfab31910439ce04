import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import all_traces, naive_eval, random_formula, state_of
from pastplan.formula import (
    FALSE,
    TRUE,
    And,
    Atom,
    FormulaSyntaxError,
    Historically,
    Monitor,
    Not,
    Once,
    Or,
    Since,
    WeakYesterday,
    Yesterday,
    conjoin,
    eval_trace,
    format_trace,
    initial_memory,
    is_temporal,
    memory_set,
    parse_formula,
    parse_trace,
    step_val,
    subformulas,
    to_text,
)

a, b, c = Atom("a"), Atom("b"), Atom("c")
ATOMS = [a, b, c]

G2 = "O(isat(robot1,ballposition)) & O(goalscored) & (ballsafe S isat(robot1,ballposition))"


def tr(*states):
    return [frozenset(Atom(x) for x in s) for s in states]


# ---------------------------------------------------------------- parsing


@pytest.mark.parametrize(
    "text, expected",
    [
        ("a", a),
        ("true", TRUE),
        ("false", FALSE),
        ("!a", Not(a)),
        ("Y a", Yesterday(a)),
        ("WY a", WeakYesterday(a)),
        ("O H a", Once(Historically(a))),
        ("a & b | c", Or(And(a, b), c)),
        ("a | b & c", Or(a, And(b, c))),
        ("a S b & c", And(Since(a, b), c)),
        ("a S b S c", Since(Since(a, b), c)),
        ("a -> b", Or(Not(a), b)),
        ("a -> b -> c", Or(Not(a), Or(Not(b), c))),
        ("isat(robot1, ball)", Atom("isat", ("robot1", "ball"))),
        ("\n  ( a )\n", a),
    ],
)
def test_parse_examples(text, expected):
    assert parse_formula(text) == expected


@pytest.mark.parametrize(
    "text, line, column",
    [
        ("", 1, 1),
        ("a &", 1, 4),
        ("(a", 1, 3),
        ("a b", 1, 3),
        ("X a", 1, 1),
        ("a\n  & $", 2, 5),
        ("true(x)", 1, 1),
        ("p(false)", 1, 3),
        ("p(,)", 1, 3),
    ],
)
def test_parse_errors_carry_position(text, line, column):
    with pytest.raises(FormulaSyntaxError) as err:
        parse_formula(text)
    assert (err.value.line, err.value.column) == (line, column)


def test_reserved_word_message():
    with pytest.raises(FormulaSyntaxError, match="reserved word 'true'"):
        parse_formula("O true(x)")


def test_atom_constructor_validates():
    with pytest.raises(ValueError):
        Atom("Bad")
    with pytest.raises(ValueError):
        Atom("p", ("true",))
    assert Atom("p", ["x"]).args == ("x",)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 5))
def test_text_round_trip(seed, depth):
    phi = random_formula(random.Random(seed), ATOMS + [Atom("p", ("x", "y"))], depth)
    assert parse_formula(to_text(phi)) == _desugar(phi)


def _desugar(phi):
    # the parser has no implication node; it reads a -> b as !a | b
    from pastplan.formula import Implies

    if isinstance(phi, Implies):
        return Or(Not(_desugar(phi.left)), _desugar(phi.right))
    if not phi.children:
        return phi
    return type(phi)(*(_desugar(x) for x in phi.children))


# ----------------------------------------------------------- sub-formulas


def test_subformulas_of_triple_goal():
    names = [to_text(f) for f in subformulas(parse_formula(G2))]
    assert names == [
        "isat(robot1,ballposition)",
        "O(isat(robot1,ballposition))",
        "goalscored",
        "O(goalscored)",
        "O(isat(robot1,ballposition)) & O(goalscored)",
        "ballsafe",
        "ballsafe S isat(robot1,ballposition)",
        G2.replace("(ballsafe S isat(robot1,ballposition))", "ballsafe S isat(robot1,ballposition)"),
    ]


def test_subformulas_shared_nodes_counted_once():
    phi = parse_formula("O a & (O a | a)")
    assert len(subformulas(phi)) == 4
    assert subformulas(phi)[-1] == phi


def test_memory_set_names_follow_position():
    assert sorted(memory_set(parse_formula(G2)).values()) == ["mem_1", "mem_3", "mem_6"]
    assert memory_set(parse_formula("a & b")) == {}
    assert memory_set(parse_formula("O a"), prefix="m") == {Once(a): "m_1"}


def test_initial_memory_values():
    init = initial_memory(parse_formula("Y a & WY a & O a & H a & a S b"))
    assert init == {
        Yesterday(a): False,
        WeakYesterday(a): True,
        Once(a): False,
        Historically(a): True,
        Since(a, b): False,
    }


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_memory_bound(seed):
    phi = random_formula(random.Random(seed), ATOMS, 5)
    assert len(memory_set(phi)) <= sum(1 for f in subformulas(phi) if is_temporal(f))
    assert len(subformulas(phi)) <= phi.size


# ------------------------------------------------------------- evaluation


@pytest.mark.parametrize(
    "text, trace, expected",
    [
        ("Y a", tr("a"), False),
        ("WY a", tr(""), True),
        ("Y a", tr("a", ""), True),
        ("O a", tr("a", "", ""), True),
        ("O a", tr("", "", ""), False),
        ("H a", tr("a", "a", ""), False),
        ("H a", tr("a", "a", "a"), True),
        ("a S b", tr("b", "a", "a"), True),
        ("a S b", tr("b", "", "a"), False),
        ("a S b", tr("", "", "b"), True),
        ("O(a & Y b)", tr("b", "a"), True),
        ("O(a & Y b)", tr("a", "b"), False),
    ],
)
def test_eval_examples(text, trace, expected):
    assert eval_trace(parse_formula(text), trace) is expected


def test_eval_empty_trace_rejected():
    with pytest.raises(ValueError):
        eval_trace(a, [])


def test_step_val_threads_memory():
    phi = parse_formula("a S b")
    sigma = initial_memory(phi)
    truths = []
    for state in tr("b", "a", ""):
        truth, sigma = step_val(phi, sigma, state)
        truths.append(truth[phi])
    assert truths == [True, True, False]


def test_step_val_missing_cell():
    with pytest.raises(KeyError):
        step_val(parse_formula("O a"), {}, frozenset())


def test_monitor_snapshot_restore():
    m = Monitor(parse_formula("O a"))
    snap = m.snapshot()
    assert m.step(frozenset({a})) is True
    m.restore(snap)
    assert m.step(frozenset()) is False
    assert m.valuation() == {Once(a): False}


def test_exhaustive_against_oracle_small():
    for text in ["a S (b & Y a)", "H(a -> O b)", "WY(a S !b)", "O(a & Y(H b))"]:
        phi = parse_formula(text)
        for trace in all_traces([a, b], 4):
            assert eval_trace(phi, trace) == naive_eval(phi, trace), (text, trace)


# ------------------------------------------------------------- properties

traces = st.lists(st.integers(0, 7), min_size=1, max_size=8).map(
    lambda codes: [state_of(x, ATOMS) for x in codes]
)
formulas = st.builds(lambda s, d: random_formula(random.Random(s), ATOMS, d),
                     st.integers(0, 2**32 - 1), st.integers(0, 4))


@settings(max_examples=300, deadline=None)
@given(formulas, traces)
def test_duality(phi, trace):
    assert eval_trace(Historically(phi), trace) == eval_trace(Not(Once(Not(phi))), trace)
    assert eval_trace(Once(phi), trace) == eval_trace(Since(TRUE, phi), trace)
    assert eval_trace(WeakYesterday(phi), trace) == eval_trace(Not(Yesterday(Not(phi))), trace)


@settings(max_examples=300, deadline=None)
@given(formulas, traces, traces)
def test_once_is_monotone_in_extension(phi, prefix, suffix):
    if eval_trace(Once(phi), prefix):
        assert eval_trace(Once(phi), prefix + suffix)


@settings(max_examples=200, deadline=None)
@given(formulas, traces)
def test_monitor_agrees_with_step_val(phi, trace):
    m = Monitor(phi)
    sigma = initial_memory(phi)
    for state in trace:
        truth, sigma = step_val(phi, sigma, state)
        assert m.step(state) == truth[phi]


def test_conjoin():
    assert conjoin([]) == TRUE
    assert conjoin([a]) == a
    assert conjoin([a, b, c]) == And(And(a, b), c)


# --------------------------------------------------------------- trace IO


def test_trace_round_trip():
    trace = [frozenset({a, Atom("isat", ("r", "x"))}), frozenset(), frozenset({b})]
    text = format_trace(trace)
    assert text == "a,isat(r,x)\n\nb\n"
    assert parse_trace(text) == trace


def test_trace_comments():
    assert parse_trace("# header\na  # tail\nb\n") == tr("a", "b")
