import pytest
from hypothesis import given, settings

from awb.algebra import bind, identity_aut
from awb.core import (ActionSet, Automaton, Behaviour, ModelError, Motion, appearance,
                      behaviours, is_linear, is_linearizable, linear_motions, linearize,
                      reachable, reduced_appearance, validate)
from awb.models import L, fork, philosopher

from strategies import automata


def test_actionset_invariants():
    assert L.actions == ("tau", "lock", "unlock")
    assert L.nontrivial == ("lock", "unlock")
    with pytest.raises(ModelError):
        ActionSet("X", ("a", "a"))
    with pytest.raises(ModelError):
        ActionSet("X", ("a",), reflexive=3)
    with pytest.raises(ModelError):
        L.index("eat")


def test_validate_philosopher_clean():
    assert validate(philosopher()) == []
    assert validate(fork()) == []


def test_validate_reflexive_with_label():
    p = philosopher()
    motions = list(p.motions)
    m = motions[0]
    motions[0] = Motion(m.source, m.target, (1, 0), True, m.key)
    bad = Automaton(p.boundaries, p.states, motions, p.reflexive_of, p.initial, p.split)
    problems = validate(bad)
    assert len(problems) == 1 and "idle" in problems[0]


def test_validate_wrong_arity():
    p = philosopher()
    motions = list(p.motions) + [Motion(0, 1, (1,), False, "short")]
    bad = Automaton(p.boundaries, p.states, motions, p.reflexive_of, p.initial, p.split)
    assert any("1 labels for 2" in x for x in validate(bad))


def test_build_rejects_bad_input():
    with pytest.raises(ModelError):
        Automaton.build([L], [0], [(0, 1, ["lock"])])
    with pytest.raises(ModelError):
        Automaton.build([L], [0], [(0, 0, ["lock", "tau"])])
    with pytest.raises(ModelError):
        Automaton.build([L], [0, 0], [])
    with pytest.raises(ModelError):
        Automaton.build([L], [0], [], initial=5)


def _cycle(p):
    return Behaviour(0, tuple(p.motion_index[k] for k in "abcd"))


def test_appearance_philosopher():
    p = philosopher()
    b = _cycle(p)
    assert appearance(p, b, 0) == ("lock", "tau", "unlock", "tau")
    assert reduced_appearance(p, b, 0) == ("lock", "unlock")
    assert appearance(p, Behaviour(2), 1) == ()


def test_appearance_fork():
    q = fork()
    b = Behaviour(q.state("u"), (q.motion_index["ll"], q.motion_index["lu"]))
    assert appearance(q, b, 1) == ("tau", "tau")
    assert reduced_appearance(q, b, 0) == ("lock", "unlock")
    idle = Behaviour(0, (q.reflexive_of[0],) * 3)
    assert reduced_appearance(q, idle, 0) == ()


def test_appearance_errors():
    p = philosopher()
    with pytest.raises(ModelError):
        appearance(p, _cycle(p), 2)
    with pytest.raises(ModelError):
        appearance(p, Behaviour(1, (p.motion_index["a"],)), 0)


@settings(max_examples=60, deadline=None)
@given(automata())
def test_reduced_appearance_subsequence(a):
    for b in behaviours(a, 3):
        for i in range(len(a.boundaries)):
            full = appearance(a, b, i)
            red = reduced_appearance(a, b, i)
            it = iter(full)
            assert all(x in it for x in red)
            trivial = any(a.motions[m].labels[i] == 0 for m in b.steps)
            assert (red == full) == (not trivial)


@settings(max_examples=60, deadline=None)
@given(automata())
def test_reachable_idempotent(a):
    for v in a.states:
        r = reachable(a, v)
        rr = reachable(r, v)
        assert r.states == rr.states
        assert [m.key for m in r.motions] == [m.key for m in rr.motions]
        assert r.initial_label == v


def test_reachable_single_state():
    a = Automaton.build([L], ["*"], [], initial="*")
    assert reachable(a).states == ("*",)
    with pytest.raises(ModelError):
        reachable(a, "nope")


def test_linearity():
    assert is_linear(philosopher()) and is_linear(fork())
    assert not is_linear(identity_aut(L))
    assert not is_linear(bind(philosopher(), fork()))
    p = philosopher()
    assert linear_motions(p) == list(range(len(p.motions)))
    assert linearize(p) is p


def test_linearize_identity():
    lin = linearize(identity_aut(L))
    assert len(lin.states) == 1
    assert [m.reflexive for m in lin.motions] == [True]


def test_linearized_reachable_binding():
    """P bound to Q from (0,u), linearized: the six-state picture with nine arrows."""
    b = bind(philosopher(), fork())
    lin = linearize(reachable(b))
    assert set(lin.states) == {(0, "u"), (0, "r"), (1, "u"), (1, "r"), (2, "l"), (3, "l")}
    edges = {(lin.states[m.source], lin.states[m.target], lin.label_names(i))
             for i, m in enumerate(lin.motions) if not m.reflexive}
    T = "tau"
    assert edges == {
        ((3, "l"), (0, "u"), (T, T)), ((0, "u"), (1, "u"), ("lock", T)),
        ((0, "u"), (0, "r"), (T, "lock")), ((0, "r"), (0, "u"), (T, "unlock")),
        ((0, "r"), (1, "r"), ("lock", T)), ((2, "l"), (3, "l"), ("unlock", T)),
        ((1, "u"), (2, "l"), (T, T)), ((1, "u"), (1, "r"), (T, "lock")),
        ((1, "r"), (1, "u"), (T, "unlock")),
    }


@settings(max_examples=60, deadline=None)
@given(automata())
def test_linearize_fixed_point_iff_linear(a):
    assert (linearize(a) is a) == is_linear(a)
    assert is_linear(linearize(a))


def test_linearizable_examples():
    assert is_linearizable(bind(philosopher(), fork()))
    assert is_linearizable(philosopher())
    x = ActionSet.of("X", ["a", "b"])
    one = Automaton.build([x, x], [0], [(0, 0, ["a", "b"])], split=1)
    res = is_linearizable(one)
    assert not res and res.failure is not None


def test_linearizable_refinements_are_paths():
    b = bind(philosopher(), fork())
    res = is_linearizable(b)
    for (e, order), path in res.refinements.items():
        at = b.motions[e].source
        for m in path:
            assert b.motions[m].source == at
            at = b.motions[m].target
        assert at == b.motions[e].target


@settings(max_examples=40, deadline=None)
@given(automata(max_motions=3, name="S"), automata(max_motions=3, name="T"))
def test_bind_of_linear_is_linearizable(s, t):
    s, t = linearize(s), linearize(t)
    assert is_linearizable(bind(s, t))
