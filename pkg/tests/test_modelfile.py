import pytest
from hypothesis import given, settings

from awb.checker import bfs_deadlocks, misa_deadlocks
from awb.core import ModelError
from awb.modelfile import (ParseError, automaton_fingerprint, fingerprint, parse, render,
                           render_automaton, render_label, tokenize)
from awb.models import golden_models
from awb.simulation import Simulation

from strategies import automata

SMALL = """
# three philosophers
actionset L { lock unlock }

automaton P : (L ; L) {
  states 0 1 2 3
  init 0
  motion 0 -> 1 [lock, tau] as a
  motion 1 -> 2 [tau, lock] as b
  motion 2 -> 3 [unlock, tau] as c
  motion 3 -> 0 [tau, unlock] as d
}

automaton Q : (L ; L) {
  states u l r
  init u
  motion u -> l [lock, tau] as ll
  motion l -> u [unlock, tau] as lu
  motion u -> r [tau, lock] as rl
  motion r -> u [tau, unlock] as ru
}

design D3 = fb<L@0,L@5>((p1:P ; f1:Q) ; (p2:P ; f2:Q) ; (p3:P ; f3:Q))
system phil3 = D3 with { }
system twisted = D3 with { f2 = Q }
simulation self : P => P { state 1 -> 1 motion a -> a }
"""


def _err(text):
    with pytest.raises(ParseError) as exc:
        parse(text)
    return exc.value


def test_parse_small():
    mf = parse(SMALL)
    assert list(mf.automata) == ["P", "Q"]
    s = mf.system("phil3")
    assert s.component_names == ["p1", "f1", "p2", "f2", "p3", "f3"]
    assert bfs_deadlocks(s).explored == 26
    assert misa_deadlocks(s, "atomic").explored == 20
    assert isinstance(mf.verify("self"), Simulation)


def test_design_ports_and_chain():
    mf = parse(SMALL)
    d = mf.designs["D3"]
    assert mf.system("phil3").diagram.open_ports == ()
    text = render(mf)
    assert "design D3 = fb<L@0,L@7>(p1:P ; f1:Q ; (p2:P ; f2:Q) ; (p3:P ; f3:Q))" in text
    assert "system phil3 = fb<L@0,L@7>(" in text
    assert fingerprint(parse(render(mf))) == fingerprint(mf)
    assert d is not None


def test_comments_and_strings():
    text = 'actionset L { lock unlock } # tail\nautomaton "odd name" : (L) { states "a b" x\n' \
           ' init "a b"\n motion "a b" -> x [lock] as "k 1" }'
    mf = parse(text)
    a = mf.automata["odd name"]
    assert a.states == ("a b", "x") and a.motions[-1].key == "k 1"
    assert parse(render(mf)).automata["odd name"].states == a.states


def test_tuple_labels():
    mf = parse("actionset L { lock }\nautomaton A : (L) { states (0, u) (1, (2, r))\n"
               " init (0, u)\n motion (0, u) -> (1, (2, r)) [lock] as (a, ru) }")
    a = mf.automata["A"]
    assert a.states == ((0, "u"), (1, (2, "r")))
    assert a.motions[-1].key == ("a", "ru")


def test_error_undeclared_actionset():
    e = _err("automaton P : (L ; L) { states 0 init 0 }")
    assert "undeclared actionset 'L'" in str(e) and (e.line, e.col) == (1, 16)


def test_error_duplicate():
    e = _err("actionset L { a }\nautomaton P : (L) { states 0 }\nautomaton P : (L) { states 0 }")
    assert "duplicate automaton 'P'" in str(e) and e.line == 3
    e = _err("actionset L { a }\nactionset L { b }")
    assert "duplicate" in str(e) and e.line == 2


def test_error_syntax_location():
    e = _err("actionset L { a }\nautomaton P : (L { states 0 }")
    assert (e.line, e.col) == (2, 18)
    e = _err("actionset L { a }\n\n   bogus")
    assert e.line == 3 and e.col == 4


def test_error_motion_content():
    assert "unknown state 1" in str(_err("actionset L { a }\nautomaton P : (L) { states 0\n"
                                         " motion 0 -> 1 [a] }"))
    assert "not an action" in str(_err("actionset L { a }\nautomaton P : (L) { states 0\n"
                                       " motion 0 -> 0 [zz] }"))
    assert "reserved" in str(_err("actionset L { tau }"))
    e = _err("actionset L { a }\nautomaton P : (L) { states 0\n motion 0 -> 0 [a, a] }")
    assert e.line == 3


def test_error_type_mismatch():
    e = _err("actionset L { a }\nactionset K { b }\nautomaton P : (L;L) { states 0 }\n"
             "automaton R : (K;K) { states 0 }\nsystem s = p:P ; r:R")
    assert "type mismatch" in str(e) and e.line == 5


def test_error_unknown_names():
    assert "unknown automaton 'Nope'" in str(
        _err("actionset L { a }\nautomaton P : (L;L) { states 0 }\nsystem s = p:Nope"))
    assert "duplicate simulation" in str(
        _err("actionset L { a }\nautomaton P : (L;L) { states 0 }\n"
             "simulation x : P => P { }\nsimulation x : P => P { }"))


def test_error_feedback_ports():
    head = SMALL.split("design")[0]
    e = _err(head + "system s = fb<L@0,L@1>((p1:P ; f1:Q) ; (p2:P ; f2:Q))")
    assert "port 1 is not an open port" in str(e) and "open: 0, 3" in str(e)
    e = _err(head + "system s = fb<L@0,L@9>(p1:P ; f1:Q ; p2:P ; f2:Q)")
    assert "port 9" in str(e)
    mf = parse(head + "system s = fb<0,7>(p1:P ; f1:Q ; p2:P ; f2:Q)")
    assert mf.system("s").diagram.open_ports == ()


def test_error_bad_bind_pairs():
    e = _err("actionset L { a }\nautomaton P : (L;L) { states 0 }\nsystem s = p:P ;<x,0> q:P")
    assert e.line == 3


def test_unknown_lookups():
    mf = parse(SMALL)
    for fn in (mf.system, mf.automaton, mf.simulation):
        with pytest.raises(ModelError):
            fn("nothing")


def test_failing_simulation_declaration():
    mf = parse(SMALL + "simulation bad : P => P { state 1 -> 3 }")
    with pytest.raises(ModelError):
        mf.verify("bad")


def test_tokenize_positions():
    toks = tokenize("a ->\n  b")
    assert [(t.text, t.line, t.col) for t in toks][:3] == [("a", 1, 1), ("->", 1, 3),
                                                           ("b", 2, 3)]
    with pytest.raises(ParseError):
        tokenize("a ~ b")


@pytest.mark.parametrize("name", list(golden_models()))
def test_golden_round_trip(name):
    mf = golden_models()[name]
    again = parse(render(mf))
    assert fingerprint(again) == fingerprint(mf)
    assert render(again) == render(mf)
    for sname in mf.systems:
        s1, s2 = mf.system(sname), again.system(sname)
        assert s1.component_names == s2.component_names
        assert s1.diagram == s2.diagram


@settings(max_examples=100, deadline=None)
@given(automata(name="S"))
def test_automaton_round_trip(a):
    text = "actionset X { a b }\n" + render_automaton(a)
    b = parse(text).automata["S"]
    assert automaton_fingerprint(b) == automaton_fingerprint(a)


def test_render_label():
    assert render_label(3) == "3"
    assert render_label("1'") == "1'"
    assert render_label("as") == '"as"'
    assert render_label("7") == '"7"'
    assert render_label((0, ("u", "a b"))) == '(0, (u, "a b"))'
