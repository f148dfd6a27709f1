import itertools

import pytest
from hypothesis import given, settings

from awb import models
from awb.algebra import bind, product
from awb.checker import (StateBudgetExceeded, bfs_deadlocks, max_states_default,
                         minimal_introspective_subsystem, misa_deadlocks,
                         product_deadlock_analysis, reachable_states, watch_sets, watching,
                         watching_graph)
from awb.core import ActionSet, Automaton, ModelError, reachable_states as local_reachable
from awb.design import System, Var, successors
from awb.models import L, fork, philosopher

from strategies import automata

ORACLE_LIMIT = 100_000


def _replay(sys, path):
    g = sys.initial
    for keys in path:
        nxt = [t for gm, t in successors(sys, g) if gm.keys(sys) == keys]
        assert nxt, (g, keys)
        g = nxt[0]
    return g


def test_bfs_phil3(phil3):
    r = bfs_deadlocks(phil3)
    assert r.explored == 26 and r.reachable == 26
    assert r.deadlocks == [(1, "r", 1, "r", 1, "r")]
    assert r.complete and r.algorithm == "bfs"


def test_bfs_qring_and_lossy():
    r = bfs_deadlocks(models.q_ring(3))
    assert r.explored == 4 and r.deadlocks == []
    assert bfs_deadlocks(models.ack_protocol(["m"], "lossy")).deadlocks


def test_deadlocks_have_no_successors():
    for s in (models.philosophers(3), models.philosophers(3, "doubleCover"),
              models.ack_protocol(["m"], "lossy")):
        for g in bfs_deadlocks(s).deadlocks:
            assert successors(s, g) == []


def test_witnesses_replay(phil3):
    for fn in (bfs_deadlocks, misa_deadlocks):
        for mode in ("all", "atomic"):
            r = fn(phil3, mode, witness=True)
            assert len(r.witnesses) == len(r.deadlocks)
            for d, w in zip(r.deadlocks, r.witnesses):
                assert _replay(phil3, w) == d


def test_initially_deadlocked():
    x = ActionSet.of("Z", ["z"])
    a = Automaton.build([], ["stuck"], [], initial="stuck", name="A")
    s = System.of(Var.of(a, "a"), [a], "stuck")
    for fn in (bfs_deadlocks, misa_deadlocks):
        r = fn(s)
        assert r.explored == 1 and r.deadlocks == [("stuck",)]
    b = Automaton.build([x], [0, 1], [(0, 1, ["z"])], initial=0, name="B")
    with pytest.raises(ModelError):
        bfs_deadlocks(System.of(Var.of(b, "b"), [b], "open"), "atomic")


# -- watching ------------------------------------------------------------------------------

def test_watching_local():
    p, q = philosopher(), fork()
    assert watching(p, p.state(0)) == {0}
    assert watching(p, p.state(1)) == {1}
    assert watching(p, p.state(2)) == {0}
    assert watching(p, p.state(3)) == {1}
    assert watching(q, q.state("u")) == {0, 1}
    assert watching(q, q.state("l")) == {0}
    assert watching(q, q.state("r")) == {1}
    stuck = Automaton.build([L, L], ["x"], [], split=1)
    assert watching(stuck, 0) == set()


def test_watch_sets_system(phil3):
    ws = watch_sets(phil3, (1, "u", 0, "u", 0, "r"))
    assert ws.of("p1") == {1} and ws.of("f1") == {0, 1} and ws.of("f3") == {1}
    g = watching_graph(phil3, phil3.initial)
    assert g[0] == {5} and g[1] == {0, 2}


# -- minimal introspective subsystems ----------------------------------------------------------

def test_mis_initial(phil3):
    assert minimal_introspective_subsystem(phil3, phil3.initial) == tuple(range(6))


def test_mis_after_left_lock(phil3):
    # p1 took the fork on its left (f3)
    assert minimal_introspective_subsystem(phil3, (1, "u", 0, "u", 0, "r")) == (0, 1, 2)


def test_mis_holding_both(phil3):
    assert minimal_introspective_subsystem(phil3, (2, "l", 0, "u", 0, "r")) == (0, 5)


def test_mis_global_deadlock(phil3):
    with pytest.raises(ModelError, match="deadlock"):
        minimal_introspective_subsystem(phil3, (1, "r", 1, "r", 1, "r"))


def _closure(graph, c):
    out, todo = {c}, [c]
    while todo:
        for d in graph[todo.pop()]:
            if d not in out:
                out.add(d)
                todo.append(d)
    return out


def _can_move(sys, g, subset):
    for gm, _ in successors(sys, g):
        moving = {c for c, (a, m) in enumerate(zip(sys.automata, gm.motions))
                  if not a.motions[m].reflexive}
        if moving <= subset:
            return True
    return False


@pytest.mark.parametrize("system", [models.philosophers(3), models.philosophers(3, "nondet"),
                                    models.scheduler(2)], ids=lambda s: s.name)
def test_mis_recomputed(system):
    """The chosen set is a watching closure, can move, and no smaller closure can."""
    for g in sorted(reachable_states(system), key=str):
        if not successors(system, g):
            continue
        graph = watching_graph(system, g)
        got = set(minimal_introspective_subsystem(system, g))
        closures = [_closure(graph, c) for c in graph]
        assert got in closures
        assert _can_move(system, g, got)
        live = [c for c in closures if _can_move(system, g, c)]
        best = min(live, key=lambda c: (len(c), sorted(c)))
        assert got == best


# -- misa ---------------------------------------------------------------------------------

@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_misa_polynomial(n):
    r = misa_deadlocks(models.philosophers(n), "atomic")
    assert r.explored == 3 * n * n - 3 * n + 2
    assert r.deadlocks == [tuple([1, "r"] * n)]
    assert r.reachable is None


def test_misa_double_cover_n4():
    s = models.philosophers(4, "doubleCover")
    m = misa_deadlocks(s, "atomic")
    assert m.explored > 3 * 16 - 12 + 2
    assert m.deadlock_set == bfs_deadlocks(s).deadlock_set


@pytest.mark.parametrize("system", [s for s in models.zoo(4)], ids=lambda s: s.name)
def test_misa_matches_bfs_on_zoo(system):
    b = bfs_deadlocks(system, max_states=ORACLE_LIMIT)
    m = misa_deadlocks(system)
    assert m.deadlock_set == b.deadlock_set
    assert m.explored <= b.explored
    if system.atomic_ready() is None:
        ma = misa_deadlocks(system, "atomic")
        assert ma.deadlock_set == b.deadlock_set
        assert ma.explored <= b.explored


@pytest.mark.parametrize("threads", [2, 4])
def test_threads_deterministic(threads):
    for s in (models.philosophers(5), models.philosophers(3, "doubleCover"), models.scheduler(3)):
        for fn in (bfs_deadlocks, misa_deadlocks):
            one = fn(s)
            many = fn(s, threads=threads)
            assert (one.explored, one.deadlocks) == (many.explored, many.deadlocks)
            assert one.to_json(stable=True) == many.to_json(stable=True)


def test_budget():
    s = models.philosophers(4)
    with pytest.raises(StateBudgetExceeded) as exc:
        bfs_deadlocks(s, max_states=10)
    assert not exc.value.report.complete
    assert exc.value.report.explored == 10
    with pytest.raises(StateBudgetExceeded):
        misa_deadlocks(s, threads=2, max_states=5)


def test_budget_env(monkeypatch):
    monkeypatch.setenv("AWB_MAX_STATES", "7")
    assert max_states_default() == 7
    with pytest.raises(StateBudgetExceeded):
        bfs_deadlocks(models.philosophers(3))
    monkeypatch.setenv("AWB_MAX_STATES", "lots")
    with pytest.raises(ModelError):
        max_states_default()
    monkeypatch.delenv("AWB_MAX_STATES")
    assert max_states_default() == 5_000_000


def test_report_json(phil3):
    import json
    r = misa_deadlocks(phil3, "atomic")
    d = json.loads(r.to_json("check"))
    assert set(d) == {"command", "system", "algorithm", "mode", "explored", "reachable",
                      "deadlocks", "witnesses", "elapsed_ms", "complete"}
    assert d["deadlocks"] == [{"p1": "1", "f1": "r", "p2": "1", "f2": "r", "p3": "1", "f3": "r"}]
    assert r.to_json(stable=True) == misa_deadlocks(phil3, "atomic").to_json(stable=True)


# -- product analysis -------------------------------------------------------------------------

def _chain(name):
    return Automaton.build([], [0, "d"], [(0, "d", [], "go")], initial=0, name=name)


def _full_product_deadlocks(s, t):
    p = product(s, t)
    return {p.states[v] for v in local_reachable(p, p.initial) if p.is_deadlock(v)}


def test_product_chains():
    s, t = _chain("S"), _chain("T")
    for strength in ("weak", "strong"):
        res = product_deadlock_analysis(s, t, strength)
        assert res.report.explored <= 4
        assert res.report.deadlocks == [("d", "d")]
        assert set(res.report.deadlocks) == _full_product_deadlocks(s, t)


def test_product_no_deadlocks():
    p = philosopher()
    res = product_deadlock_analysis(p, p, "strong")
    assert res.report.deadlocks == [] and res.report.explored <= 8
    t = Automaton.build([], [0, 1], [(0, 1, [], "x"), (1, 0, [], "y")], initial=0)
    assert product_deadlock_analysis(_chain("S"), t).report.deadlocks == []


def test_product_weak_vs_strong():
    # two reachable deadlocks in s; weak follows only the first
    s = Automaton.build([], [0, "d1", "d2"], [(0, "d1", [], "a"), (0, "d2", [], "b")],
                        initial=0, name="S")
    t = _chain("T")
    weak = product_deadlock_analysis(s, t, "weak").report
    strong = product_deadlock_analysis(s, t, "strong").report
    assert len(weak.deadlocks) == 1 and weak.deadlocks[0] in strong.deadlock_set
    assert strong.deadlock_set == _full_product_deadlocks(s, t)
    assert weak.explored < strong.explored


def test_product_errors():
    a = Automaton.build([], [0], [])
    with pytest.raises(ModelError):
        product_deadlock_analysis(a, _chain("T"))
    with pytest.raises(ModelError):
        product_deadlock_analysis(_chain("S"), _chain("T"), "medium")


# -- ignoring components ----------------------------------------------------------------------

def _dead_from(a, v):
    return {w for w in local_reachable(a, v) if a.is_deadlock(w)}


@settings(max_examples=150, deadline=None)
@given(automata(name="S"), automata(name="T"))
def test_ignoring_component_moves_first(s, t):
    """From (v, w) with S ignoring the glue and able to move, every reachable deadlock
    is reachable through a first step in which T stays put."""
    b = bind(s, t)
    nt = len(t.states)
    for v, w in itertools.product(range(len(s.states)), range(nt)):
        out = [s.motions[m] for m in s.out_motions[v]]
        if all(m.reflexive for m in out) or any(m.labels[1] != 0 for m in out):
            continue
        src = v * nt + w
        via = set()
        for m in b.out_motions[src]:
            mo = b.motions[m]
            if not mo.reflexive and t.motions[t.motion_index[mo.key[1]]].reflexive:
                via |= _dead_from(b, mo.target)
        assert _dead_from(b, src) <= via
