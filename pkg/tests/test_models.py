from pathlib import Path

import pytest

from awb import models
from awb.algebra import isomorphic
from awb.checker import bfs_deadlocks
from awb.core import Automaton, ModelError, is_linear, reachable, validate
from awb.design import state_count
from awb.modelfile import fingerprint, load, render
from awb.models import (A, designed_channel, message_passer, message_set, philosopher_double,
                        philosopher_nondet)

MODELS = Path(__file__).resolve().parent.parent / "models"


def test_variant_sizes():
    assert len(philosopher_nondet().states) == 7
    assert len(philosopher_double().states) == 8
    assert philosopher_double().initial_label == 0


@pytest.mark.parametrize("n", range(2, 8))
def test_ring_reachable(n):
    r = bfs_deadlocks(models.philosophers(n))
    assert r.explored == 3 ** n - 1
    facts = models.philosophers_facts(n)
    assert r.explored == facts["reachable"] and r.deadlocks == facts["deadlocks"]
    assert state_count(models.philosophers(n)) == facts["states"]


def test_generator_errors():
    with pytest.raises(ModelError):
        models.philosophers(1)
    with pytest.raises(ModelError):
        models.philosophers(3, "vegan")
    with pytest.raises(ModelError):
        models.scheduler(0)
    with pytest.raises(ModelError):
        message_set([])
    with pytest.raises(ModelError):
        models.ack_protocol(["m"], "pigeon")


@pytest.mark.parametrize("system", models.zoo(4), ids=lambda s: s.name)
def test_zoo_components_valid_and_linear(system):
    for comp, a in zip(system.diagram.components, system.automata):
        assert validate(a) == []
        assert is_linear(a) == (comp.kind == "var")


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_scheduler(n):
    assert bfs_deadlocks(models.scheduler(n)).deadlocks == []
    ring = bfs_deadlocks(models.q_ring(n))
    assert ring.explored == n + 1 and ring.deadlocks == []


def test_q_ring_is_a_cycle():
    from awb.design import successors
    s = models.q_ring(3)
    g, seen = s.initial, []
    for _ in range(4):
        seen.append(g)
        succ = successors(s, g)
        assert len(succ) == 1
        g = succ[0][1]
    assert g == s.initial and len(set(seen)) == 4


def test_channels():
    X = message_set(["m1", "m2"])
    assert len(message_passer(X).states) == 3
    cap = models.capacity1(X)
    drops = [m for m in cap.motions if not m.reflexive and m.source == m.target]
    assert len(drops) == 4
    lossy = models.lossy(X)
    assert len(lossy.motions) == len(cap.motions) + 2


def test_designed_channel_shape():
    a = reachable(designed_channel(["m"], "capacity1"))
    X = message_set(["m"])
    ring = [("s0", "s1", ["m", "tau"]), ("s1", "s2", ["tau", "tau"]),
            ("s2", "s3", ["tau", "tau"]), ("s3", "s4", ["tau", "m"]),
            ("s4", "s5", ["tau", "tau"]), ("s5", "s0", ["tau", "tau"])]
    cycle = Automaton.build([X, X], [f"s{i}" for i in range(6)], ring, initial="s0", split=1)
    assert isomorphic(a, cycle) is not None
    assert not any(a.is_deadlock(v) for v in range(6))


def test_lossy_deadlocks():
    for msgs in (["m"], ["m1", "m2"]):
        assert bfs_deadlocks(models.ack_protocol(msgs, "lossy")).deadlocks
        assert bfs_deadlocks(models.ack_protocol(msgs, "capacity1")).deadlocks == []


def test_ack_action_set():
    assert A.nontrivial == ("ack",)


@pytest.mark.parametrize("name", ["philosophers.awb", "scheduler.awb", "protocol1.awb",
                                  "protocol2.awb"])
def test_golden_files_current(name):
    """The files under models/ are exactly what the generators emit."""
    golden = models.golden_models()[name]
    text = (MODELS / name).read_text(encoding="utf-8")
    assert text == render(golden)
    assert fingerprint(load(MODELS / name)) == fingerprint(golden)


def test_export(tmp_path):
    paths = models.export_models(tmp_path)
    assert sorted(Path(p).name for p in paths) == sorted(models.golden_models())
