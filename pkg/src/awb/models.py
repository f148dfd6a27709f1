"""Generators for the worked example systems, with executable expected facts."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .algebra import bind, product, opposite
from .core import ActionSet, Automaton, ModelError
from .design import Bind, Feedback, Opposite, Product, System, Var, chain

L = ActionSet.of("L", ["lock", "unlock"])
C = ActionSet.of("C", ["begin", "end"])
G = ActionSet.of("G", ["go"])
A = ActionSet.of("A", ["ack"])

T = "tau"


# -- dining philosophers -----------------------------------------------------------

def philosopher() -> Automaton:
    return Automaton.build([L, L], [0, 1, 2, 3], [
        (0, 1, ["lock", T], "a"), (1, 2, [T, "lock"], "b"),
        (2, 3, ["unlock", T], "c"), (3, 0, [T, "unlock"], "d"),
    ], initial=0, split=1, name="P")


def fork() -> Automaton:
    return Automaton.build([L, L], ["u", "l", "r"], [
        ("u", "l", ["lock", T], "ll"), ("l", "u", ["unlock", T], "lu"),
        ("u", "r", [T, "lock"], "rl"), ("r", "u", [T, "unlock"], "ru"),
    ], initial="u", split=1, name="Q")


def philosopher_nondet() -> Automaton:
    """Two interchangeable eating cycles sharing the thinking state 0."""
    return Automaton.build([L, L], [0, 1, 2, 3, "1'", "2'", "3'"], [
        (0, 1, ["lock", T], "a"), (1, 2, [T, "lock"], "b"),
        (2, 3, ["unlock", T], "c"), (3, 0, [T, "unlock"], "d"),
        (0, "1'", ["lock", T], "a'"), ("1'", "2'", [T, "lock"], "b'"),
        ("2'", "3'", ["unlock", T], "c'"), ("3'", 0, [T, "unlock"], "d'"),
    ], initial=0, split=1, name="Pprime")


def philosopher_double() -> Automaton:
    """The eating cycle unrolled twice (eight states)."""
    labels = [["lock", T], [T, "lock"], ["unlock", T], [T, "unlock"]]
    keys = "abcd"
    motions = [(k, (k + 1) % 8, labels[k % 4], f"{keys[k % 4]}{k // 4}") for k in range(8)]
    return Automaton.build([L, L], list(range(8)), motions, initial=0, split=1,
                           name="Pdouble")


VARIANTS = {"standard": philosopher, "nondet": philosopher_nondet,
            "doubleCover": philosopher_double}


def philosophers_design(n: int, p: Automaton, q: Automaton):
    if n < 2:
        raise ModelError("a ring of philosophers needs n >= 2")
    parts = []
    for i in range(1, n + 1):
        parts += [Var.of(p, f"p{i}"), Var.of(q, f"f{i}")]
    return Feedback(chain(*parts), ((0, 1),))


def philosophers(n: int, variant: str = "standard") -> System:
    """Ring ``fb((P ; Q)^n)``; philosopher i sits between forks f(i-1) and f(i)."""
    if variant not in VARIANTS:
        raise ModelError(f"unknown philosopher variant {variant!r}")
    p, q = VARIANTS[variant](), fork()
    suffix = {"standard": "", "nondet": "_nondet", "doubleCover": "_double"}[variant]
    return System.of(philosophers_design(n, p, q), [p, q], name=f"phil{n}{suffix}")


def philosophers_facts(n: int, variant: str = "standard") -> dict:
    facts = {"components": 2 * n, "wires": 2 * n, "open_ports": 0,
             "states": {"standard": 12, "nondet": 21, "doubleCover": 24}[variant] ** n}
    if variant == "standard":
        facts.update(reachable=3 ** n - 1, deadlocks=[tuple([1, "r"] * n)],
                     misa_atomic_explored=3 * n * n - 3 * n + 2)
    return facts


# -- scheduler ---------------------------------------------------------------------

def process() -> Automaton:
    return Automaton.build([C], [0, 1], [
        (0, 1, ["begin"], "begin"), (1, 0, ["end"], "end"),
    ], initial=0, split=1, name="P")


def notifier() -> Automaton:
    """Waits for go on the left, runs its process, passes go to the right."""
    return Automaton.build([G, C, G], [0, 1, 2, 3, 4], [
        (0, 1, ["go", T, T], "goL"), (1, 4, [T, "begin", T], "begin"),
        (4, 3, [T, T, "go"], "goR"), (3, 0, [T, "end", T], "end"),
        (3, 2, ["go", T, T], "goL2"), (2, 1, [T, "end", T], "end2"),
    ], initial=0, split=1, name="N")


def master() -> Automaton:
    return Automaton.build([G, C, G], [0, 1, 2, 3], [
        (0, 1, [T, "begin", T], "begin"), (1, 2, [T, T, "go"], "goR"),
        (2, 3, ["go", T, T], "goL"), (3, 2, [T, T, "go"], "goR2"),
        (3, 0, [T, "end", T], "end"),
    ], initial=0, split=1, name="M")


def scheduler_design(n: int):
    """Master and n notifiers in a go-ring, each notifier driving one process.

    The master's control boundary C is left open.
    """
    if n < 1:
        raise ModelError("a scheduler needs n >= 1")
    M, N, P = master(), notifier(), process()
    units = [Var.of(M, "M")]
    for i in range(1, n + 1):
        units.append(Bind(Var.of(N, f"N{i}"), Var.of(P, f"P{i}"), ((1, 0),)))
    # open ports of the chain: M.G_L, M.C, N_n.G_R
    return Feedback(chain(*units), ((0, 2),))


def scheduler(n: int) -> System:
    """The scheduler closed by a controlling process on the master's C boundary."""
    P = process()
    d = Bind(scheduler_design(n), Var.of(P, "Pc"))
    return System.of(d, [master(), notifier(), P], name=f"sched{n}")


def abstraction_q(initial: int = 0, name: str = "Q") -> Automaton:
    return Automaton.build([G, G], [0, 1], [
        (0, 1, ["go", T], "in"), (1, 0, [T, "go"], "out"),
    ], initial=initial, split=1, name=name)


def q_ring(n: int) -> System:
    """n+1 copies of Q in a ring, the master's copy starting at 1."""
    qm, q = abstraction_q(1, "Qm"), abstraction_q(0, "Q")
    parts = [Var.of(qm, "Qm")] + [Var.of(q, f"Q{i}") for i in range(1, n + 1)]
    return System.of(Feedback(chain(*parts), ((0, 1),)), [qm, q], name=f"qring{n}")


def notifier_unit() -> Automaton:
    return bind(notifier(), process(), pairs=[(1, 0)], name="NP")


def master_unit() -> Automaton:
    return bind(master(), process(), pairs=[(1, 0)], name="MP")


NOTIFIER_TO_Q = {(0, 0): 0, (1, 0): 1, (4, 1): 1, (3, 1): 0, (2, 1): 1}
MASTER_TO_Q = {(0, 0): 1, (1, 1): 1, (2, 1): 0, (3, 1): 1}


@dataclass
class SchedulerAbstraction:
    ring: System
    notifier_unit: Automaton
    master_unit: Automaton
    q: Automaton
    qm: Automaton
    notifier_map: dict = field(default_factory=lambda: dict(NOTIFIER_TO_Q))
    master_map: dict = field(default_factory=lambda: dict(MASTER_TO_Q))


def scheduler_abstraction(n: int) -> SchedulerAbstraction:
    return SchedulerAbstraction(q_ring(n), notifier_unit(), master_unit(),
                                abstraction_q(0, "Q"), abstraction_q(1, "Qm"))


# -- channels and the acknowledgement protocol ---------------------------------------

def message_set(messages: Sequence[str], name: str = "Msg") -> ActionSet:
    if not messages:
        raise ModelError("the message set must be non-empty")
    return ActionSet.of(name, messages)


def message_passer(X: ActionSet, name: str | None = None) -> Automaton:
    msgs = X.nontrivial
    motions = []
    for m in msgs:
        motions.append(("*", m, [m, T], f"in_{m}"))
        motions.append((m, "*", [T, m], f"out_{m}"))
    return Automaton.build([X, X], ["*", *msgs], motions, initial="*", split=1,
                           name=name or f"pass_{X.name}")


def capacity1(X: ActionSet, name: str | None = None) -> Automaton:
    """Message passer that silently drops input arriving while it is full."""
    msgs = X.nontrivial
    a = message_passer(X)
    motions = [(a.states[m.source], a.states[m.target], list(m.labels), m.key)
               for m in a.motions if not m.reflexive]
    for held in msgs:
        for m in msgs:
            motions.append((held, held, [m, T], f"drop_{m}_at_{held}"))
    return Automaton.build([X, X], a.states, motions, initial="*", split=1,
                           name=name or f"cap1_{X.name}")


def lossy(X: ActionSet, name: str | None = None) -> Automaton:
    """Capacity-1 channel that may also lose a message arriving when empty."""
    a = capacity1(X)
    motions = [(a.states[m.source], a.states[m.target], list(m.labels), m.key)
               for m in a.motions if not m.reflexive]
    for m in X.nontrivial:
        motions.append(("*", "*", [m, T], f"lose_{m}"))
    return Automaton.build([X, X], a.states, motions, initial="*", split=1,
                           name=name or f"lossy_{X.name}")


CHANNELS = {"perfect": message_passer, "capacity1": capacity1, "lossy": lossy}


def sender(X: ActionSet) -> Automaton:
    """(M_in | M_out, A_in): accept m, forward it, wait for ack."""
    motions = []
    for m in X.nontrivial:
        motions.append(("*", m, [m, T, T], f"take_{m}"))
        motions.append((m, "w", [T, m, T], f"send_{m}"))
    motions.append(("w", "*", [T, T, "ack"], "ack"))
    return Automaton.build([X, X, A], ["*", *X.nontrivial, "w"], motions, initial="*",
                           split=1, name="S")


def receiver(X: ActionSet) -> Automaton:
    """(M_in, A_out | M_out): receive m, deliver it, acknowledge."""
    motions = []
    for m in X.nontrivial:
        motions.append(("*", m, [m, T, T], f"recv_{m}"))
        motions.append((m, "w", [T, T, m], f"deliver_{m}"))
    motions.append(("w", "*", [T, "ack", T], "ack"))
    return Automaton.build([X, A, X], ["*", *X.nontrivial, "w"], motions, initial="*",
                           split=2, name="R")


def ack_protocol(messages: Sequence[str], channel: str = "capacity1") -> System:
    """Sender and receiver joined by a message channel and an opposite ack channel."""
    if channel not in CHANNELS:
        raise ModelError(f"unknown channel kind {channel!r}")
    X = message_set(messages)
    make = CHANNELS[channel]
    cm, ca = make(X, name="CM"), make(A, name="CA")
    s, r = sender(X), receiver(X)
    link = Product(Var.of(cm, "cm"), Opposite(Var.of(ca, "ca")))
    d = Bind(Bind(Var.of(s, "s"), link, ((1, 0), (2, 1))), Var.of(r, "r"), ((1, 0), (2, 1)))
    return System.of(d, [s, cm, ca, r], name=f"ack_{channel}{len(X.nontrivial)}")


def designed_channel(messages: Sequence[str], channel: str = "capacity1") -> Automaton:
    """Explicit composite automaton of the acknowledgement protocol."""
    X = message_set(messages)
    make = CHANNELS[channel]
    link = product(make(X, name="CM"), opposite(make(A, name="CA")))
    mid = bind(sender(X), link, pairs=[(1, 0), (2, 1)])
    return bind(mid, receiver(X), pairs=[(1, 0), (2, 1)], name=f"designed_{channel}")


def zoo(max_n: int = 4) -> list[System]:
    """Every example system at desk scale."""
    out = []
    for n in range(2, max_n + 1):
        for v in VARIANTS:
            out.append(philosophers(n, v))
    for n in range(1, max_n + 1):
        out.append(scheduler(n))
        out.append(q_ring(n))
    for msgs in (["m"], ["m1", "m2"]):
        for ch in CHANNELS:
            out.append(ack_protocol(msgs, ch))
    return out


__all__ = [
    "L", "C", "G", "A", "philosopher", "fork", "philosopher_nondet", "philosopher_double",
    "VARIANTS", "philosophers", "philosophers_design", "philosophers_facts", "process",
    "notifier", "master", "scheduler_design", "scheduler", "abstraction_q", "q_ring",
    "notifier_unit", "master_unit", "NOTIFIER_TO_Q", "MASTER_TO_Q", "SchedulerAbstraction",
    "scheduler_abstraction", "message_set", "message_passer", "capacity1", "lossy",
    "CHANNELS", "sender", "receiver", "ack_protocol", "designed_channel", "zoo",
    "golden_models", "export_models",
]


# -- golden model files -------------------------------------------------------------

def _model_file(actionsets, automata, systems, sims=()):
    from .modelfile import ModelFile, SystemDecl
    mf = ModelFile()
    for x in actionsets:
        mf.actionsets[x.name] = x
    for a in automata:
        mf.automata[a.name] = a
    for s in systems:
        mf.systems[s.name] = SystemDecl(s.name, s.design)
    for s in sims:
        mf.simulations[s.name] = s
    return mf


def golden_models() -> dict:
    """File name -> ModelFile for every example family."""
    from .modelfile import SimDecl
    P, Q, Pp, Pd = philosopher(), fork(), philosopher_nondet(), philosopher_double()
    systems, sims = [], [
        SimDecl("p_prime_to_p", "Pprime", "P", [("1'", 1), ("2'", 2), ("3'", 3)]),
        SimDecl("p_double_to_p", "Pdouble", "P", [(k, k % 4) for k in range(4, 8)]),
        SimDecl("p_double_to_p_prime", "Pdouble", "Pprime",
                [(4, 0), (5, "1'"), (6, "2'"), (7, "3'")]),
    ]
    for n in range(2, 7):
        systems += [philosophers(n, v) for v in VARIANTS]
        if n > 3:
            continue  # lifted ring simulations are built explicitly; keep them small
        sims.append(SimDecl(f"ring{n}_nondet_to_ring", f"phil{n}_nondet", f"phil{n}",
                            via={f"p{i}": "p_prime_to_p" for i in range(1, n + 1)}))
        sims.append(SimDecl(f"ring{n}_double_to_ring", f"phil{n}_double", f"phil{n}",
                            via={f"p{i}": "p_double_to_p" for i in range(1, n + 1)}))
    out = {"philosophers.awb": _model_file([L], [P, Q, Pp, Pd], systems, sims)}

    Pr, N, M = process(), notifier(), master()
    q, qm = abstraction_q(0, "Q"), abstraction_q(1, "Qm")
    np_sys = System.of(Bind(Var.of(N, "n"), Var.of(Pr, "p"), ((1, 0),)), [N, Pr], "NP")
    mp_sys = System.of(Bind(Var.of(M, "m"), Var.of(Pr, "p"), ((1, 0),)), [M, Pr], "MP")
    systems = [scheduler(n) for n in range(1, 5)] + [q_ring(n) for n in range(1, 5)]
    systems += [np_sys, mp_sys]
    sims = [SimDecl("np_to_q", "NP", "Q", sorted(NOTIFIER_TO_Q.items())),
            SimDecl("mp_to_q", "MP", "Qm", sorted(MASTER_TO_Q.items()))]
    out["scheduler.awb"] = _model_file([C, G], [Pr, N, M, q, qm], systems, sims)

    for msgs in (["m"], ["m1", "m2"]):
        X = message_set(msgs)
        autos = {}
        systems = []
        for ch in CHANNELS:
            s = ack_protocol(msgs, ch)
            # channel automata are renamed per kind so they can share one file
            cm, ca = s.assignment["CM"], s.assignment["CA"]
            cm2, ca2 = cm.renamed(f"{ch}_M"), ca.renamed(f"{ch}_A")
            link = Product(Var.of(cm2, "cm"), Opposite(Var.of(ca2, "ca")))
            snd, rcv = s.assignment["S"], s.assignment["R"]
            d = Bind(Bind(Var.of(snd, "s"), link, ((1, 0), (2, 1))), Var.of(rcv, "r"),
                     ((1, 0), (2, 1)))
            systems.append(System.of(d, [snd, cm2, ca2, rcv], f"ack_{ch}"))
            for a in (snd, rcv, cm2, ca2):
                autos[a.name] = a
        autos["passer"] = message_passer(X, "passer")
        out[f"protocol{len(msgs)}.awb"] = _model_file([X, A], list(autos.values()), systems)
    return out


def export_models(directory) -> list[str]:
    import os
    from .modelfile import render
    os.makedirs(directory, exist_ok=True)
    written = []
    for fname, mf in golden_models().items():
        path = os.path.join(directory, fname)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(render(mf))
        written.append(path)
    return written

