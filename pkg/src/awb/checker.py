"""Deadlock detection: exhaustive search, product analysis and MISA.

MISA (minimal introspective subsystem analysis) expands, at each reachable
state, only the motions of one small subsystem that ignores everything
outside itself.  The explored part still contains every reachable deadlock.
"""

from __future__ import annotations

import json
import os
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .core import Automaton, ModelError
from .design import System, _mode_atomic, project_local

DEFAULT_MAX_STATES = 5_000_000


def max_states_default() -> int:
    raw = os.environ.get("AWB_MAX_STATES")
    if not raw:
        return DEFAULT_MAX_STATES
    try:
        value = int(raw)
    except ValueError:
        raise ModelError(f"AWB_MAX_STATES must be an integer, got {raw!r}") from None
    if value < 1:
        raise ModelError("AWB_MAX_STATES must be positive")
    return value


@dataclass
class DeadlockReport:
    algorithm: str
    explored: int
    deadlocks: list[tuple]
    components: list[str]
    witnesses: list[list[tuple]] | None = None
    elapsed: float = 0.0
    complete: bool = True
    mode: str = "all"
    system: str = ""
    reachable: int | None = None

    @property
    def deadlock_set(self) -> set[tuple]:
        return set(self.deadlocks)

    def to_dict(self, command: str = "check") -> dict:
        return {
            "command": command,
            "system": self.system,
            "algorithm": self.algorithm,
            "mode": self.mode,
            "explored": self.explored,
            "reachable": self.reachable,
            "deadlocks": [{c: str(v) for c, v in zip(self.components, d)}
                          for d in self.deadlocks],
            "witnesses": None if self.witnesses is None else
            [[_motion_id(m) for m in w] for w in self.witnesses],
            "elapsed_ms": int(round(self.elapsed * 1000)),
            "complete": self.complete,
        }

    def to_json(self, command: str = "check", stable: bool = False) -> str:
        d = self.to_dict(command)
        if stable:
            d["elapsed_ms"] = 0
        return json.dumps(d, sort_keys=True, indent=2)


def _motion_id(keys: tuple) -> str:
    """Render a global motion (tuple of local motion keys) as a compact id."""
    parts = []
    for k in keys:
        if isinstance(k, tuple) and k and k[0] == "idle":
            parts.append("-")
        else:
            parts.append(str(k))
    return ".".join(parts)


class StateBudgetExceeded(RuntimeError):
    def __init__(self, report: DeadlockReport, limit: int):
        super().__init__(f"state budget of {limit} exceeded after {report.explored} states")
        self.report = report
        self.limit = limit


def _sort_key(g: tuple):
    return tuple((type(v).__name__, str(v)) for v in g)


def _witness(cs, keys, parent, i, atomic: bool) -> list[tuple]:
    """Global motion keys along the parent chain from the initial state to ``keys[i]``."""
    chain = []
    while parent[i] >= 0:
        chain.append(i)
        i = parent[i]
    chain.reverse()
    out = []
    prev = keys[0]
    for j in chain:
        src = cs.local_of(prev)
        dst = cs.local_of(keys[j])
        for row in cs.moves(src, atomic=atomic):
            if np.array_equal(cs.tgt[row], dst):
                out.append(cs.global_motion(row).keys(cs.sys))
                break
        prev = keys[j]
    return out


def _explore_threaded(cs, init_key, misa, atomic, max_states, threads):
    """Level-synchronous frontier expansion; workers share the visited map."""
    index = {init_key: 0}
    keys = [init_key]
    parent = [-1]
    dead = [-1]
    frontier = [0]
    args = cs.explore_args
    complete = True

    def work(i):
        return K.expand(keys[i], misa, atomic, *args)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        while frontier and complete:
            results = list(pool.map(work, frontier))
            nxt = []
            for i, (is_dead, succ) in zip(frontier, results):
                dead[i] = 1 if is_dead else 0
                for k in succ.tolist():
                    if k in index:
                        continue
                    if len(keys) >= max_states:
                        complete = False
                        break
                    index[k] = len(keys)
                    keys.append(k)
                    parent.append(i)
                    dead.append(-1)
                    nxt.append(len(keys) - 1)
                if not complete:
                    break
            frontier = nxt
    return (np.array(keys, np.int64), np.array(parent, np.int64), np.array(dead, np.int8),
            complete)


def _search(sys: System, algorithm: str, misa: bool, mode: str, max_states, threads, witness):
    atomic = _mode_atomic(sys, mode)
    limit = max_states_default() if max_states is None else int(max_states)
    cs = sys.compiled
    t0 = time.perf_counter()
    init = cs.encode(sys.initial)
    if threads and threads > 1:
        keys, parent, dead, complete = _explore_threaded(cs, init, misa, atomic, limit, threads)
    else:
        keys, parent, dead, complete = K.explore(init, misa, atomic, limit, *cs.explore_args)
    idx = np.flatnonzero(dead == 1)
    pairs = sorted(((cs.decode(int(keys[i])), int(i)) for i in idx),
                   key=lambda p: _sort_key(p[0]))
    witnesses = None
    if witness:
        witnesses = [_witness(cs, keys, parent, i, atomic) for _, i in pairs]
    report = DeadlockReport(algorithm, int(keys.shape[0]), [g for g, _ in pairs],
                            sys.component_names, witnesses, time.perf_counter() - t0,
                            bool(complete), mode, sys.name,
                            int(keys.shape[0]) if (complete and not misa) else None)
    if not complete:
        raise StateBudgetExceeded(report, limit)
    return report


def bfs_deadlocks(sys: System, mode: str = "all", max_states: int | None = None,
                  threads: int = 1, witness: bool = False) -> DeadlockReport:
    """Every reachable global state is visited; all reachable deadlocks are reported."""
    return _search(sys, "bfs", False, mode, max_states, threads, witness)


def misa_deadlocks(sys: System, mode: str = "all", max_states: int | None = None,
                   threads: int = 1, witness: bool = False) -> DeadlockReport:
    """Exploration guided by minimal introspective subsystems."""
    return _search(sys, "misa", True, mode, max_states, threads, witness)


def reachable_states(sys: System, mode: str = "all", max_states: int | None = None) -> set:
    cs = sys.compiled
    limit = max_states_default() if max_states is None else max_states
    keys, _, _, complete = K.explore(cs.encode(sys.initial), False, _mode_atomic(sys, mode),
                                     limit, *cs.explore_args)
    if not complete:
        raise StateBudgetExceeded(DeadlockReport("bfs", len(keys), [], sys.component_names,
                                                 complete=False), limit)
    return {cs.decode(int(k)) for k in keys}


# -- watching and introspection -----------------------------------------------------

@dataclass(frozen=True)
class WatchSet:
    components: tuple[str, ...]
    watching: tuple[frozenset[int], ...]

    def of(self, label: str) -> frozenset[int]:
        return self.watching[self.components.index(label)]


def watching(a: Automaton, v: int) -> frozenset[int]:
    """Boundaries on which some motion out of local state ``v`` acts nontrivially."""
    out = set()
    for m in a.out_motions[v]:
        for i in range(len(a.boundaries)):
            if not a.is_trivial(m, i):
                out.add(i)
    return frozenset(out)


def watch_sets(sys: System, g) -> WatchSet:
    local = sys.check_state(g)
    return WatchSet(tuple(sys.component_names),
                    tuple(watching(a, v) for a, v in zip(sys.automata, local)))


def watching_graph(sys: System, g) -> dict[int, set[int]]:
    """c -> components d such that c watches a port wired to d."""
    ws = watch_sets(sys, g)
    partner = sys.diagram.partner
    out = {c: set() for c in range(len(sys.automata))}
    for c, ports in enumerate(ws.watching):
        for i in ports:
            q = partner.get((c, i))
            if q is not None:
                out[c].add(q[0])
    return out


def minimal_introspective_subsystem(sys: System, g, mode: str = "all") -> tuple[int, ...]:
    """Smallest non-deadlocked watching-closed component set at ``g`` (sorted indices)."""
    atomic = _mode_atomic(sys, mode)
    cs = sys.compiled
    found, mask = K.choose_subsystem(cs.local_array(g), atomic, *cs.choose_args)
    if not found:
        raise ModelError(f"{g!r} is a global deadlock; no subsystem can move")
    return tuple(int(c) for c in np.flatnonzero(mask))


def subsystem_state(sys: System, g, subset) -> tuple:
    return project_local(sys, g, subset)


# -- product deadlock analysis -------------------------------------------------------

@dataclass
class ProductAnalysis:
    strength: str
    explored_states: list[tuple]
    report: DeadlockReport


def _bfs_aut(a: Automaton, start: int) -> list[int]:
    seen = {start}
    order = [start]
    q = deque([start])
    while q:
        v = q.popleft()
        for m in a.out_motions[v]:
            w = a.motions[m].target
            if w not in seen:
                seen.add(w)
                order.append(w)
                q.append(w)
    return order


def product_deadlock_analysis(s: Automaton, t: Automaton, strength: str = "weak"
                              ) -> ProductAnalysis:
    """Deadlock analysis of ``s * t`` without exploring the full product.

    A product state is a deadlock exactly when both coordinates are, so the
    first phase explores ``(v, w0)`` for reachable v of s and the second phase
    explores ``(v*, w)`` for reachable w of t, from deadlocks v* of s.  The weak
    analysis continues only from the first deadlock v* found; the strong one
    from every deadlock.
    """
    if strength not in ("weak", "strong"):
        raise ModelError(f"strength must be weak or strong, got {strength!r}")
    if s.initial is None or t.initial is None:
        raise ModelError("product analysis needs initial states on both operands")
    t0 = time.perf_counter()
    phase1 = _bfs_aut(s, s.initial)
    explored = [(v, t.initial) for v in phase1]
    seen = set(explored)
    s_dead = [v for v in phase1 if s.is_deadlock(v)]
    if strength == "weak":
        s_dead = s_dead[:1]
    t_reach = _bfs_aut(t, t.initial)
    for v in s_dead:
        for w in t_reach:
            if (v, w) not in seen:
                seen.add((v, w))
                explored.append((v, w))
    dead = [(s.states[v], t.states[w]) for v, w in explored
            if s.is_deadlock(v) and t.is_deadlock(w)]
    dead.sort(key=_sort_key)
    report = DeadlockReport("product-analysis", len(explored), dead, [s.name or "s", t.name or "t"],
                            None, time.perf_counter() - t0, True, "all",
                            f"{s.name}*{t.name}")
    return ProductAnalysis(strength, [(s.states[v], t.states[w]) for v, w in explored], report)


__all__ = [
    "DeadlockReport", "StateBudgetExceeded", "bfs_deadlocks", "misa_deadlocks",
    "reachable_states", "WatchSet", "watching", "watch_sets", "watching_graph",
    "minimal_introspective_subsystem", "ProductAnalysis", "product_deadlock_analysis",
    "max_states_default", "DEFAULT_MAX_STATES",
]
