"""Comparisons and simulations between automata with boundary.

A comparison maps states to states and motions to motions, preserving
sources, targets, reflexive motions, boundary actions and the initial state.
A simulation additionally lifts every target motion: from any source state
v, a target motion out of f(v) is the image of the last step of a behaviour
whose earlier steps all map to the reflexive motion at f(v).

Comparisons live on the reachable part of their source (all states when
there is no initial state); maps may be partial outside it.
"""

from __future__ import annotations

import itertools
import time
from collections import deque
from dataclasses import dataclass
from typing import Hashable, Iterator, Mapping, Sequence

from .algebra import bind, feedback, opposite, product
from .core import Automaton, ModelError, reachable_states
from .design import Bind, Const, Feedback, Product, System, Var


def _domain(a: Automaton) -> list[int]:
    if a.initial is None:
        return list(range(len(a.states)))
    return reachable_states(a, a.initial)


@dataclass
class Comparison:
    source: Automaton
    target: Automaton
    state_map: dict[int, int]
    motion_map: dict[int, int]
    name: str = ""

    @classmethod
    def from_labels(cls, source: Automaton, target: Automaton, states: Mapping,
                    motions: Mapping | None = None, name: str = "") -> "Comparison":
        """Build from state labels and (optionally) motion keys.

        Motions left out of ``motions`` are inferred: the unique target motion
        between the image states with the same labels, preferring the
        reflexive motion when the source motion is trivial on every boundary.
        """
        smap = {}
        for v, w in states.items():
            smap[source.state(v)] = target.state(w)
        mmap = {}
        for e, f in (motions or {}).items():
            if e not in source.motion_index:
                raise ModelError(f"{name or 'comparison'}: {e!r} is not a motion of "
                                 f"{source.name}")
            if f not in target.motion_index:
                raise ModelError(f"{name or 'comparison'}: {f!r} is not a motion of "
                                 f"{target.name}")
            mmap[source.motion_index[e]] = target.motion_index[f]
        comp = cls(source, target, smap, mmap, name)
        comp.infer_motions()
        return comp

    def infer_motions(self) -> None:
        s = self.source
        for v in _domain(s):
            if v not in self.state_map:
                continue
            for m in s.out_motions[v]:
                if m in self.motion_map:
                    continue
                e = s.motions[m]
                if e.target not in self.state_map:
                    continue
                cands = candidate_images(self, m)
                if not cands:
                    raise ModelError(f"{self.name or 'comparison'}: no image for motion "
                                     f"{e.key!r} of {s.name}")
                self.motion_map[m] = cands[0]

    def image(self, label: Hashable) -> Hashable:
        return self.target.states[self.state_map[self.source.state(label)]]

    def image_motion(self, key: Hashable) -> Hashable:
        return self.target.motions[self.motion_map[self.source.motion_index[key]]].key

    def labelled_maps(self) -> tuple[dict, dict]:
        s, t = self.source, self.target
        return ({s.states[v]: t.states[w] for v, w in self.state_map.items()},
                {s.motions[e].key: t.motions[f].key for e, f in self.motion_map.items()})


def candidate_images(f: Comparison, m: int) -> list[int]:
    """Target motions that ``m`` may map to given the state map, best first."""
    s, t = f.source, f.target
    e = s.motions[m]
    src, tgt = f.state_map[e.source], f.state_map[e.target]
    refl = t.reflexive_of[src]
    if e.reflexive:
        return [refl]
    out = [i for i in t.out_motions[src]
           if t.motions[i].target == tgt and t.motions[i].labels == e.labels]
    out.sort(key=lambda i: (i != refl, i))
    return out


def verify_comparison(f: Comparison) -> list[str]:
    """Violations of the comparison conditions (empty when valid)."""
    s, t = f.source, f.target
    if tuple(s.boundaries) != tuple(t.boundaries):
        raise ModelError("comparison between automata with different boundaries")
    out = []
    dom = _domain(s)
    for v in dom:
        if v not in f.state_map:
            out.append(f"state {s.states[v]!r} has no image")
    if s.initial is not None and t.initial is not None:
        if f.state_map.get(s.initial) != t.initial:
            out.append("initial state is not preserved")
    for v in dom:
        if v not in f.state_map:
            continue
        for m in s.out_motions[v]:
            e = s.motions[m]
            if m not in f.motion_map:
                out.append(f"motion {e.key!r} has no image")
                continue
            g = t.motions[f.motion_map[m]]
            if g.source != f.state_map.get(e.source) or g.target != f.state_map.get(e.target):
                out.append(f"motion {e.key!r}: source/target not preserved")
            if e.reflexive and not g.reflexive:
                out.append(f"reflexive motion at {s.states[v]!r} maps to a non-reflexive one")
            if g.labels != e.labels:
                out.append(f"motion {e.key!r}: boundary actions {s.label_names(m)} map to "
                           f"{t.label_names(f.motion_map[m])}")
    return out


@dataclass
class Simulation:
    comparison: Comparison
    certificate: dict[tuple[int, int], tuple[int, ...]]

    @property
    def source(self) -> Automaton:
        return self.comparison.source

    @property
    def target(self) -> Automaton:
        return self.comparison.target

    @property
    def state_map(self) -> dict[int, int]:
        return self.comparison.state_map

    @property
    def motion_map(self) -> dict[int, int]:
        return self.comparison.motion_map

    @property
    def name(self) -> str:
        return self.comparison.name


@dataclass
class Counterexample:
    comparison: Comparison
    state: Hashable | None
    motion: Hashable | None
    reason: str

    def __bool__(self):
        return False


def _lift(f: Comparison, v: int, e: int) -> tuple[int, ...] | None:
    """Shortest source behaviour from v lifting target motion e, or None."""
    s = f.source
    fv = f.state_map[v]
    refl = f.target.reflexive_of[fv]
    prev = {v: None}
    q = deque([v])
    while q:
        u = q.popleft()
        for m in s.out_motions[u]:
            img = f.motion_map.get(m)
            if img == e:
                path = [m]
                while prev[u] is not None:
                    u, pm = prev[u]
                    path.append(pm)
                path.reverse()
                return tuple(path)
            if img == refl and not s.motions[m].reflexive:
                w = s.motions[m].target
                if w not in prev:
                    prev[w] = (u, m)
                    q.append(w)
    return None


def verify_simulation(f: Comparison) -> Simulation | Counterexample:
    problems = verify_comparison(f)
    if problems:
        return Counterexample(f, None, None, "; ".join(problems[:5]))
    s, t = f.source, f.target
    cert = {}
    for v in _domain(s):
        fv = f.state_map[v]
        for e in t.out_motions[fv]:
            if t.motions[e].reflexive:
                cert[(v, e)] = (s.reflexive_of[v],)
                continue
            path = _lift(f, v, e)
            if path is None:
                return Counterexample(f, s.states[v], t.motions[e].key,
                                      f"motion {t.motions[e].key!r} out of "
                                      f"{t.states[fv]!r} does not lift to {s.states[v]!r}")
            cert[(v, e)] = path
    return Simulation(f, cert)


def require(result: Simulation | Counterexample) -> Simulation:
    if isinstance(result, Counterexample):
        raise ModelError(f"not a simulation: {result.reason}")
    return result


def check_certificate(sim: Simulation) -> bool:
    """Replay every recorded lifting behaviour against the comparison."""
    s, t = sim.source, sim.target
    f = sim.comparison
    for (v, e), path in sim.certificate.items():
        u = v
        refl = t.reflexive_of[f.state_map[v]]
        for k, m in enumerate(path):
            mo = s.motions[m]
            if mo.source != u:
                return False
            want = e if k == len(path) - 1 else refl
            if f.motion_map.get(m) != want:
                return False
            u = mo.target
    return True


def identity_sim(a: Automaton) -> Simulation:
    dom = _domain(a)
    smap = {v: v for v in dom}
    mmap = {m: m for v in dom for m in a.out_motions[v]}
    return require(verify_simulation(Comparison(a, a, smap, mmap, f"1_{a.name}")))


# -- operations on simulations -----------------------------------------------------

def _same(a: Automaton, b: Automaton) -> bool:
    return a is b or (a.boundaries == b.boundaries and a.states == b.states
                      and [m.key for m in a.motions] == [m.key for m in b.motions])


def compose_sim(f: Simulation, g: Simulation, name: str = "") -> Simulation:
    """``g . f``; liftings go through g first, then each step through f."""
    if not _same(f.target, g.source):
        raise ModelError("compose: target of the first simulation is not the source "
                         "of the second")
    S, T, U = f.source, f.target, g.target
    smap = {v: g.state_map[w] for v, w in f.state_map.items() if w in g.state_map}
    mmap = {m: g.motion_map[x] for m, x in f.motion_map.items() if x in g.motion_map}
    comp = Comparison(S, U, smap, mmap, name or f"{g.name}.{f.name}")
    cert = {}
    for v in _domain(S):
        for e in U.out_motions[smap[v]]:
            path = []
            u = v
            for x in g.certificate[(f.state_map[v], e)]:
                if T.motions[x].reflexive:
                    continue
                step = f.certificate[(u, x)]
                path += step
                u = S.motions[step[-1]].target
            cert[(v, e)] = tuple(path) or (S.reflexive_of[v],)
    built = Simulation(comp, cert)
    if not check_certificate(built):
        raise ModelError("compose: constructed lifting certificate is invalid")
    require(verify_simulation(comp))
    return built


def _pair_maps(f: Simulation, g: Simulation, src: Automaton, tgt: Automaton):
    """State/motion maps of a pairwise construction (bind or product)."""
    fs, gs = f.source, g.source
    ft, gt = f.target, g.target
    ng = len(gs.states)
    ntg = len(gt.states)
    smap = {}
    for v, fv in f.state_map.items():
        for w, gw in g.state_map.items():
            smap[v * ng + w] = fv * ntg + gw
    fkey = {fs.motions[m].key: ft.motions[x].key for m, x in f.motion_map.items()}
    gkey = {gs.motions[m].key: gt.motions[x].key for m, x in g.motion_map.items()}
    mmap = {}
    for i, mo in enumerate(src.motions):
        a, b = mo.key
        if a in fkey and b in gkey:
            j = tgt.motion_index.get((fkey[a], gkey[b]))
            if j is not None:
                mmap[i] = j
    return smap, mmap


def bind_sim(f: Simulation, g: Simulation, pairs: Sequence[tuple[int, int]] | None = None,
             name: str = "") -> Simulation:
    """Simulation ``bind(S, U) => bind(T, V)`` built componentwise."""
    src = bind(f.source, g.source, pairs=pairs)
    tgt = bind(f.target, g.target, pairs=pairs)
    smap, mmap = _pair_maps(f, g, src, tgt)
    comp = Comparison(src, tgt, smap, mmap, name or f"({f.name};{g.name})")
    return _finish(comp)


def product_sim(f: Simulation, g: Simulation, name: str = "") -> Simulation:
    src = product(f.source, g.source)
    tgt = product(f.target, g.target)
    smap, mmap = _pair_maps(f, g, src, tgt)
    return _finish(Comparison(src, tgt, smap, mmap, name or f"({f.name}*{g.name})"))


def fb_sim(f: Simulation, pairs: Sequence[tuple[int, int]], name: str = "") -> Simulation:
    src = feedback(f.source, pairs=pairs)
    tgt = feedback(f.target, pairs=pairs)
    fk = {f.source.motions[m].key: f.target.motions[x].key for m, x in f.motion_map.items()}
    mmap = {}
    for i, mo in enumerate(src.motions):
        j = tgt.motion_index.get(fk.get(mo.key, object()))
        if j is not None:
            mmap[i] = j
    return _finish(Comparison(src, tgt, dict(f.state_map), mmap, name or f"fb({f.name})"))


def opposite_sim(f: Simulation, name: str = "") -> Simulation:
    comp = Comparison(opposite(f.source), opposite(f.target), dict(f.state_map),
                      dict(f.motion_map), name or f"op({f.name})")
    return _finish(comp)


def _finish(comp: Comparison) -> Simulation:
    """Restrict to the reachable part and re-verify from scratch."""
    src = comp.source
    if src.initial is not None:
        dom = set(_domain(src))
        comp.state_map = {v: w for v, w in comp.state_map.items() if v in dom}
        comp.motion_map = {m: x for m, x in comp.motion_map.items()
                           if src.motions[m].source in dom}
    return require(verify_simulation(comp))


def system_sim(source: System, target: System, sims: Mapping[str, Simulation],
               name: str = "") -> Simulation:
    """Lift per-component simulations along a shared design shape.

    ``sims`` maps component names of ``source`` to simulations; every other
    component uses the identity on its automaton.  The two designs must have
    the same tree shape and glue the same boundaries.
    """
    src_auts = iter(source.automata)
    tgt_auts = iter(target.automata)
    labels = iter(source.component_names)

    def walk(a, b) -> Simulation:
        if type(a) is not type(b):
            raise ModelError("system_sim: designs differ in shape")
        if isinstance(a, (Var, Const)):
            sa, ta, lab = next(src_auts), next(tgt_auts), next(labels)
            if lab in sims:
                sim = sims[lab]
                if not (_same(sim.source, sa) and _same(sim.target, ta)):
                    raise ModelError(f"system_sim: simulation for {lab} does not match its "
                                     "component automata")
                return sim
            if not _same(sa, ta):
                raise ModelError(f"system_sim: component {lab} differs and has no simulation")
            return identity_sim(sa)
        if isinstance(a, Bind):
            if a.pairs != b.pairs:
                raise ModelError("system_sim: designs glue different boundaries")
            left = walk(a.left, b.left)
            return bind_sim(left, walk(a.right, b.right), pairs=a.pairs)
        if isinstance(a, Product):
            left = walk(a.left, b.left)
            return product_sim(left, walk(a.right, b.right))
        if isinstance(a, Feedback):
            if tuple(a.pairs) != tuple(b.pairs):
                raise ModelError("system_sim: designs feed back different boundaries")
            return fb_sim(walk(a.child, b.child), a.pairs)
        return opposite_sim(walk(a.child, b.child))

    out = walk(source.design, target.design)
    out.comparison.name = name or f"{source.name}=>{target.name}"
    return out


# -- enumeration oracle -------------------------------------------------------------

def comparisons(s: Automaton, t: Automaton) -> Iterator[Comparison]:
    """Every comparison from the reachable part of s to t (backtracking search)."""
    if tuple(s.boundaries) != tuple(t.boundaries):
        raise ModelError("comparison between automata with different boundaries")
    dom = _domain(s)
    pos = {v: i for i, v in enumerate(dom)}
    # motions checked once both endpoints are assigned
    ready: list[list[int]] = [[] for _ in dom]
    for v in dom:
        for m in s.out_motions[v]:
            w = s.motions[m].target
            ready[max(pos[v], pos[w])].append(m)
    smap: dict[int, int] = {}

    def options(m):
        e = s.motions[m]
        a, b = smap[e.source], smap[e.target]
        if e.reflexive:
            return [t.reflexive_of[a]]
        return [i for i in t.out_motions[a]
                if t.motions[i].target == b and t.motions[i].labels == e.labels]

    def rec(k):
        if k == len(dom):
            ms = [m for v in dom for m in s.out_motions[v]]
            for choice in itertools.product(*(options(m) for m in ms)):
                yield Comparison(s, t, dict(smap), dict(zip(ms, choice)))
            return
        v = dom[k]
        cands = [t.initial] if (v == s.initial and t.initial is not None) \
            else range(len(t.states))
        for w in cands:
            smap[v] = w
            if all(options(m) for m in ready[k]):
                yield from rec(k + 1)
            del smap[v]

    yield from rec(0)


# -- deadlocks through simulations ------------------------------------------------

@dataclass
class PreimageReport:
    deadlocks: list[Hashable]
    checked: int
    preimages: dict[Hashable, list[Hashable]]
    elapsed: float = 0.0


def preimage_deadlock_check(sim: Simulation, target_deadlocks: Sequence[Hashable]
                            ) -> PreimageReport:
    """Reachable deadlocks of the source, found among preimages of target deadlocks.

    Every reachable source deadlock maps to a reachable target deadlock, so
    checking the preimages of the supplied target deadlocks is enough.
    """
    if not isinstance(sim, Simulation):
        raise ModelError("preimage check needs a verified simulation")
    t0 = time.perf_counter()
    s, t = sim.source, sim.target
    wanted = {t.state(d): d for d in target_deadlocks}
    pre: dict[Hashable, list[Hashable]] = {d: [] for d in target_deadlocks}
    found = []
    checked = 0
    for v in _domain(s):
        w = sim.state_map[v]
        if w in wanted:
            checked += 1
            pre[wanted[w]].append(s.states[v])
            if s.is_deadlock(v):
                found.append(s.states[v])
    return PreimageReport(found, checked, pre, time.perf_counter() - t0)


def image_of_deadlocks(sim: Simulation) -> list[tuple[Hashable, Hashable]]:
    """(source deadlock, its image) for every reachable deadlock of the source."""
    s, t = sim.source, sim.target
    return [(s.states[v], t.states[sim.state_map[v]])
            for v in _domain(s) if s.is_deadlock(v)]


# -- reduced language equivalence -------------------------------------------------------

def _determinize(a: Automaton, sel: Sequence[int]):
    """Subset construction over joint label vectors on ``sel``; silent steps are epsilon."""
    silent = tuple(a.boundaries[i].reflexive for i in sel)
    eps = [[] for _ in a.states]
    moves = [[] for _ in a.states]
    for m in a.motions:
        letter = tuple(m.labels[i] for i in sel)
        if letter == silent:
            if not m.reflexive:
                eps[m.source].append(m.target)
        else:
            moves[m.source].append((letter, m.target))

    def closure(states):
        seen = set(states)
        stack = list(states)
        while stack:
            v = stack.pop()
            for w in eps[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return frozenset(seen)

    def step(S):
        out: dict[tuple, set] = {}
        for v in S:
            for letter, w in moves[v]:
                out.setdefault(letter, set()).add(w)
        return {k: closure(v) for k, v in out.items()}

    return closure([a.initial]), step


def reduced_language_equiv(s: Automaton, t: Automaton, boundaries: Sequence[int] | None = None,
                           max_len: int | None = None) -> bool:
    """Do s and t have the same reduced appearances on the selected boundaries?

    Behaviours are compared as prefix languages over joint label vectors with
    silent steps removed; ``max_len`` bounds word length (None = exact).
    """
    if tuple(s.boundaries) != tuple(t.boundaries):
        raise ModelError("language comparison between automata with different boundaries")
    if s.initial is None or t.initial is None:
        raise ModelError("language comparison needs initial states")
    sel = list(range(len(s.boundaries))) if boundaries is None else list(boundaries)
    for i in sel:
        if not 0 <= i < len(s.boundaries):
            raise ModelError(f"boundary {i} out of range")
    s0, sstep = _determinize(s, sel)
    t0, tstep = _determinize(t, sel)
    seen = {(s0, t0)}
    q = deque([(s0, t0, 0)])
    while q:
        a, b, depth = q.popleft()
        if max_len is not None and depth >= max_len:
            continue
        na, nb = sstep(a), tstep(b)
        if set(na) != set(nb):
            return False
        for letter in na:
            pair = (na[letter], nb[letter])
            if pair not in seen:
                seen.add(pair)
                q.append((*pair, depth + 1))
    return True


__all__ = [
    "Comparison", "candidate_images", "verify_comparison", "Simulation", "Counterexample",
    "verify_simulation", "require", "check_certificate", "identity_sim", "compose_sim",
    "bind_sim", "product_sim", "fb_sim", "opposite_sim", "system_sim", "comparisons",
    "PreimageReport", "preimage_deadlock_check", "image_of_deadlocks",
    "reduced_language_equiv",
]
