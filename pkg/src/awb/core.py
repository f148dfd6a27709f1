"""Action sets, automata with boundary, behaviours and linearity predicates."""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Hashable, Iterable, Sequence

REFLEXIVE = "tau"


class ModelError(ValueError):
    """Raised for ill-formed input: unknown states, type mismatches, bad indices."""


@dataclass(frozen=True)
class ActionSet:
    """A finite alphabet whose action at index 0 is the trivial one."""

    name: str
    actions: tuple[str, ...]
    reflexive: int = 0

    def __post_init__(self):
        if not self.actions:
            raise ModelError(f"action set {self.name!r} is empty")
        if len(set(self.actions)) != len(self.actions):
            raise ModelError(f"action set {self.name!r} has duplicate actions")
        if not 0 <= self.reflexive < len(self.actions):
            raise ModelError(f"action set {self.name!r}: reflexive index out of range")

    @classmethod
    def of(cls, name: str, actions: Iterable[str]) -> "ActionSet":
        """Build ``{tau} + actions``; ``tau`` is the reflexive action."""
        acts = [a for a in actions if a != REFLEXIVE]
        return cls(name, (REFLEXIVE, *acts), 0)

    def index(self, action: str) -> int:
        try:
            return self.actions.index(action)
        except ValueError:
            raise ModelError(f"{action!r} is not an action of {self.name}") from None

    @property
    def nontrivial(self) -> tuple[str, ...]:
        return tuple(a for i, a in enumerate(self.actions) if i != self.reflexive)

    def __len__(self):
        return len(self.actions)


@dataclass(frozen=True)
class Motion:
    source: int
    target: int
    labels: tuple[int, ...]
    reflexive: bool = False
    key: Hashable = None


@dataclass(frozen=True)
class Behaviour:
    start: int
    steps: tuple[int, ...] = ()


class Automaton:
    """A finite reflexive graph whose motions carry one action per boundary.

    States are stored as hashable labels (strings for hand-written automata,
    nested tuples for composites) and addressed internally by index.  Motion
    labels are action indices into the corresponding boundary's ActionSet.
    Instances are treated as immutable.
    """

    __slots__ = ("boundaries", "states", "motions", "reflexive_of", "initial",
                 "split", "name", "__dict__")

    def __init__(self, boundaries: Sequence[ActionSet], states: Sequence[Hashable],
                 motions: Sequence[Motion], reflexive_of: Sequence[int],
                 initial: int | None = None, split: int | None = None,
                 name: str = ""):
        self.boundaries = tuple(boundaries)
        self.states = tuple(states)
        self.motions = tuple(motions)
        self.reflexive_of = tuple(reflexive_of)
        self.initial = initial
        self.split = split
        self.name = name

    @classmethod
    def build(cls, boundaries: Sequence[ActionSet], states: Sequence[Hashable],
              motions: Iterable[tuple], initial: Hashable | None = None,
              split: int | None = None, name: str = "") -> "Automaton":
        """Construct from state labels and ``(source, target, labels[, key])`` tuples.

        Labels may be action names or indices.  One reflexive motion per state
        is generated first, keyed ``("idle", state)``.
        """
        boundaries = tuple(boundaries)
        states = tuple(states)
        index = {s: i for i, s in enumerate(states)}
        if len(index) != len(states):
            raise ModelError(f"automaton {name!r} has duplicate states")
        out = [Motion(i, i, (0,) * len(boundaries), True, ("idle", s))
               for i, s in enumerate(states)]
        for k, spec in enumerate(motions):
            src, tgt, labels = spec[0], spec[1], spec[2]
            key = spec[3] if len(spec) > 3 else f"m{k}"
            if src not in index or tgt not in index:
                raise ModelError(f"automaton {name!r}: motion {key} uses an unknown state")
            if len(labels) != len(boundaries):
                raise ModelError(f"automaton {name!r}: motion {key} has {len(labels)} "
                                 f"labels for {len(boundaries)} boundaries")
            idx = tuple(b.index(x) if isinstance(x, str) else int(x)
                        for b, x in zip(boundaries, labels))
            out.append(Motion(index[src], index[tgt], idx, False, key))
        if initial is not None and initial not in index:
            raise ModelError(f"automaton {name!r}: unknown initial state {initial!r}")
        return cls(boundaries, states, out, range(len(states)),
                   None if initial is None else index[initial], split, name)

    # -- lookups -----------------------------------------------------------

    @cached_property
    def state_index(self) -> dict:
        return {s: i for i, s in enumerate(self.states)}

    @cached_property
    def motion_index(self) -> dict:
        return {m.key: i for i, m in enumerate(self.motions)}

    @cached_property
    def out_motions(self) -> tuple[tuple[int, ...], ...]:
        out = [[] for _ in self.states]
        for i, m in enumerate(self.motions):
            out[m.source].append(i)
        return tuple(map(tuple, out))

    def state(self, label: Hashable) -> int:
        try:
            return self.state_index[label]
        except KeyError:
            raise ModelError(f"{label!r} is not a state of {self.name or 'automaton'}") from None

    def is_trivial(self, m: int, i: int) -> bool:
        return self.motions[m].labels[i] == self.boundaries[i].reflexive

    def is_deadlock(self, v: int) -> bool:
        return all(self.motions[m].reflexive for m in self.out_motions[v])

    def label_names(self, m: int) -> tuple[str, ...]:
        return tuple(b.actions[a] for b, a in zip(self.boundaries, self.motions[m].labels))

    @property
    def initial_label(self):
        return None if self.initial is None else self.states[self.initial]

    def with_initial(self, label: Hashable, name: str | None = None) -> "Automaton":
        return Automaton(self.boundaries, self.states, self.motions, self.reflexive_of,
                         self.state(label), self.split, self.name if name is None else name)

    def renamed(self, name: str) -> "Automaton":
        return Automaton(self.boundaries, self.states, self.motions, self.reflexive_of,
                         self.initial, self.split, name)

    def __repr__(self):
        return (f"Automaton({self.name or '?'}: {len(self.states)} states, "
                f"{len(self.motions)} motions, {len(self.boundaries)} boundaries)")


def validate(a: Automaton) -> list[str]:
    """Return the list of invariant violations (empty when ``a`` is well formed)."""
    problems = []
    n = len(a.states)
    if len(set(a.states)) != n:
        problems.append("duplicate state identifiers")
    if len(a.reflexive_of) != n:
        problems.append("reflexive motion map does not cover every state")
    if a.split is not None and not 0 <= a.split <= len(a.boundaries):
        problems.append(f"split {a.split} exceeds {len(a.boundaries)} boundaries")
    if a.initial is not None and not 0 <= a.initial < n:
        problems.append("initial state is not a state")
    for k, m in enumerate(a.motions):
        tag = f"motion {m.key!r} (#{k})"
        if not (0 <= m.source < n and 0 <= m.target < n):
            problems.append(f"{tag}: endpoint is not a state")
        if len(m.labels) != len(a.boundaries):
            problems.append(f"{tag}: {len(m.labels)} labels for {len(a.boundaries)} boundaries")
            continue
        for i, (b, x) in enumerate(zip(a.boundaries, m.labels)):
            if not 0 <= x < len(b):
                problems.append(f"{tag}: label {x} on boundary {i} not in {b.name}")
        if m.reflexive:
            if m.source != m.target:
                problems.append(f"{tag}: reflexive motion is not a self-loop")
            if any(x != b.reflexive for b, x in zip(a.boundaries, m.labels)):
                problems.append(f"{tag}: reflexive motion carries a nontrivial label")
    for v, r in enumerate(a.reflexive_of[:n]):
        if not 0 <= r < len(a.motions):
            problems.append(f"state {a.states[v]!r}: reflexive motion index out of range")
            continue
        m = a.motions[r]
        if not m.reflexive or m.source != v:
            problems.append(f"state {a.states[v]!r}: designated reflexive motion is not "
                            f"a reflexive self-loop at that state")
    flagged = [m for m in a.motions if m.reflexive]
    if len(flagged) != n:
        problems.append(f"{len(flagged)} motions flagged reflexive for {n} states")
    return problems


# -- behaviours ---------------------------------------------------------------

def _check_behaviour(a: Automaton, b: Behaviour, i: int | None = None):
    if i is not None and not 0 <= i < len(a.boundaries):
        raise ModelError(f"boundary {i} out of range")
    if not 0 <= b.start < len(a.states):
        raise ModelError("behaviour starts outside the automaton")
    at = b.start
    for k, m in enumerate(b.steps):
        if not 0 <= m < len(a.motions) or a.motions[m].source != at:
            raise ModelError(f"behaviour step {k} does not continue the path")
        at = a.motions[m].target


def appearance(a: Automaton, b: Behaviour, i: int) -> tuple[str, ...]:
    _check_behaviour(a, b, i)
    acts = a.boundaries[i].actions
    return tuple(acts[a.motions[m].labels[i]] for m in b.steps)


def reduced_appearance(a: Automaton, b: Behaviour, i: int) -> tuple[str, ...]:
    _check_behaviour(a, b, i)
    bd = a.boundaries[i]
    return tuple(bd.actions[a.motions[m].labels[i]] for m in b.steps
                 if a.motions[m].labels[i] != bd.reflexive)


def behaviours(a: Automaton, length: int, start: int | None = None):
    """Yield every behaviour with exactly ``length`` steps (from ``start`` or any state)."""
    starts = range(len(a.states)) if start is None else (start,)
    for s in starts:
        stack = [(s, ())]
        while stack:
            at, steps = stack.pop()
            if len(steps) == length:
                yield Behaviour(s, steps)
                continue
            for m in a.out_motions[at]:
                stack.append((a.motions[m].target, steps + (m,)))


# -- subautomata --------------------------------------------------------------

def subautomaton(a: Automaton, keep_states: Iterable[int], keep_motion=None,
                 initial: int | None = None) -> Automaton:
    """Restrict ``a`` to a state subset (kept in original order) and a motion filter.

    Reflexive motions of kept states are always kept.
    """
    keep = sorted(set(keep_states))
    remap = {v: k for k, v in enumerate(keep)}
    motions, refl = [], [0] * len(keep)
    for m in a.motions:
        if m.source in remap and m.target in remap and (
                m.reflexive or keep_motion is None or keep_motion(m)):
            if m.reflexive:
                refl[remap[m.source]] = len(motions)
            motions.append(Motion(remap[m.source], remap[m.target], m.labels, m.reflexive, m.key))
    init = a.initial if initial is None else initial
    return Automaton(a.boundaries, [a.states[v] for v in keep], motions, refl,
                     remap.get(init) if init is not None else None, a.split, a.name)


def reachable_states(a: Automaton, start: int) -> list[int]:
    seen = {start}
    queue = deque([start])
    order = [start]
    while queue:
        v = queue.popleft()
        for m in a.out_motions[v]:
            w = a.motions[m].target
            if w not in seen:
                seen.add(w)
                order.append(w)
                queue.append(w)
    return order


def reachable(a: Automaton, start: Hashable | None = None) -> Automaton:
    """Subautomaton reachable from ``start`` (a state label; default: the initial state)."""
    if start is None:
        if a.initial is None:
            raise ModelError("reachable() needs a start state or an initial state")
        v = a.initial
    else:
        v = a.state(start)
    return subautomaton(a, reachable_states(a, v), initial=v)


# -- linearity ----------------------------------------------------------------

def nontrivial_boundaries(a: Automaton, m: int) -> tuple[int, ...]:
    mo = a.motions[m]
    return tuple(i for i, (b, x) in enumerate(zip(a.boundaries, mo.labels)) if x != b.reflexive)


def is_linear_motion(a: Automaton, m: int) -> bool:
    return len(nontrivial_boundaries(a, m)) <= 1


def linear_motions(a: Automaton) -> list[int]:
    return [m for m in range(len(a.motions)) if is_linear_motion(a, m)]


def is_linear(a: Automaton) -> bool:
    return all(is_linear_motion(a, m) for m in range(len(a.motions)))


def linearize(a: Automaton) -> Automaton:
    if is_linear(a):
        return a
    refl = [b.reflexive for b in a.boundaries]
    return subautomaton(a, range(len(a.states)),
                        keep_motion=lambda m: sum(x != r for x, r in zip(m.labels, refl)) <= 1)


@dataclass
class LinearizabilityResult:
    linearizable: bool
    refinements: dict = field(default_factory=dict)
    failure: tuple | None = None  # (motion index, boundary order)

    def __bool__(self):
        return self.linearizable


def _refine(a: Automaton, e: int, order: tuple[int, ...], lin: list[list[int]]):
    """Search a path of linear motions performing e's actions in ``order``.

    Search state is (state, number of ordered boundaries already served).  A
    step nontrivial on the next boundary of the order must carry e's action
    there; a step nontrivial on an already served or a later boundary of the
    order is rejected.  Boundaries outside the order are unconstrained.
    """
    mo = a.motions[e]
    pos = {i: k for k, i in enumerate(order)}
    goal = (mo.target, len(order))
    start = (mo.source, 0)
    parent = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            path = []
            while parent[node] is not None:
                node, m = parent[node]
                path.append(m)
            return tuple(reversed(path))
        v, k = node
        for m in lin[v]:
            step = a.motions[m]
            moved = [i for i, (b, x) in enumerate(zip(a.boundaries, step.labels))
                     if x != b.reflexive and i in pos]
            nk = k
            if moved:
                i = moved[0]
                if pos[i] != k or step.labels[i] != mo.labels[i]:
                    continue
                nk = k + 1
            nxt = (step.target, nk)
            if nxt not in parent:
                parent[nxt] = (node, m)
                queue.append(nxt)
    return None


def is_linearizable(a: Automaton) -> LinearizabilityResult:
    """Check that every motion refines, for every order of its active boundaries,
    into a path of linear motions performing the same actions in that order."""
    lin = [[m for m in a.out_motions[v] if is_linear_motion(a, m)] for v in range(len(a.states))]
    result = LinearizabilityResult(True)
    for e in range(len(a.motions)):
        active = nontrivial_boundaries(a, e)
        for order in itertools.permutations(active):
            path = _refine(a, e, order, lin)
            if path is None:
                return LinearizabilityResult(False, result.refinements, (e, order))
            result.refinements[(e, order)] = path
    return result
