"""Designs (expressions over automaton variables), systems and lazy successors.

A design is a tree of ``Var``/``Const`` leaves combined by ``Bind``,
``Feedback``, ``Product`` and ``Opposite`` nodes.  ``flatten`` turns it into
a wiring diagram whose components appear in left-to-right leaf order;
``CompiledSystem`` packs a system into flat arrays for the exploration
kernels, and ``successors`` enumerates global motions on the fly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Hashable, Sequence

import numpy as np

from . import _kernels as K
from .algebra import (bind, bind_layout, default_bind_pairs, diagonal_aut, feedback,
                      feedback_layout, identity_aut, opposite, opposite_layout, product,
                      product_layout)
from .core import ActionSet, Automaton, ModelError, is_linear, nontrivial_boundaries

Port = tuple[int, int]  # (component, boundary)


# -- design tree -----------------------------------------------------------------

@dataclass(frozen=True)
class Var:
    """An occurrence of automaton variable ``name``; ``label`` names the component."""
    name: str
    boundaries: tuple[ActionSet, ...]
    split: int | None = None
    label: str | None = None

    @classmethod
    def of(cls, a: Automaton, label: str | None = None, name: str | None = None) -> "Var":
        return cls(name or a.name, a.boundaries, a.split, label)


@dataclass(frozen=True)
class Const:
    kind: str  # "identity" | "diagonal"
    actionset: ActionSet
    label: str | None = None

    def __post_init__(self):
        if self.kind not in ("identity", "diagonal"):
            raise ModelError(f"unknown structural constant {self.kind!r}")


@dataclass(frozen=True)
class Bind:
    left: "Design"
    right: "Design"
    pairs: tuple[tuple[int, int], ...] | None = None


@dataclass(frozen=True)
class Feedback:
    child: "Design"
    pairs: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class Product:
    left: "Design"
    right: "Design"


@dataclass(frozen=True)
class Opposite:
    child: "Design"


Design = Var | Const | Bind | Feedback | Product | Opposite


def chain(*parts: Design) -> Design:
    """Left-nested default binds ``((a ; b) ; c) ...``."""
    out = parts[0]
    for p in parts[1:]:
        out = Bind(out, p)
    return out


def _describe(d: Design) -> str:
    if isinstance(d, Var):
        return f"{d.label or '?'}:{d.name}"
    if isinstance(d, Const):
        return f"{'id' if d.kind == 'identity' else 'diag'}<{d.actionset.name}>"
    return type(d).__name__


def signature(d: Design) -> tuple[tuple[ActionSet, ...], int | None]:
    """Outer boundaries and split of a design; raises ModelError when ill typed."""
    if isinstance(d, Var):
        return tuple(d.boundaries), d.split
    if isinstance(d, Const):
        return ((d.actionset,) * (2 if d.kind == "identity" else 3),
                1 if d.kind == "identity" else 2)
    if isinstance(d, Bind):
        sb, ss = signature(d.left)
        tb, ts = signature(d.right)
        pairs = _bind_pairs(d, sb, tb)
        s_rem, t_rem, split = bind_layout(len(sb), ss, len(tb), ts, pairs)
        return tuple(sb[i] for i in s_rem) + tuple(tb[i] for i in t_rem), split
    if isinstance(d, Feedback):
        b, s = signature(d.child)
        pairs = _fb_pairs(d, b)
        rem, split = feedback_layout(len(b), s, pairs)
        return tuple(b[i] for i in rem), split
    if isinstance(d, Product):
        sb, ss = signature(d.left)
        tb, ts = signature(d.right)
        order, split = product_layout(len(sb), ss, len(tb), ts)
        return tuple((sb, tb)[o][i] for o, i in order), split
    if isinstance(d, Opposite):
        b, s = signature(d.child)
        try:
            order, split = opposite_layout(len(b), s)
        except ModelError as exc:
            raise ModelError(f"op(...): {exc}") from None
        return tuple(b[i] for i in order), split
    raise ModelError(f"not a design node: {d!r}")


def _bind_pairs(d: Bind, sb, tb) -> list[tuple[int, int]]:
    if not sb or not tb:
        raise ModelError(f"bind of {_describe(d.left)} and {_describe(d.right)}: "
                         "an operand has no boundaries")
    pairs = list(d.pairs) if d.pairs is not None else default_bind_pairs(len(sb))
    js = [j for j, _ in pairs]
    ks = [k for _, k in pairs]
    if len(set(js)) != len(js) or len(set(ks)) != len(ks):
        raise ModelError("bind: a boundary is glued twice")
    for j, k in pairs:
        if not (0 <= j < len(sb) and 0 <= k < len(tb)):
            raise ModelError(f"bind of {_describe(d.left)} and {_describe(d.right)}: "
                             f"boundary pair ({j}, {k}) out of range")
        if sb[j] != tb[k]:
            raise ModelError(f"bind of {_describe(d.left)} and {_describe(d.right)}: "
                             f"type mismatch {sb[j].name} vs {tb[k].name} at ({j}, {k})")
    return pairs


def _fb_pairs(d: Feedback, b) -> list[tuple[int, int]]:
    pairs = [tuple(p) for p in d.pairs]
    used = [i for p in pairs for i in p]
    if not pairs or len(set(used)) != len(used):
        raise ModelError("feedback: boundary pairs must be disjoint and non-empty")
    for j, k in pairs:
        if not (0 <= j < len(b) and 0 <= k < len(b)):
            raise ModelError(f"feedback over {_describe(d.child)}: pair ({j}, {k}) out of range")
        if b[j] != b[k]:
            raise ModelError(f"feedback over {_describe(d.child)}: type mismatch "
                             f"{b[j].name} vs {b[k].name} at ({j}, {k})")
    return pairs


def leaves(d: Design) -> list[Var | Const]:
    if isinstance(d, (Var, Const)):
        return [d]
    if isinstance(d, (Bind, Product)):
        return leaves(d.left) + leaves(d.right)
    return leaves(d.child)


def variables(d: Design) -> dict[str, Var]:
    """Variable name -> a representative occurrence; checks signature consistency."""
    out: dict[str, Var] = {}
    for leaf in leaves(d):
        if isinstance(leaf, Var):
            prev = out.setdefault(leaf.name, leaf)
            if (prev.boundaries, prev.split) != (leaf.boundaries, leaf.split):
                raise ModelError(f"variable {leaf.name!r} is used with two signatures")
    return out


# -- wiring diagrams -------------------------------------------------------------

@dataclass(frozen=True)
class Component:
    label: str
    variable: str | None  # None for structural constants
    kind: str             # "var" | "identity" | "diagonal"
    ports: tuple[ActionSet, ...]


@dataclass(frozen=True)
class WiringDiagram:
    components: tuple[Component, ...]
    wires: tuple[tuple[Port, Port], ...]
    open_ports: tuple[Port, ...]
    split: int | None

    @cached_property
    def partner(self) -> dict[Port, Port]:
        out = {}
        for a, b in self.wires:
            out[a] = b
            out[b] = a
        return out

    def labels(self) -> list[str]:
        return [c.label for c in self.components]


def component_labels(d: Design) -> list[str]:
    """Component names in leaf order; unnamed leaves get ``<var><k>`` / ``id<k>``."""
    counts: dict[str, int] = {}
    out = []
    for leaf in leaves(d):
        if leaf.label:
            out.append(leaf.label)
            continue
        if isinstance(leaf, Var):
            base = leaf.name
        else:
            base = "id" if leaf.kind == "identity" else "diag"
        counts[base] = counts.get(base, 0) + 1
        out.append(f"{base}{counts[base]}")
    seen = set()
    for lab in out:
        if lab in seen:
            raise ModelError(f"duplicate component name {lab!r}")
        seen.add(lab)
    return out


def flatten(d: Design) -> WiringDiagram:
    """Wiring diagram of ``d``: components in leaf order, open ports in signature order."""
    signature(d)  # type-check up front for good messages
    labels = component_labels(d)
    comps: list[Component] = []
    wires: list[tuple[Port, Port]] = []

    def walk(node) -> tuple[list[Port], int | None]:
        if isinstance(node, (Var, Const)):
            c = len(comps)
            ports, split = signature(node)
            if isinstance(node, Var):
                comps.append(Component(labels[c], node.name, "var", ports))
            else:
                comps.append(Component(labels[c], None, node.kind, ports))
            return [(c, i) for i in range(len(ports))], split
        if isinstance(node, Bind):
            lo, ls = walk(node.left)
            ro, rs = walk(node.right)
            pairs = list(node.pairs) if node.pairs is not None else default_bind_pairs(len(lo))
            for j, k in pairs:
                wires.append((lo[j], ro[k]))
            s_rem, t_rem, split = bind_layout(len(lo), ls, len(ro), rs, pairs)
            return [lo[i] for i in s_rem] + [ro[i] for i in t_rem], split
        if isinstance(node, Feedback):
            o, s = walk(node.child)
            for j, k in node.pairs:
                wires.append((o[j], o[k]))
            rem, split = feedback_layout(len(o), s, node.pairs)
            return [o[i] for i in rem], split
        if isinstance(node, Product):
            lo, ls = walk(node.left)
            ro, rs = walk(node.right)
            order, split = product_layout(len(lo), ls, len(ro), rs)
            return [(lo, ro)[p][i] for p, i in order], split
        o, s = walk(node.child)
        order, split = opposite_layout(len(o), s)
        return [o[i] for i in order], split

    open_ports, split = walk(d)
    wires = sorted(tuple(sorted(w)) for w in wires)
    return WiringDiagram(tuple(comps), tuple(wires), tuple(open_ports), split)


# -- systems ---------------------------------------------------------------------

@dataclass(frozen=True)
class GlobalMotion:
    motions: tuple[int, ...]         # local motion index per component
    open_labels: tuple[str, ...]     # induced actions on the open ports

    def keys(self, sys: "System") -> tuple:
        return tuple(a.motions[m].key for a, m in zip(sys.automata, self.motions))


@dataclass(eq=False)
class System:
    """A design together with an assignment of automata to its variables."""

    design: Design
    assignment: dict[str, Automaton]
    name: str = ""

    def __post_init__(self):
        self.assignment = dict(self.assignment)
        for vname, var in variables(self.design).items():
            a = self.assignment.get(vname)
            if a is None:
                raise ModelError(f"system {self.name!r}: variable {vname!r} is not assigned")
            if tuple(a.boundaries) != tuple(var.boundaries):
                raise ModelError(f"system {self.name!r}: automaton for {vname!r} does not "
                                 "match the variable's signature")
            if a.initial is None:
                raise ModelError(f"system {self.name!r}: automaton for {vname!r} has no "
                                 "initial state")
        self.diagram  # noqa: B018 - flatten eagerly to surface type errors

    @classmethod
    def of(cls, design: Design, automata: Sequence[Automaton] | dict, name: str = ""):
        if not isinstance(automata, dict):
            automata = {a.name: a for a in automata}
        return cls(design, automata, name)

    @cached_property
    def diagram(self) -> WiringDiagram:
        return flatten(self.design)

    @cached_property
    def automata(self) -> tuple[Automaton, ...]:
        out = []
        for comp in self.diagram.components:
            if comp.kind == "var":
                out.append(self.assignment[comp.variable])
            elif comp.kind == "identity":
                out.append(identity_aut(comp.ports[0]))
            else:
                out.append(diagonal_aut(comp.ports[0]))
        return tuple(out)

    @property
    def component_names(self) -> list[str]:
        return self.diagram.labels()

    def component_index(self, label: str) -> int:
        try:
            return self.component_names.index(label)
        except ValueError:
            raise ModelError(f"no component named {label!r}") from None

    @property
    def initial(self) -> tuple:
        return tuple(a.initial_label for a in self.automata)

    @cached_property
    def compiled(self) -> "CompiledSystem":
        return CompiledSystem(self)

    @property
    def is_closed(self) -> bool:
        return not self.diagram.open_ports

    def atomic_ready(self) -> str | None:
        """None when atomic mode applies, else the reason it does not."""
        if not self.is_closed:
            return "atomic mode needs a closed system (no open ports)"
        for comp, a in zip(self.diagram.components, self.automata):
            if not is_linear(a):
                return f"atomic mode needs linear components; {comp.label} is not linear"
        return None

    def check_state(self, g: Sequence[Hashable]) -> tuple[int, ...]:
        if len(g) != len(self.automata):
            raise ModelError(f"global state has {len(g)} entries for "
                             f"{len(self.automata)} components")
        return tuple(a.state(v) for a, v in zip(self.automata, g))

    def __repr__(self):
        return f"System({self.name or '?'}: {len(self.automata)} components)"


def state_count(sys: System) -> int:
    """Number of global states (states of the evaluation) without building it."""
    return math.prod(len(a.states) for a in sys.automata)


def evaluate(sys: System) -> Automaton:
    """The composite automaton of the system, built with the algebra operations."""
    it = iter(sys.automata)

    def ev(node) -> Automaton:
        if isinstance(node, (Var, Const)):
            return next(it)
        if isinstance(node, Bind):
            s = ev(node.left)
            t = ev(node.right)
            return bind(s, t, pairs=node.pairs)
        if isinstance(node, Feedback):
            return feedback(ev(node.child), pairs=node.pairs)
        if isinstance(node, Product):
            s = ev(node.left)
            return product(s, ev(node.right))
        return opposite(ev(node.child))

    return ev(sys.design).renamed(sys.name or "system")


def global_state_of(sys: System, label) -> tuple:
    """Flatten a nested evaluation state label into a global state (leaf order)."""
    out: list = []

    def walk(node, lab):
        if isinstance(node, (Var, Const)):
            out.append(lab)
        elif isinstance(node, (Bind, Product)):
            walk(node.left, lab[0])
            walk(node.right, lab[1])
        else:
            walk(node.child, lab)

    walk(sys.design, label)
    return tuple(out)


def evaluation_label(sys: System, g: Sequence) -> Hashable:
    """Inverse of ``global_state_of``."""
    it = iter(g)

    def build(node):
        if isinstance(node, (Var, Const)):
            return next(it)
        if isinstance(node, (Bind, Product)):
            left = build(node.left)
            return (left, build(node.right))
        return build(node.child)

    return build(sys.design)


# -- array form for the kernels --------------------------------------------------

class CompiledSystem:
    """Flat arrays describing a system; layout documented in ``_kernels``."""

    def __init__(self, sys: System):
        self.sys = sys
        autos = sys.automata
        diag = sys.diagram
        C = len(autos)
        self.C = C
        nst = np.array([len(a.states) for a in autos], np.int64)
        radix = np.ones(C, np.int64)
        for c in range(C - 2, -1, -1):
            radix[c] = radix[c + 1] * nst[c + 1]
        if C and float(np.prod(nst.astype(float))) >= 2.0 ** 62:
            raise ModelError("global state space too large to index with 64-bit keys")
        self.nst, self.radix = nst, radix
        soff = np.zeros(C + 1, np.int64)
        soff[1:] = np.cumsum(nst)
        poff = np.zeros(C + 1, np.int64)
        npt = np.array([len(a.boundaries) for a in autos], np.int64)
        poff[1:] = np.cumsum(npt)
        maxp = max(1, int(npt.max()) if C else 1)

        S = int(soff[-1])
        M = sum(len(a.motions) for a in autos)
        out_ptr = np.zeros(S + 1, np.int64)
        refl_m = np.zeros(S, np.int64)
        tgt = np.zeros(M, np.int64)
        refl = np.zeros(M, np.int8)
        lab = np.full((M, maxp), -1, np.int64)
        single = np.full(M, -1, np.int64)
        watch = np.zeros((S, maxp), np.int8)
        mot_comp = np.zeros(M, np.int64)
        mot_local = np.zeros(M, np.int64)
        m = 0
        for c, a in enumerate(autos):
            for v, outs in enumerate(a.out_motions):
                s = soff[c] + v
                out_ptr[s] = m
                for li in outs:
                    mo = a.motions[li]
                    tgt[m] = mo.target
                    refl[m] = 1 if mo.reflexive else 0
                    if mo.reflexive:
                        refl_m[s] = m
                    for i, x in enumerate(mo.labels):
                        r = a.boundaries[i].reflexive
                        lab[m, i] = 0 if x == r else x + 1
                        if x != r:
                            watch[s, i] = 1
                    nb = nontrivial_boundaries(a, li)
                    single[m] = -1 if not nb else (nb[0] if len(nb) == 1 else -2)
                    mot_comp[m] = c
                    mot_local[m] = li
                    m += 1
                out_ptr[s + 1] = m
        partner = np.full(int(poff[-1]), -1, np.int64)
        port_comp = np.zeros(int(poff[-1]), np.int64)
        for c in range(C):
            port_comp[poff[c]:poff[c + 1]] = c
        for (c1, i1), (c2, i2) in diag.wires:
            partner[poff[c1] + i1] = poff[c2] + i2
            partner[poff[c2] + i2] = poff[c1] + i1
        self.soff, self.poff, self.npt = soff, poff, npt
        self.out_ptr, self.refl_m, self.tgt, self.refl = out_ptr, refl_m, tgt, refl
        self.lab, self.single, self.watch = lab, single, watch
        self.partner, self.port_comp = partner, port_comp
        self.mot_comp, self.mot_local = mot_comp, mot_local

    @property
    def enum_args(self):
        return (self.soff, self.out_ptr, self.refl_m, self.tgt, self.refl, self.lab,
                self.single, self.poff, self.npt, self.partner, self.port_comp)

    @property
    def choose_args(self):
        return (self.soff, self.out_ptr, self.refl_m, self.tgt, self.refl, self.lab,
                self.single, self.watch, self.poff, self.npt, self.partner, self.port_comp)

    @property
    def explore_args(self):
        return (self.radix, self.nst) + self.choose_args

    def encode(self, g: Sequence[Hashable]) -> int:
        local = self.sys.check_state(g)
        return int(sum(v * int(r) for v, r in zip(local, self.radix)))

    def local_of(self, key: int) -> np.ndarray:
        return (int(key) // self.radix) % self.nst

    def decode(self, key: int) -> tuple:
        return tuple(a.states[int(v)] for a, v in zip(self.sys.automata, self.local_of(key)))

    def local_array(self, g: Sequence[Hashable]) -> np.ndarray:
        return np.array(self.sys.check_state(g), np.int64)

    def moves(self, local: np.ndarray, allowed=None, atomic=False, limit=0) -> np.ndarray:
        if allowed is None:
            allowed = np.ones(self.C, np.int8)
        return K.enum_moves(local, np.asarray(allowed, np.int8), bool(atomic), int(limit),
                            *self.enum_args)

    def global_motion(self, row: np.ndarray) -> GlobalMotion:
        motions = tuple(int(self.mot_local[m]) for m in row)
        autos = self.sys.automata
        open_labels = tuple(
            autos[c].boundaries[i].actions[autos[c].motions[motions[c]].labels[i]]
            for c, i in self.sys.diagram.open_ports)
        return GlobalMotion(motions, open_labels)

    def target(self, row: np.ndarray) -> tuple:
        return tuple(a.states[int(self.tgt[m])] for a, m in zip(self.sys.automata, row))


def _mode_atomic(sys: System, mode: str) -> bool:
    if mode not in ("all", "atomic"):
        raise ModelError(f"unknown mode {mode!r} (expected all or atomic)")
    if mode == "atomic":
        why = sys.atomic_ready()
        if why:
            raise ModelError(why)
        return True
    return False


def successors(sys: System, g: Sequence[Hashable], mode: str = "all"
               ) -> list[tuple[GlobalMotion, tuple]]:
    """Nontrivial global motions out of ``g`` with their target global states."""
    atomic = _mode_atomic(sys, mode)
    cs = sys.compiled
    rows = cs.moves(cs.local_array(g), atomic=atomic)
    return [(cs.global_motion(r), cs.target(r)) for r in rows]


def project_local(sys: System, g: Sequence[Hashable], subset) -> tuple:
    """Restriction of ``g`` to a component subset (indices or names), in component order."""
    idx = sorted({sys.component_index(c) if isinstance(c, str) else int(c) for c in subset})
    if not idx:
        raise ModelError("project_local needs a non-empty component subset")
    sys.check_state(g)
    return tuple(g[c] for c in idx)


__all__ = [
    "Var", "Const", "Bind", "Feedback", "Product", "Opposite", "Design", "chain", "signature",
    "leaves", "variables", "Component", "WiringDiagram", "flatten", "component_labels",
    "GlobalMotion", "System", "state_count", "evaluate", "global_state_of",
    "evaluation_label", "CompiledSystem", "successors", "project_local",
]
