"""Operations on automata: bind, feedback, product, structural constants, opposite.

Composite states are labelled by nested tuples of operand labels (pairs for
bind and product, passthrough for feedback and opposite), which is what
``isomorphic`` and the design layer use to recover local states.

Boundary order conventions:

* bind: the unglued boundaries of the left operand in order, then those of
  the right operand;
* feedback: remaining boundaries keep their relative order;
* product of two split (two-sided) automata ``X -> Y`` and ``Z -> W`` gives
  ``X, Z | Y, W``; without splits the boundaries are concatenated.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

from .core import ActionSet, Automaton, ModelError, Motion

__all__ = [
    "bind", "feedback", "product", "identity_aut", "diagonal_aut", "opposite",
    "isomorphic", "Isomorphism", "flatten_label", "default_bind_pairs",
    "bind_layout", "feedback_layout", "product_layout", "opposite_layout",
]


def _sides(n: int, split: int | None) -> tuple[list[int], list[int]]:
    split = n if split is None else split
    return list(range(split)), list(range(split, n))


def bind_layout(ns: int, s_split: int | None, nt: int, t_split: int | None, pairs):
    """Remaining boundary indices of both operands of a bind, and the result split."""
    sj = {j for j, _ in pairs}
    tk = {k for _, k in pairs}
    s_rem = [i for i in range(ns) if i not in sj]
    t_rem = [i for i in range(nt) if i not in tk]
    split = None
    if s_split is not None and t_split is not None:
        s_left, s_right = _sides(ns, s_split)
        t_left, _ = _sides(nt, t_split)
        sl = [i for i in s_left if i in s_rem]
        sr = [i for i in s_right if i in s_rem]
        tl = [i for i in t_left if i in t_rem]
        if not sr or not tl:
            split = len(sl) + len(tl)
    return s_rem, t_rem, split


def feedback_layout(n: int, split: int | None, pairs):
    used = {i for p in pairs for i in p}
    rem = [i for i in range(n) if i not in used]
    return rem, None if split is None else sum(1 for i in rem if i < split)


def product_layout(ns: int, s_split: int | None, nt: int, t_split: int | None):
    """Boundary order of a product as (operand, index) pairs, plus the split."""
    if s_split is None or t_split is None:
        return [(0, i) for i in range(ns)] + [(1, i) for i in range(nt)], None
    sl, sr = _sides(ns, s_split)
    tl, tr = _sides(nt, t_split)
    order = [(0, i) for i in sl] + [(1, i) for i in tl]
    order += [(0, i) for i in sr] + [(1, i) for i in tr]
    return order, len(sl) + len(tl)


def opposite_layout(n: int, split: int | None):
    if split is None:
        raise ModelError("opposite needs a two-sided automaton (split is not set)")
    left, right = _sides(n, split)
    return right + left, len(right)


def default_bind_pairs(n_left: int) -> list[tuple[int, int]]:
    """Glue the last boundary of the left operand to the first of the right one."""
    return [(n_left - 1, 0)]


def _check_pairs(sb: Sequence[ActionSet], tb: Sequence[ActionSet], pairs, what: str):
    js = [j for j, _ in pairs]
    ks = [k for _, k in pairs]
    if len(set(js)) != len(js) or len(set(ks)) != len(ks):
        raise ModelError(f"{what}: a boundary is glued twice")
    for j, k in pairs:
        if not (0 <= j < len(sb)) or not (0 <= k < len(tb)):
            raise ModelError(f"{what}: boundary pair ({j}, {k}) out of range")
        if sb[j] != tb[k]:
            raise ModelError(f"{what}: boundary {j} has type {sb[j].name} "
                             f"but boundary {k} has type {tb[k].name}")


def bind(s: Automaton, t: Automaton, j: int | None = None, k: int | None = None, *,
         pairs: Sequence[tuple[int, int]] | None = None, name: str = "") -> Automaton:
    """Synchronise ``s`` and ``t`` on the glued boundaries ``(j, k)``.

    Motions of the result are pairs ``(e, f)`` performing equal actions on
    every glued pair.  ``pairs`` glues several boundaries at once (a cable).
    """
    if pairs is None:
        pairs = default_bind_pairs(len(s.boundaries)) if j is None else [(j, k)]
    pairs = [tuple(p) for p in pairs]
    _check_pairs(s.boundaries, t.boundaries, pairs, "bind")
    sj = [j for j, _ in pairs]
    tk = [k for _, k in pairs]
    s_rem, t_rem, split = bind_layout(len(s.boundaries), s.split, len(t.boundaries), t.split,
                                      pairs)

    nt = len(t.states)
    states = [(v, w) for v in s.states for w in t.states]
    by_glue = defaultdict(list)
    for fi, f in enumerate(t.motions):
        by_glue[tuple(f.labels[k] for k in tk)].append(fi)
    motions, reflexive_of = [], [0] * len(states)
    for e in s.motions:
        glue = tuple(e.labels[j] for j in sj)
        head = tuple(e.labels[i] for i in s_rem)
        for fi in by_glue.get(glue, ()):
            f = t.motions[fi]
            src = e.source * nt + f.source
            refl = e.reflexive and f.reflexive
            if refl:
                reflexive_of[src] = len(motions)
            motions.append(Motion(src, e.target * nt + f.target,
                                  head + tuple(f.labels[i] for i in t_rem), refl,
                                  (e.key, f.key)))
    initial = None
    if s.initial is not None and t.initial is not None:
        initial = s.initial * nt + t.initial
    boundaries = [s.boundaries[i] for i in s_rem] + [t.boundaries[i] for i in t_rem]
    return Automaton(boundaries, states, motions, reflexive_of, initial, split,
                     name or f"({s.name};{t.name})")


def feedback(s: Automaton, j: int | None = None, k: int | None = None, *,
             pairs: Sequence[tuple[int, int]] | None = None, name: str = "") -> Automaton:
    """Keep the motions of ``s`` acting equally on boundaries ``j`` and ``k``."""
    if pairs is None:
        if j is None:
            raise ModelError("feedback needs a boundary pair")
        pairs = [(j, k)]
    pairs = [tuple(p) for p in pairs]
    used = [i for p in pairs for i in p]
    if len(set(used)) != len(used):
        raise ModelError("feedback: a boundary is fed back twice (or onto itself)")
    _check_pairs(s.boundaries, s.boundaries, pairs, "feedback")
    rem, split = feedback_layout(len(s.boundaries), s.split, pairs)
    motions, reflexive_of = [], [0] * len(s.states)
    for m in s.motions:
        if all(m.labels[a] == m.labels[b] for a, b in pairs):
            if m.reflexive:
                reflexive_of[m.source] = len(motions)
            motions.append(Motion(m.source, m.target, tuple(m.labels[i] for i in rem),
                                  m.reflexive, m.key))
    return Automaton([s.boundaries[i] for i in rem], s.states, motions, reflexive_of,
                     s.initial, split, name or f"fb({s.name})")


def product(s: Automaton, t: Automaton, name: str = "") -> Automaton:
    """Run ``s`` and ``t`` side by side with no communication."""
    order, split = product_layout(len(s.boundaries), s.split, len(t.boundaries), t.split)
    nt = len(t.states)
    states = [(v, w) for v in s.states for w in t.states]
    motions, reflexive_of = [], [0] * len(states)
    for e in s.motions:
        for f in t.motions:
            lab = (e.labels, f.labels)
            refl = e.reflexive and f.reflexive
            src = e.source * nt + f.source
            if refl:
                reflexive_of[src] = len(motions)
            motions.append(Motion(src, e.target * nt + f.target,
                                  tuple(lab[o][i] for o, i in order), refl, (e.key, f.key)))
    initial = None
    if s.initial is not None and t.initial is not None:
        initial = s.initial * nt + t.initial
    boundaries = [(s.boundaries, t.boundaries)[o][i] for o, i in order]
    return Automaton(boundaries, states, motions, reflexive_of, initial, split,
                     name or f"({s.name}*{t.name})")


def _constant(x: ActionSet, arity: int, split: int, name: str) -> Automaton:
    motions = [Motion(0, 0, (a,) * arity, a == x.reflexive, x.actions[a])
               for a in range(len(x))]
    return Automaton([x] * arity, ["*"], motions, [x.reflexive], 0, split, name)


def identity_aut(x: ActionSet) -> Automaton:
    """One state, one motion ``(x|x)`` per action; identity for binding on ``x``."""
    return _constant(x, 2, 1, f"id<{x.name}>")


def diagonal_aut(x: ActionSet) -> Automaton:
    """One state, one motion ``(x|x|x)`` per action; splits a wire synchronously."""
    return _constant(x, 3, 2, f"diag<{x.name}>")


def opposite(s: Automaton, name: str = "") -> Automaton:
    """Swap the left and right sides of a two-sided automaton."""
    order, split = opposite_layout(len(s.boundaries), s.split)
    motions = [Motion(m.source, m.target, tuple(m.labels[i] for i in order), m.reflexive, m.key)
               for m in s.motions]
    return Automaton([s.boundaries[i] for i in order], s.states, motions, s.reflexive_of,
                     s.initial, split, name or f"op({s.name})")


# -- isomorphism ---------------------------------------------------------------

@dataclass(frozen=True)
class Isomorphism:
    state_map: tuple[int, ...]
    motion_map: tuple[int, ...]


def flatten_label(label) -> tuple:
    """Leaves of a nested tuple label, left to right."""
    if isinstance(label, tuple):
        return tuple(x for part in label for x in flatten_label(part))
    return (label,)


def _complete_motions(s: Automaton, t: Automaton, smap: Sequence[int]):
    if s.initial is not None or t.initial is not None:
        if s.initial is None or t.initial is None or smap[s.initial] != t.initial:
            return None
    pool = defaultdict(list)
    for i, m in enumerate(t.motions):
        pool[(m.source, m.target, m.labels, m.reflexive)].append(i)
    mmap = []
    for m in s.motions:
        bucket = pool.get((smap[m.source], smap[m.target], m.labels, m.reflexive))
        if not bucket:
            return None
        mmap.append(bucket.pop())
    return Isomorphism(tuple(smap), tuple(mmap))


def _coordinate_candidates(s: Automaton, t: Automaton):
    """State bijections obtained by permuting flattened label coordinates."""
    fs = [flatten_label(x) for x in s.states]
    ft = [flatten_label(x) for x in t.states]
    width = {len(x) for x in fs} | {len(x) for x in ft}
    if len(width) != 1:
        return
    (w,) = width
    if w < 2 or w > 6 or len(set(fs)) != len(fs) or len(set(ft)) != len(ft):
        return
    tindex = {x: i for i, x in enumerate(ft)}
    for perm in itertools.permutations(range(w)):
        smap = []
        for x in fs:
            j = tindex.get(tuple(x[p] for p in perm))
            if j is None:
                break
            smap.append(j)
        else:
            if len(set(smap)) == len(smap):
                yield smap


def _refine(autos, colors):
    """Jointly refine state colourings of several automata until stable."""
    while True:
        sigs = []
        for a, col in zip(autos, colors):
            ins = [[] for _ in a.states]
            outs = [[] for _ in a.states]
            for m in a.motions:
                outs[m.source].append((m.labels, m.reflexive, col[m.target]))
                ins[m.target].append((m.labels, col[m.source]))
            sigs.append([(col[v], tuple(sorted(outs[v])), tuple(sorted(ins[v])))
                         for v in range(len(a.states))])
        canon = {sig: i for i, sig in enumerate(sorted({x for ss in sigs for x in ss}))}
        new = [[canon[x] for x in ss] for ss in sigs]
        if all(len(set(n)) == len(set(c)) for n, c in zip(new, colors)):
            return new
        colors = new


def _search(s: Automaton, t: Automaton, cs, ct):
    cs, ct = _refine((s, t), (cs, ct))
    if sorted(cs) != sorted(ct):
        return None
    classes = defaultdict(list)
    for v, c in enumerate(cs):
        classes[c].append(v)
    open_classes = [c for c, vs in classes.items() if len(vs) > 1]
    if not open_classes:
        where = {c: w for w, c in enumerate(ct)}
        return _complete_motions(s, t, [where[c] for c in cs])
    c = min(open_classes, key=lambda c: (len(classes[c]), c))
    v = classes[c][0]
    fresh = max(max(cs), max(ct)) + 1
    for w in (w for w, cw in enumerate(ct) if cw == c):
        ns, nt = list(cs), list(ct)
        ns[v], nt[w] = fresh, fresh
        found = _search(s, t, ns, nt)
        if found is not None:
            return found
    return None


def isomorphic(s: Automaton, t: Automaton) -> Isomorphism | None:
    """Return a state/motion bijection preserving structure and labels, or None."""
    if s.boundaries != t.boundaries:
        raise ModelError("isomorphic(): boundary signatures differ")
    if len(s.states) != len(t.states) or len(s.motions) != len(t.motions):
        return None
    if (s.initial is None) != (t.initial is None):
        return None
    if sorted(m.labels for m in s.motions) != sorted(m.labels for m in t.motions):
        return None
    for smap in _coordinate_candidates(s, t):
        iso = _complete_motions(s, t, smap)
        if iso is not None:
            return iso
    if not s.states:
        return Isomorphism((), ())
    cs = [int(v == s.initial) for v in range(len(s.states))]
    ct = [int(w == t.initial) for w in range(len(t.states))]
    return _search(s, t, cs, ct)
