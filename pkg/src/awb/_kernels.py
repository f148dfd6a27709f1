"""Array kernels for on-the-fly exploration of composite state spaces.

Every function here is written in the subset of Python that numba's nopython
mode accepts and that plain numpy also runs.  With numba importable and
``AWB_NUMBA`` unset (or anything other than ``0``) they are compiled with
``njit``; otherwise the very same code runs as the numpy fallback.

System layout (built by ``design.CompiledSystem``):

* global state key: mixed radix ``sum(local[c] * radix[c])``;
* ``soff[c] + v`` numbers local state ``v`` of component ``c``;
* ``out_ptr`` is a CSR index from numbered local states into motion arrays,
  motions being grouped by (component, source);
* ``lab[m, i]`` is motion ``m``'s action on its component's port ``i``,
  normalised so that 0 is the trivial action;
* ``poff[c] + i`` numbers port ``i`` of component ``c``; ``partner`` gives the
  port wired to it, or -1 for an open port.
"""

from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - exercised through the env flag
    import numba
except ImportError:  # pragma: no cover
    numba = None

USING_NUMBA = numba is not None and os.environ.get("AWB_NUMBA", "1") != "0"


def kernel(fn):
    if USING_NUMBA:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn


EMPTY = -1


@kernel
def decode(key, radix, nst):
    local = np.empty(radix.shape[0], np.int64)
    for c in range(radix.shape[0]):
        local[c] = (key // radix[c]) % nst[c]
    return local


@kernel
def target_key(choice, tgt, radix):
    key = 0
    for c in range(choice.shape[0]):
        key += tgt[choice[c]] * radix[c]
    return key


@kernel
def _push(buf, count, row):
    if count == buf.shape[0]:
        bigger = np.empty((2 * buf.shape[0], buf.shape[1]), np.int64)
        bigger[:count] = buf
        buf = bigger
    buf[count, :] = row
    return buf


@kernel
def enum_moves(local, allowed, atomic, limit, soff, out_ptr, refl_m, tgt, refl, lab,
               single, poff, npt, partner, port_comp):
    """Global motions from ``local`` moving only ``allowed`` components.

    Returns an array of rows, one motion index per component.  The
    all-reflexive motion is never included.  ``atomic`` restricts to single
    moves trivial on wired ports plus synchronised pairs across one wire.
    ``limit > 0`` stops after that many rows.
    """
    C = local.shape[0]
    buf = np.empty((8, C), np.int64)
    count = 0
    base = np.empty(C, np.int64)
    for c in range(C):
        base[c] = refl_m[soff[c] + local[c]]
    if atomic:
        for c in range(C):
            if allowed[c] == 0:
                continue
            s = soff[c] + local[c]
            for m in range(out_ptr[s], out_ptr[s + 1]):
                if refl[m] != 0:
                    continue
                i = single[m]
                q = -1
                if i >= 0:
                    q = partner[poff[c] + i]
                if q < 0:
                    row = base.copy()
                    row[c] = m
                    buf = _push(buf, count, row)
                    count += 1
                else:
                    d = port_comp[q]
                    if d <= c or allowed[d] == 0:
                        continue
                    j = q - poff[d]
                    sd = soff[d] + local[d]
                    for f in range(out_ptr[sd], out_ptr[sd + 1]):
                        if lab[f, j] == lab[m, i]:
                            row = base.copy()
                            row[c] = m
                            row[d] = f
                            buf = _push(buf, count, row)
                            count += 1
                if limit > 0 and count >= limit:
                    return buf[:count].copy()
        return buf[:count].copy()

    lo = np.empty(C, np.int64)
    hi = np.empty(C, np.int64)
    for c in range(C):
        if allowed[c] != 0:
            s = soff[c] + local[c]
            lo[c] = out_ptr[s]
            hi[c] = out_ptr[s + 1]
        else:
            lo[c] = base[c]
            hi[c] = base[c] + 1
    ptr = np.empty(C, np.int64)
    choice = np.empty(C, np.int64)
    depth = 0
    ptr[0] = lo[0]
    while depth >= 0:
        c = depth
        if ptr[c] >= hi[c]:
            depth -= 1
            continue
        m = ptr[c]
        ptr[c] += 1
        ok = True
        for i in range(npt[c]):
            q = partner[poff[c] + i]
            if q < 0:
                continue
            d = port_comp[q]
            if d < c:
                if lab[choice[d], q - poff[d]] != lab[m, i]:
                    ok = False
                    break
            elif d == c:
                if lab[m, q - poff[c]] != lab[m, i]:
                    ok = False
                    break
        if not ok:
            continue
        choice[c] = m
        if c < C - 1:
            depth += 1
            ptr[depth] = lo[depth]
            continue
        moving = False
        for d in range(C):
            if refl[choice[d]] == 0:
                moving = True
                break
        if moving:
            buf = _push(buf, count, choice)
            count += 1
            if limit > 0 and count >= limit:
                return buf[:count].copy()
    return buf[:count].copy()


@kernel
def watching_graph(local, soff, watch, poff, npt, partner, port_comp):
    """adj[c, d] = 1 when component c watches a port wired to component d."""
    C = local.shape[0]
    adj = np.zeros((C, C), np.int8)
    for c in range(C):
        s = soff[c] + local[c]
        for i in range(npt[c]):
            if watch[s, i] != 0:
                q = partner[poff[c] + i]
                if q >= 0:
                    adj[c, port_comp[q]] = 1
    return adj


@kernel
def closures(adj):
    """Row c: forward closure of c in the watching graph (smallest introspective set)."""
    C = adj.shape[0]
    out = np.zeros((C, C), np.int8)
    stack = np.empty(C, np.int64)
    for c in range(C):
        out[c, c] = 1
        top = 0
        stack[top] = c
        top += 1
        while top > 0:
            top -= 1
            u = stack[top]
            for v in range(C):
                if adj[u, v] != 0 and out[c, v] == 0:
                    out[c, v] = 1
                    stack[top] = v
                    top += 1
    return out


@kernel
def _mask_before(a, b):
    """Order on component sets: size first, then lexicographic on sorted indices."""
    na = 0
    nb = 0
    for i in range(a.shape[0]):
        na += a[i]
        nb += b[i]
    if na != nb:
        return na < nb
    for i in range(a.shape[0]):
        if a[i] != b[i]:
            return a[i] != 0
    return False


@kernel
def choose_subsystem(local, atomic, soff, out_ptr, refl_m, tgt, refl, lab, single, watch,
                     poff, npt, partner, port_comp):
    """Smallest non-deadlocked minimal introspective subsystem at ``local``.

    Returns ``(found, mask)``; ``found`` is False exactly at a global deadlock.
    """
    C = local.shape[0]
    adj = watching_graph(local, soff, watch, poff, npt, partner, port_comp)
    cl = closures(adj)
    done = np.zeros(C, np.int8)
    for _ in range(C):
        best = -1
        for c in range(C):
            if done[c] == 0 and (best < 0 or _mask_before(cl[c], cl[best])):
                best = c
        if best < 0:
            break
        for c in range(C):
            if done[c] == 0:
                same = True
                for d in range(C):
                    if cl[c, d] != cl[best, d]:
                        same = False
                        break
                if same:
                    done[c] = 1
        moves = enum_moves(local, cl[best], atomic, 1, soff, out_ptr, refl_m, tgt, refl, lab,
                           single, poff, npt, partner, port_comp)
        if moves.shape[0] > 0:
            return True, cl[best].copy()
    return False, np.zeros(C, np.int8)


@kernel
def _hash(key, mask):
    h = (key ^ (key >> 23) ^ (key >> 41)) & 0x7FFFFFF
    h = (h * 40503) ^ (key >> 11)
    return h & mask


@kernel
def _lookup(tkeys, tvals, key):
    mask = tkeys.shape[0] - 1
    h = _hash(key, mask)
    while tkeys[h] != EMPTY:
        if tkeys[h] == key:
            return tvals[h]
        h = (h + 1) & mask
    return -1


@kernel
def _insert(tkeys, tvals, key, val):
    mask = tkeys.shape[0] - 1
    h = _hash(key, mask)
    while tkeys[h] != EMPTY:
        h = (h + 1) & mask
    tkeys[h] = key
    tvals[h] = val


@kernel
def _rehash(tkeys, tvals):
    nk = np.full(2 * tkeys.shape[0], EMPTY, np.int64)
    nv = np.empty(2 * tkeys.shape[0], np.int64)
    for h in range(tkeys.shape[0]):
        if tkeys[h] != EMPTY:
            _insert(nk, nv, tkeys[h], tvals[h])
    return nk, nv


@kernel
def explore(init_key, misa, atomic, max_states, radix, nst, soff, out_ptr, refl_m, tgt, refl,
            lab, single, watch, poff, npt, partner, port_comp):
    """FIFO exploration from ``init_key`` over a hashed visited set.

    With ``misa`` set, each non-deadlocked state expands only the motions of
    its chosen minimal introspective subsystem; otherwise every successor is
    expanded.  Returns visited keys in discovery order, parent indices,
    deadlock flags (1 = deadlock, -1 = not expanded) and a completeness flag.
    """
    C = radix.shape[0]
    cap = 1024
    keys = np.empty(cap, np.int64)
    parent = np.empty(cap, np.int64)
    dead = np.full(cap, -1, np.int8)
    tkeys = np.full(4096, EMPTY, np.int64)
    tvals = np.empty(4096, np.int64)
    keys[0] = init_key
    parent[0] = -1
    _insert(tkeys, tvals, init_key, 0)
    n = 1
    head = 0
    complete = True
    full = np.ones(C, np.int8)
    while head < n and complete:
        local = decode(keys[head], radix, nst)
        if misa:
            found, allowed = choose_subsystem(local, atomic, soff, out_ptr, refl_m, tgt, refl,
                                              lab, single, watch, poff, npt, partner, port_comp)
            if not found:
                dead[head] = 1
                head += 1
                continue
        else:
            allowed = full
        moves = enum_moves(local, allowed, atomic, 0, soff, out_ptr, refl_m, tgt, refl, lab,
                           single, poff, npt, partner, port_comp)
        dead[head] = 1 if moves.shape[0] == 0 else 0
        for r in range(moves.shape[0]):
            k = target_key(moves[r], tgt, radix)
            if _lookup(tkeys, tvals, k) >= 0:
                continue
            if n >= max_states:
                complete = False
                break
            if n == keys.shape[0]:
                keys2 = np.empty(2 * n, np.int64)
                keys2[:n] = keys
                keys = keys2
                parent2 = np.empty(2 * n, np.int64)
                parent2[:n] = parent
                parent = parent2
                dead2 = np.full(2 * n, -1, np.int8)
                dead2[:n] = dead
                dead = dead2
            keys[n] = k
            parent[n] = head
            _insert(tkeys, tvals, k, n)
            n += 1
            if 2 * n > tkeys.shape[0]:
                tkeys, tvals = _rehash(tkeys, tvals)
        head += 1
    return keys[:n].copy(), parent[:n].copy(), dead[:n].copy(), complete


@kernel
def expand(key, misa, atomic, radix, nst, soff, out_ptr, refl_m, tgt, refl, lab, single,
           watch, poff, npt, partner, port_comp):
    """One expansion step: ``(is_deadlock, successor keys)`` for a single state."""
    C = radix.shape[0]
    local = decode(key, radix, nst)
    if misa:
        found, allowed = choose_subsystem(local, atomic, soff, out_ptr, refl_m, tgt, refl, lab,
                                          single, watch, poff, npt, partner, port_comp)
        if not found:
            return True, np.empty(0, np.int64)
    else:
        allowed = np.ones(C, np.int8)
    moves = enum_moves(local, allowed, atomic, 0, soff, out_ptr, refl_m, tgt, refl, lab,
                       single, poff, npt, partner, port_comp)
    out = np.empty(moves.shape[0], np.int64)
    for r in range(moves.shape[0]):
        out[r] = target_key(moves[r], tgt, radix)
    return moves.shape[0] == 0, out
