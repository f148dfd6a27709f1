"""The ``.awb`` model file format: parser, renderer and symbol table.

Example::

    actionset L { lock unlock }
    automaton P : (L ; L) {
      states 0 1 2 3
      init 0
      motion 0 -> 1 [lock, tau] as a
    }
    design ring = fb<L@0,L@3>((p1:P ; f1:Q) ; (p2:P ; f2:Q))
    system phil2 = ring
    simulation p : Pprime => P { state 1' -> 1  motion a' -> a }
    simulation pt : phil2_nondet => phil2 via { p1 = p  p2 = p }

``;`` binds (``;<i,j|k,l>`` names the glued boundary pairs), ``*`` is the
product, ``fb<i,j>(...)`` feeds back ports ``i`` and ``j`` (``L@i`` also
checks the port type).  Ports are numbered consecutively across the
operands of the chain inside ``fb``, so in the ring above ports 0 and 3 are
the two left open by the binds.  ``id<L>``/``diag<L>`` are structural
constants and ``op(...)`` swaps sides.  ``#`` starts a comment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Hashable

from .core import REFLEXIVE, ActionSet, Automaton, ModelError, validate
from .algebra import bind_layout, default_bind_pairs, product_layout
from .design import (Bind, Const, Feedback, Opposite, Product, System, Var, evaluate,
                     signature)
from .simulation import Comparison, Simulation, require, system_sim, verify_simulation


class ParseError(ModelError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}" if line else message)
        self.line, self.col, self.message = line, col, message


_TOKEN = re.compile(r"""
    (?P<ws>\s+) | (?P<comment>\#[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<sym>->|=>|[{}()\[\]<>,;:=*@|])
  | (?P<name>[A-Za-z0-9_'.$]+)
""", re.VERBOSE)

_NAME = re.compile(r"[A-Za-z0-9_'.$]+\Z")
KEYWORDS = {"actionset", "automaton", "design", "system", "simulation", "states", "init",
            "motion", "state", "as", "with", "via"}


@dataclass(frozen=True)
class Tok:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Tok]:
    out = []
    pos, line, lstart = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - lstart + 1)
        kind = m.lastgroup
        tok = m.group()
        if kind not in ("ws", "comment"):
            out.append(Tok(kind, tok, line, pos - lstart + 1))
        nl = tok.count("\n")
        if nl:
            line += nl
            lstart = pos + tok.rindex("\n") + 1
        pos = m.end()
    out.append(Tok("eof", "", line, pos - lstart + 1))
    return out


# -- symbol table -------------------------------------------------------------------

@dataclass
class SimDecl:
    name: str
    source: str
    target: str
    states: list[tuple[Hashable, Hashable]] = field(default_factory=list)
    motions: list[tuple[Hashable, Hashable]] = field(default_factory=list)
    via: dict[str, str] | None = None


@dataclass
class SystemDecl:
    name: str
    design: object
    overrides: dict[str, str] = field(default_factory=dict)


@dataclass
class ModelFile:
    actionsets: dict[str, ActionSet] = field(default_factory=dict)
    automata: dict[str, Automaton] = field(default_factory=dict)
    designs: dict[str, object] = field(default_factory=dict)
    systems: dict[str, SystemDecl] = field(default_factory=dict)
    simulations: dict[str, SimDecl] = field(default_factory=dict)

    # -- resolution -----------------------------------------------------------

    def system(self, name: str) -> System:
        decl = self.systems.get(name)
        if decl is None:
            raise ModelError(f"unknown system {name!r}")
        assignment = {}
        for leaf_name in _var_names(decl.design):
            aut = decl.overrides.get(leaf_name, leaf_name)
            if aut not in self.automata:
                raise ModelError(f"system {name!r}: unknown automaton {aut!r}")
            assignment[leaf_name] = self.automata[aut]
        return System(decl.design, assignment, name)

    def automaton(self, name: str) -> Automaton:
        """An automaton by name, or the evaluation of a system."""
        if name in self.automata:
            return self.automata[name]
        if name in self.systems:
            return evaluate(self.system(name)).renamed(name)
        raise ModelError(f"unknown automaton or system {name!r}")

    def comparison(self, name: str) -> Comparison:
        decl = self.simulations.get(name)
        if decl is None:
            raise ModelError(f"unknown simulation {name!r}")
        if decl.via is not None:
            return self.simulation(name).comparison
        src, tgt = self.automaton(decl.source), self.automaton(decl.target)
        states = dict(decl.states)
        # unlisted states map to the equally named target state
        for v in src.states:
            if v not in states and v in tgt.state_index:
                states[v] = v
        return Comparison.from_labels(src, tgt, states, dict(decl.motions), name)

    def simulation(self, name: str) -> Simulation:
        """Build and verify; raises ModelError with the counterexample otherwise."""
        decl = self.simulations.get(name)
        if decl is None:
            raise ModelError(f"unknown simulation {name!r}")
        if decl.via is None:
            return require(verify_simulation(self.comparison(name)))
        sims = {comp: self.simulation(s) for comp, s in decl.via.items()}
        return system_sim(self.system(decl.source), self.system(decl.target), sims, name)

    def verify(self, name: str):
        """Simulation or Counterexample (never raises for a failed lifting)."""
        decl = self.simulations.get(name)
        if decl is not None and decl.via is not None:
            return self.simulation(name)
        return verify_simulation(self.comparison(name))


def _var_names(d) -> list[str]:
    if isinstance(d, Var):
        return [d.name]
    if isinstance(d, Const):
        return []
    if isinstance(d, (Bind, Product)):
        return _var_names(d.left) + [n for n in _var_names(d.right) if n not in
                                     _var_names(d.left)]
    return _var_names(d.child)


# -- parser -----------------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.mf = ModelFile()

    # token helpers
    def peek(self, k: int = 0) -> Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> Tok:
        t = self.peek()
        self.i += 1
        return t

    def error(self, msg: str, tok: Tok | None = None):
        tok = tok or self.peek()
        raise ParseError(msg, tok.line, tok.col)

    def at(self, text: str) -> bool:
        t = self.peek()
        return t.kind in ("sym", "name") and t.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Tok:
        if not self.at(text):
            t = self.peek()
            self.error(f"expected {text!r}, found {t.text or 'end of file'!r}")
        return self.next()

    def name(self, what: str = "name") -> Tok:
        t = self.peek()
        if t.kind == "name" and t.text not in KEYWORDS:
            return self.next()
        if t.kind == "string":
            self.next()
            return Tok("name", _unquote(t.text), t.line, t.col)
        self.error(f"expected {what}, found {t.text or 'end of file'!r}")

    def integer(self) -> int:
        t = self.peek()
        if t.kind == "name" and t.text.isdigit():
            self.next()
            return int(t.text)
        self.error(f"expected an integer, found {t.text or 'end of file'!r}")

    def label(self):
        t = self.peek()
        if self.accept("("):
            parts = [self.label()]
            while self.accept(","):
                parts.append(self.label())
            self.expect(")")
            return tuple(parts)
        if t.kind == "string":
            self.next()
            return _unquote(t.text)
        if t.kind == "name":
            self.next()
            return int(t.text) if t.text.isdigit() else t.text
        self.error(f"expected a state or motion name, found {t.text or 'end of file'!r}")

    def declare(self, table: dict, name: Tok, what: str):
        if name.text in table:
            self.error(f"duplicate {what} {name.text!r}", name)

    # top level
    def parse(self) -> ModelFile:
        while self.peek().kind != "eof":
            t = self.peek()
            kw = {"actionset": self.actionset, "automaton": self.automaton,
                  "design": self.design, "system": self.system,
                  "simulation": self.simulation}.get(t.text if t.kind == "name" else "")
            if kw is None:
                self.error(f"expected a declaration, found {t.text!r}")
            self.next()
            kw()
        return self.mf

    def actionset(self):
        n = self.name("action set name")
        self.declare(self.mf.actionsets, n, "actionset")
        self.expect("{")
        acts = []
        while not self.accept("}"):
            a = self.name("action")
            if a.text == REFLEXIVE:
                self.error(f"{REFLEXIVE!r} is reserved for the reflexive action", a)
            if a.text in acts:
                self.error(f"duplicate action {a.text!r}", a)
            acts.append(a.text)
            self.accept(",")
        self.mf.actionsets[n.text] = ActionSet.of(n.text, acts)

    def actionset_ref(self) -> ActionSet:
        t = self.name("action set")
        if t.text not in self.mf.actionsets:
            self.error(f"undeclared actionset {t.text!r}", t)
        return self.mf.actionsets[t.text]

    def automaton(self):
        n = self.name("automaton name")
        self.declare(self.mf.automata, n, "automaton")
        self.expect(":")
        self.expect("(")
        left, right, split = [], [], None
        side = left
        while not self.accept(")"):
            if self.accept(";"):
                if split is not None:
                    self.error("signature has two ';'")
                split = len(left)
                side = right
                continue
            side.append(self.actionset_ref())
            self.accept(",")
        bounds = left + right
        self.expect("{")
        states, init, motions = [], None, []
        while not self.accept("}"):
            t = self.peek()
            if self.accept("states"):
                while not (self.at("init") or self.at("motion") or self.at("}")
                           or self.at("states")):
                    states.append(self.label())
            elif self.accept("init"):
                init = (self.label(), t)
            elif self.accept("motion"):
                src = self.label()
                self.expect("->")
                tgt = self.label()
                arrow = self.expect("[")
                labs = []
                while not self.accept("]"):
                    labs.append(self.name("action").text)
                    self.accept(",")
                key = self.label() if self.accept("as") else f"m{len(motions)}"
                motions.append((src, tgt, labs, key, arrow))
            else:
                self.error(f"expected states, init or motion, found {t.text!r}")
        known = set()
        for s in states:
            if s in known:
                self.error(f"automaton {n.text}: duplicate state {s!r}", n)
            known.add(s)
        keys = set()
        for src, tgt, labs, key, tok in motions:
            for s in (src, tgt):
                if s not in known:
                    self.error(f"automaton {n.text}: unknown state {s!r}", tok)
            if len(labs) != len(bounds):
                self.error(f"automaton {n.text}: motion has {len(labs)} labels for "
                           f"{len(bounds)} boundaries", tok)
            for b, a in zip(bounds, labs):
                if a not in b.actions:
                    self.error(f"{a!r} is not an action of {b.name}", tok)
            if key in keys:
                self.error(f"automaton {n.text}: duplicate motion name {key!r}", tok)
            keys.add(key)
        if init is not None and init[0] not in known:
            self.error(f"automaton {n.text}: unknown initial state {init[0]!r}", init[1])
        a = Automaton.build(bounds, states, [m[:4] for m in motions],
                            None if init is None else init[0],
                            None if split is None else split, n.text)
        problems = validate(a)
        if problems:
            self.error(f"automaton {n.text}: {problems[0]}", n)
        self.mf.automata[n.text] = a

    # designs
    def design(self):
        n = self.name("design name")
        self.declare(self.mf.designs, n, "design")
        self.expect("=")
        start = self.peek()
        d = self.expr()
        self.typecheck(d, start)
        self.mf.designs[n.text] = d

    def typecheck(self, d, tok: Tok):
        try:
            signature(d)
        except ModelError as exc:
            self.error(str(exc), tok)

    def expr(self):
        return self.chain()[0]

    def chain(self):
        """A ``;``/``*`` chain: the design plus the absolute numbering of its ports.

        Ports of the chain operands are numbered consecutively, left to right;
        ``ports`` lists, in signature order, the absolute number of each port
        left open by the chain.
        """
        start = self.peek()
        d = self.unary()
        bounds, split = self._sig(d, start)
        ports, seen = list(range(len(bounds))), len(bounds)
        while True:
            t = self.peek()
            if self.accept(";"):
                pairs = None
                if self.accept("<"):
                    pairs = self.pairs()
                    if not all(isinstance(x, int) for p in pairs for x in p):
                        self.error("bind pairs are plain boundary indices", t)
                rt = self.peek()
                r = self.unary()
                d = Bind(d, r, pairs)
                rb, rs = self._sig(r, rt)
                self.typecheck(d, t)
                glue = list(pairs) if pairs is not None else default_bind_pairs(len(ports))
                s_rem, t_rem, split = bind_layout(len(ports), split, len(rb), rs, glue)
                ports = [ports[i] for i in s_rem] + [seen + i for i in t_rem]
            elif self.accept("*"):
                rt = self.peek()
                r = self.unary()
                d = Product(d, r)
                rb, rs = self._sig(r, rt)
                order, split = product_layout(len(ports), split, len(rb), rs)
                ports = [ports[i] if o == 0 else seen + i for o, i in order]
            else:
                return d, ports
            seen += len(rb)

    def pairs(self) -> tuple:
        out = []
        while True:
            a = self.port()
            self.expect(",")
            b = self.port()
            out.append((a, b))
            if self.accept(">"):
                return tuple(out)
            self.expect("|")

    def port(self):
        t = self.peek()
        if t.kind == "name" and not t.text.isdigit():
            x = self.actionset_ref()
            self.expect("@")
            return (x, self.integer(), t)
        return self.integer()

    def unary(self):
        t = self.peek()
        if t.kind == "name" and t.text == "fb" and self.peek(1).text == "<":
            self.i += 2
            raw = self.pairs()
            self.expect("(")
            child, ports = self.chain()
            self.expect(")")
            bounds, _ = self._sig(child, t)
            pairs = []
            for a, b in raw:
                pairs.append((self._port_index(a, bounds, ports, t),
                              self._port_index(b, bounds, ports, t)))
            d = Feedback(child, tuple(pairs))
            self.typecheck(d, t)
            return d
        if t.kind == "name" and t.text == "op" and self.peek(1).text == "(":
            self.i += 2
            child = self.expr()
            self.expect(")")
            d = Opposite(child)
            self.typecheck(d, t)
            return d
        if self.accept("("):
            d = self.expr()
            self.expect(")")
            return d
        label = None
        if self.peek(1).text == ":" and self.peek().kind == "name":
            label = self.name("component name").text
            self.expect(":")
        t = self.peek()
        if t.kind == "name" and t.text in ("id", "diag") and self.peek(1).text == "<":
            self.i += 2
            x = self.actionset_ref()
            self.expect(">")
            return Const("identity" if t.text == "id" else "diagonal", x, label)
        n = self.name("automaton or design name")
        if label is None and n.text in self.mf.designs:
            return self.mf.designs[n.text]
        if n.text not in self.mf.automata:
            self.error(f"unknown automaton {n.text!r}", n)
        return Var.of(self.mf.automata[n.text], label)

    def _sig(self, d, tok):
        try:
            return signature(d)
        except ModelError as exc:
            self.error(str(exc), tok)

    def _port_index(self, p, bounds, ports, at: Tok) -> int:
        """Signature position of an absolute port number written in ``fb<...>``."""
        if isinstance(p, int):
            x, i, tok = None, p, at
        else:
            x, i, tok = p
        if i not in ports:
            self.error(f"port {i} is not an open port of the fed back design "
                       f"(open: {', '.join(map(str, ports))})", tok)
        k = ports.index(i)
        if x is not None and bounds[k] != x:
            self.error(f"port {i} has type {bounds[k].name}, not {x.name}", tok)
        return k

    def system(self):
        n = self.name("system name")
        self.declare(self.mf.systems, n, "system")
        self.expect("=")
        start = self.peek()
        d = self.expr()
        self.typecheck(d, start)
        overrides = {}
        if self.accept("with"):
            self.expect("{")
            while not self.accept("}"):
                v = self.name("variable")
                self.expect("=")
                a = self.name("automaton")
                if a.text not in self.mf.automata:
                    self.error(f"unknown automaton {a.text!r}", a)
                overrides[v.text] = a.text
        decl = SystemDecl(n.text, d, overrides)
        self.mf.systems[n.text] = decl
        try:
            self.mf.system(n.text)
        except ModelError as exc:
            self.error(str(exc), n)

    def simulation(self):
        n = self.name("simulation name")
        self.declare(self.mf.simulations, n, "simulation")
        self.expect(":")
        src = self.name("source")
        self.expect("=>")
        tgt = self.name("target")
        for t in (src, tgt):
            if t.text not in self.mf.automata and t.text not in self.mf.systems:
                self.error(f"unknown automaton or system {t.text!r}", t)
        decl = SimDecl(n.text, src.text, tgt.text)
        if self.accept("via"):
            decl.via = {}
            for t in (src, tgt):
                if t.text not in self.mf.systems:
                    self.error(f"'via' needs systems on both sides; {t.text!r} is not one", t)
            self.expect("{")
            while not self.accept("}"):
                c = self.name("component")
                self.expect("=")
                s = self.name("simulation")
                if s.text not in self.mf.simulations:
                    self.error(f"unknown simulation {s.text!r}", s)
                decl.via[c.text] = s.text
        else:
            self.expect("{")
            while not self.accept("}"):
                if self.accept("state"):
                    a = self.label()
                    self.expect("->")
                    decl.states.append((a, self.label()))
                elif self.accept("motion"):
                    a = self.label()
                    self.expect("->")
                    decl.motions.append((a, self.label()))
                else:
                    self.error(f"expected state or motion, found {self.peek().text!r}")
        self.mf.simulations[n.text] = decl


def _unquote(s: str) -> str:
    return re.sub(r"\\(.)", r"\1", s[1:-1])


def parse(text: str) -> ModelFile:
    return _Parser(text).parse()


def load(path) -> ModelFile:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


# -- renderer ---------------------------------------------------------------------------

def render_label(x) -> str:
    if isinstance(x, tuple):
        return "(" + ", ".join(render_label(v) for v in x) + ")"
    if isinstance(x, bool) or not isinstance(x, (int, str)):
        x = str(x)
    if isinstance(x, int):
        return str(x)
    if _NAME.match(x) and not x.isdigit() and x not in KEYWORDS:
        return x
    return '"' + x.replace("\\", "\\\\").replace('"', '\\"') + '"'


def render_automaton(a: Automaton) -> str:
    names = [b.name for b in a.boundaries]
    if a.split is None or not names:
        sig = ", ".join(names)
    else:
        sig = f"{', '.join(names[:a.split])} ; {', '.join(names[a.split:])}".strip()
    lines = [f"automaton {render_label(a.name)} : ({sig}) {{",
             "  states " + " ".join(render_label(s) for s in a.states)]
    if a.initial is not None:
        lines.append(f"  init {render_label(a.states[a.initial])}")
    for i, m in enumerate(a.motions):
        if m.reflexive:
            continue
        labs = ", ".join(a.label_names(i))
        lines.append(f"  motion {render_label(a.states[m.source])} -> "
                     f"{render_label(a.states[m.target])} [{labs}] as {render_label(m.key)}")
    lines.append("}")
    return "\n".join(lines)


def _operands(d) -> tuple[list, list]:
    """Flatten a left-nested ``;``/``*`` chain into operands and the nodes joining them."""
    if isinstance(d, (Bind, Product)):
        ops, joins = _operands(d.left)
        return ops + [d.right], joins + [d]
    return [d], []


def _absolute_ports(d) -> list[int]:
    """Absolute port number (as written in ``fb<...>``) of each open port of a chain."""
    ops, joins = _operands(d)
    bounds, split = signature(ops[0])
    ports, seen = list(range(len(bounds))), len(bounds)
    for r, node in zip(ops[1:], joins):
        rb, rs = signature(r)
        if isinstance(node, Bind):
            glue = list(node.pairs) if node.pairs is not None else default_bind_pairs(len(ports))
            s_rem, t_rem, split = bind_layout(len(ports), split, len(rb), rs, glue)
            ports = [ports[i] for i in s_rem] + [seen + i for i in t_rem]
        else:
            order, split = product_layout(len(ports), split, len(rb), rs)
            ports = [ports[i] if o == 0 else seen + i for o, i in order]
        seen += len(rb)
    return ports


def render_design(d, top: bool = True) -> str:
    if isinstance(d, Var):
        name = render_label(d.name)
        return f"{render_label(d.label)}:{name}" if d.label else name
    if isinstance(d, Const):
        base = f"{'id' if d.kind == 'identity' else 'diag'}<{d.actionset.name}>"
        return f"{d.label}:{base}" if d.label else base
    if isinstance(d, (Bind, Product)):
        ops, joins = _operands(d)
        parts = [render_design(ops[0], False)]
        for r, node in zip(ops[1:], joins):
            if isinstance(node, Product):
                op = "*"
            elif node.pairs is None:
                op = ";"
            else:
                op = ";<" + "|".join(f"{a},{b}" for a, b in node.pairs) + ">"
            parts += [op, render_design(r, False)]
        text = " ".join(parts)
        return text if top else f"({text})"
    if isinstance(d, Feedback):
        bounds, _ = signature(d.child)
        ports = _absolute_ports(d.child)
        ps = "|".join(f"{bounds[a].name}@{ports[a]},{bounds[b].name}@{ports[b]}"
                      for a, b in d.pairs)
        return f"fb<{ps}>({render_design(d.child)})"
    return f"op({render_design(d.child)})"


def render(mf: ModelFile) -> str:
    out = []
    for x in mf.actionsets.values():
        out.append(f"actionset {x.name} {{ {' '.join(x.nontrivial)} }}")
    for a in mf.automata.values():
        out.append(render_automaton(a))
    for name, d in mf.designs.items():
        out.append(f"design {name} = {render_design(d)}")
    for s in mf.systems.values():
        line = f"system {s.name} = {render_design(s.design)}"
        if s.overrides:
            line += " with { " + "  ".join(f"{k} = {v}" for k, v in s.overrides.items()) + " }"
        out.append(line)
    for s in mf.simulations.values():
        head = f"simulation {s.name} : {s.source} => {s.target}"
        if s.via is not None:
            out.append(head + " via { " + "  ".join(f"{k} = {v}" for k, v in s.via.items())
                       + " }")
            continue
        body = [f"  state {render_label(a)} -> {render_label(b)}" for a, b in s.states]
        body += [f"  motion {render_label(a)} -> {render_label(b)}" for a, b in s.motions]
        out.append(head + " {\n" + "\n".join(body) + ("\n}" if body else "}"))
    return "\n\n".join(out) + "\n"


def automaton_fingerprint(a: Automaton) -> tuple:
    """Content of an automaton for equality checks (round trips, exports)."""
    return (a.name, tuple(a.boundaries), a.states, a.initial, a.split,
            tuple((m.source, m.target, m.labels, m.reflexive, m.key) for m in a.motions))


def fingerprint(mf: ModelFile) -> tuple:
    return (
        tuple(mf.actionsets.items()),
        tuple((k, automaton_fingerprint(a)) for k, a in mf.automata.items()),
        tuple(mf.designs.items()),
        tuple((k, s.design, tuple(sorted(s.overrides.items()))) for k, s in mf.systems.items()),
        tuple((k, s.source, s.target, tuple(s.states), tuple(s.motions),
               None if s.via is None else tuple(s.via.items()))
              for k, s in mf.simulations.items()),
    )


__all__ = ["ParseError", "tokenize", "ModelFile", "SimDecl", "SystemDecl", "parse", "load",
           "render", "render_label", "render_automaton", "render_design", "fingerprint",
           "automaton_fingerprint"]
