"""Command line front end: ``awb <command> ...``.

Exit codes: 0 when the analysis ran (finding deadlocks is not a failure),
1 for input errors, 2 when the state budget was exhausted.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from .checker import (StateBudgetExceeded, bfs_deadlocks, misa_deadlocks, max_states_default,
                      product_deadlock_analysis)
from .core import ModelError, is_linear, reachable
from .design import Product, System, Var, evaluate, evaluation_label, global_state_of, state_count
from .modelfile import ModelFile, load, render_automaton
from .simulation import (Counterexample, Simulation, preimage_deadlock_check,
                         reduced_language_equiv)


def _library() -> dict[str, ModelFile]:
    from .models import golden_models
    return golden_models()


def _find(args, kind: str, name: str) -> ModelFile:
    """The model file declaring ``name``: --model if given, else the built-in examples."""
    if args.model:
        return load(args.model)
    hits = [mf for mf in _library().values() if name in getattr(mf, kind)]
    if not hits:
        raise ModelError(f"no built-in {kind[:-1]} named {name!r}; pass --model FILE")
    return hits[0]


def _find_any(args, name: str) -> ModelFile:
    if args.model:
        return load(args.model)
    for mf in _library().values():
        if name in mf.automata or name in mf.systems:
            return mf
    raise ModelError(f"no built-in automaton or system named {name!r}; pass --model FILE")


def _emit(payload: str, path: str | None):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")
    else:
        print(payload)


def _max_states(args) -> int:
    return args.max_states if args.max_states is not None else max_states_default()


def _side_name(d, default: str) -> str:
    return d.label if isinstance(d, Var) and d.label else default


# -- commands -------------------------------------------------------------------------------

def cmd_check(args) -> int:
    mf = _find(args, "systems", args.system)
    system = mf.system(args.system)
    limit = _max_states(args)
    if args.algo == "product":
        d = system.design
        if not isinstance(d, Product):
            raise ModelError("--algo product needs a system whose design is a product S * T")
        left = evaluate(System(d.left, system.assignment, _side_name(d.left, "left")))
        right = evaluate(System(d.right, system.assignment, _side_name(d.right, "right")))
        report = product_deadlock_analysis(left, right, args.strength).report
        report.system = system.name
    else:
        fn = bfs_deadlocks if args.algo == "bfs" else misa_deadlocks
        try:
            report = fn(system, args.mode, max_states=limit, threads=args.threads,
                        witness=args.witness)
        except StateBudgetExceeded as exc:
            _emit(exc.report.to_json("check", stable=args.no_timing), args.json)
            print(f"error: {exc}", file=sys.stderr)
            return 2
    _emit(report.to_json("check", stable=args.no_timing), args.json)
    if args.json:
        print(f"{report.algorithm}: explored {report.explored}, "
              f"{len(report.deadlocks)} deadlock(s)")
    return 0


def cmd_eval(args) -> int:
    mf = _find(args, "systems", args.system)
    system = mf.system(args.system)
    limit = _max_states(args)
    total = state_count(system)
    if total > limit:
        print(f"error: evaluation has {total} states, above the budget of {limit}",
              file=sys.stderr)
        return 2
    a = evaluate(system)
    if args.reachable_only:
        a = reachable(a)
    a = a.renamed(args.system)
    text = render_automaton(a)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    print(f"{args.system}: {len(a.states)} states, "
          f"{sum(not m.reflexive for m in a.motions)} nontrivial motions", file=sys.stderr)
    return 0


def _sim_payload(name: str, res) -> dict:
    if isinstance(res, Simulation):
        return {"command": "sim-verify", "simulation": name, "verified": True,
                "source": res.source.name, "target": res.target.name,
                "liftings": len(res.certificate)}
    return {"command": "sim-verify", "simulation": name, "verified": False,
            "counterexample": {"state": str(res.state), "motion": str(res.motion),
                               "reason": res.reason}}


def cmd_sim_verify(args) -> int:
    mf = _find(args, "simulations", args.sim)
    try:
        res = mf.verify(args.sim)
    except ModelError as exc:
        if "not a simulation" not in str(exc):
            raise
        res = Counterexample(None, None, None, str(exc))
    payload = _sim_payload(args.sim, res)
    if args.json:
        _emit(json.dumps(payload, sort_keys=True, indent=2), args.json)
    print(f"verified: {'true' if payload['verified'] else 'false'}")
    if not payload["verified"]:
        print(payload["counterexample"]["reason"])
    return 0


def _state_from_map(automaton_or_system, entry: dict):
    """A report entry {component: local state} back to a state label."""
    if isinstance(automaton_or_system, System):
        s = automaton_or_system
        g = []
        for comp, a in zip(s.component_names, s.automata):
            if comp not in entry:
                raise ModelError(f"report entry lacks component {comp!r}")
            g.append(_match_state(a, entry[comp]))
        return evaluation_label(s, g)
    a = automaton_or_system
    if len(entry) != 1:
        raise ModelError("report entry does not describe a single automaton state")
    return _match_state(a, next(iter(entry.values())))


def _match_state(a, text: str):
    for v in a.states:
        if str(v) == str(text):
            return v
    raise ModelError(f"{text!r} is not a state of {a.name}")


def cmd_sim_preimage(args) -> int:
    mf = _find(args, "simulations", args.sim)
    decl = mf.simulations[args.sim]
    sim = mf.simulation(args.sim)
    with open(args.target_report, encoding="utf-8") as fh:
        target_report = json.load(fh)
    tgt_obj = mf.system(decl.target) if decl.target in mf.systems else mf.automata[decl.target]
    targets = [_state_from_map(tgt_obj, e) for e in target_report.get("deadlocks", [])]
    t0 = time.perf_counter()
    pre = preimage_deadlock_check(sim, targets)
    if decl.source in mf.systems:
        src = mf.system(decl.source)
        names = src.component_names
        rows = [dict(zip(names, map(str, global_state_of(src, v)))) for v in pre.deadlocks]
    else:
        rows = [{decl.source: str(v)} for v in pre.deadlocks]
    rows.sort(key=lambda r: json.dumps(r, sort_keys=True))
    payload = {"command": "sim-preimage", "system": decl.source, "algorithm": "preimage",
               "mode": "all", "explored": pre.checked, "reachable": None, "deadlocks": rows,
               "witnesses": None,
               "elapsed_ms": 0 if args.no_timing else int((time.perf_counter() - t0) * 1000),
               "complete": True}
    _emit(json.dumps(payload, sort_keys=True, indent=2), args.json)
    return 0


def cmd_lang_equiv(args) -> int:
    mf = _find_any(args, args.left)
    left, right = mf.automaton(args.left), mf.automaton(args.right)
    sel = None
    if args.boundaries:
        try:
            sel = [int(x) for x in args.boundaries.split(",")]
        except ValueError:
            raise ModelError("--boundaries takes comma separated indices") from None
    eq = reduced_language_equiv(left, right, sel, args.max_len)
    print(f"equivalent: {'true' if eq else 'false'}")
    return 0


def cmd_stats(args) -> int:
    mf = _find(args, "systems", args.system)
    system = mf.system(args.system)
    diag = system.diagram
    payload = {
        "command": "stats", "system": system.name,
        "components": [{"name": c.label, "automaton": a.name, "states": len(a.states),
                        "motions": sum(not m.reflexive for m in a.motions),
                        "linear": is_linear(a)}
                       for c, a in zip(diag.components, system.automata)],
        "wires": len(diag.wires), "open_ports": len(diag.open_ports),
        "global_states": state_count(system),
        "atomic_mode": system.atomic_ready() or "available",
    }
    print(json.dumps(payload, sort_keys=True, indent=2))
    return 0


def cmd_export(args) -> int:
    from .models import export_models
    for path in export_models(args.directory):
        print(path)
    return 0


# -- argument parsing -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="awb", description="Automata with boundary: deadlock "
                                "checking and simulations.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--model", "-m", help="model file (default: built-in examples)")
        sp.set_defaults(fn=fn)
        return sp

    c = add("check", cmd_check, "deadlock analysis of a system")
    c.add_argument("--system", required=True)
    c.add_argument("--algo", choices=["bfs", "misa", "product"], default="misa")
    c.add_argument("--mode", choices=["all", "atomic"], default="all")
    c.add_argument("--strength", choices=["weak", "strong"], default="strong")
    c.add_argument("--json", metavar="PATH")
    c.add_argument("--max-states", type=int)
    c.add_argument("--threads", type=int, default=1)
    c.add_argument("--witness", action="store_true")
    c.add_argument("--no-timing", action="store_true", help="report elapsed_ms as 0")

    e = add("eval", cmd_eval, "evaluate a system to an explicit automaton")
    e.add_argument("--system", required=True)
    e.add_argument("--reachable-only", action="store_true")
    e.add_argument("--out", metavar="PATH")
    e.add_argument("--max-states", type=int)

    s = add("sim-verify", cmd_sim_verify, "verify a declared simulation")
    s.add_argument("--sim", required=True)
    s.add_argument("--json", metavar="PATH")

    pi = add("sim-preimage", cmd_sim_preimage, "source deadlocks via a simulation")
    pi.add_argument("--sim", required=True)
    pi.add_argument("--target-report", required=True)
    pi.add_argument("--json", metavar="PATH")
    pi.add_argument("--no-timing", action="store_true")

    le = add("lang-equiv", cmd_lang_equiv, "compare reduced appearances")
    le.add_argument("--left", required=True)
    le.add_argument("--right", required=True)
    le.add_argument("--max-len", type=int)
    le.add_argument("--boundaries", help="comma separated boundary indices (default all)")

    st = add("stats", cmd_stats, "summary of a system")
    st.add_argument("--system", required=True)

    ex = sub.add_parser("export-models", help="write the example model files")
    ex.add_argument("directory")
    ex.set_defaults(fn=cmd_export)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "threads", 1) < 1:
            raise ModelError("--threads must be at least 1")
        if getattr(args, "max_states", None) is not None and args.max_states < 1:
            raise ModelError("--max-states must be positive")
        return args.fn(args)
    except (ModelError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
