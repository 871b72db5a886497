"""Batch command-line surface.

Exit codes: 0 success, 1 domain violation, 2 usage error.  All randomness
flows from a single seed (GSOS_SEED overrides --seed), printed in every
report, so identical invocations produce byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
from pathlib import Path

from . import bisim as bisim_mod
from . import familial as familial_mod
from .cellular import (
    cell_certificate,
    check_eta_cartesian,
    check_mu_cartesian,
    preserve_bisim_lift,
    random_functional_bisim,
    verify_certificate,
)
from .errors import GsosError, SpecParseError
from .familial import decompose, is_generic, random_collapse, strip
from .presheaf import (
    Presheaf,
    morphism_from_json,
    presheaf_from_json,
    presheaf_to_dot,
    presheaf_to_json,
    representable,
    terminal,
)
from .specdsl import GsosSpec, parse_spec
from .terms import (
    check_monad_laws,
    derive,
    map_leaves,
    parse_proof,
    parse_term,
    presheaf_axioms,
    proof_depth,
    proof_source,
    random_layer_element,
    random_presheaf,
    random_term,
    render,
)


def _emit(doc: dict) -> None:
    sys.stdout.write(json.dumps(doc, sort_keys=True) + "\n")


def _load_spec(path: str) -> GsosSpec:
    return parse_spec(Path(path).read_text())


def _load_presheaf(path: str | None, spec: GsosSpec) -> Presheaf:
    if path is None:
        return terminal(spec.labels)
    return presheaf_from_json(Path(path).read_text())


def cmd_check(args) -> int:
    try:
        _load_spec(args.spec)
    except SpecParseError as exc:
        for v in exc.violations:
            sys.stderr.write(json.dumps(v.to_dict(), sort_keys=True) + "\n")
        return 1
    except OSError as exc:
        sys.stderr.write(json.dumps({"kind": "IOError", "message": str(exc)}) + "\n")
        return 1
    _emit({"ok": True})
    return 0


def cmd_lts(args) -> int:
    spec = _load_spec(args.spec)
    seeds = [parse_term(spec, None, t) for t in args.term]
    frag = bisim_mod.reachable_fragment(spec, seeds, args.fuel)
    if args.format == "dot":
        sys.stdout.write(presheaf_to_dot(frag.carrier))
        return 0
    doc = {
        "carrier": json.loads(presheaf_to_json(frag.carrier)),
        "frontier": sorted(frag.frontier),
        "states": len(frag.carrier.states),
        "transitions": frag.carrier.size()[1],
        "definitive": frag.definitive,
    }
    if args.format == "text":
        sys.stdout.write(
            f"states={doc['states']} transitions={doc['transitions']} "
            f"frontier={len(frag.frontier)}\n"
        )
        return 0
    _emit(doc)
    return 0


def cmd_bisim(args) -> int:
    spec = _load_spec(args.spec)
    t1 = parse_term(spec, None, args.t1)
    t2 = parse_term(spec, None, args.t2)
    frag = bisim_mod.reachable_fragment(spec, [t1, t2], args.fuel)
    answer = bisim_mod.k_bisimilar(frag.carrier, render(t1), render(t2), args.stratum)
    part = bisim_mod.stratified_partition(frag.carrier, args.stratum)[args.stratum]
    blocks: dict[int, list[str]] = {}
    for x, b in part.items():
        blocks.setdefault(b, []).append(x)
    _emit(
        {
            "t1": render(t1),
            "t2": render(t2),
            "k": args.stratum,
            "fuel": args.fuel,
            "bisimilar": answer,
            "definitive": frag.definitive,
            "states": len(frag.carrier.states),
            "blocks": sorted(sorted(b) for b in blocks.values()),
        }
    )
    return 0


def cmd_decompose(args) -> int:
    spec = _load_spec(args.spec)
    X = _load_presheaf(args.presheaf, spec)
    if args.proof:
        elem = parse_proof(spec, X, args.proof)
    elif args.term:
        elem = parse_term(spec, X, args.term)
    else:
        sys.stderr.write("decompose needs --proof or --term\n")
        return 2
    dec = decompose(X, elem)
    doc = {
        "shape": render(dec.shape.value),
        "object": dec.shape.obj,
        "arity": json.loads(presheaf_to_json(dec.arity)),
        "filler": {
            "states": dict(dec.filler.state_map),
            "edges": {a: dict(dec.filler.edge_maps[a]) for a in X.labels if dec.filler.edge_maps[a]},
        },
        "generic": is_generic(X, elem),
    }
    _emit(doc)
    return 0


def cmd_certify(args) -> int:
    spec = _load_spec(args.spec)
    X = _load_presheaf(args.presheaf, spec)
    p = parse_proof(spec, X, args.proof)
    cert = cell_certificate(spec.labels, strip(p))
    ok = verify_certificate(cert)
    doc = cert.to_dict()
    doc["verified"] = ok
    _emit(doc)
    return 0 if ok else 1


def cmd_lift(args) -> int:
    """Trace a transition of a collapsed system back through a covering."""
    spec = _load_spec(args.spec)
    f = morphism_from_json(Path(args.fbisim).read_text())
    M = parse_term(spec, f.dom, args.term)
    R = parse_proof(spec, f.cod, args.proof)
    r0 = preserve_bisim_lift(spec, f, M, R)
    _emit({"term": render(M), "proof": render(R), "preimage": render(r0)})
    return 0


def cmd_congruence(args) -> int:
    spec = _load_spec(args.spec)
    pairs_doc = json.loads(Path(args.pairs).read_text())
    pairs = [
        (parse_term(spec, None, u), parse_term(spec, None, v)) for u, v in pairs_doc
    ]
    if args.contexts:
        ctx_doc = json.loads(Path(args.contexts).read_text())
        contexts = [parse_term(spec, None, c, allow_hole=True) for c in ctx_doc]
    elif args.exhaustive_contexts:
        contexts = bisim_mod.enumerate_contexts(spec, args.context_height)
    else:
        contexts = bisim_mod.sample_contexts(
            spec, args.context_height, args.sample, random.Random(args.seed)
        )
    report = bisim_mod.congruence_test(
        spec, pairs, contexts, args.stratum, args.fuel, drop_last_premise=args.mutate
    )
    report["seed"] = args.seed
    _emit(report)
    return 0 if report["ok"] else 1


# ---------------------------------------------------------------------------
# Property suites.


def _suite_laws(spec, seed, cases, d, k, mutate):
    rep = check_monad_laws(spec, seed, cases, d)
    return rep.to_dict()


def _suite_cartesian(spec, seed, cases, d, k, mutate):
    X = representable(spec.labels, list(spec.labels)[0])
    mu_rep = check_mu_cartesian(spec, X, d)
    eta_rep = check_eta_cartesian(spec, X, d)
    return {
        "seed": seed,
        "mu": mu_rep,
        "eta": eta_rep,
        "failures": [] if (mu_rep["ok"] and eta_rep["ok"]) else ["pullback failed"],
        "ok": mu_rep["ok"] and eta_rep["ok"],
    }


def _suite_familial(spec, seed, cases, d, k, mutate):
    failures = []
    for case in range(cases):
        rng = random.Random(seed + case)
        X = random_presheaf(rng, spec.labels)
        kind = rng.choice(["term", "proof"])
        try:
            elem = random_layer_element(spec, X, rng, 1, d, kind)
        except GsosError:
            continue
        dec = decompose(X, elem)
        if familial_mod.recompose(dec, X) != elem:
            failures.append(f"case {case}: recompose . decompose != id on {render(elem)}")
            continue
        B, u = random_collapse(X, rng)
        moved = map_leaves(elem, lambda x: u.state_map[x], lambda e, a: u.edge_maps[a][e])
        dec2 = decompose(B, moved)
        if dec2.shape != dec.shape:
            failures.append(f"case {case}: shape not natural in the ambient system")
        from .presheaf import compose

        if dec2.filler != compose(u, dec.filler):
            failures.append(f"case {case}: filler not natural in the ambient system")
        if kind == "proof":
            from .familial import arity_label, arity_tgt_morphism

            _, src_mor = arity_label(spec.labels, dec.shape)
            src_dec = decompose(X, proof_source(X, elem))
            if src_dec.filler != compose(dec.filler, src_mor):
                failures.append(f"case {case}: source filler not natural in the base")
            from .terms import proof_target

            tgt_mor = arity_tgt_morphism(spec.labels, dec.shape)
            tgt_dec = decompose(X, proof_target(X, elem))
            if tgt_dec.filler != compose(dec.filler, tgt_mor):
                failures.append(f"case {case}: target filler not natural in the base")
    return {"seed": seed, "cases": cases, "failures": failures, "ok": not failures}


def _suite_cellular(spec, seed, cases, d, k, mutate):
    failures = []
    one = terminal(spec.labels)
    from .familial import arity_label

    for case in range(cases):
        rng = random.Random(seed + case)
        try:
            p = random_layer_element(spec, one, rng, 1, d, "proof")
        except GsosError:
            continue
        shape = strip(p)
        cert = cell_certificate(spec.labels, shape)
        if not verify_certificate(cert):
            failures.append(f"case {case}: certificate fails on {render(shape.value)}")
            continue
        _, src_mor = arity_label(spec.labels, shape)
        if cert.claimed_composite != src_mor:
            failures.append(f"case {case}: replay differs from the arity source morphism")
    return {"seed": seed, "cases": cases, "failures": failures, "ok": not failures}


def _suite_preserve(spec, seed, cases, d, k, mutate):
    failures = []
    for case in range(cases):
        rng = random.Random(seed + case)
        f = random_functional_bisim(rng, spec.labels)
        X, Y = f.dom, f.cod
        try:
            M = random_term(spec, rng, X.states, d)
        except GsosError:
            continue
        fM = map_leaves(M, lambda x: f.state_map[x], lambda e, a: f.edge_maps[a][e])
        problems = [
            R
            for R in derive(spec, fM, presheaf_axioms(Y))
            if proof_depth(R) <= d
        ]
        for R in problems:
            try:
                preserve_bisim_lift(spec, f, M, R, d)
            except GsosError as exc:
                failures.append(f"case {case}: {exc} on {render(R)}")
    return {"seed": seed, "cases": cases, "failures": failures, "ok": not failures}


def _suite_congruence(spec, seed, cases, d, k, mutate):
    from importlib import resources

    pairs_text = (resources.files("gsos") / "specs" / "ccs_pairs.json").read_text()
    pairs = [
        (parse_term(spec, None, u), parse_term(spec, None, v))
        for u, v in json.loads(pairs_text)
    ]
    contexts = bisim_mod.enumerate_contexts(spec, 2)
    report = bisim_mod.congruence_test(
        spec, pairs, contexts, k, max(k + 1, 4), drop_last_premise=mutate
    )
    report["seed"] = seed
    report["failures"] = report["violations"]
    return report


_SUITES = {
    "laws": _suite_laws,
    "cartesian": _suite_cartesian,
    "familial": _suite_familial,
    "cellular": _suite_cellular,
    "preserve": _suite_preserve,
    "congruence": _suite_congruence,
}


def cmd_verify(args) -> int:
    spec = _load_spec(args.spec)
    if args.suite not in _SUITES:
        sys.stderr.write(f"unknown suite {args.suite!r}\n")
        return 2
    report = _SUITES[args.suite](
        spec, args.seed, args.cases, args.depth, args.stratum, args.mutate
    )
    report["suite"] = args.suite
    _emit(report)
    return 0 if report["ok"] else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gsos", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="parse and validate a specification")
    p.add_argument("spec")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("lts", help="reachable fragment from seed terms")
    p.add_argument("spec")
    p.add_argument("--term", action="append", required=True)
    p.add_argument("--fuel", type=int, default=3)
    p.add_argument("--format", choices=["json", "dot", "text"], default="json")
    p.set_defaults(func=cmd_lts)

    p = sub.add_parser("bisim", help="stratified equivalence of two closed terms")
    p.add_argument("spec")
    p.add_argument("--t1", required=True)
    p.add_argument("--t2", required=True)
    p.add_argument("-k", "--stratum", type=int, default=3)
    p.add_argument("--fuel", type=int, default=4)
    p.set_defaults(func=cmd_bisim)

    p = sub.add_parser("decompose", help="generic-free factorisation of an element")
    p.add_argument("spec")
    p.add_argument("--proof")
    p.add_argument("--term")
    p.add_argument("--presheaf", help="ambient system (JSON file); defaults to the terminal one")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("certify", help="cellularity certificate of a proof's shape")
    p.add_argument("spec")
    p.add_argument("--proof", required=True)
    p.add_argument("--presheaf")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("lift", help="preimage of a transition along a functional bisimulation")
    p.add_argument("spec")
    p.add_argument("--fbisim", required=True, help="morphism JSON file (must be a functional bisimulation)")
    p.add_argument("--term", required=True, help="term over the morphism's domain")
    p.add_argument("--proof", required=True, help="transition over the codomain with source the term's image")
    p.set_defaults(func=cmd_lift)

    p = sub.add_parser("verify", help="run a property suite")
    p.add_argument("spec")
    p.add_argument("--suite", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cases", type=int, default=100)
    p.add_argument("-d", "--depth", type=int, default=2)
    p.add_argument("-k", "--stratum", type=int, default=3)
    p.add_argument("--mutate", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("congruence", help="context preservation of stratified equivalence")
    p.add_argument("spec")
    p.add_argument("--pairs", required=True, help="JSON file: list of [t1, t2] term strings")
    p.add_argument("--contexts", help="JSON file: list of one-hole context strings")
    p.add_argument("--context-height", type=int, default=3)
    p.add_argument("--sample", type=int, default=60, help="number of sampled contexts")
    p.add_argument(
        "--exhaustive-contexts",
        action="store_true",
        help="enumerate every context up to the height bound (tiny signatures)",
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-k", "--stratum", type=int, default=3)
    p.add_argument("--fuel", type=int, default=4)
    p.add_argument("--mutate", action="store_true")
    p.set_defaults(func=cmd_congruence)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if "GSOS_SEED" in os.environ and hasattr(args, "seed"):
        args.seed = int(os.environ["GSOS_SEED"])
    try:
        return args.func(args)
    except SpecParseError as exc:
        for v in exc.violations:
            sys.stderr.write(json.dumps(v.to_dict(), sort_keys=True) + "\n")
        return 1
    except GsosError as exc:
        sys.stderr.write(
            json.dumps({"kind": type(exc).__name__, "message": str(exc)}, sort_keys=True)
            + "\n"
        )
        return 1
    except OSError as exc:
        sys.stderr.write(json.dumps({"kind": "IOError", "message": str(exc)}) + "\n")
        return 1


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
