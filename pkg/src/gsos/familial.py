"""Arities and generic-free factorisation for the free construction.

Every element of the free system over X is determined by its shape — the
same element with all leaves collapsed into the one-state system 1 — plus a
filler morphism from the shape's arity into X.  The arity of a term shape
is one point per variable occurrence; the arity of a proof shape is built
by structural induction: each axiom contributes a generic edge, each rule
node glues the premise arities of one argument along their common source
occurrences (a wide pushout) and sums over arguments.

Cell naming: occurrence cells of the source keep their global left-to-right
names ``occ{k}`` all the way up the induction, so the source arity morphism
is literally the name-identity inclusion.  Cells created by premise j of
argument i are prefixed ``arg{i}/prem{j}/``.  The base arity of a single
axiom at label a has states ``occ0`` (the source), ``t`` and edge ``e``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from itertools import product
from typing import Iterator, Optional

from .errors import CellMismatch, MalformedProof
from .presheaf import (
    STAR,
    LabelSet,
    Presheaf,
    PresheafMorphism,
    make_presheaf,
    morphism,
)
from .terms import (
    App,
    Axiom,
    Element as FreeElement,
    Node,
    Proof,
    Term,
    Var,
    map_leaves,
    occurrences,
    proof_label,
    proof_source,
    to_terminal,
)

_OCC = re.compile(r"occ(\d+)$")


@dataclass(frozen=True)
class Element:
    """An element over the one-state system: a shape.

    ``obj`` is "*" for terms and the conclusion label for proofs.
    """

    obj: str
    value: FreeElement

    def is_term(self) -> bool:
        return self.obj == STAR


def strip(elem: FreeElement) -> Element:
    """Collapse all leaves into 1: states become *, edges their labels."""
    value = to_terminal(elem)
    if isinstance(value, (Var, App)):
        return Element(STAR, value)
    return Element(proof_label(value), value)


@dataclass(frozen=True)
class ArityPresheaf:
    """A finite colimit of representables with named cells."""

    carrier: Presheaf
    cells: tuple[tuple[str, str], ...]

    def cell(self, name: str) -> str:
        for k, v in self.cells:
            if k == name:
                return v
        raise CellMismatch(f"no cell named {name!r}")


def _named(carrier: Presheaf) -> ArityPresheaf:
    names = tuple((x, x) for x in carrier.states) + tuple(
        (e, e) for a in carrier.labels for e in carrier.edges[a]
    )
    return ArityPresheaf(carrier, names)


def arity_star(labels: LabelSet, m: Element) -> ArityPresheaf:
    """One point per occurrence of the unique variable, named occ{k}."""
    if not m.is_term():
        raise MalformedProof("arity_star expects a term shape")
    n, _paths = occurrences(m.value)
    carrier = make_presheaf(labels, tuple(f"occ{k}" for k in range(n)))
    return _named(carrier)


def _rename(i: int, j: int, offset: int, cell: str) -> str:
    mo = _OCC.fullmatch(cell)
    if mo:
        return f"occ{offset + int(mo.group(1))}"
    return f"arg{i}/prem{j}/{cell}"


def _group_sources(r: Node) -> list[Term]:
    out = []
    for arg in r.args:
        if isinstance(arg, tuple):
            out.append(_src_over_one(arg[0]))
        else:
            out.append(arg)
    return out


def _src_over_one(p: Proof) -> Term:
    if isinstance(p, Axiom):
        return Var(STAR)
    return App(p.rule.op, tuple(_group_sources(p)))


def _tgt_over_one(p: Proof) -> Term:
    from .terms import _target

    return _target(p, lambda e, a: STAR, lambda e, a: STAR)


def arity_label(labels: LabelSet, r: Element) -> tuple[ArityPresheaf, PresheafMorphism]:
    """The arity of a proof shape and its source arity morphism.

    The morphism goes from the source-term arity into the carrier and is the
    name-identity inclusion by construction.
    """
    if r.is_term():
        raise MalformedProof("arity_label expects a proof shape")
    carrier = _arity_carrier(labels, r.value)
    src_shape = Element(STAR, _src_over_one(r.value))
    dom = arity_star(labels, src_shape).carrier
    mor = morphism(dom, carrier, {x: x for x in dom.states})
    return _named(carrier), mor


def _arity_carrier(labels: LabelSet, p: Proof) -> Presheaf:
    if isinstance(p, Axiom):
        return make_presheaf(
            labels,
            ("occ0", "t"),
            {p.label: ("e",)},
            {p.label: {"e": "occ0"}},
            {p.label: {"e": "t"}},
        )
    states: list[str] = []
    edges: dict[str, list[str]] = {a: [] for a in labels}
    src: dict[str, dict[str, str]] = {a: {} for a in labels}
    tgt: dict[str, dict[str, str]] = {a: {} for a in labels}
    sources = _group_sources(p)
    offset = 0
    for i, arg in enumerate(p.args):
        n_i = occurrences(sources[i])[0]
        if not isinstance(arg, tuple):
            states.extend(f"occ{offset + k}" for k in range(n_i))
        else:
            merged: set[str] = set()
            for j, prem in enumerate(arg):
                sub = _arity_carrier(labels, prem)
                for x in sub.states:
                    name = _rename(i, j, offset, x)
                    if name.startswith("occ"):
                        if name not in merged:
                            merged.add(name)
                            states.append(name)
                    else:
                        states.append(name)
                for a in labels:
                    for e in sub.edges[a]:
                        name = _rename(i, j, offset, e)
                        edges[a].append(name)
                        src[a][name] = _rename(i, j, offset, sub.src[a][e])
                        tgt[a][name] = _rename(i, j, offset, sub.tgt[a][e])
        offset += n_i
    return make_presheaf(
        labels, tuple(states), {a: tuple(v) for a, v in edges.items()}, src, tgt
    )


def arity_tgt_morphism(labels: LabelSet, r: Element) -> PresheafMorphism:
    """Route each occurrence of the target term into the proof's arity."""
    if r.is_term():
        raise MalformedProof("arity_tgt_morphism expects a proof shape")
    route = _tgt_route(r.value)
    tgt_shape = Element(STAR, _tgt_over_one(r.value))
    dom = arity_star(labels, tgt_shape).carrier
    cod = _arity_carrier(labels, r.value)
    if len(route) != len(dom.states):
        raise MalformedProof("occurrence count mismatch in target routing")
    return morphism(dom, cod, {f"occ{k}": route[k] for k in range(len(route))})


def _tgt_route(p: Proof) -> list[str]:
    if isinstance(p, Axiom):
        return ["t"]
    sources = _group_sources(p)
    offsets = []
    off = 0
    for m in sources:
        offsets.append(off)
        off += occurrences(m)[0]
    routes: list[str] = []

    def walk(t: Term):
        if isinstance(t, Var):
            mx = re.fullmatch(r"x(\d+)", t.name)
            my = re.fullmatch(r"y(\d+)_(\d+)", t.name)
            if mx:
                i = int(mx.group(1)) - 1
                n_i = occurrences(sources[i])[0]
                routes.extend(f"occ{offsets[i] + k}" for k in range(n_i))
            elif my:
                i, j = int(my.group(1)) - 1, int(my.group(2)) - 1
                inner = _tgt_route(p.args[i][j])
                routes.extend(_rename(i, j, offsets[i], c) for c in inner)
            else:  # pragma: no cover - rules bind only x/y variables
                raise MalformedProof(f"unexpected rule variable {t.name!r}")
        else:
            for child in t.args:
                walk(child)

    walk(p.rule.target)
    return routes


# ---------------------------------------------------------------------------
# Generic-free factorisation.


@dataclass(frozen=True)
class Decomposition:
    """Shape over 1 plus the filler from its arity into the ambient system."""

    shape: Element
    filler: PresheafMorphism

    @property
    def arity(self) -> Presheaf:
        return self.filler.dom


def decompose(X: Presheaf, elem: FreeElement) -> Decomposition:
    """Split an element into its shape and the filler of leaf data."""
    shape = strip(elem)
    labels = X.labels
    if shape.is_term():
        dom = arity_star(labels, shape).carrier
        leaves = _term_leaves(elem)
        filler = morphism(dom, X, {f"occ{k}": v for k, v in enumerate(leaves)})
        return Decomposition(shape, filler)
    state_map, edge_maps = _fill(X, elem)
    dom = _arity_carrier(labels, shape.value)
    filler = morphism(dom, X, state_map, edge_maps)
    return Decomposition(shape, filler)


def _term_leaves(t: Term) -> list[str]:
    if isinstance(t, Var):
        return [t.name]
    out: list[str] = []
    for a in t.args:
        out.extend(_term_leaves(a))
    return out


def _fill(X: Presheaf, p: Proof) -> tuple[dict[str, str], dict[str, dict[str, str]]]:
    if isinstance(p, Axiom):
        a = p.label
        return (
            {"occ0": X.src[a][p.edge], "t": X.tgt[a][p.edge]},
            {a: {"e": p.edge}},
        )
    states: dict[str, str] = {}
    edge_maps: dict[str, dict[str, str]] = {a: {} for a in X.labels}
    offset = 0
    for i, arg in enumerate(p.args):
        if not isinstance(arg, tuple):
            for k, v in enumerate(_term_leaves(arg)):
                states[f"occ{offset + k}"] = v
            offset += len(_term_leaves(arg))
            continue
        n_i = len(_term_leaves(proof_source(X, arg[0])))
        for j, prem in enumerate(arg):
            sub_states, sub_edges = _fill(X, prem)
            for c, v in sub_states.items():
                name = _rename(i, j, offset, c)
                if name in states and states[name] != v:
                    raise MalformedProof("premises disagree on a shared occurrence cell")
                states[name] = v
            for a, em in sub_edges.items():
                for c, v in em.items():
                    edge_maps[a][_rename(i, j, offset, c)] = v
        offset += n_i
    return states, edge_maps


def recompose(d: Decomposition, X: Presheaf) -> FreeElement:
    """Substitute filler values back into the shape's leaves."""
    if d.filler.cod != X:
        raise CellMismatch("filler codomain is not the requested ambient system")
    if d.shape.is_term():
        n, _ = occurrences(d.shape.value)
        counter = [0]

        def sub(t: Term) -> Term:
            if isinstance(t, Var):
                k = counter[0]
                counter[0] += 1
                return Var(d.filler.state_map[f"occ{k}"])
            return App(t.op, tuple(sub(a) for a in t.args))

        return sub(d.shape.value)
    return _refill(d.shape.value, d.filler.state_map, d.filler.edge_maps)


def _refill(p: Proof, states, edge_maps) -> Proof:
    if isinstance(p, Axiom):
        try:
            return Axiom(edge_maps[p.label]["e"], p.label)
        except KeyError as exc:
            raise CellMismatch(f"filler misses cell {exc}") from exc
    sources = _group_sources(p)
    offset = 0
    args: list = []
    for i, arg in enumerate(p.args):
        n_i = occurrences(sources[i])[0]
        if not isinstance(arg, tuple):
            counter = [0]

            def sub(t: Term, base=offset) -> Term:
                if isinstance(t, Var):
                    k = counter[0]
                    counter[0] += 1
                    name = f"occ{base + k}"
                    if name not in states:
                        raise CellMismatch(f"filler misses cell {name!r}")
                    return Var(states[name])
                return App(t.op, tuple(sub(c, base) for c in t.args))

            args.append(sub(arg))
        else:
            prems = []
            for j, prem in enumerate(arg):
                sub_states = {}
                sub_edges: dict[str, dict[str, str]] = {a: {} for a in edge_maps}
                for c in _cells_of(prem):
                    kind, a, name = c
                    renamed = _rename(i, j, offset, name)
                    if kind == "state":
                        if renamed not in states:
                            raise CellMismatch(f"filler misses cell {renamed!r}")
                        sub_states[name] = states[renamed]
                    else:
                        if renamed not in edge_maps[a]:
                            raise CellMismatch(f"filler misses cell {renamed!r}")
                        sub_edges[a][name] = edge_maps[a][renamed]
                prems.append(_refill(prem, sub_states, sub_edges))
            args.append(tuple(prems))
        offset += n_i
    return Node(p.rule, tuple(args))


def _cells_of(p: Proof) -> list[tuple[str, Optional[str], str]]:
    """(kind, label, name) for every cell of the arity of a proof shape."""
    if isinstance(p, Axiom):
        return [("state", None, "occ0"), ("state", None, "t"), ("edge", p.label, "e")]
    out: list[tuple[str, Optional[str], str]] = []
    sources = _group_sources(p)
    offset = 0
    for i, arg in enumerate(p.args):
        n_i = occurrences(sources[i])[0]
        if not isinstance(arg, tuple):
            out.extend(("state", None, f"occ{offset + k}") for k in range(n_i))
        else:
            seen: set[str] = set()
            for j, prem in enumerate(arg):
                for kind, a, name in _cells_of(prem):
                    renamed = _rename(i, j, offset, name)
                    if renamed in seen:
                        continue
                    seen.add(renamed)
                    out.append((kind, a, renamed))
        offset += n_i
    return out


# ---------------------------------------------------------------------------
# Genericness.


def is_generic(
    X: Presheaf, elem: FreeElement, samples: int = 0, rng=None
) -> bool:
    """Decide genericness by the filler-is-iso criterion.

    When ``samples`` > 0 and the criterion holds, additionally builds that
    many random strong-lifting squares and checks each has exactly one
    solution, raising if the definitional property ever disagrees with the
    criterion.
    """
    dec = decompose(X, elem)
    generic = dec.filler.is_iso()
    if generic and samples and rng is not None:
        for _ in range(samples):
            B, u = random_collapse(X, rng)
            chi = map_leaves(elem, lambda x: u.state_map[x], lambda e, a: u.edge_maps[a][e])
            Z, h = random_collapse(B, rng)
            k = _compose_maps(u, h)
            count = 0
            for l in all_morphisms(X, B):
                image = map_leaves(
                    elem, lambda x: l.state_map[x], lambda e, a: l.edge_maps[a][e]
                )
                if image == chi and _compose_maps(l, h) == k:
                    count += 1
            if count != 1:
                raise MalformedProof(
                    f"strong lifting count {count} contradicts the generic criterion"
                )
    return generic


def _compose_maps(inner: PresheafMorphism, outer: PresheafMorphism) -> PresheafMorphism:
    from .presheaf import compose

    return compose(outer, inner)


def all_morphisms(A: Presheaf, B: Presheaf) -> Iterator[PresheafMorphism]:
    """All natural maps A -> B, in a deterministic order (A must be small)."""
    state_choices = [sorted(B.states) for _ in A.states]
    for combo in product(*state_choices) if A.states else [()]:
        state_map = dict(zip(A.states, combo))
        edge_choices = []
        feasible = True
        flat_edges = [(a, e) for a in A.labels for e in A.edges[a]]
        for a, e in flat_edges:
            opts = sorted(
                eb
                for eb in B.edges[a]
                if B.src[a][eb] == state_map[A.src[a][e]]
                and B.tgt[a][eb] == state_map[A.tgt[a][e]]
            )
            if not opts:
                feasible = False
                break
            edge_choices.append(opts)
        if not feasible:
            continue
        for edge_combo in product(*edge_choices) if flat_edges else [()]:
            edge_maps: dict[str, dict[str, str]] = {a: {} for a in A.labels}
            for (a, e), eb in zip(flat_edges, edge_combo):
                edge_maps[a][e] = eb
            yield morphism(A, B, state_map, edge_maps)


def random_collapse(P: Presheaf, rng) -> tuple[Presheaf, PresheafMorphism]:
    """A random quotient-like natural map out of P (used for spot checks)."""
    if not P.states:
        return P, morphism(P, P, {}, {a: {} for a in P.labels})
    n_buckets = max(1, rng.randint(1, len(P.states)))
    bucket = {x: f"b{rng.randrange(n_buckets)}" for x in P.states}
    states = tuple(sorted(set(bucket.values())))
    edges: dict[str, list[str]] = {a: [] for a in P.labels}
    src: dict[str, dict[str, str]] = {a: {} for a in P.labels}
    tgt: dict[str, dict[str, str]] = {a: {} for a in P.labels}
    edge_name: dict[str, dict[str, str]] = {a: {} for a in P.labels}
    for a in P.labels:
        groups: dict[tuple, str] = {}
        for e in P.edges[a]:
            key = (bucket[P.src[a][e]], bucket[P.tgt[a][e]], rng.randint(0, 1))
            if key not in groups:
                name = f"{a}:{key[0]}>{key[1]}#{key[2]}"
                groups[key] = name
                edges[a].append(name)
                src[a][name] = key[0]
                tgt[a][name] = key[1]
            edge_name[a][e] = groups[key]
    B = make_presheaf(P.labels, states, {a: tuple(v) for a, v in edges.items()}, src, tgt)
    u = morphism(P, B, bucket, edge_name)
    return B, u
