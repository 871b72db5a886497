"""Finite generalized labelled transition systems.

A system over a label set A is a finite presheaf on the base category with
one state object and one edge object per label: a set of states, plus one
set of edges per label with total source/target maps.  Several parallel
edges with the same label are allowed.  All states and edges carry string
identifiers; everything is immutable after construction.

Functional bisimulations are characterised by a lifting property against
the source inclusions s^a of the representables, and that lifting problem
is solved here by exhaustive, deterministic search.  Bisimilarity itself
lives in :mod:`gsos.bisim` and is computed by partition refinement rather
than as a union of subobjects; the two agree on the finite, image-finite
systems this package manipulates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Iterator, Mapping, Optional

from .errors import (
    DanglingEdge,
    DuplicateId,
    NonCommutingSquare,
    ShapeUnsupported,
    UnknownLabel,
)

STAR = "*"


@dataclass(frozen=True)
class LabelSet:
    """Finite ordered set of transition labels."""

    labels: tuple[str, ...]

    def __post_init__(self):
        if not self.labels:
            raise UnknownLabel("label set must be non-empty")
        if len(set(self.labels)) != len(self.labels):
            raise DuplicateId(f"duplicate labels in {self.labels}")

    def __contains__(self, label: str) -> bool:
        return label in self.labels

    def __iter__(self) -> Iterator[str]:
        return iter(self.labels)

    def __len__(self) -> int:
        return len(self.labels)


def labelset(*labels: str) -> LabelSet:
    return LabelSet(tuple(labels))


@dataclass(frozen=True, eq=False)
class Presheaf:
    """States plus, per label, edges with source and target maps.

    Use :func:`make_presheaf` to construct validated instances.  Equality
    compares the underlying sets and maps, ignoring declaration order.
    """

    labels: LabelSet
    states: tuple[str, ...]
    edges: Mapping[str, tuple[str, ...]]
    src: Mapping[str, Mapping[str, str]]
    tgt: Mapping[str, Mapping[str, str]]

    def state_set(self) -> frozenset[str]:
        return frozenset(self.states)

    def edge_set(self, label: str) -> frozenset[str]:
        return frozenset(self.edges[label])

    def all_edges(self) -> Iterator[tuple[str, str]]:
        """Yield (label, edge id) pairs in declaration order."""
        for a in self.labels:
            for e in self.edges[a]:
                yield a, e

    def label_of(self, edge: str) -> str:
        for a in self.labels:
            if edge in self.src[a]:
                return a
        raise UnknownLabel(f"edge {edge!r} not present")

    def out_edges(self, state: str, label: str) -> list[str]:
        return [e for e in self.edges[label] if self.src[label][e] == state]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Presheaf):
            return NotImplemented
        return (
            self.labels == other.labels
            and self.state_set() == other.state_set()
            and all(self.edge_set(a) == other.edge_set(a) for a in self.labels)
            and all(dict(self.src[a]) == dict(other.src[a]) for a in self.labels)
            and all(dict(self.tgt[a]) == dict(other.tgt[a]) for a in self.labels)
        )

    def size(self) -> tuple[int, int]:
        return len(self.states), sum(len(self.edges[a]) for a in self.labels)


def make_presheaf(
    labels: LabelSet,
    states: Iterable[str],
    edges: Mapping[str, Iterable[str]] | None = None,
    src: Mapping[str, Mapping[str, str]] | None = None,
    tgt: Mapping[str, Mapping[str, str]] | None = None,
) -> Presheaf:
    """Validate and build a presheaf; rejects dangling endpoints and id reuse."""
    states = tuple(states)
    if len(set(states)) != len(states):
        raise DuplicateId(f"duplicate state ids in {states}")
    edges = edges or {}
    src = src or {}
    tgt = tgt or {}
    for a in edges:
        if a not in labels:
            raise UnknownLabel(f"edge label {a!r} not declared")
    state_set = set(states)
    out_edges: dict[str, tuple[str, ...]] = {}
    out_src: dict[str, dict[str, str]] = {}
    out_tgt: dict[str, dict[str, str]] = {}
    seen: set[str] = set()
    for a in labels:
        es = tuple(edges.get(a, ()))
        if len(set(es)) != len(es):
            raise DuplicateId(f"duplicate edge ids at label {a!r}")
        for e in es:
            if e in seen:
                raise DuplicateId(f"edge id {e!r} reused across labels")
            seen.add(e)
        sa = dict(src.get(a, {}))
        ta = dict(tgt.get(a, {}))
        for e in es:
            if e not in sa or e not in ta:
                raise DanglingEdge(f"edge {e!r} at {a!r} lacks src or tgt")
            if sa[e] not in state_set:
                raise DanglingEdge(f"edge {e!r}: src {sa[e]!r} is not a state")
            if ta[e] not in state_set:
                raise DanglingEdge(f"edge {e!r}: tgt {ta[e]!r} is not a state")
        out_edges[a] = es
        out_src[a] = {e: sa[e] for e in es}
        out_tgt[a] = {e: ta[e] for e in es}
    return Presheaf(labels, states, out_edges, out_src, out_tgt)


def empty_presheaf(labels: LabelSet) -> Presheaf:
    return make_presheaf(labels, ())


def representable(labels: LabelSet, obj: str) -> Presheaf:
    """y_* (one state, no edges) or y_[a] (one a-edge between two states)."""
    if obj == STAR:
        return make_presheaf(labels, (STAR,))
    if obj not in labels:
        raise UnknownLabel(f"no representable for undeclared label {obj!r}")
    return make_presheaf(
        labels,
        ("s", "t"),
        {obj: ("e",)},
        {obj: {"e": "s"}},
        {obj: {"e": "t"}},
    )


def terminal(labels: LabelSet) -> Presheaf:
    """The terminal system 1: one state and one loop per label, named by the label."""
    return make_presheaf(
        labels,
        (STAR,),
        {a: (a,) for a in labels},
        {a: {a: STAR} for a in labels},
        {a: {a: STAR} for a in labels},
    )


@dataclass(frozen=True, eq=False)
class PresheafMorphism:
    """A map of systems: state map plus, per label, an edge map.

    Validated on construction: totality and commutation with src/tgt.
    """

    dom: Presheaf
    cod: Presheaf
    state_map: Mapping[str, str]
    edge_maps: Mapping[str, Mapping[str, str]]

    def __post_init__(self):
        if self.dom.labels != self.cod.labels:
            raise UnknownLabel("morphism endpoints disagree on labels")
        cod_states = self.cod.state_set()
        for x in self.dom.states:
            if x not in self.state_map:
                raise DanglingEdge(f"state map misses {x!r}")
            if self.state_map[x] not in cod_states:
                raise DanglingEdge(f"state map sends {x!r} outside the codomain")
        for a in self.dom.labels:
            em = self.edge_maps.get(a, {})
            cod_edges = self.cod.edge_set(a)
            for e in self.dom.edges[a]:
                if e not in em:
                    raise DanglingEdge(f"edge map at {a!r} misses {e!r}")
                fe = em[e]
                if fe not in cod_edges:
                    raise DanglingEdge(f"edge map sends {e!r} outside the codomain")
                if self.state_map[self.dom.src[a][e]] != self.cod.src[a][fe]:
                    raise NonCommutingSquare(f"src not preserved at edge {e!r}")
                if self.state_map[self.dom.tgt[a][e]] != self.cod.tgt[a][fe]:
                    raise NonCommutingSquare(f"tgt not preserved at edge {e!r}")

    def on_state(self, x: str) -> str:
        return self.state_map[x]

    def on_edge(self, label: str, e: str) -> str:
        return self.edge_maps[label][e]

    def __eq__(self, other) -> bool:
        if not isinstance(other, PresheafMorphism):
            return NotImplemented
        return (
            self.dom == other.dom
            and self.cod == other.cod
            and {x: self.state_map[x] for x in self.dom.states}
            == {x: other.state_map[x] for x in other.dom.states}
            and all(
                {e: self.edge_maps[a][e] for e in self.dom.edges[a]}
                == {e: other.edge_maps[a][e] for e in other.dom.edges[a]}
                for a in self.dom.labels
            )
        )

    def is_injective(self) -> bool:
        sm = [self.state_map[x] for x in self.dom.states]
        if len(set(sm)) != len(sm):
            return False
        for a in self.dom.labels:
            em = [self.edge_maps[a][e] for e in self.dom.edges[a]]
            if len(set(em)) != len(em):
                return False
        return True

    def is_surjective(self) -> bool:
        if set(self.state_map[x] for x in self.dom.states) != self.cod.state_set():
            return False
        for a in self.dom.labels:
            if set(self.edge_maps[a][e] for e in self.dom.edges[a]) != self.cod.edge_set(a):
                return False
        return True

    def is_iso(self) -> bool:
        return self.is_injective() and self.is_surjective()


def morphism(
    dom: Presheaf,
    cod: Presheaf,
    state_map: Mapping[str, str],
    edge_maps: Mapping[str, Mapping[str, str]] | None = None,
) -> PresheafMorphism:
    em = {a: dict((edge_maps or {}).get(a, {})) for a in dom.labels}
    return PresheafMorphism(dom, cod, dict(state_map), em)


def identity(X: Presheaf) -> PresheafMorphism:
    return morphism(X, X, {x: x for x in X.states}, {a: {e: e for e in X.edges[a]} for a in X.labels})


def compose(g: PresheafMorphism, f: PresheafMorphism) -> PresheafMorphism:
    """g after f."""
    if f.cod != g.dom:
        raise NonCommutingSquare("composition endpoints do not match")
    return morphism(
        f.dom,
        g.cod,
        {x: g.state_map[f.state_map[x]] for x in f.dom.states},
        {a: {e: g.edge_maps[a][f.edge_maps[a][e]] for e in f.dom.edges[a]} for a in f.dom.labels},
    )


def source_inclusion(labels: LabelSet, a: str) -> PresheafMorphism:
    """s^a : y_* -> y_[a], picking the source of the generic a-edge."""
    return morphism(representable(labels, STAR), representable(labels, a), {STAR: "s"})


def target_inclusion(labels: LabelSet, a: str) -> PresheafMorphism:
    """t^a : y_* -> y_[a]."""
    return morphism(representable(labels, STAR), representable(labels, a), {STAR: "t"})


def bang(X: Presheaf) -> PresheafMorphism:
    """The unique map X -> 1."""
    one = terminal(X.labels)
    return morphism(
        X,
        one,
        {x: STAR for x in X.states},
        {a: {e: a for e in X.edges[a]} for a in X.labels},
    )


@dataclass(frozen=True)
class LiftingSquare:
    """A commuting square: right∘top = bottom∘left, with left : A->B, right : X->Y."""

    left: PresheafMorphism
    top: PresheafMorphism
    right: PresheafMorphism
    bottom: PresheafMorphism

    def __post_init__(self):
        if self.left.dom != self.top.dom:
            raise NonCommutingSquare("left and top must share their domain")
        if self.top.cod != self.right.dom:
            raise NonCommutingSquare("top codomain must be the right domain")
        if self.left.cod != self.bottom.dom:
            raise NonCommutingSquare("left codomain must be the bottom domain")
        if self.right.cod != self.bottom.cod:
            raise NonCommutingSquare("right and bottom must share their codomain")
        if compose(self.right, self.top) != compose(self.bottom, self.left):
            raise NonCommutingSquare("square does not commute")


def find_lifting(square: LiftingSquare) -> Optional[PresheafMorphism]:
    """Solve for k : B -> X with k∘left = top and right∘k = bottom.

    Exhaustive search over the finitely many candidates.  Returns the
    lexicographically least solution (free states in sorted id order, each
    assigned the least admissible candidate first, then edges likewise), or
    None when no lifting exists.
    """
    A, B = square.left.dom, square.left.cod
    X = square.right.dom
    left, top, right, bottom = square.left, square.top, square.right, square.bottom

    forced_state: dict[str, str] = {}
    for a_st in A.states:
        b = left.state_map[a_st]
        want = top.state_map[a_st]
        if forced_state.get(b, want) != want:
            return None
        forced_state[b] = want
    forced_edge: dict[str, dict[str, str]] = {lab: {} for lab in B.labels}
    for lab in A.labels:
        for e in A.edges[lab]:
            be = left.edge_maps[lab][e]
            want = top.edge_maps[lab][e]
            if forced_edge[lab].get(be, want) != want:
                return None
            forced_edge[lab][be] = want

    free_states = sorted(b for b in B.states if b not in forced_state)
    cand: list[list[str]] = []
    for b in free_states:
        cs = sorted(x for x in X.states if right.state_map[x] == bottom.state_map[b])
        if not cs:
            return None
        cand.append(cs)

    for choice in product(*cand) if free_states else [()]:
        k_state = dict(forced_state)
        k_state.update(zip(free_states, choice))
        k_edges: dict[str, dict[str, str]] = {}
        ok = True
        for lab in B.labels:
            k_edges[lab] = dict(forced_edge[lab])
            for be in B.edges[lab]:
                if be in k_edges[lab]:
                    ex = k_edges[lab][be]
                    if (
                        X.src[lab][ex] != k_state[B.src[lab][be]]
                        or X.tgt[lab][ex] != k_state[B.tgt[lab][be]]
                    ):
                        ok = False
                        break
                    continue
                picks = sorted(
                    ex
                    for ex in X.edges[lab]
                    if right.edge_maps[lab][ex] == bottom.edge_maps[lab][be]
                    and X.src[lab][ex] == k_state[B.src[lab][be]]
                    and X.tgt[lab][ex] == k_state[B.tgt[lab][be]]
                )
                if not picks:
                    ok = False
                    break
                k_edges[lab][be] = picks[0]
            if not ok:
                break
        if not ok:
            continue
        k = morphism(B, X, k_state, k_edges)
        assert compose(k, left) == top and compose(right, k) == bottom
        return k
    return None


@dataclass(frozen=True)
class Counterexample:
    """A failed lifting instance: no edge over `edge` starts at `state`."""

    state: str
    label: str
    edge: str

    def __bool__(self) -> bool:
        return False


def is_functional_bisimulation(f: PresheafMorphism):
    """True iff every square with left s^a and right f lifts.

    Concretely: for every state x of the domain and every codomain edge e
    starting at f(x), some domain edge over e starts at x.  Returns True or
    a falsy :class:`Counterexample`.
    """
    from collections import defaultdict

    X, Y = f.dom, f.cod
    for a in X.labels:
        out_y = defaultdict(list)
        for e in Y.edges[a]:
            out_y[Y.src[a][e]].append(e)
        image = defaultdict(set)
        for e in X.edges[a]:
            image[X.src[a][e]].add(f.edge_maps[a][e])
        for x in X.states:
            covered = image[x]
            for e in out_y[f.state_map[x]]:
                if e not in covered:
                    return Counterexample(x, a, e)
    return True


def pullback_report(square: LiftingSquare) -> dict[str, bool]:
    """Pointwise pullback test for the top-left corner, per base object.

    The corner A (domain of left and top) is a pullback of
    B --bottom--> C <--right-- X iff a |-> (left(a), top(a)) is a bijection
    onto the set-pullback, at the state object and at every edge object.
    Commutation already places the canonical map inside the pullback, so it
    suffices to check injectivity plus a fiberwise cardinality count.
    """
    from collections import Counter

    A, B, X = square.left.dom, square.left.cod, square.right.dom

    def bijective(dom_items, into_b, into_x, b_items, x_items, b_val, x_val) -> bool:
        got = [(into_b(i), into_x(i)) for i in dom_items]
        if len(set(got)) != len(got):
            return False
        fib_b = Counter(b_val(b) for b in b_items)
        fib_x = Counter(x_val(x) for x in x_items)
        want_size = sum(n * fib_x.get(v, 0) for v, n in fib_b.items())
        return len(got) == want_size

    report = {
        STAR: bijective(
            A.states,
            lambda s: square.left.state_map[s],
            lambda s: square.top.state_map[s],
            B.states,
            X.states,
            lambda b: square.bottom.state_map[b],
            lambda x: square.right.state_map[x],
        )
    }
    for a in A.labels:
        report[a] = bijective(
            A.edges[a],
            lambda e, a=a: square.left.edge_maps[a][e],
            lambda e, a=a: square.top.edge_maps[a][e],
            B.edges[a],
            X.edges[a],
            lambda e, a=a: square.bottom.edge_maps[a][e],
            lambda e, a=a: square.right.edge_maps[a][e],
        )
    return report


def is_pullback_square(square: LiftingSquare) -> bool:
    return all(pullback_report(square).values())


# ---------------------------------------------------------------------------
# Finite colimits: coproducts and wide pushouts (the only shapes needed).


@dataclass(frozen=True)
class Coproduct:
    parts: tuple[Presheaf, ...]


@dataclass(frozen=True)
class WidePushout:
    """A cospan-free star: every leg goes out of the shared apex."""

    apex: Presheaf
    legs: tuple[PresheafMorphism, ...]

    def __post_init__(self):
        if not self.legs:
            raise ShapeUnsupported("wide pushout needs at least one leg")
        for leg in self.legs:
            if leg.dom != self.apex:
                raise ShapeUnsupported("every leg must start at the apex")


def pushout_diagram(left: PresheafMorphism, right: PresheafMorphism) -> WidePushout:
    if left.dom != right.dom:
        raise ShapeUnsupported("pushout legs must share their domain")
    return WidePushout(left.dom, (left, right))


class _UnionFind:
    def __init__(self):
        self.parent: dict = {}

    def add(self, x):
        self.parent.setdefault(x, x)

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, x, y):
        rx, ry = self.find(x), self.find(y)
        if rx != ry:
            self.parent[max(rx, ry)] = min(rx, ry)


def colimit(diagram) -> tuple[Presheaf, tuple[PresheafMorphism, ...]]:
    """Pointwise colimit with stable hierarchical cell names.

    Cells of part/leg-codomain i are injected as "inj{i}/{cell}"; cells
    identified by a wide pushout take the least such name in their class.
    Returns the colimit and one injection per part (per leg codomain).
    """
    if isinstance(diagram, Coproduct):
        parts = diagram.parts
        if not parts:
            raise ShapeUnsupported("empty coproducts need an ambient label set")
        labels = parts[0].labels
        for p in parts:
            if p.labels != labels:
                raise ShapeUnsupported("coproduct parts disagree on labels")
        states = tuple(f"inj{i}/{x}" for i, p in enumerate(parts) for x in p.states)
        edges = {
            a: tuple(f"inj{i}/{e}" for i, p in enumerate(parts) for e in p.edges[a])
            for a in labels
        }
        src = {
            a: {
                f"inj{i}/{e}": f"inj{i}/{p.src[a][e]}"
                for i, p in enumerate(parts)
                for e in p.edges[a]
            }
            for a in labels
        }
        tgt = {
            a: {
                f"inj{i}/{e}": f"inj{i}/{p.tgt[a][e]}"
                for i, p in enumerate(parts)
                for e in p.edges[a]
            }
            for a in labels
        }
        colim = make_presheaf(labels, states, edges, src, tgt)
        injections = tuple(
            morphism(
                p,
                colim,
                {x: f"inj{i}/{x}" for x in p.states},
                {a: {e: f"inj{i}/{e}" for e in p.edges[a]} for a in p.labels},
            )
            for i, p in enumerate(parts)
        )
        return colim, injections

    if isinstance(diagram, WidePushout):
        apex, legs = diagram.apex, diagram.legs
        labels = apex.labels
        for leg in legs:
            if leg.cod.labels != labels:
                raise ShapeUnsupported("pushout legs disagree on labels")

        uf_states = _UnionFind()
        for i, leg in enumerate(legs):
            for x in leg.cod.states:
                uf_states.add((i, x))
        for u in apex.states:
            first = (0, legs[0].state_map[u])
            for i, leg in enumerate(legs):
                uf_states.union(first, (i, leg.state_map[u]))

        uf_edges: dict[str, _UnionFind] = {a: _UnionFind() for a in labels}
        for a in labels:
            for i, leg in enumerate(legs):
                for e in leg.cod.edges[a]:
                    uf_edges[a].add((i, e))
            for u in apex.edges[a]:
                first = (0, legs[0].edge_maps[a][u])
                for i, leg in enumerate(legs):
                    uf_edges[a].union(first, (i, leg.edge_maps[a][u]))

        def class_name(uf: _UnionFind, cell) -> str:
            members = [m for m in uf.parent if uf.find(m) == uf.find(cell)]
            i, c = min(members)
            return f"inj{i}/{c}"

        state_name = {cell: class_name(uf_states, cell) for cell in uf_states.parent}
        states = tuple(sorted(set(state_name.values())))
        edges: dict[str, tuple[str, ...]] = {}
        src: dict[str, dict[str, str]] = {}
        tgt: dict[str, dict[str, str]] = {}
        edge_name: dict[str, dict] = {}
        for a in labels:
            edge_name[a] = {cell: class_name(uf_edges[a], cell) for cell in uf_edges[a].parent}
            es = sorted(set(edge_name[a].values()))
            edges[a] = tuple(es)
            src[a], tgt[a] = {}, {}
            for (i, e), name in edge_name[a].items():
                src[a][name] = state_name[(i, legs[i].cod.src[a][e])]
                tgt[a][name] = state_name[(i, legs[i].cod.tgt[a][e])]
        colim = make_presheaf(labels, states, edges, src, tgt)
        injections = tuple(
            morphism(
                leg.cod,
                colim,
                {x: state_name[(i, x)] for x in leg.cod.states},
                {a: {e: edge_name[a][(i, e)] for e in leg.cod.edges[a]} for a in labels},
            )
            for i, leg in enumerate(legs)
        )
        return colim, injections

    raise ShapeUnsupported(f"unsupported diagram shape {type(diagram).__name__}")


def pullback(f: PresheafMorphism, g: PresheafMorphism) -> tuple[Presheaf, PresheafMorphism, PresheafMorphism]:
    """Pointwise pullback of f : X -> Z and g : Y -> Z, with pair-named cells."""
    if f.cod != g.cod:
        raise ShapeUnsupported("pullback legs must share their codomain")
    X, Y = f.dom, g.dom
    labels = X.labels
    pair = lambda u, v: f"({u},{v})"
    states = tuple(
        pair(x, y) for x in X.states for y in Y.states if f.state_map[x] == g.state_map[y]
    )
    edges, src, tgt = {}, {}, {}
    p1_states = {pair(x, y): x for x in X.states for y in Y.states}
    p2_states = {pair(x, y): y for x in X.states for y in Y.states}
    p1_edges: dict[str, dict[str, str]] = {}
    p2_edges: dict[str, dict[str, str]] = {}
    for a in labels:
        es = []
        src[a], tgt[a] = {}, {}
        p1_edges[a], p2_edges[a] = {}, {}
        for e1 in X.edges[a]:
            for e2 in Y.edges[a]:
                if f.edge_maps[a][e1] != g.edge_maps[a][e2]:
                    continue
                name = pair(e1, e2)
                es.append(name)
                src[a][name] = pair(X.src[a][e1], Y.src[a][e2])
                tgt[a][name] = pair(X.tgt[a][e1], Y.tgt[a][e2])
                p1_edges[a][name] = e1
                p2_edges[a][name] = e2
        edges[a] = tuple(es)
    P = make_presheaf(labels, states, edges, src, tgt)
    p1 = morphism(P, X, {s: p1_states[s] for s in states}, p1_edges)
    p2 = morphism(P, Y, {s: p2_states[s] for s in states}, p2_edges)
    return P, p1, p2


# ---------------------------------------------------------------------------
# Serialisation.


def presheaf_to_json(X: Presheaf) -> str:
    doc = {
        "labels": list(X.labels),
        "states": list(X.states),
        "edges": {
            a: [{"id": e, "src": X.src[a][e], "tgt": X.tgt[a][e]} for e in X.edges[a]]
            for a in X.labels
        },
    }
    return json.dumps(doc, separators=(",", ":"))


def presheaf_from_json(text: str) -> Presheaf:
    doc = json.loads(text)
    labels = LabelSet(tuple(doc["labels"]))
    edges = {a: tuple(rec["id"] for rec in doc.get("edges", {}).get(a, [])) for a in labels}
    src = {a: {rec["id"]: rec["src"] for rec in doc.get("edges", {}).get(a, [])} for a in labels}
    tgt = {a: {rec["id"]: rec["tgt"] for rec in doc.get("edges", {}).get(a, [])} for a in labels}
    return make_presheaf(labels, tuple(doc["states"]), edges, src, tgt)


def morphism_to_json(f: PresheafMorphism) -> str:
    doc = {
        "dom": json.loads(presheaf_to_json(f.dom)),
        "cod": json.loads(presheaf_to_json(f.cod)),
        "states": {x: f.state_map[x] for x in f.dom.states},
        "edges": {a: {e: f.edge_maps[a][e] for e in f.dom.edges[a]} for a in f.dom.labels},
    }
    return json.dumps(doc, separators=(",", ":"))


def morphism_from_json(text: str) -> PresheafMorphism:
    doc = json.loads(text)
    dom = presheaf_from_json(json.dumps(doc["dom"]))
    cod = presheaf_from_json(json.dumps(doc["cod"]))
    return morphism(dom, cod, doc["states"], doc.get("edges", {}))


def presheaf_to_dot(X: Presheaf) -> str:
    lines = ["digraph lts {"]
    for x in X.states:
        lines.append(f'  "{x}";')
    for a in X.labels:
        for e in X.edges[a]:
            lines.append(f'  "{X.src[a][e]}" -> "{X.tgt[a][e]}" [label="{e}:{a}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
