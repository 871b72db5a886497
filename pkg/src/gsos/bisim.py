"""Reachable fragments, stratified bisimilarity, and the congruence check.

Bisimilarity on the (generally infinite) syntactic system is approximated
by k-strata on fuel-bounded fragments.  A result is definitive when the
fragment has an empty frontier; otherwise it holds up to depth k, which is
sound for the root states whenever fuel >= k because a state at distance d
from a root is only ever consulted at stratum k - d.

Refinement is iterated naive splitting on transition signatures: two
states are separated at stratum n+1 iff their sets of (label, block at
stratum n of target) differ.  Matching is existential, so parallel edges
never change an answer.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Sequence

from .errors import FuelTooSmall, UnknownState
from .presheaf import (
    LabelSet,
    Presheaf,
    PresheafMorphism,
    is_functional_bisimulation,
    make_presheaf,
    morphism,
)
from .terms import (
    App,
    HOLE,
    Proof,
    Term,
    Var,
    one_step,
    proof_label,
    proof_target,
    render,
    term_height,
    term_vars,
)


@dataclass(frozen=True)
class Fragment:
    """A finite window onto the closed-term system.

    Every non-frontier state has all of its one-step successors present;
    frontier states were reached at the fuel horizon and not expanded.
    """

    carrier: Presheaf
    frontier: frozenset[str]

    @property
    def definitive(self) -> bool:
        return not self.frontier


def reachable_fragment(
    spec, seeds: Sequence[Term], fuel: int, drop_last_premise: bool = False
) -> Fragment:
    """Breadth-first closure of the seeds under derivation, up to fuel steps."""
    labels = spec.labels
    states: list[str] = []
    known: dict[str, Term] = {}
    frontier: set[str] = set()
    level: list[Term] = []
    for t in seeds:
        if term_vars(t):
            raise UnknownState("fragment seeds must be closed terms")
        key = render(t)
        if key not in known:
            known[key] = t
            states.append(key)
            level.append(t)
    edges: dict[str, list[str]] = {a: [] for a in labels}
    src: dict[str, dict[str, str]] = {a: {} for a in labels}
    tgt: dict[str, dict[str, str]] = {a: {} for a in labels}
    proofs: dict[str, Proof] = {}
    closed = _closed_ambient(labels)
    for depth in range(fuel):
        next_level: list[Term] = []
        for m in level:
            for p in one_step(spec, m, drop_last_premise=drop_last_premise):
                n = proof_target(closed, p)
                nk = render(n)
                if nk not in known:
                    known[nk] = n
                    states.append(nk)
                    next_level.append(n)
                a = proof_label(p)
                pk = render(p)
                edges[a].append(pk)
                src[a][pk] = render(m)
                tgt[a][pk] = nk
                proofs[pk] = p
        level = next_level
        if not level:
            break
    frontier = {render(t) for t in level}
    carrier = make_presheaf(
        labels, tuple(states), {a: tuple(v) for a, v in edges.items()}, src, tgt
    )
    return Fragment(carrier, frozenset(frontier))


def _closed_ambient(labels: LabelSet) -> Presheaf:
    # closed proofs have no axioms, so any ambient system works for src/tgt
    return make_presheaf(labels, ())


# ---------------------------------------------------------------------------
# Stratified refinement.


def stratified_partition(X: Presheaf, k: int) -> list[dict[str, int]]:
    """Block index of every state at each stratum 0..k."""
    block = {x: 0 for x in X.states}
    history = [dict(block)]
    for _ in range(k):
        sig: dict[str, frozenset] = {}
        for x in X.states:
            sig[x] = frozenset(
                (a, block[X.tgt[a][e]]) for a in X.labels for e in X.out_edges(x, a)
            )
        canon: dict[tuple, int] = {}
        new_block = {}
        for x in X.states:
            key = (block[x], sig[x])
            if key not in canon:
                canon[key] = len(canon)
            new_block[x] = canon[key]
        if new_block == block:
            history.append(dict(new_block))
            block = new_block
            break
        block = new_block
        history.append(dict(block))
    while len(history) <= k:
        history.append(dict(block))
    return history


def k_bisimilar(X: Presheaf, x: str, y: str, k: int) -> bool:
    """Stratified approximation: refine k times and compare blocks."""
    if x not in X.state_set():
        raise UnknownState(f"{x!r} is not a state")
    if y not in X.state_set():
        raise UnknownState(f"{y!r} is not a state")
    part = stratified_partition(X, k)
    return part[k][x] == part[k][y]


def refinement_fixpoint(X: Presheaf) -> dict[str, int]:
    """Refine until stable (at most |states| rounds)."""
    return stratified_partition(X, len(X.states) + 1)[-1]


@dataclass(frozen=True)
class RelationOnStates:
    carrier: Presheaf
    pairs: frozenset[tuple[str, str]]

    def __post_init__(self):
        states = self.carrier.state_set()
        for x, y in self.pairs:
            if x not in states or y not in states:
                raise UnknownState(f"pair ({x!r},{y!r}) is not within the carrier")


def relation_presheaf(
    r: RelationOnStates,
) -> tuple[Presheaf, PresheafMorphism, PresheafMorphism]:
    """The induced relation system and its two projections.

    States are the pairs; for each label, one edge per pair of edges with
    componentwise related endpoints.
    """
    X = r.carrier
    labels = X.labels
    pair = lambda u, v: f"({u},{v})"
    states = tuple(pair(x, y) for x, y in sorted(r.pairs))
    edges: dict[str, list[str]] = {a: [] for a in labels}
    src: dict[str, dict[str, str]] = {a: {} for a in labels}
    tgt: dict[str, dict[str, str]] = {a: {} for a in labels}
    p1s, p2s = {}, {}
    p1e: dict[str, dict[str, str]] = {a: {} for a in labels}
    p2e: dict[str, dict[str, str]] = {a: {} for a in labels}
    for x, y in sorted(r.pairs):
        p1s[pair(x, y)] = x
        p2s[pair(x, y)] = y
    for a in labels:
        for e1 in X.edges[a]:
            for e2 in X.edges[a]:
                if (X.src[a][e1], X.src[a][e2]) in r.pairs and (
                    X.tgt[a][e1],
                    X.tgt[a][e2],
                ) in r.pairs:
                    name = pair(e1, e2)
                    edges[a].append(name)
                    src[a][name] = pair(X.src[a][e1], X.src[a][e2])
                    tgt[a][name] = pair(X.tgt[a][e1], X.tgt[a][e2])
                    p1e[a][name] = e1
                    p2e[a][name] = e2
    R = make_presheaf(labels, states, {a: tuple(v) for a, v in edges.items()}, src, tgt)
    return R, morphism(R, X, p1s, p1e), morphism(R, X, p2s, p2e)


def check_bisimulation_relation(r: RelationOnStates) -> bool:
    """Both projections of the induced relation system must lift."""
    R, p1, p2 = relation_presheaf(r)
    return bool(is_functional_bisimulation(p1)) and bool(is_functional_bisimulation(p2))


# ---------------------------------------------------------------------------
# Contexts and the congruence report.


def plug(context: Term, filling: Term) -> Term:
    if isinstance(context, Var):
        return filling if context.name == HOLE else context
    return App(context.op, tuple(plug(a, filling) for a in context.args))


def count_holes(context: Term) -> int:
    if isinstance(context, Var):
        return 1 if context.name == HOLE else 0
    return sum(count_holes(a) for a in context.args)


def enumerate_contexts(spec, max_height: int) -> list[Term]:
    """All one-hole contexts of height <= max_height.

    Non-hole leaves are the 0-ary operations; every operation of the
    signature may appear.  Heights count as for terms, the hole counting 0.
    """
    closed: list[list[Term]] = [[]]
    for h in range(1, max_height + 1):
        level = []
        below = [t for lvl in closed for t in lvl]
        for op, arity in spec.signature.operations:
            if arity == 0:
                if h == 1:
                    level.append(App(op, ()))
                continue
            for combo in product(below, repeat=arity):
                if 1 + max(term_height(t) for t in combo) == h:
                    level.append(App(op, combo))
        closed.append(level)
    closed_terms = [t for lvl in closed for t in lvl]

    ctxs: list[list[Term]] = [[Var(HOLE)]]
    for h in range(1, max_height + 1):
        level = []
        hole_below = [c for lvl in ctxs for c in lvl]
        for op, arity in spec.signature.operations:
            if arity == 0:
                continue
            for slot in range(arity):
                others: list[list[Term]] = []
                for pos in range(arity):
                    others.append(hole_below if pos == slot else closed_terms)
                for combo in product(*others):
                    if 1 + max(term_height(t) for t in combo) == h:
                        level.append(App(op, tuple(combo)))
        ctxs.append(level)
    return [c for lvl in ctxs for c in lvl]


def sample_contexts(spec, max_height: int, count: int, rng) -> list[Term]:
    """A deduplicated random sample of one-hole contexts.

    The default congruence surface; exhaustive enumeration stays available
    through :func:`enumerate_contexts` for tiny signatures.
    """
    pool = enumerate_contexts(spec, max_height)
    if count >= len(pool):
        return pool
    picked = rng.sample(range(len(pool)), count)
    return [pool[i] for i in sorted(picked)]


def congruence_test(
    spec,
    pairs: Sequence[tuple[Term, Term]],
    contexts: Sequence[Term],
    k: int,
    fuel: int,
    drop_last_premise: bool = False,
) -> dict:
    """Do all contexts preserve stratum-k equivalence of all pairs?

    Every (pair, context) case builds the fragment reachable from both
    composites and compares them at stratum k.  The report lists each case;
    violations are the cases where the composites are not k-equivalent.
    """
    if fuel < k:
        raise FuelTooSmall(f"fuel {fuel} < stratum {k}")
    for c in contexts:
        if count_holes(c) != 1:
            raise UnknownState(f"context {render(c)} must have exactly one hole")
    cases = []
    violations = []
    for pi, (u, v) in enumerate(pairs):
        for ci, c in enumerate(contexts):
            cu, cv = plug(c, u), plug(c, v)
            frag = reachable_fragment(
                spec, [cu, cv], fuel, drop_last_premise=drop_last_premise
            )
            ok = k_bisimilar(frag.carrier, render(cu), render(cv), k)
            record = {
                "pair": [render(u), render(v)],
                "context": render(c),
                "preserved": ok,
                "definitive": frag.definitive,
                "states": len(frag.carrier.states),
            }
            cases.append(record)
            if not ok:
                violations.append(record)
    return {
        "stratum": k,
        "fuel": fuel,
        "mutated": drop_last_premise,
        "pairs": len(pairs),
        "contexts": len(contexts),
        "cases": cases,
        "violations": violations,
        "ok": not violations,
    }
