"""Cell certificates, constructive lifting, preservation, cartesianness.

A source arity morphism is always a finite composite of pushouts of the
generating source inclusions s^a; the certificate records the attachment
sequence (which label is glued at which state, and what the created cells
are called), so that replaying it through the colimit machinery rebuilds
the arity on the nose.  Certificates are what make lifting against a
functional bisimulation constructive: each attachment is one elementary
lifting problem, solved deterministically.

The same window discipline as everywhere else applies: two-layer systems
are truncated by flattened depth, which every construction here preserves
or decreases, so a single bound threads through the whole pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import (
    IncompatiblePair,
    NonCommutingSquare,
    NotAFunctionalBisim,
    ReplayMismatch,
)
from .familial import (
    ArityPresheaf,
    Decomposition,
    Element,
    _group_sources,
    _rename,
    _src_over_one,
    arity_label,
    arity_star,
    decompose,
    recompose,
    strip,
)
from .presheaf import (
    STAR,
    LabelSet,
    LiftingSquare,
    Presheaf,
    PresheafMorphism,
    WidePushout,
    bang,
    colimit,
    compose,
    is_functional_bisimulation,
    make_presheaf,
    morphism,
    pullback_report,
    representable,
    source_inclusion,
    terminal,
)
from .terms import (
    App,
    Axiom,
    Node,
    Proof,
    Term,
    Var,
    map_leaves,
    mu,
    occurrences,
    parse_proof,
    parse_term,
    proof_label,
    proof_source,
    render,
    to_terminal,
    truncated_free,
    truncated_free_squared,
)


@dataclass(frozen=True)
class SClass:
    """The generating maps s^a, one per label."""

    generators: tuple[tuple[str, PresheafMorphism], ...]

    @classmethod
    def for_labels(cls, labels: LabelSet) -> "SClass":
        return cls(tuple((a, source_inclusion(labels, a)) for a in labels))

    def generator(self, label: str) -> PresheafMorphism:
        for a, g in self.generators:
            if a == label:
                return g
        raise ReplayMismatch(0, f"no generator for label {label!r}")


@dataclass(frozen=True)
class AttachStep:
    """Push out s^{label} along the map picking state ``at``.

    The fresh edge and its target state are given the recorded names, so a
    replay reproduces the arity's cells exactly.
    """

    label: str
    at: str
    edge: str
    tgt: str

    def to_dict(self) -> dict:
        return {"label": self.label, "at": self.at, "edge": self.edge, "tgt": self.tgt}


@dataclass(frozen=True)
class CellCertificate:
    base: ArityPresheaf
    steps: tuple[AttachStep, ...]
    claimed_composite: PresheafMorphism

    def to_dict(self) -> dict:
        from .presheaf import presheaf_to_json
        import json

        return {
            "base": json.loads(presheaf_to_json(self.base.carrier)),
            "steps": [s.to_dict() for s in self.steps],
            "codomain": json.loads(presheaf_to_json(self.claimed_composite.cod)),
        }


def cell_certificate(labels: LabelSet, r: Element) -> CellCertificate:
    """Attachment sequence witnessing the source arity morphism of a shape."""
    if r.is_term():
        raise IncompatiblePair("certificates are for proof shapes")
    base = arity_star(labels, Element(STAR, _src_over_one(r.value)))
    _, src_mor = arity_label(labels, r)
    return CellCertificate(base, tuple(_steps(r.value)), src_mor)


def _steps(p: Proof) -> list[AttachStep]:
    if isinstance(p, Axiom):
        return [AttachStep(p.label, "occ0", "e", "t")]
    out: list[AttachStep] = []
    sources = _group_sources(p)
    offset = 0
    for i, arg in enumerate(p.args):
        n_i = occurrences(sources[i])[0]
        if isinstance(arg, tuple):
            for j, prem in enumerate(arg):
                for st in _steps(prem):
                    out.append(
                        AttachStep(
                            st.label,
                            _rename(i, j, offset, st.at),
                            _rename(i, j, offset, st.edge),
                            _rename(i, j, offset, st.tgt),
                        )
                    )
        offset += n_i
    return out


def replay_certificate(cert: CellCertificate) -> tuple[Presheaf, PresheafMorphism]:
    """Rebuild the codomain by successive pushouts of the generators.

    Raises ReplayMismatch at the first step that cannot be performed.
    """
    labels = cert.base.carrier.labels
    current = cert.base.carrier
    point = representable(labels, STAR)
    for idx, step in enumerate(cert.steps):
        if step.label not in labels:
            raise ReplayMismatch(idx, f"label {step.label!r} undeclared")
        if step.at not in current.state_set():
            raise ReplayMismatch(idx, f"attach state {step.at!r} missing")
        if step.tgt in current.state_set():
            raise ReplayMismatch(idx, f"created state {step.tgt!r} already present")
        if any(step.edge in current.edge_set(a) for a in labels):
            raise ReplayMismatch(idx, f"created edge {step.edge!r} already present")
        pick = morphism(point, current, {STAR: step.at})
        glued, (inj_gen, inj_cur) = colimit(
            WidePushout(point, (source_inclusion(labels, step.label), pick))
        )
        state_name = {inj_cur.state_map[x]: x for x in current.states}
        state_name[inj_gen.state_map["t"]] = step.tgt
        edge_name = {a: {} for a in labels}
        for a in labels:
            for e in current.edges[a]:
                edge_name[a][inj_cur.edge_maps[a][e]] = e
        edge_name[step.label][inj_gen.edge_maps[step.label]["e"]] = step.edge
        current = _rename_cells(glued, state_name, edge_name)
    composite = morphism(
        cert.base.carrier, current, {x: x for x in cert.base.carrier.states}
    )
    return current, composite


def _rename_cells(P: Presheaf, state_name, edge_name) -> Presheaf:
    from .presheaf import make_presheaf

    return make_presheaf(
        P.labels,
        tuple(state_name[x] for x in P.states),
        {a: tuple(edge_name[a][e] for e in P.edges[a]) for a in P.labels},
        {a: {edge_name[a][e]: state_name[P.src[a][e]] for e in P.edges[a]} for a in P.labels},
        {a: {edge_name[a][e]: state_name[P.tgt[a][e]] for e in P.edges[a]} for a in P.labels},
    )


def verify_certificate(cert: CellCertificate) -> bool:
    """Replay and compare, cell names included."""
    try:
        final, composite = replay_certificate(cert)
    except ReplayMismatch:
        return False
    return final == cert.claimed_composite.cod and composite == cert.claimed_composite


def lift_against(
    cert: CellCertificate,
    f: PresheafMorphism,
    top: PresheafMorphism,
    bottom: PresheafMorphism,
) -> PresheafMorphism:
    """Lift the certified map against a functional bisimulation, cell by cell.

    Solves one elementary source-lifting problem per attachment, always
    taking the least admissible edge, and verifies both triangle equations
    before returning.
    """
    if not is_functional_bisimulation(f):
        raise NotAFunctionalBisim("right leg fails the lifting property")
    gamma = cert.claimed_composite
    if top.dom != gamma.dom or bottom.dom != gamma.cod:
        raise NonCommutingSquare("square boundaries do not line up")
    if compose(f, top) != compose(bottom, gamma):
        raise NonCommutingSquare("outer square does not commute")
    X = f.dom
    k_state = {c: top.state_map[c] for c in gamma.dom.states}
    k_edges: dict[str, dict[str, str]] = {a: {} for a in X.labels}
    for step in cert.steps:
        x = k_state[step.at]
        ey = bottom.edge_maps[step.label][step.edge]
        picks = sorted(
            ex
            for ex in X.edges[step.label]
            if X.src[step.label][ex] == x and f.edge_maps[step.label][ex] == ey
        )
        if not picks:
            raise NotAFunctionalBisim(
                f"no edge over {ey!r} starts at {x!r} (label {step.label!r})"
            )
        ex = picks[0]
        k_edges[step.label][step.edge] = ex
        k_state[step.tgt] = X.tgt[step.label][ex]
    k = morphism(bottom.dom, X, k_state, k_edges)
    if compose(k, gamma) != top or compose(f, k) != bottom:
        raise NonCommutingSquare("constructed lifting fails a triangle equation")
    return k


def preserve_bisim_lift(
    spec,
    f: PresheafMorphism,
    M: Term,
    R: Proof,
    d: Optional[int] = None,
) -> Proof:
    """Preimage of a transition along a functional bisimulation.

    Given M over the domain and R over the codomain with source T(f)(M),
    factor both generically, certify the source arity morphism of R's
    shape, lift it against f, and recompose.  The result R0 satisfies
    T(f)(R0) = R and src(R0) = M, both checked exactly.
    """
    X, Y = f.dom, f.cod
    fM = map_leaves(M, lambda x: f.state_map[x], lambda e, a: f.edge_maps[a][e])
    if proof_source(Y, R) != fM:
        raise NonCommutingSquare("source of the transition is not the image of the term")
    dec_m = decompose(X, M)
    dec_r = decompose(Y, R)
    if strip(M).value != _src_over_one(dec_r.shape.value):
        raise NonCommutingSquare("shapes disagree after stripping")
    cert = cell_certificate(X.labels, dec_r.shape)
    k = lift_against(cert, f, dec_m.filler, dec_r.filler)
    r0 = recompose(Decomposition(dec_r.shape, k), X)
    fr0 = map_leaves(r0, lambda x: f.state_map[x], lambda e, a: f.edge_maps[a][e])
    if fr0 != R or proof_source(X, r0) != M:
        raise NonCommutingSquare("recomposed preimage fails a postcondition")
    if d is not None and proof_label(r0) != proof_label(R):  # pragma: no cover
        raise NonCommutingSquare("label mismatch")
    return r0


# ---------------------------------------------------------------------------
# Cartesianness of the monad structure.


def check_mu_cartesian(spec, X: Presheaf, d: int) -> dict:
    """Is the flattening naturality square over 1 a pointwise pullback?

    Both two-layer corners are truncated by flattened depth <= d, the
    one-layer corners by depth <= d; the square is well-posed because
    flattening preserves the bound and the unique two-layer witness of a
    compatible pair lives inside the same window.
    """
    one = terminal(X.labels)
    TT_X, ttx_terms, ttx_proofs = truncated_free_squared(spec, X, d)
    T_X, tx_terms, tx_proofs = truncated_free(spec, X, d)
    TT_1, tt1_terms, tt1_proofs = truncated_free_squared(spec, one, d)
    T_1, t1_terms, t1_proofs = truncated_free(spec, one, d)

    def mu_map(TT, terms, proofs, ambient, T_target):
        sm = {k: render(mu(spec, ambient, t)) for k, t in terms.items()}
        em = {a: {} for a in TT.labels}
        for a in TT.labels:
            for k in TT.edges[a]:
                em[a][k] = render(mu(spec, ambient, proofs[k]))
        return morphism(TT, T_target, sm, em)

    mu_X = mu_map(TT_X, ttx_terms, ttx_proofs, X, T_X)
    mu_1 = mu_map(TT_1, tt1_terms, tt1_proofs, one, T_1)

    strip_state = lambda p: render(to_terminal(parse_term(spec, X, p)))
    strip_edge = lambda p, a: render(to_terminal(parse_proof(spec, X, p)))
    t2_bang = morphism(
        TT_X,
        TT_1,
        {k: render(map_leaves(t, strip_state, strip_edge)) for k, t in ttx_terms.items()},
        {
            a: {
                k: render(map_leaves(ttx_proofs[k], strip_state, strip_edge))
                for k in TT_X.edges[a]
            }
            for a in TT_X.labels
        },
    )
    t_bang = morphism(
        T_X,
        T_1,
        {k: render(to_terminal(t)) for k, t in tx_terms.items()},
        {a: {k: render(to_terminal(tx_proofs[k])) for k in T_X.edges[a]} for a in T_X.labels},
    )
    square = LiftingSquare(left=mu_X, top=t2_bang, right=mu_1, bottom=t_bang)
    per_object = pullback_report(square)
    return {
        "transformation": "mu",
        "depth": d,
        "sizes": {
            "two_layer": TT_X.size(),
            "one_layer": T_X.size(),
            "two_layer_over_1": TT_1.size(),
            "one_layer_over_1": T_1.size(),
        },
        "pullback": per_object,
        "ok": all(per_object.values()),
    }


def check_eta_cartesian(spec, X: Presheaf, d: int) -> dict:
    """Is the unit naturality square over 1 a pointwise pullback?"""
    from .terms import eta

    one = terminal(X.labels)
    T_X = truncated_free(spec, X, d)[0]
    T_1 = truncated_free(spec, one, d)[0]
    eta_X = eta(spec, X, d, T=T_X)
    eta_1 = eta(spec, one, d, T=T_1)
    t_bang = morphism(
        T_X,
        T_1,
        {k: render(to_terminal(parse_term(spec, X, k))) for k in T_X.states},
        {
            a: {k: render(to_terminal(parse_proof(spec, X, k))) for k in T_X.edges[a]}
            for a in T_X.labels
        },
    )
    square = LiftingSquare(left=eta_X, top=bang(X), right=eta_1, bottom=t_bang)
    per_object = pullback_report(square)
    return {
        "transformation": "eta",
        "depth": d,
        "sizes": {"system": X.size(), "free": T_X.size()},
        "pullback": per_object,
        "ok": all(per_object.values()),
    }


# ---------------------------------------------------------------------------
# The unique two-layer witness of a compatible pair.


def unique_R0(spec, X: Presheaf, RR: Proof, R: Proof) -> Proof:
    """The unique two-layer proof over X flattening to R and stripping to RR.

    RR is a two-layer proof over 1 (leaf payloads name elements over 1), R a
    one-layer proof over X with R stripped equal to RR flattened.  Built by
    pairing leaves in the base case and recursing argumentwise, with the
    premise-less arguments handled through the term version.
    """
    one = terminal(X.labels)
    if to_terminal(R) != mu(spec, one, RR):
        raise IncompatiblePair("strip of the proof is not the flattening of the pair")
    return _pair_proof(spec, one, X, RR, R)


def _pair_proof(spec, one: Presheaf, X: Presheaf, RR: Proof, R: Proof) -> Proof:
    if isinstance(RR, Axiom):
        inner = parse_proof(spec, one, RR.edge)
        if to_terminal(R) != inner:
            raise IncompatiblePair("axiom pairing mismatch")
        return Axiom(render(R), proof_label(R))
    if not isinstance(R, Node) or R.rule != RR.rule:
        raise IncompatiblePair("rule mismatch while pairing")
    args: list = []
    for arg_rr, arg_r in zip(RR.args, R.args):
        if isinstance(arg_rr, tuple):
            if not isinstance(arg_r, tuple) or len(arg_r) != len(arg_rr):
                raise IncompatiblePair("premise group mismatch while pairing")
            args.append(
                tuple(_pair_proof(spec, one, X, rr, r) for rr, r in zip(arg_rr, arg_r))
            )
        else:
            if isinstance(arg_r, tuple):
                raise IncompatiblePair("argument kind mismatch while pairing")
            args.append(unique_M0(spec, X, arg_rr, arg_r))
    return Node(R.rule, tuple(args))


def unique_M0(spec, X: Presheaf, MM: Term, M: Term) -> Term:
    """Term analogue of :func:`unique_R0` (the star-object square)."""
    one = terminal(X.labels)
    if isinstance(MM, Var):
        inner = parse_term(spec, one, MM.name)
        if to_terminal(M) != inner:
            raise IncompatiblePair("variable pairing mismatch")
        return Var(render(M))
    if not isinstance(M, App) or M.op != MM.op:
        raise IncompatiblePair("operation mismatch while pairing")
    return App(
        M.op,
        tuple(unique_M0(spec, X, mm, m) for mm, m in zip(MM.args, M.args)),
    )


# ---------------------------------------------------------------------------
# Seeded generation of functional bisimulations (coverings of a random base).


def random_functional_bisim(
    rng, labels: LabelSet, max_base_states: int = 3, max_copies: int = 2
) -> PresheafMorphism:
    """A random covering projection, a functional bisimulation by construction.

    Each base state gets one or more copies; every base edge out of a state
    acquires at least one preimage from each copy of its source.
    """
    from .terms import random_presheaf

    Y = random_presheaf(rng, labels, max_states=max_base_states, max_edges=4)
    copies = {y: rng.randint(1, max_copies) for y in Y.states}
    states = tuple(f"{y}.{i}" for y in Y.states for i in range(copies[y]))
    state_map = {f"{y}.{i}": y for y in Y.states for i in range(copies[y])}
    edges: dict[str, list[str]] = {a: [] for a in labels}
    src: dict[str, dict[str, str]] = {a: {} for a in labels}
    tgt: dict[str, dict[str, str]] = {a: {} for a in labels}
    edge_map: dict[str, dict[str, str]] = {a: {} for a in labels}
    for a in labels:
        for e in Y.edges[a]:
            ys, yt = Y.src[a][e], Y.tgt[a][e]
            for i in range(copies[ys]):
                for lift_idx in range(rng.randint(1, 2)):
                    j = rng.randrange(copies[yt])
                    name = f"{e}.{i}.{lift_idx}"
                    edges[a].append(name)
                    src[a][name] = f"{ys}.{i}"
                    tgt[a][name] = f"{yt}.{j}"
                    edge_map[a][name] = e
    X = make_presheaf(labels, states, {a: tuple(v) for a, v in edges.items()}, src, tgt)
    f = morphism(X, Y, state_map, edge_map)
    assert is_functional_bisimulation(f)
    return f
