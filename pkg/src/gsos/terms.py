"""The free construction on a rule specification: terms and transition proofs.

States of the free system over an ambient system X are terms over X's
states; edges are proofs built from the rules, with axioms drawn from X's
edges.  The whole free system is infinite, so every materialisation here is
truncated by an explicit depth bound: term height counts constructor
nesting (variables are 0, a 0-ary operation is 1), proof depth likewise
(axioms are 0, a rule node is one more than the deepest argument).

Elements of iterated layers (terms over terms, proofs over proofs) carry
the canonical rendering of the inner element as their leaf payload, so a
layer is flattened by parsing its leaves back into elements one layer down.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import TYPE_CHECKING, Callable, Optional, Sequence, Union

from .errors import (
    GsosError,
    MalformedProof,
    UnknownOperation,
    UnknownState,
)
from .presheaf import (
    STAR,
    LabelSet,
    Presheaf,
    PresheafMorphism,
    make_presheaf,
    morphism,
    terminal,
)

if TYPE_CHECKING:  # pragma: no cover
    from .specdsl import GsosSpec, Rule

HOLE = "__hole__"

ProofDepth = int


@dataclass(frozen=True)
class Var:
    """A wrapped ambient state, written var(x)."""

    name: str


@dataclass(frozen=True)
class App:
    op: str
    args: tuple["Term", ...]


Term = Union[Var, App]


@dataclass(frozen=True)
class Axiom:
    """A wrapped ambient edge, written ax(e); the label is carried along."""

    edge: str
    label: str


@dataclass(frozen=True)
class Node:
    """A rule application.

    ``args`` has one entry per operation argument: the plain source term for
    premise-less arguments, or the tuple of premise proofs (in premise
    order) otherwise.
    """

    rule: "Rule"
    args: tuple[Union[Term, tuple["Proof", ...]], ...]


Proof = Union[Axiom, Node]
Element = Union[Term, Proof]


# ---------------------------------------------------------------------------
# Rendering and measures.


def render(elem: Element) -> str:
    if isinstance(elem, Var):
        return f"var({elem.name})"
    if isinstance(elem, App):
        if not elem.args:
            return elem.op
        return f"{elem.op}({','.join(render(t) for t in elem.args)})"
    if isinstance(elem, Axiom):
        return f"ax({elem.edge})"
    parts: list[str] = []
    for arg in elem.args:
        if isinstance(arg, tuple):
            parts.extend(render(r) for r in arg)
        else:
            parts.append(f"term({render(arg)})")
    if not parts:
        return elem.rule.name
    return f"{elem.rule.name}({','.join(parts)})"


def term_height(t: Term) -> int:
    if isinstance(t, Var):
        return 0
    return 1 + max((term_height(a) for a in t.args), default=0)


def proof_depth(p: Proof) -> int:
    if isinstance(p, Axiom):
        return 0
    best = 0
    for arg in p.args:
        if isinstance(arg, tuple):
            best = max(best, max(proof_depth(r) for r in arg))
        else:
            best = max(best, term_height(arg))
    return 1 + best


def element_depth(elem: Element) -> int:
    return term_height(elem) if isinstance(elem, (Var, App)) else proof_depth(elem)


def proof_label(p: Proof) -> str:
    return p.label if isinstance(p, Axiom) else p.rule.label


def occurrences(t: Term) -> tuple[int, tuple[tuple[int, ...], ...]]:
    """Count of variable leaves and their left-to-right paths."""
    paths: list[tuple[int, ...]] = []

    def walk(u: Term, path: tuple[int, ...]):
        if isinstance(u, Var):
            paths.append(path)
        else:
            for i, child in enumerate(u.args):
                walk(child, path + (i,))

    walk(t, ())
    return len(paths), tuple(paths)


def term_vars(t: Term) -> tuple[str, ...]:
    """Variable names in leaf order, with repeats."""
    if isinstance(t, Var):
        return (t.name,)
    out: tuple[str, ...] = ()
    for a in t.args:
        out += term_vars(a)
    return out


def substitute(t: Term, mapping: dict[str, Term]) -> Term:
    if isinstance(t, Var):
        if t.name not in mapping:
            raise MalformedProof(f"unbound variable {t.name!r} in substitution")
        return mapping[t.name]
    return App(t.op, tuple(substitute(a, mapping) for a in t.args))


def map_leaves(
    elem: Element,
    on_state: Callable[[str], str],
    on_edge: Callable[[str, str], str],
) -> Element:
    """Relabel Var and Axiom leaves; the structure is untouched."""
    if isinstance(elem, Var):
        return Var(on_state(elem.name))
    if isinstance(elem, App):
        return App(elem.op, tuple(map_leaves(a, on_state, on_edge) for a in elem.args))
    if isinstance(elem, Axiom):
        return Axiom(on_edge(elem.edge, elem.label), elem.label)
    return Node(
        elem.rule,
        tuple(
            tuple(map_leaves(r, on_state, on_edge) for r in arg)
            if isinstance(arg, tuple)
            else map_leaves(arg, on_state, on_edge)
            for arg in elem.args
        ),
    )


def to_terminal(elem: Element) -> Element:
    """Apply the unique map to the one-state system: x |-> *, e |-> its label."""
    return map_leaves(elem, lambda _x: STAR, lambda _e, a: a)


# ---------------------------------------------------------------------------
# Sources and targets of proofs.


def proof_source(X: Presheaf, p: Proof) -> Term:
    return _source(p, lambda e, a: X.src[a][e])


def proof_target(X: Presheaf, p: Proof) -> Term:
    return _target(p, lambda e, a: X.src[a][e], lambda e, a: X.tgt[a][e])


def _source(p: Proof, ax_src: Callable[[str, str], str]) -> Term:
    if isinstance(p, Axiom):
        return Var(ax_src(p.edge, p.label))
    parts = []
    for arg in p.args:
        if isinstance(arg, tuple):
            parts.append(_source(arg[0], ax_src))
        else:
            parts.append(arg)
    return App(p.rule.op, tuple(parts))


def _target(
    p: Proof,
    ax_src: Callable[[str, str], str],
    ax_tgt: Callable[[str, str], str],
) -> Term:
    if isinstance(p, Axiom):
        return Var(ax_tgt(p.edge, p.label))
    mapping: dict[str, Term] = {}
    for i, arg in enumerate(p.args):
        if isinstance(arg, tuple):
            mapping[f"x{i + 1}"] = _source(arg[0], ax_src)
            for j, r in enumerate(arg):
                mapping[f"y{i + 1}_{j + 1}"] = _target(r, ax_src, ax_tgt)
        else:
            mapping[f"x{i + 1}"] = arg
    return substitute(p.rule.target, mapping)


def check_proof(spec: "GsosSpec", X: Presheaf, p: Proof) -> None:
    """Validate well-formedness over X; raises MalformedProof."""
    if isinstance(p, Axiom):
        if p.label not in X.labels:
            raise MalformedProof(f"axiom label {p.label!r} undeclared")
        if p.edge not in X.edge_set(p.label):
            raise MalformedProof(f"axiom edge {p.edge!r} not in ambient system")
        return
    rule = spec.rule_named(p.rule.name)
    if rule != p.rule:
        raise MalformedProof(f"rule {p.rule.name!r} is not part of the specification")
    if len(p.args) != len(rule.premise_labels):
        raise MalformedProof(f"rule {rule.name!r}: wrong argument count")
    for i, (arg, labels_i) in enumerate(zip(p.args, rule.premise_labels)):
        if not labels_i:
            if isinstance(arg, tuple):
                raise MalformedProof(f"rule {rule.name!r}: argument {i + 1} must be a term")
            _check_term(spec, X, arg)
            continue
        if not isinstance(arg, tuple) or len(arg) != len(labels_i):
            raise MalformedProof(f"rule {rule.name!r}: argument {i + 1} premise count mismatch")
        for j, (r, want) in enumerate(zip(arg, labels_i)):
            if proof_label(r) != want:
                raise MalformedProof(
                    f"rule {rule.name!r}: premise ({i + 1},{j + 1}) has label "
                    f"{proof_label(r)!r}, expected {want!r}"
                )
            check_proof(spec, X, r)
        first = proof_source(X, arg[0])
        for r in arg[1:]:
            if proof_source(X, r) != first:
                raise MalformedProof(f"rule {rule.name!r}: premises of argument {i + 1} disagree on source")


def _check_term(spec: "GsosSpec", X: Presheaf, t: Term) -> None:
    if isinstance(t, Var):
        if t.name not in X.state_set():
            raise UnknownState(f"variable {t.name!r} not a state of the ambient system")
        return
    arity = spec.signature.arity(t.op)
    if arity != len(t.args):
        raise UnknownOperation(f"operation {t.op!r} applied to {len(t.args)} arguments")
    for a in t.args:
        _check_term(spec, X, a)


# ---------------------------------------------------------------------------
# Concrete syntax.


def _scan_ident(text: str, i: int) -> tuple[str, int]:
    j = i
    while j < len(text) and (text[j].isalnum() or text[j] == "_"):
        j += 1
    if j < len(text) and text[j] == "[":
        depth = 0
        while j < len(text):
            if text[j] == "[":
                depth += 1
            elif text[j] == "]":
                depth -= 1
                if depth == 0:
                    j += 1
                    break
            j += 1
    return text[i:j], j


def _scan_balanced(text: str, i: int) -> tuple[str, int]:
    """Scan a raw payload up to the matching close paren; i is just after '('."""
    depth, j = 1, i
    while j < len(text):
        if text[j] == "(":
            depth += 1
        elif text[j] == ")":
            depth -= 1
            if depth == 0:
                return text[i:j].strip(), j
        j += 1
    raise MalformedProof(f"unbalanced parentheses in {text!r}")


def _split_args(body: str) -> list[str]:
    args, depth, start = [], 0, 0
    for i, ch in enumerate(body):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            args.append(body[start:i].strip())
            start = i + 1
    if body.strip():
        args.append(body[start:].strip())
    return args


class _PresheafAmbient:
    def __init__(self, X: Presheaf):
        self.X = X

    def has_state(self, x: str) -> bool:
        return x in self.X.state_set()

    def label_of(self, e: str) -> str:
        return self.X.label_of(e)


class _FreeAmbient:
    """Ambient view of a free layer: leaf payloads are canonical renderings."""

    def __init__(self, spec: "GsosSpec", X: Presheaf, level: int):
        self.spec, self.X, self.level = spec, X, level

    def has_state(self, x: str) -> bool:
        try:
            parse_term_layer(self.spec, self.X, self.level, x)
            return True
        except GsosError:
            return False

    def label_of(self, e: str) -> str:
        return proof_label(parse_proof_layer(self.spec, self.X, self.level, e))


def parse_term(spec: "GsosSpec", X: Optional[Presheaf], text: str, allow_hole: bool = False) -> Term:
    ambient = _PresheafAmbient(X) if X is not None else None
    return _parse_term(spec, ambient, text, allow_hole)


def _parse_term(spec, ambient, text: str, allow_hole: bool = False) -> Term:
    text = text.strip()
    head, i = _scan_ident(text, 0)
    if not head:
        raise MalformedProof(f"cannot parse term {text!r}")
    if head == "hole":
        if i != len(text) or not allow_hole:
            raise MalformedProof(f"unexpected hole in {text!r}")
        return Var(HOLE)
    if head == "var":
        if i >= len(text) or text[i] != "(":
            raise MalformedProof(f"var needs a payload in {text!r}")
        payload, j = _scan_balanced(text, i + 1)
        if j + 1 != len(text):
            raise MalformedProof(f"trailing input after {text!r}")
        if ambient is None:
            raise UnknownState(f"variable {payload!r} in a closed-term position")
        if not ambient.has_state(payload):
            raise UnknownState(f"{payload!r} is not an ambient state")
        return Var(payload)
    if spec.signature.has(head):
        arity = spec.signature.arity(head)
        if i == len(text):
            args_text: list[str] = []
        elif text[i] == "(":
            body, j = _scan_balanced(text, i + 1)
            if j + 1 != len(text):
                raise MalformedProof(f"trailing input after {text!r}")
            args_text = _split_args(body)
        else:
            raise MalformedProof(f"cannot parse term {text!r}")
        if len(args_text) != arity:
            raise UnknownOperation(f"{head!r} expects {arity} arguments, got {len(args_text)}")
        return App(head, tuple(_parse_term(spec, ambient, a, allow_hole) for a in args_text))
    raise UnknownOperation(f"unknown operation {head!r} in {text!r}")


def parse_proof(spec: "GsosSpec", X: Presheaf, text: str) -> Proof:
    p = _parse_proof(spec, _PresheafAmbient(X), text)
    check_proof(spec, X, p)
    return p


def _parse_proof(spec, ambient, text: str) -> Proof:
    text = text.strip()
    head, i = _scan_ident(text, 0)
    if not head:
        raise MalformedProof(f"cannot parse proof {text!r}")
    if head == "ax":
        if i >= len(text) or text[i] != "(":
            raise MalformedProof(f"ax needs a payload in {text!r}")
        payload, j = _scan_balanced(text, i + 1)
        if j + 1 != len(text):
            raise MalformedProof(f"trailing input after {text!r}")
        return Axiom(payload, ambient.label_of(payload))
    if i == len(text):
        args_text: list[str] = []
    elif text[i] == "(":
        body, j = _scan_balanced(text, i + 1)
        if j + 1 != len(text):
            raise MalformedProof(f"trailing input after {text!r}")
        args_text = _split_args(body)
    else:
        raise MalformedProof(f"cannot parse proof {text!r}")

    parsed: list[tuple[str, object]] = []
    for a in args_text:
        if a.startswith("term(") or a.startswith("term ("):
            inner, j = _scan_balanced(a, a.index("(") + 1)
            if j + 1 != len(a):
                raise MalformedProof(f"trailing input after {a!r}")
            parsed.append(("term", _parse_term(spec, ambient, inner)))
        else:
            parsed.append(("proof", _parse_proof(spec, ambient, a)))

    candidates = [r for r in spec.rules if r.name == head]
    if not candidates:
        candidates = [r for r in spec.rules if r.base_name == head]
    if not candidates:
        raise MalformedProof(f"unknown rule {head!r}")
    matches = []
    for rule in candidates:
        grouped = _group_args(rule, parsed)
        if grouped is not None:
            matches.append(Node(rule, grouped))
    if not matches:
        raise MalformedProof(f"no expansion of rule {head!r} matches {text!r}")
    if len(matches) > 1:
        raise MalformedProof(f"rule name {head!r} is ambiguous for {text!r}")
    return matches[0]


def _group_args(rule, parsed):
    groups = []
    k = 0
    for labels_i in rule.premise_labels:
        if not labels_i:
            if k >= len(parsed) or parsed[k][0] != "term":
                return None
            groups.append(parsed[k][1])
            k += 1
            continue
        chunk = []
        for want in labels_i:
            if k >= len(parsed) or parsed[k][0] != "proof":
                return None
            r = parsed[k][1]
            if proof_label(r) != want:
                return None
            chunk.append(r)
            k += 1
        groups.append(tuple(chunk))
    if k != len(parsed):
        return None
    return tuple(groups)


def parse_term_layer(spec: "GsosSpec", X: Presheaf, level: int, text: str) -> Term:
    """Parse a term of the level-th free layer over X (level 1 = over X itself)."""
    if level == 1:
        return parse_term(spec, X, text)
    return _parse_term(spec, _FreeAmbient(spec, X, level - 1), text)


def parse_proof_layer(spec: "GsosSpec", X: Presheaf, level: int, text: str) -> Proof:
    if level == 1:
        return parse_proof(spec, X, text)
    return _parse_proof(spec, _FreeAmbient(spec, X, level - 1), text)


# ---------------------------------------------------------------------------
# Derivation: all proofs with a given conclusion source.


def derive(
    spec: "GsosSpec",
    term: Term,
    axioms_of: Optional[Callable[[str, str], Sequence[str]]] = None,
    drop_last_premise: bool = False,
    _memo: Optional[dict] = None,
) -> tuple[Proof, ...]:
    """All proofs whose conclusion source is exactly ``term``.

    ``axioms_of(state, label)`` lists the ambient edge ids out of a state;
    None means a closed derivation (no axioms).  Premises of a rule argument
    are derived from that argument's subterm, so all premises of one group
    share their source by construction.  Rules are tried in declaration
    order and premise choices are combined left-to-right, which fixes the
    output order.

    ``drop_last_premise`` enables the deliberately broken engine used as a
    negative control: for rules with at least two premises, the last premise
    is not derived recursively but pattern-matched one level deep against
    axiom-shaped unary rules.
    """
    memo = _memo if _memo is not None else {}

    def go(t: Term) -> tuple[Proof, ...]:
        if t in memo:
            return memo[t]
        out: list[Proof] = []
        if isinstance(t, Var):
            if axioms_of is not None:
                for a in spec.labels:
                    for e in axioms_of(t.name, a):
                        out.append(Axiom(e, a))
            memo[t] = tuple(out)
            return memo[t]
        if not spec.signature.has(t.op):
            raise UnknownOperation(f"unknown operation {t.op!r}")
        for rule in spec.rules:
            if rule.op != t.op:
                continue
            total = sum(len(g) for g in rule.premise_labels)
            cut = _last_premise_index(rule) if drop_last_premise and total >= 2 else None
            group_choices: list[list] = []
            feasible = True
            for i, labels_i in enumerate(rule.premise_labels):
                if not labels_i:
                    group_choices.append([t.args[i]])
                    continue
                per_j: list[list[Proof]] = []
                for j, want in enumerate(labels_i):
                    if cut == (i, j):
                        per_j.append(_shortcut_premise(spec, t.args[i], want))
                    else:
                        per_j.append([r for r in go(t.args[i]) if proof_label(r) == want])
                    if not per_j[-1]:
                        feasible = False
                        break
                if not feasible:
                    break
                group_choices.append([tuple(c) for c in product(*per_j)])
            if not feasible:
                continue
            for combo in product(*group_choices):
                out.append(Node(rule, tuple(combo)))
        memo[t] = tuple(out)
        return memo[t]

    return go(term)


def _last_premise_index(rule) -> tuple[int, int]:
    for i in range(len(rule.premise_labels) - 1, -1, -1):
        if rule.premise_labels[i]:
            return i, len(rule.premise_labels[i]) - 1
    raise AssertionError("rule has no premises")


def _shortcut_premise(spec, arg: Term, want_label: str) -> list[Proof]:
    """Buggy premise handling: match one syntactic level instead of deriving."""
    if not isinstance(arg, App) or len(arg.args) != 1:
        return []
    out = []
    for rule in spec.rules:
        if (
            rule.op == arg.op
            and rule.label == want_label
            and all(not g for g in rule.premise_labels)
            and rule.target == Var("x1")
        ):
            out.append(Node(rule, (arg.args[0],)))
    return out


def one_step(spec: "GsosSpec", term: Term, drop_last_premise: bool = False) -> tuple[Proof, ...]:
    """All proofs with conclusion source the given closed term."""
    if term_vars(term):
        raise UnknownState("one_step needs a closed term")
    return derive(spec, term, None, drop_last_premise=drop_last_premise)


def presheaf_axioms(X: Presheaf) -> Callable[[str, str], Sequence[str]]:
    return lambda x, a: [e for e in X.edges[a] if X.src[a][e] == x]


# ---------------------------------------------------------------------------
# Truncated materialisations of the free layers.


def terms_upto(spec: "GsosSpec", variables: Sequence[str], height: int) -> list[Term]:
    """All terms of height <= height over the given variables, stratified."""
    levels: list[list[Term]] = [[Var(v) for v in variables]]
    for k in range(1, height + 1):
        below = [t for lvl in levels for t in lvl]
        exact: list[Term] = []
        for op, arity in spec.signature.operations:
            if arity == 0:
                if k == 1:
                    exact.append(App(op, ()))
                continue
            for combo in product(below, repeat=arity):
                if 1 + max(term_height(t) for t in combo) == k:
                    exact.append(App(op, combo))
        levels.append(exact)
    return [t for lvl in levels for t in lvl]


def truncated_free(spec: "GsosSpec", X: Presheaf, d: int):
    """The depth-d window of the free system over X.

    Returns (presheaf, term decode, proof decode); states are canonical term
    renderings, edges canonical proof renderings.  An edge is kept only when
    its proof has depth <= d and both endpoints have height <= d.
    """
    state_terms = terms_upto(spec, X.states, d)
    states = tuple(render(t) for t in state_terms)
    term_decode = dict(zip(states, state_terms))
    edges: dict[str, list[str]] = {a: [] for a in spec.labels}
    src: dict[str, dict[str, str]] = {a: {} for a in spec.labels}
    tgt: dict[str, dict[str, str]] = {a: {} for a in spec.labels}
    proof_decode: dict[str, Proof] = {}
    ax = presheaf_axioms(X)
    memo: dict = {}
    for m in state_terms:
        for p in derive(spec, m, ax, _memo=memo):
            if proof_depth(p) > d:
                continue
            n = proof_target(X, p)
            if term_height(n) > d:
                continue
            a = proof_label(p)
            key = render(p)
            edges[a].append(key)
            src[a][key] = render(m)
            tgt[a][key] = render(n)
            proof_decode[key] = p
    P = make_presheaf(
        X.labels,
        states,
        {a: tuple(es) for a, es in edges.items()},
        src,
        tgt,
    )
    return P, term_decode, proof_decode


def T_of(spec: "GsosSpec", X: Presheaf, d: int) -> Presheaf:
    return truncated_free(spec, X, d)[0]


def T_on_morphism(
    spec: "GsosSpec",
    f: PresheafMorphism,
    d: int,
    TX: Optional[Presheaf] = None,
    TY: Optional[Presheaf] = None,
) -> PresheafMorphism:
    """Functorial action on the depth-d windows: relabel all leaves along f."""
    TX = TX if TX is not None else T_of(spec, f.dom, d)
    TY = TY if TY is not None else T_of(spec, f.cod, d)
    on_state = lambda x: f.state_map[x]
    on_edge = lambda e, a: f.edge_maps[a][e]
    state_map = {}
    for key in TX.states:
        t = parse_term(spec, f.dom, key)
        state_map[key] = render(map_leaves(t, on_state, on_edge))
    edge_maps: dict[str, dict[str, str]] = {a: {} for a in TX.labels}
    for a in TX.labels:
        for key in TX.edges[a]:
            p = parse_proof(spec, f.dom, key)
            edge_maps[a][key] = render(map_leaves(p, on_state, on_edge))
    return morphism(TX, TY, state_map, edge_maps)


def eta(spec: "GsosSpec", X: Presheaf, d: int, T: Optional[Presheaf] = None) -> PresheafMorphism:
    """The unit X -> T(X): wrap states and edges."""
    T = T if T is not None else T_of(spec, X, d)
    return morphism(
        X,
        T,
        {x: render(Var(x)) for x in X.states},
        {a: {e: render(Axiom(e, a)) for e in X.edges[a]} for a in X.labels},
    )


# ---------------------------------------------------------------------------
# Multiplication: strip one layer of wrapping.


def mu(spec: "GsosSpec", X: Presheaf, elem: Element) -> Element:
    """Flatten a two-layer element over X into a one-layer element.

    Leaf payloads are canonical renderings of their inner elements; wrapped
    leaves are replaced by the elements they name, rule nodes and operation
    applications are flattened recursively.
    """
    return mu_layer(spec, X, elem, 2)


def mu_layer(spec: "GsosSpec", X: Presheaf, elem: Element, level: int) -> Element:
    """Flatten the outer two of ``level`` layers (level >= 2)."""
    if level < 2:
        raise MalformedProof("mu needs at least two layers")
    if isinstance(elem, Var):
        return parse_term_layer(spec, X, level - 1, elem.name)
    if isinstance(elem, App):
        return App(elem.op, tuple(mu_layer(spec, X, a, level) for a in elem.args))
    if isinstance(elem, Axiom):
        inner = parse_proof_layer(spec, X, level - 1, elem.edge)
        if proof_label(inner) != elem.label:
            raise MalformedProof(f"axiom label mismatch flattening {render(elem)!r}")
        return inner
    return Node(
        elem.rule,
        tuple(
            tuple(mu_layer(spec, X, r, level) for r in arg)
            if isinstance(arg, tuple)
            else mu_layer(spec, X, arg, level)
            for arg in elem.args
        ),
    )


def lift_mu(spec: "GsosSpec", X: Presheaf, MM: Term, R: Proof) -> Proof:
    """Lift a transition of a flattened term through the flattening.

    Given a two-layer term MM over X and a proof R with source mu(MM),
    produce a two-layer proof RR with source MM and mu(RR) = R, by
    structural induction on MM: a wrapped term lifts R by wrapping it, an
    operation node must be matched by a rule node and the premises lift
    argumentwise.
    """
    if isinstance(MM, Var):
        return Axiom(render(R), proof_label(R))
    if not isinstance(R, Node) or R.rule.op != MM.op:
        raise MalformedProof("transition does not match the term structure")
    args: list = []
    for i, arg in enumerate(R.args):
        if isinstance(arg, tuple):
            args.append(tuple(lift_mu(spec, X, MM.args[i], r) for r in arg))
        else:
            if mu(spec, X, MM.args[i]) != arg:
                raise MalformedProof("premise-less argument does not flatten correctly")
            args.append(MM.args[i])
    return Node(R.rule, tuple(args))


# ---------------------------------------------------------------------------
# Two-layer enumeration, truncated by flattened depth.


def two_layer_terms(spec: "GsosSpec", X: Presheaf, d: int) -> list[Term]:
    """All two-layer terms over X whose flattening has height <= d."""

    def level(budget: int) -> list[Term]:
        out: list[Term] = [Var(render(m)) for m in terms_upto(spec, X.states, budget)]
        if budget >= 1:
            below = level(budget - 1)
            for op, arity in spec.signature.operations:
                if arity == 0:
                    out.append(App(op, ()))
                    continue
                for combo in product(below, repeat=arity):
                    out.append(App(op, combo))
        seen, uniq = set(), []
        for t in out:
            k = render(t)
            if k not in seen:
                seen.add(k)
                uniq.append(t)
        return uniq

    return level(d)


def two_layer_axioms(spec: "GsosSpec", X: Presheaf) -> Callable[[str, str], Sequence[str]]:
    """Axiom resolver for the second layer: wrapped one-layer proofs."""
    memo: dict = {}
    ax1 = presheaf_axioms(X)

    def ax(state_key: str, label: str) -> Sequence[str]:
        m = parse_term(spec, X, state_key)
        return [
            render(p) for p in derive(spec, m, ax1, _memo=memo) if proof_label(p) == label
        ]

    return ax


def truncated_free_squared(spec: "GsosSpec", X: Presheaf, d: int):
    """The two-layer window over X, truncated by flattened depth <= d.

    Returns (presheaf, term decode, proof decode) exactly like
    :func:`truncated_free`, with two-layer elements behind the keys.
    """
    state_terms = two_layer_terms(spec, X, d)
    states = tuple(render(t) for t in state_terms)
    term_decode = dict(zip(states, state_terms))
    edges: dict[str, list[str]] = {a: [] for a in spec.labels}
    src: dict[str, dict[str, str]] = {a: {} for a in spec.labels}
    tgt: dict[str, dict[str, str]] = {a: {} for a in spec.labels}
    proof_decode: dict[str, Proof] = {}
    ax2 = two_layer_axioms(spec, X)
    ax2_src = lambda e, lab: render(proof_source(X, parse_proof(spec, X, e)))
    ax2_tgt = lambda e, lab: render(proof_target(X, parse_proof(spec, X, e)))
    memo: dict = {}
    for m2 in state_terms:
        for p2 in derive(spec, m2, ax2, _memo=memo):
            flat = mu(spec, X, p2)
            if proof_depth(flat) > d:
                continue
            if term_height(proof_target(X, flat)) > d:
                continue
            a = proof_label(p2)
            key = render(p2)
            n2 = _target(p2, ax2_src, ax2_tgt)
            edges[a].append(key)
            src[a][key] = render(m2)
            tgt[a][key] = render(n2)
            proof_decode[key] = p2
    P = make_presheaf(
        X.labels,
        states,
        {a: tuple(es) for a, es in edges.items()},
        src,
        tgt,
    )
    return P, term_decode, proof_decode


# ---------------------------------------------------------------------------
# Monad law checking on random elements.


@dataclass(frozen=True)
class LawReport:
    seed: int
    cases: int
    failures: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {"seed": self.seed, "cases": self.cases, "failures": list(self.failures), "ok": self.ok}


def random_presheaf(rng, labels: LabelSet, max_states: int = 5, max_edges: int = 6) -> Presheaf:
    n = rng.randint(1, max_states)
    states = tuple(f"s{i}" for i in range(n))
    m = rng.randint(1, max_edges)
    edges: dict[str, list[str]] = {a: [] for a in labels}
    src: dict[str, dict[str, str]] = {a: {} for a in labels}
    tgt: dict[str, dict[str, str]] = {a: {} for a in labels}
    for k in range(m):
        a = rng.choice(list(labels))
        e = f"e{k}"
        edges[a].append(e)
        src[a][e] = rng.choice(states)
        tgt[a][e] = rng.choice(states)
    return make_presheaf(labels, states, {a: tuple(v) for a, v in edges.items()}, src, tgt)


def random_term(spec: "GsosSpec", rng, variables: Sequence[str], budget: int) -> Term:
    ops = list(spec.signature.operations)
    if budget == 0 or (variables and rng.random() < 0.4):
        if variables:
            return Var(rng.choice(list(variables)))
    candidates = [(f, n) for f, n in ops if n == 0 or budget > 0]
    if not candidates:
        raise MalformedProof("no closed term fits in the budget")
    f, n = rng.choice(candidates)
    if n == 0:
        return App(f, ())
    return App(f, tuple(random_term(spec, rng, variables, budget - 1) for _ in range(n)))


def random_proof(spec: "GsosSpec", X: Presheaf, rng, budget: int, tries: int = 40) -> Proof:
    ax = presheaf_axioms(X)
    for _ in range(tries):
        m = random_term(spec, rng, X.states, max(budget - 1, 0))
        cands = [p for p in derive(spec, m, ax) if proof_depth(p) <= budget]
        if cands:
            return rng.choice(cands)
    pool = [(a, e) for a, e in X.all_edges()]
    if not pool:
        raise MalformedProof("ambient system has no edges to seed proofs")
    a, e = rng.choice(pool)
    return Axiom(e, a)


def random_layer_element(
    spec: "GsosSpec", X: Presheaf, rng, level: int, budget: int, kind: str
) -> Element:
    """A random element of the level-th free layer with flattened depth <= budget."""
    if level == 1:
        if kind == "term":
            return random_term(spec, rng, X.states, budget)
        return random_proof(spec, X, rng, budget)
    if kind == "term":
        if budget == 0 or rng.random() < 0.5:
            inner = random_layer_element(spec, X, rng, level - 1, budget, "term")
            return Var(render(inner))
        ops = list(spec.signature.operations)
        f, n = rng.choice(ops)
        return App(
            f,
            tuple(
                random_layer_element(spec, X, rng, level, budget - 1, "term") for _ in range(n)
            ),
        )
    ax = _layer_axioms(spec, X, level)
    for _ in range(40):
        m = random_layer_element(spec, X, rng, level, max(budget - 1, 0), "term")
        cands = [p for p in derive(spec, m, ax) if _flat_depth(spec, X, p, level) <= budget]
        if cands:
            return rng.choice(cands)
    inner = random_layer_element(spec, X, rng, level - 1, budget, "proof")
    return Axiom(render(inner), proof_label(inner))


def _layer_axioms(spec, X, level):
    if level == 1:
        return presheaf_axioms(X)
    inner_ax = _layer_axioms(spec, X, level - 1)

    def ax(state_key: str, label: str) -> list[str]:
        m = parse_term_layer(spec, X, level - 1, state_key)
        return [
            render(p) for p in derive(spec, m, inner_ax) if proof_label(p) == label
        ]

    return ax


def _flat_depth(spec, X, elem: Element, level: int) -> int:
    flat = elem
    for lv in range(level, 1, -1):
        flat = mu_layer(spec, X, flat, lv)
    return element_depth(flat)


def check_monad_laws(spec: "GsosSpec", seed: int, cases: int, d: int) -> LawReport:
    """Sample elements and check both unit laws and associativity exactly."""
    import random as _random

    failures: list[str] = []
    for case in range(cases):
        rng = _random.Random(seed + case)
        X = random_presheaf(rng, spec.labels)
        kind = rng.choice(["term", "proof"])
        try:
            z1 = random_layer_element(spec, X, rng, 1, d, kind)
        except MalformedProof:
            z1 = random_term(spec, rng, X.states, d)
            kind = "term"

        wrapped = map_leaves(
            z1, lambda x: render(Var(x)), lambda e, a: render(Axiom(e, a))
        )
        if mu(spec, X, wrapped) != z1:
            failures.append(f"case {case}: mu . T(eta) != id on {render(z1)}")
        outer: Element
        if isinstance(z1, (Var, App)):
            outer = Var(render(z1))
        else:
            outer = Axiom(render(z1), proof_label(z1))
        if mu(spec, X, outer) != z1:
            failures.append(f"case {case}: mu . eta_T != id on {render(z1)}")

        try:
            z3 = random_layer_element(spec, X, rng, 3, d, kind)
        except MalformedProof:
            continue
        t_mu = map_leaves(
            z3,
            lambda x: render(mu(spec, X, parse_term_layer(spec, X, 2, x))),
            lambda e, a: render(mu(spec, X, parse_proof_layer(spec, X, 2, e))),
        )
        lhs = mu(spec, X, t_mu)
        rhs = mu(spec, X, mu_layer(spec, X, z3, 3))
        if lhs != rhs:
            failures.append(f"case {case}: associativity fails on {render(z3)}")
    return LawReport(seed=seed, cases=cases, failures=tuple(failures))
