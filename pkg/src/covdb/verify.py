"""Mechanical bidirectionality check for SMO rule pairs.

For every SMO the two rule sets must be mutually inverse on data tables:
mapping a database state through one set and back through the other has
to reproduce it exactly.  This module checks that symbolically, without
data: the round trip is composed into one rule set over an abstract base
state (`q_D` predicates), then simplified by sound rewriting until every
data-table head is literally the identity rule `q(k, X) <- q_D(k, X)`.

Simplification relies on invariants every stored state satisfies (they
are enforced on the write path):

* keys are never NULL and are unique per relation (first column);
* no row has an entirely NULL payload;
* generated identifiers are NULL-free, injective per generator, and
  distinct across generators;
* a foreign key value is NULL or references an existing parent row.

Auxiliary relations recomputed by the round trip either simplify away
entirely or remain in their defining generator form (bodies over the
base state plus value/id assignments); anything else is a failure.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from . import catalog as cat
from . import conditions as C
from .dlog import (
    Compare,
    CondLit,
    Const,
    FnAssign,
    IdAssign,
    Literal,
    NegConj,
    RelLit,
    Rule,
    RuleSet,
    Term,
    Var,
    compare_terms,
    print_rule,
    stratify,
)
from .rulegen import SmoRules, rules_for
from .values import OMEGA, is_omega

STEP_BUDGET = 10_000

OM = Const(OMEGA)


class VerifyError(Exception):
    pass


@dataclass
class Context:
    """What is known about the base state during simplification."""

    keyed: frozenset = frozenset()  # predicates with a first-column key
    no_null_payload: frozenset = frozenset()  # predicates satisfying A2
    empties: frozenset = frozenset()  # predicates known to hold no rows/tuples
    fks: tuple = ()  # (child pred, arg position, parent pred)
    fds: tuple = ()  # (pred, determinant position, dependent positions)
    nonomega_cols: tuple = ()  # (pred, arg position) never NULL
    fresh_fns: frozenset = frozenset()  # generators whose output is never a stored key
    disjoint_keys: tuple = ()  # (pred, pred) pairs with disjoint key spaces
    steps: list = field(default_factory=list)
    budget: int = STEP_BUDGET

    def note(self, msg: str) -> None:
        if len(self.steps) < 2000:
            self.steps.append(msg)
        self.budget -= 1
        if self.budget < 0:
            raise VerifyError("step budget exhausted")


@dataclass
class Verdict:
    smo_id: str
    direction: str  # "src" | "tgt"
    identity: bool
    residual: tuple  # leftover rules (printable) when not identity
    proof: tuple  # trace lines

    def __str__(self):
        flag = "Identity" if self.identity else "NOT bidirectional"
        return f"{self.smo_id} [{self.direction}]: {flag}"


# ---------------------------------------------------------------------------
# Variable handling
# ---------------------------------------------------------------------------

_fresh_n = itertools.count(1)


def _freshen(rule: Rule) -> Rule:
    ren = {v: Var(f"{v}~{next(_fresh_n)}") for v in _rule_vars(rule)}
    return Rule(_subst_lit(rule.head, ren), tuple(_subst(l, ren) for l in rule.body))


def _rule_vars(rule: Rule):
    out = set(rule.head.vars())
    for l in rule.body:
        out |= l.vars()
    return out


def _subst_term(t: Term, s: Mapping[str, Term]) -> Term:
    if isinstance(t, Var) and t.name in s:
        return s[t.name]
    return t


def _subst_lit(lit: RelLit, s) -> RelLit:
    return RelLit(lit.pred, tuple(_subst_term(a, s) for a in lit.args), lit.neg, lit.old)


def _cond_subst(cond, s: Mapping[str, Term]):
    """Apply a term substitution inside a condition/expression tree."""
    if isinstance(cond, C.Col):
        t = s.get(cond.name)
        if t is None:
            return cond
        if isinstance(t, Var):
            return C.Col(t.name)
        return C.Lit(t.value)
    if isinstance(cond, C.Lit):
        return cond
    if isinstance(cond, C.Cmp):
        return C.Cmp(_cond_subst(cond.left, s), cond.op, _cond_subst(cond.right, s))
    if isinstance(cond, C.Not):
        return C.Not(_cond_subst(cond.item, s))
    if isinstance(cond, C.And):
        return C.And(tuple(_cond_subst(x, s) for x in cond.items))
    if isinstance(cond, C.Or):
        return C.Or(tuple(_cond_subst(x, s) for x in cond.items))
    if isinstance(cond, C.BoolConst):
        return cond
    if isinstance(cond, C.BinOp):
        return C.BinOp(_cond_subst(cond.left, s), cond.op, _cond_subst(cond.right, s))
    if isinstance(cond, C.Neg):
        return C.Neg(_cond_subst(cond.item, s))
    raise TypeError(repr(cond))


def _subst(lit: Literal, s: Mapping[str, Term]) -> Literal:
    if isinstance(lit, RelLit):
        return _subst_lit(lit, s)
    if isinstance(lit, Compare):
        return Compare(_subst_term(lit.left, s), lit.op, _subst_term(lit.right, s))
    if isinstance(lit, CondLit):
        return CondLit(_cond_subst(lit.cond, s))
    if isinstance(lit, FnAssign):
        out = _subst_term(lit.out, s)
        if not isinstance(out, Var):
            raise VerifyError(f"substitution binds assignment output {lit}")
        return FnAssign(out, _cond_subst(lit.expr, s))
    if isinstance(lit, IdAssign):
        out = _subst_term(lit.out, s)
        if not isinstance(out, Var):
            raise VerifyError(f"substitution binds assignment output {lit}")
        return IdAssign(out, lit.fn, tuple(_subst_term(a, s) for a in lit.args))
    if isinstance(lit, NegConj):
        return NegConj(tuple(_subst(i, s) for i in lit.items))
    raise TypeError(repr(lit))


def _subst_rule(rule: Rule, s) -> Rule:
    return Rule(_subst_lit(rule.head, s), tuple(_subst(l, s) for l in rule.body))


# ---------------------------------------------------------------------------
# Round-trip composition
# ---------------------------------------------------------------------------


@dataclass
class Composition:
    smo_id: str
    direction: str
    rules: list  # outer rules, bodies over base predicates only
    data_heads: frozenset  # head preds that must reduce to identity
    aux_heads: frozenset  # head preds allowed generator-form residuals
    scratch_heads: frozenset  # head preds dropped from the verdict
    ctx: Context


def compose_roundtrip(smo: cat.SmoInstance, g: cat.Genealogy, direction: str) -> Composition:
    """Compose one direction of the round trip over an abstract base state.

    direction "src": base = source tables; inner gamma_tgt, outer gamma_src.
    direction "tgt": base = target tables; inner gamma_src, outer gamma_tgt.
    The base starts fresh: auxiliaries on the base side and `@o` relations
    of the inner mapping are empty.  `@o` relations of the outer mapping
    read the state the inner mapping just produced (the store as of before
    the write), and base-side data relations read the base itself.
    """
    sr = rules_for(smo, g)
    if direction == "src":
        base_data = frozenset(smo.sources)
        inner, outer = sr.gamma_tgt, sr.gamma_src
    elif direction == "tgt":
        base_data = frozenset(smo.targets)
        inner, outer = sr.gamma_src, sr.gamma_tgt
    else:
        raise ValueError(direction)

    aux_names = frozenset(a.name for a in sr.aux_tables)
    inner_heads = inner.head_preds()
    outer_heads = outer.head_preds()

    fds, nn_cols = _embedded_join_axioms(smo, g, base_data)
    fresh_fns, disjoint = _cond_pair_axioms(smo, base_data)
    ctx = Context(
        keyed=frozenset(f"{p}_D" for p in base_data),
        no_null_payload=frozenset(
            f"{p}_D" for p in base_data if len(g.table_versions[p].columns) > 0
        ),
        fks=_fk_axioms(smo, g, base_data),
        fds=fds,
        nonomega_cols=nn_cols,
        fresh_fns=fresh_fns,
        disjoint_keys=disjoint,
    )

    def map_inner(pred: str, old: bool) -> Optional[str]:
        """New name for a predicate referenced by an inner body, None = empty."""
        if old:
            return None  # fresh base: nothing stored on the far side yet
        if pred in base_data:
            return f"{pred}_D"
        if pred in inner_heads:
            return f"{pred}_i"
        return None  # base-side auxiliary of a fresh base: empty

    inner_rules = []
    for r in inner.rules:
        rr = _rename_rule(r, inner_heads, map_inner)
        if rr is not None:
            inner_rules.append(rr)
    inner_defs: dict = {f"{p}_i": [] for p in inner_heads}
    for r in _reduce(inner_rules, ctx, {}):
        inner_defs.setdefault(r.head.pred, []).append(r)
    ctx.empties = frozenset(k for k, v in inner_defs.items() if not v)

    def map_outer(pred: str, old: bool) -> Optional[str]:
        if old:
            # pre-write store: inner results, or the base itself for
            # base-side data relations (steady state)
            if pred in inner_heads:
                return f"{pred}_i"
            if pred in base_data:
                return f"{pred}_D"
            return None
        if pred in outer_heads:
            return pred
        if pred in inner_heads:
            return f"{pred}_i"
        return None

    outer_rules = []
    for r in outer.rules:
        rr = _rename_rule(r, outer_heads, map_outer)
        if rr is not None:
            outer_rules.append(rr)

    reduced = _reduce(outer_rules, ctx, inner_defs)
    scratch = outer_heads - base_data - aux_names
    return Composition(
        smo_id=smo.id,
        direction=direction,
        rules=[r for r in reduced if r.head.pred not in scratch],
        data_heads=frozenset(base_data) & outer_heads,
        aux_heads=aux_names & outer_heads,
        scratch_heads=scratch,
        ctx=ctx,
    )


def _fk_axioms(smo: cat.SmoInstance, g: cat.Genealogy, base_data) -> tuple:
    """Foreign-key facts about the base state, as (child, position, parent)."""
    if smo.kind in ("DecomposeFK",):
        pair = smo.targets
    elif smo.kind in ("OuterJoinFK", "InnerJoinFK"):
        pair = smo.sources
    else:
        return ()
    s_tv, t_tv = pair
    if s_tv not in base_data or t_tv not in base_data:
        return ()
    pos = g.table_versions[s_tv].columns.index(smo.smo.on.fk_column)
    return ((f"{s_tv}_D", 1 + pos, f"{t_tv}_D"),)


def _cond_pair_axioms(smo: cat.SmoInstance, base_data) -> tuple:
    """Key-space facts when the base holds the two halves of a condition pair.

    Keys of the combined table come from a generator of their own, so they
    never name a stored row on the narrow side, and the two halves draw
    their keys from separate generators (or the global allocator), so they
    never collide with each other.
    """
    if smo.kind == "DecomposeCond":
        pair = smo.targets
    elif smo.kind in ("OuterJoinCond", "InnerJoinCond"):
        pair = smo.sources
    else:
        return frozenset(), ()
    s_tv, t_tv = pair
    if s_tv not in base_data or t_tv not in base_data:
        return frozenset(), ()
    return frozenset({f"{smo.id}_idR"}), ((f"{s_tv}_D", f"{t_tv}_D"),)


def _embedded_join_axioms(smo: cat.SmoInstance, g: cat.Genealogy, base_data) -> tuple:
    """Write invariants of a table produced by joining on an embedded key.

    The joined table repeats the parent row next to each child row, so the
    reference column determines the parent payload and is never NULL.
    """
    if smo.kind != "InnerJoinFK":
        return ((), ())
    r = smo.targets[0]
    if r not in base_data:
        return ((), ())
    s_tv = g.table_versions[smo.sources[0]]
    t_tv = g.table_versions[smo.sources[1]]
    det = 1 + s_tv.columns.index(smo.smo.on.fk_column)
    na = len(s_tv.columns)
    deps = tuple(range(1 + na, 1 + na + len(t_tv.columns)))
    pred = f"{r}_D"
    return (((pred, det, deps),), ((pred, det),))


def _rename_rule(rule: Rule, own_heads, mapper) -> Optional[Rule]:
    """Rename predicates per `mapper`; None = rule body unsatisfiable."""
    head = RelLit(mapper(rule.head.pred, False), rule.head.args)
    body: list[Literal] = []
    for lit in rule.body:
        new = _rename_lit(lit, mapper)
        if new is False:
            return None
        if new is True:
            continue
        body.append(new)
    return Rule(head, tuple(body))


def _rename_lit(lit: Literal, mapper):
    """True = literal trivially holds, False = literal cannot hold."""
    if isinstance(lit, RelLit):
        new = mapper(lit.pred, lit.old)
        if new is None:  # empty relation
            return lit.neg  # negative on empty: true; positive: false
        out = RelLit(new, lit.args, neg=lit.neg)
        if lit.neg:
            return NegConj((RelLit(new, lit.args),))
        return out
    if isinstance(lit, NegConj):
        items: list[Literal] = []
        for it in lit.items:
            new = _rename_lit(it, mapper)
            if new is True:
                continue
            if new is False:
                return True  # the conjunction is unsatisfiable
            items.append(new)
        if not items:
            return False  # negation of an always-true conjunction
        return NegConj(tuple(items))
    return lit


# ---------------------------------------------------------------------------
# Unfolding (deduction lemma)
# ---------------------------------------------------------------------------


def apply_deduction(rules: Sequence[Rule], defs: Mapping[str, Sequence[Rule]]) -> list[Rule]:
    """Replace references to defined predicates by their definitions.

    Positive references multiply the rule (one copy per defining rule);
    negative references become one negated conjunction per defining rule.
    """
    out = list(rules)
    changed = True
    while changed:
        changed = False
        nxt: list[Rule] = []
        for rule in out:
            expansion = _unfold_rule(rule, defs)
            if expansion is None:
                nxt.append(rule)
            else:
                nxt.extend(expansion)
                changed = True
        out = nxt
    return out


def _unfold_rule(rule: Rule, defs) -> Optional[list[Rule]]:
    for i, lit in enumerate(rule.body):
        exp = _unfold_literal(lit, defs)
        if exp is None:
            continue
        results = []
        for sub, extra in exp:
            body = tuple(rule.body[:i]) + tuple(extra) + tuple(rule.body[i + 1:])
            results.append(_subst_rule(Rule(rule.head, body), sub))
        return results
    return None


def _unfold_literal(lit: Literal, defs):
    """None = nothing to unfold; otherwise a list of (subst, new items)."""
    if isinstance(lit, RelLit) and not lit.neg and lit.pred in defs:
        out = []
        for d in defs[lit.pred]:
            d = _freshen(d)
            sub = _unify(lit.args, d.head.args)
            if sub is None:
                continue
            sub, eqs = _free_outs(sub, d.body)
            out.append((sub, eqs + [_subst(b, sub) for b in d.body]))
        return out
    if isinstance(lit, NegConj):
        for j, it in enumerate(lit.items):
            if isinstance(it, RelLit) and it.pred in defs:
                # not (rest and (B1 or ... or Bk)) = and_i not (rest and Bi)
                rest = lit.items[:j] + lit.items[j + 1:]
                conjs: list[Literal] = []
                for d in defs[it.pred]:
                    expanded = _neg_expand(it.args, d)
                    if expanded is not None:
                        conjs.append(NegConj(tuple(rest) + expanded))
                return [({}, conjs)]
            if isinstance(it, NegConj):
                inner = _unfold_literal(it, defs)
                if inner is not None:
                    [(_, new_items)] = inner
                    items = lit.items[:j] + tuple(new_items) + lit.items[j + 1:]
                    return [({}, [NegConj(items)])]
        return None
    if isinstance(lit, RelLit) and lit.neg and lit.pred in defs:
        conjs = []
        for d in defs[lit.pred]:
            expanded = _neg_expand(lit.args, d)
            if expanded is not None:
                conjs.append(NegConj(expanded))
        return [({}, conjs)]
    return None


def _free_outs(sub: dict, body) -> tuple[dict, list]:
    """Split substitutions that would pin an assignment output to a value.

    Those become explicit equality constraints instead, keeping the
    assignment literal well formed.
    """
    outs = {
        l.out.name for l in body if isinstance(l, (FnAssign, IdAssign))
    }
    eqs: list[Literal] = []
    kept: dict = {}
    for name, term in sub.items():
        if name in outs and not isinstance(term, Var):
            eqs.append(Compare(Var(name), "=", term))
        else:
            kept[name] = term
    return kept, eqs


def _neg_expand(args, d: Rule) -> Optional[tuple]:
    """Items of `not (args = head(d) and body(d))`, None when args can't match."""
    d = _freshen(d)
    sub: dict = {}
    eqs: list[Literal] = []
    for a, h in zip(args, d.head.args):
        if isinstance(h, Var) and h.name not in sub:
            sub[h.name] = a
        else:
            h2 = _subst_term(h, sub) if isinstance(h, Var) else h
            if isinstance(h2, Const) and isinstance(a, Const):
                if not compare_terms(a.value, "=", h2.value):
                    return None
            else:
                eqs.append(Compare(a, "=", h2))
    sub, out_eqs = _free_outs(sub, d.body)
    eqs.extend(out_eqs)
    return tuple(eqs) + tuple(_subst(b, sub) for b in d.body)


def apply_empty(rules: Sequence[Rule], empties) -> list[Rule]:
    """Drop what empty predicates make impossible or trivially true."""
    out: list[Rule] = []
    for rule in rules:
        body: list[Literal] = []
        dead = False
        for lit in rule.body:
            r = _strip_empty(lit, empties)
            if r is False:
                dead = True
                break
            if r is True:
                continue
            body.append(r)
        if not dead:
            out.append(Rule(rule.head, tuple(body)))
    return out


def _strip_empty(lit: Literal, empties):
    if isinstance(lit, RelLit) and lit.pred in empties:
        return lit.neg  # positive on empty: false; negative: true
    if isinstance(lit, NegConj):
        items: list[Literal] = []
        for it in lit.items:
            r = _strip_empty(it, empties)
            if r is False:
                return True  # conjunction unsatisfiable, negation holds
            if r is True:
                continue
            items.append(r)
        if not items:
            return False
        return NegConj(tuple(items))
    return lit


def _unify(args_a, args_b) -> Optional[dict]:
    sub: dict = {}

    def walk(t: Term) -> Term:
        while isinstance(t, Var) and t.name in sub:
            t = sub[t.name]
        return t

    for a, b in zip(args_a, args_b):
        a, b = walk(a), walk(b)
        if isinstance(a, Var):
            if not (isinstance(b, Var) and b.name == a.name):
                sub[a.name] = b
        elif isinstance(b, Var):
            sub[b.name] = a
        elif not compare_terms(a.value, "=", b.value):
            return None
    # flatten chains
    return {k: walk(Var(k)) for k in sub}


# ---------------------------------------------------------------------------
# Per-rule simplification
# ---------------------------------------------------------------------------


class _Facts:
    """Decomposed view of a rule body for entailment queries."""

    def __init__(self, body: Sequence[Literal], ctx: Context):
        self.pos: list[RelLit] = []
        self.compares: list[Compare] = []
        self.conds: list[CondLit] = []
        self.assigns: list = []
        self.negs: list[NegConj] = []
        for lit in body:
            if isinstance(lit, RelLit) and not lit.neg:
                self.pos.append(lit)
            elif isinstance(lit, Compare):
                self.compares.append(lit)
            elif isinstance(lit, CondLit):
                self.conds.append(lit)
            elif isinstance(lit, (FnAssign, IdAssign)):
                self.assigns.append(lit)
            elif isinstance(lit, NegConj):
                self.negs.append(lit)
        self.id_outs = {
            a.out.name: (a.fn, a.args) for a in self.assigns if isinstance(a, IdAssign)
        }
        self.nonomega: set[str] = set(self.id_outs)
        for lit in self.pos:
            if lit.pred in ctx.keyed and isinstance(lit.args[0], Var):
                self.nonomega.add(lit.args[0].name)
            for pred, pos in ctx.nonomega_cols:
                if lit.pred == pred and pos < len(lit.args) and isinstance(lit.args[pos], Var):
                    self.nonomega.add(lit.args[pos].name)
        for c in self.compares:
            if c.op == "!=":
                if isinstance(c.left, Var) and _is_om(c.right):
                    self.nonomega.add(c.left.name)
                if isinstance(c.right, Var) and _is_om(c.left):
                    self.nonomega.add(c.right.name)


def _is_om(t: Term) -> bool:
    return isinstance(t, Const) and is_omega(t.value)


def _terms_eq(a: Term, b: Term) -> bool:
    if isinstance(a, Var) and isinstance(b, Var):
        return a.name == b.name
    if isinstance(a, Const) and isinstance(b, Const):
        return compare_terms(a.value, "=", b.value)
    return False


def _cmp_true(c: Compare, facts: _Facts) -> bool:
    """Is this comparison certainly true given the body facts?"""
    if isinstance(c.left, Const) and isinstance(c.right, Const):
        return compare_terms(c.left.value, c.op, c.right.value)
    if c.op == "=" and _terms_eq(c.left, c.right):
        return True
    if c.op == "!=":
        for x, y in ((c.left, c.right), (c.right, c.left)):
            if isinstance(x, Var) and x.name in facts.nonomega and _is_om(y):
                return True
        if (
            isinstance(c.left, Var)
            and isinstance(c.right, Var)
            and c.left.name in facts.id_outs
            and c.right.name in facts.id_outs
            and facts.id_outs[c.left.name][0] != facts.id_outs[c.right.name][0]
        ):
            return True  # distinct generators never clash
        for f in facts.compares:
            if f.op == "!=" and (
                (_terms_eq(f.left, c.left) and _terms_eq(f.right, c.right))
                or (_terms_eq(f.left, c.right) and _terms_eq(f.right, c.left))
            ):
                return True
    if c.op == "=":
        for f in facts.compares:
            if f.op == "=" and (
                (_terms_eq(f.left, c.left) and _terms_eq(f.right, c.right))
                or (_terms_eq(f.left, c.right) and _terms_eq(f.right, c.left))
            ):
                return True
    return False


def _cmp_false(c: Compare, facts: _Facts) -> bool:
    """Is this comparison certainly false given the body facts?"""
    if isinstance(c.left, Const) and isinstance(c.right, Const):
        return not compare_terms(c.left.value, c.op, c.right.value)
    if c.op == "!=" and _terms_eq(c.left, c.right):
        return True
    if c.op == "=":
        for x, y in ((c.left, c.right), (c.right, c.left)):
            if isinstance(x, Var) and x.name in facts.nonomega and _is_om(y):
                return True
        return _cmp_true(Compare(c.left, "!=", c.right), facts) and not (
            _terms_eq(c.left, c.right)
        )
    if c.op == "!=":
        return _cmp_true(Compare(c.left, "=", c.right), facts)
    return False


def _safe_subst_rule(rule: Rule, sub: dict) -> Rule:
    """Substitute, turning bindings of assignment outputs into equalities."""
    sub, eqs = _free_outs(sub, rule.body)
    out = _subst_rule(rule, sub)
    return Rule(out.head, out.body + tuple(eqs)) if eqs else out


def apply_unique_key(rule: Rule, ctx: Context) -> Optional[Rule]:
    """Merge positive literals that the first-column key forces to agree."""
    body = list(rule.body)
    for i, a in enumerate(body):
        if not (isinstance(a, RelLit) and not a.neg and a.pred in ctx.keyed):
            continue
        for b in body[i + 1:]:
            if (
                isinstance(b, RelLit)
                and not b.neg
                and b.pred == a.pred
                and _terms_eq(a.args[0], b.args[0])
                and a is not b
            ):
                sub = _unify(a.args, b.args)
                if sub is None:
                    return None  # same key, incompatible payloads
                if sub:
                    return _safe_subst_rule(rule, sub)
                # identical after unification: drop the duplicate
                body2 = body[:i] + [l for l in body[i:] if l is not b]
                return Rule(rule.head, tuple(body2))
    assigns = [l for l in body if isinstance(l, IdAssign)]
    for i, a in enumerate(assigns):
        for b in assigns[i + 1:]:
            if a.fn != b.fn:
                continue
            if _terms_eq(a.out, b.out):
                # injective generator: equal outputs force equal inputs
                sub = _unify(a.args, b.args)
                if sub is None:
                    return None
                if sub:
                    return _safe_subst_rule(rule, sub)
                return Rule(rule.head, tuple(l for l in body if l is not b))
            if len(a.args) == len(b.args) and all(
                _terms_eq(x, y) for x, y in zip(a.args, b.args)
            ):
                # functional generator: equal inputs force equal outputs
                sub = _unify((a.out,), (b.out,))
                if sub is None:
                    return None
                if sub:
                    return _safe_subst_rule(rule, sub)
    for pred, det, deps in ctx.fds:
        lits = [
            l
            for l in body
            if isinstance(l, RelLit) and not l.neg and l.pred == pred and det < len(l.args)
        ]
        for i, a in enumerate(lits):
            for b in lits[i + 1:]:
                if not _terms_eq(a.args[det], b.args[det]):
                    continue
                sub = _unify(
                    tuple(a.args[d] for d in deps), tuple(b.args[d] for d in deps)
                )
                if sub is None:
                    return None  # same determinant, incompatible dependents
                if sub:
                    return _safe_subst_rule(rule, sub)
    return rule


def apply_contradiction(rule: Rule, ctx: Context) -> Optional[Rule]:
    """None when the body is unsatisfiable over any valid base state."""
    facts = _Facts(rule.body, ctx)
    for c in facts.compares:
        if _cmp_false(c, facts):
            return None
    for cl in facts.conds:
        if isinstance(cl.cond, C.BoolConst) and not cl.cond.value:
            return None
        for other in facts.conds:
            if other.cond == C.Not(cl.cond):
                return None
    for lit in facts.pos:
        if lit.pred in ctx.empties:
            return None
        if (
            lit.pred in ctx.no_null_payload
            and len(lit.args) > 1
            and all(_is_om(a) for a in lit.args[1:])
        ):
            return None  # no stored row has an entirely NULL payload
        for pred, pos in ctx.nonomega_cols:
            if lit.pred == pred and pos < len(lit.args) and _is_om(lit.args[pos]):
                return None
    for a in facts.assigns:
        if isinstance(a, IdAssign) and a.fn in ctx.fresh_fns:
            for lit in facts.pos:
                if lit.pred in ctx.keyed and lit.args and _terms_eq(lit.args[0], a.out):
                    return None  # a fresh id can never name a stored row
    for pa, pb in ctx.disjoint_keys:
        for la in facts.pos:
            if la.pred != pa or not la.args:
                continue
            for lb in facts.pos:
                if lb.pred == pb and lb.args and _terms_eq(la.args[0], lb.args[0]):
                    return None  # the two relations never share a key
    for n in facts.negs:
        if not n.items:
            return None
        if _entails_conj(n.items, facts, rule, ctx):
            return None  # the negated conjunction certainly holds
    return rule


def apply_tautology(rule: Rule, ctx: Context) -> Rule:
    """Drop certainly-true literals; substitute equalities; prune negations."""
    changed = True
    while changed:
        changed = False
        facts = _Facts(rule.body, ctx)
        outs = {a.out.name for a in facts.assigns}
        bound = _outer_vars(facts) | set(rule.head.vars())
        body: list[Literal] = []
        sub: dict = {}
        for lit in rule.body:
            if isinstance(lit, Compare):
                # judge the comparison against the rest of the body only
                rest = _Facts([l for l in rule.body if l is not lit], ctx)
                if _cmp_true(lit, rest):
                    changed = True
                    continue
                if _cmp_false(lit, rest):
                    body.append(lit)  # contradiction pass rejects the rule
                    continue
                if lit.op == "=" and isinstance(lit.left, Var) and lit.left.name not in outs:
                    sub[lit.left.name] = lit.right
                    changed = True
                    continue
                if lit.op == "=" and isinstance(lit.right, Var) and lit.right.name not in outs:
                    sub[lit.right.name] = lit.left
                    changed = True
                    continue
            if isinstance(lit, CondLit):
                done, val = _cond_const(lit.cond)
                if done:
                    if val:
                        changed = True
                        continue
                    body.append(CondLit(C.FALSE))
                    continue
            if isinstance(lit, (FnAssign, IdAssign)):
                out = lit.out.name
                used = _out_used(out, rule, lit)
                if not used:
                    changed = True
                    continue
            if isinstance(lit, NegConj):
                new = _simplify_neg(lit, facts, ctx, bound)
                if new is None:  # negation certainly holds
                    changed = True
                    continue
                if new != lit:
                    changed = True
                body.append(new)
                continue
            body.append(lit)
        # deduplicate
        seen: list[Literal] = []
        for lit in body:
            if lit not in seen:
                seen.append(lit)
            else:
                changed = True
        rule = Rule(rule.head, tuple(seen))
        if sub:
            rule = _subst_rule(rule, sub)
    return rule


def _out_used(name: str, rule: Rule, self_lit) -> bool:
    if name in rule.head.vars():
        return True
    for lit in rule.body:
        if lit is self_lit:
            continue
        if name in lit.vars():
            return True
    return False


def _cond_const(cond) -> tuple[bool, bool]:
    """(fully constant?, value) for a condition with no columns left."""
    if C.condition_columns(cond):
        return (False, False)
    try:
        return (True, C.eval_condition(cond, {}))
    except Exception:
        return (False, False)


def _simplify_neg(
    neg: NegConj, facts: _Facts, ctx: Context, bound: set
) -> Optional[NegConj]:
    """Simplified negation, or None when it certainly holds.

    `bound` holds the variables quantified outside this negation: only
    variables not in it are existential within the conjunction.
    """
    work = list(neg.items)
    items: list[Literal] = []
    changed = True
    while changed:
        changed = False
        work = items + work
        items = []
        sub: dict = {}
        for pos, it in enumerate(work):
            it = _subst(it, sub)
            # variables bound relative to this item: the outer context plus
            # everything the sibling items mention
            sibling_vars: set = set()
            for other in items + work[pos + 1:]:
                sibling_vars |= _subst(other, sub).vars()
            local_bound = bound | sibling_vars
            if isinstance(it, Compare):
                if _cmp_true(it, facts):
                    changed = True
                    continue
                if _cmp_false(it, facts):
                    return None  # one conjunct is impossible: negation holds
                inner_l = isinstance(it.left, Var) and it.left.name not in local_bound
                inner_r = isinstance(it.right, Var) and it.right.name not in local_bound
                if it.op == "=" and isinstance(it.left, Var) and it.left.name not in bound:
                    sub[it.left.name] = it.right
                    changed = True
                    continue
                if it.op == "=" and isinstance(it.right, Var) and it.right.name not in bound:
                    sub[it.right.name] = it.left
                    changed = True
                    continue
                del inner_l, inner_r
            if isinstance(it, RelLit) and not it.neg:
                if it.pred in ctx.empties:
                    return None
                if it.pred in ctx.no_null_payload and len(it.args) > 1 and all(
                    _is_om(a) for a in it.args[1:]
                ):
                    return None  # all-null payload rows never exist
                res = _collapse_item(it, facts, ctx, bound, local_bound)
                if res == "holds":
                    return None
                if res is not None:
                    item_sub, drop = res
                    if item_sub:
                        sub.update(item_sub)
                    if drop:
                        changed = True
                        continue
            if isinstance(it, CondLit):
                done, val = _cond_const(it.cond)
                if done and val:
                    changed = True
                    continue
                if done and not val:
                    return None
                if it in facts.conds:
                    changed = True
                    continue  # holds at top level, redundant inside
                for cl in facts.conds:
                    if cl.cond == C.Not(it.cond) or it.cond == C.Not(cl.cond):
                        return None
            if isinstance(it, (IdAssign, FnAssign)):
                res = _assign_item(it, facts, bound, local_bound)
                if res == "holds":
                    return None
                if res is not None:
                    item_sub, drop = res
                    if item_sub:
                        sub.update(item_sub)
                    if drop:
                        changed = True
                        continue
            if isinstance(it, NegConj):
                if any(
                    _alpha_eq_items(
                        n.items, it.items, local_bound | _outer_vars(facts)
                    )
                    for n in facts.negs
                ):
                    changed = True
                    continue  # the item restates a negation known to hold
                nested = _simplify_neg(it, facts, ctx, bound | sibling_vars)
                if nested is None:
                    changed = True
                    continue  # inner negation certainly holds, so the item is true
                if not nested.items:
                    return None  # the item is certainly false
                if nested != it:
                    changed = True
                it = nested
            items.append(it)
        if sub:
            items = [_subst(i, sub) for i in items]
        work = []
    # items forcing every payload column of a known row to NULL are jointly
    # unsatisfiable, so the negation holds
    forced_om = set()
    for it in items:
        if isinstance(it, Compare) and it.op == "=":
            if isinstance(it.left, Var) and _is_om(it.right):
                forced_om.add(it.left.name)
            if isinstance(it.right, Var) and _is_om(it.left):
                forced_om.add(it.right.name)
    if forced_om:
        for f in facts.pos:
            if f.pred not in ctx.no_null_payload or len(f.args) <= 1:
                continue
            if all(
                _is_om(a) or (isinstance(a, Var) and a.name in forced_om)
                for a in f.args[1:]
            ):
                return None
    return NegConj(tuple(items))


def _assign_item(it, facts: _Facts, bound: set, local_bound: set):
    """Decide an assignment item inside a negation, if possible.

    Same contract as _collapse_item.  Assignments are total, functional,
    and (for id generation) injective, which pins their variables down.
    """
    # totality: an output used nowhere else can always be produced
    if it.out.name not in local_bound:
        return ({}, True)
    for a in facts.assigns:
        if type(a) is not type(it):
            continue
        if isinstance(it, IdAssign):
            if a.fn != it.fn:
                continue
            if _terms_eq(a.out, it.out):
                # injectivity: this output only arises from a's inputs
                sub: dict = {}
                decided = True
                conflict = False
                for x, t in zip(it.args, a.args):
                    x = _subst_term(x, sub)
                    if _terms_eq(x, t):
                        continue
                    if isinstance(x, Var) and x.name not in bound:
                        sub[x.name] = t
                    elif isinstance(x, Const) and isinstance(t, Const):
                        conflict = True
                    else:
                        decided = False
                        break
                if not decided:
                    continue
                if conflict:
                    return "holds"
                return (sub, True)
            if len(a.args) == len(it.args) and all(
                _terms_eq(x, t) for x, t in zip(it.args, a.args)
            ):
                # functionality: same inputs give the same output
                if isinstance(it.out, Var) and it.out.name not in bound:
                    return ({it.out.name: a.out}, True)
                if _terms_eq(it.out, a.out):
                    return ({}, True)
        else:
            if a.expr == it.expr:
                if isinstance(it.out, Var) and it.out.name not in bound:
                    return ({it.out.name: a.out}, True)
                if _terms_eq(it.out, a.out):
                    return ({}, True)
    return None


def _collapse_item(it: RelLit, facts: _Facts, ctx: Context, bound: set, local_bound: set):
    """Decide a positive relation item inside a negation, if possible.

    Returns "holds" when the item is certainly false (so the negation holds),
    (substitution, True) when the item is certainly true and can be dropped
    after binding its existential variables, or None when undecided.

    Two sound cases: the item names a key-unique row that a body literal
    pins down (its payload variables then denote that row), or the item is
    witnessed by a body literal and its variables occur nowhere else.
    """
    for f in facts.pos:
        if f.pred != it.pred or len(f.args) != len(it.args):
            continue
        keyed = it.pred in ctx.keyed and _terms_eq(it.args[0], f.args[0])
        free = bound if keyed else local_bound
        sub: dict = {}
        decided = True
        conflict = False
        for a, b in zip(it.args, f.args):
            a = _subst_term(a, sub)
            if _terms_eq(a, b):
                continue
            if isinstance(a, Var) and a.name not in free:
                sub[a.name] = b
            elif keyed:
                if isinstance(a, Const) and isinstance(b, Const):
                    conflict = True
                else:
                    decided = False  # constrained variable against the unique row
                    break
            else:
                decided = False
                break
        if not decided:
            continue
        if conflict:
            # the only row this key admits does not match the pattern
            return "holds"
        return (sub, True)
    return None


def _outer_vars(facts: _Facts) -> set:
    out: set = set()
    for lit in facts.pos:
        out |= lit.vars()
    for a in facts.assigns:
        out |= a.vars()
    for c in facts.compares:
        out |= c.vars()
    for c in facts.conds:
        out |= c.vars()
    return out


def _entails_conj(items, facts: _Facts, rule: Rule, ctx: Context) -> bool:
    """Do the body facts certainly satisfy this conjunction (some witness)?"""
    outer = _outer_vars(facts) | set(rule.head.vars())

    def match_term(a: Term, b: Term, sub: dict) -> Optional[dict]:
        a = _subst_term(a, sub)
        if isinstance(a, Var) and a.name not in outer:
            s2 = dict(sub)
            s2[a.name] = b
            return s2
        if _terms_eq(a, b):
            return sub
        return None

    def solve(i: int, sub: dict) -> bool:
        if i == len(items):
            return True
        it = _subst(items[i], sub)
        if isinstance(it, Compare):
            if _cmp_true(it, facts):
                return solve(i + 1, sub)
            # try binding an inner variable via equality
            if it.op == "=":
                for x, y in ((it.left, it.right), (it.right, it.left)):
                    if isinstance(x, Var) and x.name not in outer and x.name not in sub:
                        s2 = dict(sub)
                        s2[x.name] = y
                        if solve(i + 1, s2):
                            return True
            return False
        if isinstance(it, CondLit):
            return it in facts.conds and solve(i + 1, sub)
        if isinstance(it, RelLit) and not it.neg:
            # referential integrity: a non-NULL foreign key has a parent row
            for child, pos, parent in ctx.fks:
                if it.pred != parent:
                    continue
                for cand in facts.pos:
                    if cand.pred != child:
                        continue
                    fk = cand.args[pos]
                    nn = (isinstance(fk, Var) and fk.name in facts.nonomega) or (
                        isinstance(fk, Const) and not is_omega(fk.value)
                    )
                    if not nn:
                        continue
                    s2 = match_term(it.args[0], fk, sub)
                    if s2 is None:
                        continue
                    # parent payload is unknown: its variables must be inner
                    # and unconstrained by any other conjunct
                    payload_ok = True
                    for a in it.args[1:]:
                        a = _subst_term(a, s2)
                        if not (isinstance(a, Var) and a.name not in outer):
                            payload_ok = False
                            break
                        if any(
                            a.name in _subst(items[j], s2).vars()
                            for j in range(len(items))
                            if j != i
                        ):
                            payload_ok = False
                            break
                    if payload_ok and solve(i + 1, s2):
                        return True
            for cand in facts.pos:
                if cand.pred != it.pred:
                    continue
                s2 = sub
                ok = True
                for a, b in zip(it.args, cand.args):
                    s2 = match_term(a, b, s2)
                    if s2 is None:
                        ok = False
                        break
                if ok and solve(i + 1, s2):
                    return True
            # unique-key injection: same predicate, same key already present
            for cand in facts.pos:
                if cand.pred == it.pred and it.pred in ctx.keyed and len(it.args) > 0:
                    s2 = match_term(it.args[0], cand.args[0], sub)
                    if s2 is None:
                        continue
                    ok = True
                    for a, b in zip(it.args[1:], cand.args[1:]):
                        s2 = match_term(a, b, s2)
                        if s2 is None:
                            ok = False
                            break
                    if ok and solve(i + 1, s2):
                        return True
            return False
        if isinstance(it, IdAssign):
            for a in facts.assigns:
                if isinstance(a, IdAssign) and a.fn == it.fn and len(a.args) == len(it.args):
                    s2 = sub
                    ok = True
                    for x, y in zip(it.args, a.args):
                        s2 = match_term(x, y, s2)
                        if s2 is None:
                            ok = False
                            break
                    if ok:
                        s3 = match_term(it.out, a.out, s2)
                        if s3 is not None and solve(i + 1, s3):
                            return True
            # a generator is total: an unused output always exists
            if isinstance(it.out, Var) and it.out.name not in outer and it.out.name not in sub:
                if not any(
                    it.out.name in _subst(items[j], sub).vars()
                    for j in range(len(items))
                    if j != i
                ):
                    return solve(i + 1, sub)
            return False
        if isinstance(it, FnAssign):
            for a in facts.assigns:
                if isinstance(a, FnAssign) and a.expr == _cond_subst(it.expr, sub):
                    s2 = match_term(it.out, a.out, sub)
                    if s2 is not None and solve(i + 1, s2):
                        return True
            if isinstance(it.out, Var) and it.out.name not in outer and it.out.name not in sub:
                if not any(
                    it.out.name in _subst(items[j], sub).vars()
                    for j in range(len(items))
                    if j != i
                ):
                    return solve(i + 1, sub)
            return False
        if isinstance(it, NegConj):
            # entailed when an alpha-equivalent negation sits at the top level
            for n in facts.negs:
                if _alpha_eq_items(n.items, it.items, outer):
                    return solve(i + 1, sub)
            return False
        return False

    return solve(0, {})


def _alpha_eq_items(a, b, outer) -> bool:
    if len(a) != len(b):
        return False
    return _print_items(a, outer) == _print_items(b, outer)


def _print_items(items, outer) -> str:
    # cheap alpha-canonical form: rename inner variables by first occurrence
    ren: dict = {}

    def name(n: str) -> str:
        if n in outer:
            return f"o:{n}"
        if n not in ren:
            ren[n] = f"i{len(ren)}"
        return ren[n]

    def term(t: Term) -> str:
        if isinstance(t, Const):
            return f"c:{t.value!r}"
        return name(t.name)

    def expr(e) -> str:
        if isinstance(e, C.Col):
            return name(e.name)
        if isinstance(e, C.Lit):
            return f"c:{e.value!r}"
        if isinstance(e, C.BinOp):
            return f"({expr(e.left)}{e.op}{expr(e.right)})"
        if isinstance(e, C.Neg):
            return f"(-{expr(e.item)})"
        raise TypeError(repr(e))

    def cond(c) -> str:
        if isinstance(c, C.Cmp):
            return f"{expr(c.left)}{c.op}{expr(c.right)}"
        if isinstance(c, C.Not):
            return f"!({cond(c.item)})"
        if isinstance(c, C.And):
            return "and(" + ",".join(cond(x) for x in c.items) + ")"
        if isinstance(c, C.Or):
            return "or(" + ",".join(cond(x) for x in c.items) + ")"
        if isinstance(c, C.BoolConst):
            return str(c.value)
        raise TypeError(repr(c))

    def lit(l: Literal) -> str:
        if isinstance(l, RelLit):
            return f"{'!' if l.neg else ''}{l.pred}({','.join(term(a) for a in l.args)})"
        if isinstance(l, Compare):
            return f"{term(l.left)}{l.op}{term(l.right)}"
        if isinstance(l, CondLit):
            return f"cond:{cond(l.cond)}"
        if isinstance(l, FnAssign):
            return f"{term(l.out)}:={expr(l.expr)}"
        if isinstance(l, IdAssign):
            return f"{term(l.out)}:=@{l.fn}({','.join(term(a) for a in l.args)})"
        if isinstance(l, NegConj):
            return "neg[" + ";".join(sorted(lit(i) for i in l.items)) + "]"
        raise TypeError(repr(l))

    return ";".join(sorted(lit(i) for i in items))


# ---------------------------------------------------------------------------
# Rule-set transforms and the reduction driver
# ---------------------------------------------------------------------------


def _extract(rule: Rule) -> Rule:
    """Singleton extraction and double-negation splicing at the body level."""
    changed = True
    while changed:
        changed = False
        facts = _Facts(rule.body, Context())
        outer = _outer_vars(facts) | set(rule.head.vars())
        body: list[Literal] = []
        for lit in rule.body:
            if isinstance(lit, NegConj) and len(lit.items) == 1:
                (it,) = lit.items
                if isinstance(it, Compare) and it.vars() <= outer and it.op in ("=", "!="):
                    body.append(Compare(it.left, "!=" if it.op == "=" else "=", it.right))
                    changed = True
                    continue
                if isinstance(it, NegConj):
                    # not not exists Phi = exists Phi
                    body.extend(it.items)
                    changed = True
                    continue
            body.append(lit)
        rule = Rule(rule.head, tuple(body))
    return rule


def _comp_item(it: Literal) -> Optional[Literal]:
    """The negation of a single condition-level item, when expressible."""
    if isinstance(it, Compare) and it.op in ("=", "!="):
        return Compare(it.left, "!=" if it.op == "=" else "=", it.right)
    if isinstance(it, CondLit):
        if isinstance(it.cond, C.Not):
            return CondLit(it.cond.item)
        return CondLit(C.Not(it.cond))
    return None


def _resolution_merge(rule: Rule) -> Rule:
    """not(Phi and c) and not(Phi and not c)  =>  not Phi."""
    facts = _Facts(rule.body, Context())
    outer = _outer_vars(facts) | set(rule.head.vars())
    negs = [l for l in rule.body if isinstance(l, NegConj)]
    for a in negs:
        for b in negs:
            if a is b:
                continue
            for i, it in enumerate(a.items):
                comp = _comp_item(it)
                if comp is None:
                    continue
                rest_a = a.items[:i] + a.items[i + 1:]
                for j, jt in enumerate(b.items):
                    if jt != comp:
                        continue
                    rest_b = b.items[:j] + b.items[j + 1:]
                    if _alpha_eq_items(rest_a, rest_b, outer):
                        body = [l for l in rule.body if l is not a and l is not b]
                        body.append(NegConj(rest_a))
                        return Rule(rule.head, tuple(body))
            # not(Phi(x) and x != t) and not(Phi(t))  =>  not Phi(x)
            for i, it in enumerate(a.items):
                if not (isinstance(it, Compare) and it.op == "!="):
                    continue
                for x, t in ((it.left, it.right), (it.right, it.left)):
                    if not isinstance(x, Var):
                        continue
                    rest_a = a.items[:i] + a.items[i + 1:]
                    try:
                        inst = tuple(_subst(l, {x.name: t}) for l in rest_a)
                    except VerifyError:
                        continue
                    if _alpha_eq_items(inst, b.items, outer):
                        body = [l for l in rule.body if l is not a and l is not b]
                        body.append(NegConj(rest_a))
                        return Rule(rule.head, tuple(body))
            # not(Phi(xs) and not(xs = ts)) and not(Phi[xs -> ts])  =>  not Phi(xs)
            for i, it in enumerate(a.items):
                if not isinstance(it, NegConj) or not it.items:
                    continue
                sub: dict = {}
                ok = True
                for g in it.items:
                    if not (isinstance(g, Compare) and g.op == "="):
                        ok = False
                        break
                    if isinstance(g.left, Var) and g.left.name not in outer and g.left.name not in sub:
                        sub[g.left.name] = g.right
                    elif isinstance(g.right, Var) and g.right.name not in outer and g.right.name not in sub:
                        sub[g.right.name] = g.left
                    else:
                        ok = False
                        break
                if not ok:
                    continue
                if any(
                    isinstance(t, Var) and t.name in sub for t in sub.values()
                ):
                    continue
                rest_a = a.items[:i] + a.items[i + 1:]
                try:
                    inst = tuple(_subst(l, sub) for l in rest_a)
                except VerifyError:
                    continue
                if _alpha_eq_items(inst, b.items, outer):
                    body = [l for l in rule.body if l is not a and l is not b]
                    body.append(NegConj(rest_a))
                    return Rule(rule.head, tuple(body))
    return rule


def _drop_entailed_pos(rule: Rule) -> Rule:
    """Drop a positive literal witnessed by another when its variables are local."""
    for lit in rule.body:
        if not (isinstance(lit, RelLit) and not lit.neg):
            continue
        elsewhere: set = set(rule.head.vars())
        for other in rule.body:
            if other is not lit:
                elsewhere |= other.vars()
        for f in rule.body:
            if f is lit or not (isinstance(f, RelLit) and not f.neg):
                continue
            if f.pred != lit.pred or len(f.args) != len(lit.args):
                continue
            sub: dict = {}
            ok = True
            for a, b in zip(lit.args, f.args):
                a = _subst_term(a, sub)
                if _terms_eq(a, b):
                    continue
                if isinstance(a, Var) and a.name not in elsewhere:
                    sub[a.name] = b
                else:
                    ok = False
                    break
            if ok:
                return Rule(rule.head, tuple(l for l in rule.body if l is not lit))
    return rule


def _drop_entailed_negs(rule: Rule, ctx: Context) -> Rule:
    """Drop a negation implied by another negation in the same body.

    ¬A implies ¬B whenever satisfying B's conjunction (together with the
    rest of the body) would also satisfy A's, so B adds nothing next to A.
    """
    negs = [l for l in rule.body if isinstance(l, NegConj)]
    if len(negs) < 2:
        return rule
    for b in negs:
        others = [l for l in rule.body if l is not b]
        for a in negs:
            if a is b:
                continue
            rest = [l for l in others if l is not a]
            facts = _Facts(rest + list(b.items), ctx)
            outer = _outer_vars(facts) | set(rule.head.vars())
            ren = {
                v: Var(f"{v}~g{i}")
                for i, v in enumerate(sorted(NegConj(a.items).vars() - outer))
            }
            try:
                items = [_subst(i, ren) for i in a.items]
            except VerifyError:
                continue
            if _entails_conj(items, facts, rule, ctx):
                return Rule(rule.head, tuple(others))
    return rule


def _fk_null_rewrite(rule: Rule, ctx: Context) -> Rule:
    """A reference column with no matching parent row must be NULL."""
    for child, pos, parent in ctx.fks:
        key = None
        for lit in rule.body:
            if (
                isinstance(lit, RelLit)
                and not lit.neg
                and lit.pred == child
                and pos < len(lit.args)
                and isinstance(lit.args[pos], Var)
            ):
                key = lit.args[pos]
        if key is None:
            continue
        elsewhere: set = set(rule.head.vars())
        for lit in rule.body:
            if isinstance(lit, NegConj) and len(lit.items) == 1:
                continue
            elsewhere |= lit.vars()
        for lit in rule.body:
            if not (isinstance(lit, NegConj) and len(lit.items) == 1):
                continue
            (it,) = lit.items
            if not (
                isinstance(it, RelLit)
                and not it.neg
                and it.pred == parent
                and _terms_eq(it.args[0], key)
            ):
                continue
            payload_local = all(
                isinstance(a, Var) and a.name not in elsewhere for a in it.args[1:]
            )
            if payload_local:
                body = tuple(
                    Compare(key, "=", Const(OMEGA)) if l is lit else l for l in rule.body
                )
                return Rule(rule.head, body)
    return rule


def _simplify_rule(rule: Rule, ctx: Context) -> Optional[Rule]:
    prev = None
    while prev != rule:
        ctx.note(f"simplify {rule.head.pred}")
        prev = rule
        rule = apply_tautology(rule, ctx)
        rule = _extract(rule)
        rule = _resolution_merge(rule)
        rule = _drop_entailed_pos(rule)
        rule = _drop_entailed_negs(rule, ctx)
        rule = _fk_null_rewrite(rule, ctx)
        nxt = apply_unique_key(rule, ctx)
        if nxt is None:
            return None
        rule = nxt
        if apply_contradiction(rule, ctx) is None:
            return None
    return rule


def _subsumes(r1: Rule, r2: Rule, ctx: Context) -> bool:
    """Does r1 derive everything r2 derives (r2 redundant next to r1)?"""
    if r1.head.pred != r2.head.pred:
        return False
    r1 = _freshen(r1)
    sub: dict = {}
    for a, b in zip(r1.head.args, r2.head.args):
        if isinstance(a, Var):
            if a.name in sub:
                if not _terms_eq(sub[a.name], b):
                    return False
            else:
                sub[a.name] = b
        elif not _terms_eq(a, b):
            return False
    try:
        items = [_subst(l, sub) for l in r1.body]
    except VerifyError:
        return False  # head match would pin a generated value to a constant
    return _entails_conj(items, _Facts(r2.body, ctx), r2, ctx)


def apply_subsumption(rules: Sequence[Rule], ctx: Optional[Context] = None) -> list[Rule]:
    """Remove duplicate and subsumed rules."""
    ctx = ctx or Context()
    out: list[Rule] = []
    for i, r in enumerate(rules):
        redundant = False
        for j, other in enumerate(rules):
            if i == j:
                continue
            if print_rule(other) == print_rule(r):
                redundant = j < i  # keep the first duplicate
            elif _subsumes(other, r, ctx):
                redundant = True
            if redundant:
                break
        if not redundant:
            out.append(r)
    return out


def _complement(lit: Literal, rule: Rule):
    """Literals asserting the opposite of `lit`, or None if not supported."""
    if isinstance(lit, (Compare, CondLit)):
        c = _comp_item(lit)
        return None if c is None else [c]
    if isinstance(lit, NegConj):
        outside: set = set(rule.head.vars())
        for other in rule.body:
            if other is not lit:
                outside |= other.vars()
        if all(isinstance(i, (Compare, CondLit)) for i in lit.items) and all(
            i.vars() <= outside for i in lit.items
        ):
            return list(lit.items)
        return None
    if isinstance(lit, RelLit) and not lit.neg:
        return [NegConj((lit,))]
    return None


def _droppable(lit: Literal, rule: Rule) -> bool:
    """Rule stays safe (head covered) without this literal."""
    rest_vars: set = set()
    for other in rule.body:
        if other is lit:
            continue
        if isinstance(other, RelLit) and not other.neg:
            rest_vars |= other.vars()
        elif isinstance(other, (FnAssign, IdAssign)):
            rest_vars |= other.vars()
    return set(rule.head.vars()) <= rest_vars


def _guard_ok(rule: Rule, group) -> bool:
    """A guard may be split off only if no variable bound solely by it
    leaks into the rest of the body: the complement case would leave such
    a variable dangling and change the rule's meaning."""
    outside = [l for l in rule.body if l not in group]
    anchored: set = set(rule.head.vars())
    for l in outside:
        if (isinstance(l, RelLit) and not l.neg) or isinstance(l, (FnAssign, IdAssign)):
            anchored |= l.vars()
    gvars: set = set()
    for l in group:
        gvars |= l.vars()
    loose = gvars - anchored
    return not any(l.vars() & loose for l in outside)


def _guard_candidates(rule: Rule) -> list:
    """(literals forming a guard, literals asserting its opposite) pairs."""
    out = []
    for lit in rule.body:
        comp = _complement(lit, rule)
        if comp is not None and _guard_ok(rule, [lit]):
            out.append(([lit], comp))
    # an existence guard: a positive literal plus the conditions tied to it
    for lit in rule.body:
        if not (isinstance(lit, RelLit) and not lit.neg):
            continue
        attached = [
            l
            for l in rule.body
            if l is not lit and isinstance(l, (Compare, CondLit)) and l.vars() & lit.vars()
        ]
        if attached:
            group = [lit] + attached
            if _guard_ok(rule, group):
                out.append((group, [NegConj(tuple(group))]))
    return out


def _complement_merge_once(rules: list[Rule], ctx: Context) -> Optional[list[Rule]]:
    """Drop one guard whose opposite case is impossible or already covered."""
    for i, rule in enumerate(rules):
        for group, comp in _guard_candidates(rule):
            rest = tuple(l for l in rule.body if l not in group)
            if not _covers_head(rule, rest):
                continue
            test = _simplify_rule(Rule(rule.head, rest + tuple(comp)), ctx)
            covered = test is None
            if not covered:
                covered = any(
                    j != i and _subsumes(other, test, ctx)
                    for j, other in enumerate(rules)
                )
            if covered:
                merged = _simplify_rule(Rule(rule.head, rest), ctx)
                out = list(rules)
                if merged is None:
                    out.pop(i)
                else:
                    out[i] = merged
                ctx.note(f"merged case split on {rule.head.pred}")
                return out
    return None


def _covers_head(rule: Rule, body) -> bool:
    """The remaining body still binds every head variable positively."""
    rest_vars: set = set()
    for other in body:
        if isinstance(other, RelLit) and not other.neg:
            rest_vars |= other.vars()
        elif isinstance(other, (FnAssign, IdAssign)):
            rest_vars |= other.vars()
    return set(rule.head.vars()) <= rest_vars


def _reduce(rules: Sequence[Rule], ctx: Context, defs: Mapping[str, Sequence[Rule]]) -> list[Rule]:
    """Unfold through `defs` and own earlier strata, then simplify fully."""
    done: dict = {k: list(v) for k, v in defs.items()}
    out: list[Rule] = []
    for group in stratify(list(rules)):
        expanded = apply_deduction(group, done)
        simplified: list[Rule] = []
        for r in expanded:
            s = _simplify_rule(r, ctx)
            if s is not None:
                simplified.append(s)
        simplified = apply_subsumption(simplified, ctx)
        while True:
            merged = _complement_merge_once(simplified, ctx)
            if merged is None:
                break
            simplified = apply_subsumption(merged, ctx)
        for r in simplified:
            done.setdefault(r.head.pred, []).append(r)
        # a head with no surviving rules must still shadow earlier defs
        for r in group:
            done.setdefault(r.head.pred, [])
        out.extend(simplified)
    return out


# ---------------------------------------------------------------------------
# Verdict
# ---------------------------------------------------------------------------


def _is_identity(rule: Rule) -> bool:
    if len(rule.body) != 1:
        return False
    (lit,) = rule.body
    if not (isinstance(lit, RelLit) and not lit.neg and lit.pred == f"{rule.head.pred}_D"):
        return False
    if len(lit.args) != len(rule.head.args):
        return False
    seen: set = set()
    for a, b in zip(rule.head.args, lit.args):
        if not (isinstance(a, Var) and isinstance(b, Var) and a.name == b.name):
            return False
        if a.name in seen:
            return False
        seen.add(a.name)
    return True


def _generator_form(rule: Rule, base: frozenset) -> bool:
    """Residual auxiliary rules must be fully reduced re-derivations:
    bodies over the base state plus value/id assignments only."""
    for lit in rule.body:
        if isinstance(lit, (FnAssign, IdAssign, Compare, CondLit)):
            continue
        if isinstance(lit, RelLit):
            if lit.neg or lit.pred not in base:
                return False
        elif isinstance(lit, NegConj):
            if not _neg_over_base(lit, base):
                return False
        else:
            return False
    return True


def _neg_over_base(neg: NegConj, base: frozenset) -> bool:
    for it in neg.items:
        if isinstance(it, RelLit) and it.pred not in base:
            return False
        if isinstance(it, NegConj) and not _neg_over_base(it, base):
            return False
    return True


def check_direction(smo: cat.SmoInstance, g: cat.Genealogy, direction: str) -> Verdict:
    comp = compose_roundtrip(smo, g, direction)
    base = frozenset(f"{p}_D" for p in comp.data_heads) | frozenset(
        p for p in comp.ctx.keyed
    )
    residual: list[str] = []
    covered: set = set()
    for rule in comp.rules:
        head = rule.head.pred
        if head in comp.data_heads:
            if _is_identity(rule):
                if head in covered:
                    residual.append(print_rule(rule) + "  -- duplicate identity")
                covered.add(head)
            else:
                residual.append(print_rule(rule))
        elif head in comp.aux_heads:
            if not _generator_form(rule, base):
                residual.append(print_rule(rule))
        else:
            residual.append(print_rule(rule))
    missing = comp.data_heads - covered
    for m in sorted(missing):
        residual.append(f"-- no rule reproduces {m} from {m}_D")
    return Verdict(
        smo_id=smo.id,
        direction=direction,
        identity=not residual,
        residual=tuple(residual),
        proof=tuple(comp.ctx.steps),
    )


def check_bidirectional(smo: cat.SmoInstance, g: cat.Genealogy) -> tuple[Verdict, Verdict]:
    """Both round-trip directions for one SMO."""
    if smo.kind in ("CreateTable", "DropTable", "RenameTable", "RenameColumn"):
        ok = lambda d: Verdict(smo.id, d, True, (), ("no mapping rules",))
        return (ok("src"), ok("tgt"))
    return (check_direction(smo, g, "src"), check_direction(smo, g, "tgt"))


def verify_all(g: cat.Genealogy) -> list[Verdict]:
    out: list[Verdict] = []
    for sid in sorted(g.smos, key=lambda s: int(s.lstrip("s") or 0)):
        out.extend(check_bidirectional(g.smos[sid], g))
    return out
