"""Datalog rule IR, canonical text form, stratification and evaluation.

Rules are non-recursive-with-negation Datalog extended with:
  * condition literals `[a < 5 AND b = 'x']` over bound variables,
  * computed assignments `x := expr` (scalar expressions),
  * memoized generator assignments `x := @name(args)` (engine-issued ids),
  * negated conjunctions `not (Lit, Lit, ...)` with private variables.

Relations are sets of value tuples.  Evaluation is bottom-up with hash
joins, one stratum at a time; negation and negated conjunctions may only
refer to lower strata.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

from . import conditions as C
from .values import CellError, Value, is_omega

log = logging.getLogger(__name__)


class InvariantError(Exception):
    """A data invariant would be violated (key conflict, broken reference...)."""


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Var:
    name: str

    def __repr__(self):
        return f"Var({self.name})"


@dataclass(frozen=True)
class Const:
    value: Value

    def __repr__(self):
        return f"Const({self.value!r})"


Term = Union[Var, Const]


def term_vars(t: Term) -> frozenset[str]:
    return frozenset({t.name}) if isinstance(t, Var) else frozenset()


# ---------------------------------------------------------------------------
# Literals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RelLit:
    pred: str
    args: tuple[Term, ...]
    neg: bool = False
    old: bool = False  # read the pre-change state instead of the current one

    def vars(self) -> frozenset[str]:
        out: set[str] = set()
        for a in self.args:
            if isinstance(a, Var):
                out.add(a.name)
        return frozenset(out)


@dataclass(frozen=True)
class CondLit:
    """A boolean condition whose column names refer to rule variables."""

    cond: C.Condition

    def vars(self) -> frozenset[str]:
        return C.condition_columns(self.cond)


@dataclass(frozen=True)
class Compare:
    left: Term
    op: str  # = != < <= > >=
    right: Term

    def vars(self) -> frozenset[str]:
        return term_vars(self.left) | term_vars(self.right)


@dataclass(frozen=True)
class FnAssign:
    """`out := expr` where expr's column names refer to rule variables."""

    out: Var
    expr: C.Expression

    def vars(self) -> frozenset[str]:
        return frozenset({self.out.name}) | C.expression_columns(self.expr)

    def input_vars(self) -> frozenset[str]:
        return C.expression_columns(self.expr)


@dataclass(frozen=True)
class IdAssign:
    """`out := @fn(args)`: engine-managed id generator, memoized per fn+args."""

    out: Var
    fn: str
    args: tuple[Term, ...]

    def vars(self) -> frozenset[str]:
        out: set[str] = {self.out.name}
        for a in self.args:
            out |= term_vars(a)
        return frozenset(out)

    def input_vars(self) -> frozenset[str]:
        out: set[str] = set()
        for a in self.args:
            out |= term_vars(a)
        return frozenset(out)


@dataclass(frozen=True)
class NegConj:
    """`not (L1, ..., Lk)`: no extension of the outer binding satisfies all Li.

    Variables appearing only inside the conjunction are existential.
    """

    items: tuple["Literal", ...]

    def vars(self) -> frozenset[str]:
        out: set[str] = set()
        for it in self.items:
            out |= it.vars()
        return frozenset(out)


Literal = Union[RelLit, CondLit, Compare, FnAssign, IdAssign, NegConj]


@dataclass(frozen=True)
class Rule:
    head: RelLit
    body: tuple[Literal, ...]

    def vars(self) -> frozenset[str]:
        out = set(self.head.vars())
        for lit in self.body:
            out |= lit.vars()
        return frozenset(out)

    def __str__(self):
        return print_rule(self)


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[Rule, ...]

    def __iter__(self):
        return iter(self.rules)

    def __len__(self):
        return len(self.rules)

    def head_preds(self) -> frozenset[str]:
        return frozenset(r.head.pred for r in self.rules)

    def body_preds(self) -> frozenset[str]:
        out: set[str] = set()
        for r in self.rules:
            for lit in r.body:
                out |= _rel_preds(lit)
        return frozenset(out)

    def __str__(self):
        return "\n".join(print_rule(r) for r in self.rules)


def _rel_preds(lit: Literal, include_old: bool = False) -> set[str]:
    if isinstance(lit, RelLit):
        return set() if (lit.old and not include_old) else {lit.pred}
    if isinstance(lit, NegConj):
        out: set[str] = set()
        for it in lit.items:
            out |= _rel_preds(it, include_old)
        return out
    return set()


# ---------------------------------------------------------------------------
# Substitution and renaming helpers
# ---------------------------------------------------------------------------


def subst_term(t: Term, s: Mapping[str, Term]) -> Term:
    if isinstance(t, Var) and t.name in s:
        return s[t.name]
    return t


def _subst_cond_names(s: Mapping[str, Term]) -> tuple[dict[str, str], dict[str, Value]]:
    """Split a term substitution into a column-rename map and a constant map."""
    renames: dict[str, str] = {}
    consts: dict[str, Value] = {}
    for k, v in s.items():
        if isinstance(v, Var):
            renames[k] = v.name
        else:
            consts[k] = v.value
    return renames, consts


def _subst_condition(cond: C.Condition, s: Mapping[str, Term]) -> C.Condition:
    renames, consts = _subst_cond_names(s)

    def walk(node):
        if isinstance(node, C.Col):
            if node.name in consts:
                return C.Lit(consts[node.name])
            return C.Col(renames.get(node.name, node.name))
        if isinstance(node, C.Lit):
            return node
        if isinstance(node, C.Cmp):
            return C.Cmp(walk(node.left), node.op, walk(node.right))
        if isinstance(node, C.Not):
            return C.Not(walk(node.item))
        if isinstance(node, C.And):
            return C.And(tuple(walk(x) for x in node.items))
        if isinstance(node, C.Or):
            return C.Or(tuple(walk(x) for x in node.items))
        if isinstance(node, C.BoolConst):
            return node
        raise TypeError(repr(node))

    return walk(cond)


def _subst_expression(expr: C.Expression, s: Mapping[str, Term]) -> C.Expression:
    renames, consts = _subst_cond_names(s)

    def walk(node):
        if isinstance(node, C.Col):
            if node.name in consts:
                return C.Lit(consts[node.name])
            return C.Col(renames.get(node.name, node.name))
        if isinstance(node, C.Lit):
            return node
        if isinstance(node, C.Neg):
            return C.Neg(walk(node.item))
        if isinstance(node, C.BinOp):
            return C.BinOp(walk(node.left), node.op, walk(node.right))
        raise TypeError(repr(node))

    return walk(expr)


def subst_literal(lit: Literal, s: Mapping[str, Term]) -> Literal:
    if isinstance(lit, RelLit):
        return RelLit(lit.pred, tuple(subst_term(a, s) for a in lit.args), lit.neg, lit.old)
    if isinstance(lit, Compare):
        return Compare(subst_term(lit.left, s), lit.op, subst_term(lit.right, s))
    if isinstance(lit, CondLit):
        return CondLit(_subst_condition(lit.cond, s))
    if isinstance(lit, FnAssign):
        out = subst_term(lit.out, s)
        if not isinstance(out, Var):
            raise ValueError("cannot substitute a constant for an assignment output")
        return FnAssign(out, _subst_expression(lit.expr, s))
    if isinstance(lit, IdAssign):
        out = subst_term(lit.out, s)
        if not isinstance(out, Var):
            raise ValueError("cannot substitute a constant for an assignment output")
        return IdAssign(out, lit.fn, tuple(subst_term(a, s) for a in lit.args))
    if isinstance(lit, NegConj):
        return NegConj(tuple(subst_literal(it, s) for it in lit.items))
    raise TypeError(repr(lit))


def subst_rule(rule: Rule, s: Mapping[str, Term]) -> Rule:
    head = subst_literal(rule.head, s)
    assert isinstance(head, RelLit)
    return Rule(head, tuple(subst_literal(l, s) for l in rule.body))


def rename_preds(rule: Rule, mapping: Mapping[str, str]) -> Rule:
    def walk(lit: Literal) -> Literal:
        if isinstance(lit, RelLit):
            return RelLit(mapping.get(lit.pred, lit.pred), lit.args, lit.neg, lit.old)
        if isinstance(lit, NegConj):
            return NegConj(tuple(walk(it) for it in lit.items))
        return lit

    head = walk(rule.head)
    assert isinstance(head, RelLit)
    return Rule(head, tuple(walk(l) for l in rule.body))


_fresh_counter = itertools.count(1)


def fresh_var(hint: str = "v") -> Var:
    return Var(f"{hint}·{next(_fresh_counter)}")


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------


def print_term(t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    v = t.value
    if is_omega(v):
        return "NULL"
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    if isinstance(v, str):
        return "'" + v.replace("'", "''") + "'"
    return repr(v)


def _print_literal(lit: Literal, anon: frozenset[str]) -> str:
    def tname(t: Term) -> str:
        if isinstance(t, Var) and t.name in anon:
            return "_"
        return print_term(t)

    if isinstance(lit, RelLit):
        args = ", ".join(tname(a) for a in lit.args)
        name = lit.pred + ("@o" if lit.old else "")
        s = f"{name}({args})"
        return f"not {s}" if lit.neg else s
    if isinstance(lit, Compare):
        return f"{tname(lit.left)} {lit.op} {tname(lit.right)}"
    if isinstance(lit, CondLit):
        return "[" + C.print_condition(lit.cond) + "]"
    if isinstance(lit, FnAssign):
        return f"{lit.out.name} := {C.print_expression(lit.expr)}"
    if isinstance(lit, IdAssign):
        args = ", ".join(tname(a) for a in lit.args)
        return f"{lit.out.name} := @{lit.fn}({args})"
    if isinstance(lit, NegConj):
        inner = ", ".join(_print_literal(it, anon) for it in lit.items)
        return f"not ({inner})"
    raise TypeError(repr(lit))


def _single_use_vars(rule: Rule) -> frozenset[str]:
    counts: dict[str, int] = {}

    def bump(lit: Literal):
        if isinstance(lit, RelLit):
            for a in lit.args:
                if isinstance(a, Var):
                    counts[a.name] = counts.get(a.name, 0) + 1
        elif isinstance(lit, Compare):
            for a in (lit.left, lit.right):
                if isinstance(a, Var):
                    counts[a.name] = counts.get(a.name, 0) + 1
        elif isinstance(lit, CondLit):
            for v in lit.vars():
                counts[v] = counts.get(v, 0) + 1
        elif isinstance(lit, (FnAssign, IdAssign)):
            for v in lit.vars():
                counts[v] = counts.get(v, 0) + 1
        elif isinstance(lit, NegConj):
            for it in lit.items:
                bump(it)

    bump(rule.head)
    for lit in rule.body:
        bump(lit)
    return frozenset(v for v, n in counts.items() if n == 1)


def print_rule(rule: Rule, hide_single_use: bool = True) -> str:
    anon = _single_use_vars(rule) if hide_single_use else frozenset()
    # never anonymize head variables
    anon -= rule.head.vars()
    head = _print_literal(RelLit(rule.head.pred, rule.head.args), anon)
    if not rule.body:
        return f"{head}."
    body = ", ".join(_print_literal(l, anon) for l in rule.body)
    return f"{head} <- {body}."


# ---------------------------------------------------------------------------
# Stratification
# ---------------------------------------------------------------------------


def stratify(rules: Union[RuleSet, Sequence[Rule]]) -> list[list[Rule]]:
    """Order rules into strata so negation only looks at finished predicates.

    Returns a list of rule groups.  Each group's head predicates may depend
    on each other positively (evaluated to fixpoint); every negated
    reference (plain negation or inside a negated conjunction) must point
    at a predicate finished in an earlier group or at the input data.
    Raises InvariantError for negation cycles.
    """
    rule_list = list(rules)
    heads = {r.head.pred for r in rule_list}

    pos_edges: dict[str, set[str]] = {h: set() for h in heads}
    neg_edges: dict[str, set[str]] = {h: set() for h in heads}

    def collect(lit: Literal, under_neg: bool, pos: set[str], neg: set[str]):
        if isinstance(lit, RelLit):
            if lit.old:
                return  # reads the snapshot, not a computed predicate
            if lit.pred not in heads:
                return
            (neg if (under_neg or lit.neg) else pos).add(lit.pred)
        elif isinstance(lit, NegConj):
            for it in lit.items:
                collect(it, True, pos, neg)

    for r in rule_list:
        for lit in r.body:
            collect(lit, False, pos_edges[r.head.pred], neg_edges[r.head.pred])

    # Tarjan-free SCC via iterative Kosaraju on the (pos ∪ neg) graph.
    all_edges = {h: pos_edges[h] | neg_edges[h] for h in heads}
    order: list[str] = []
    seen: set[str] = set()
    for start in sorted(heads):
        if start in seen:
            continue
        stack = [(start, iter(sorted(all_edges[start])))]
        seen.add(start)
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append((nxt, iter(sorted(all_edges[nxt]))))
                    advanced = True
                    break
            if not advanced:
                order.append(node)
                stack.pop()

    rev: dict[str, set[str]] = {h: set() for h in heads}
    for a, outs in all_edges.items():
        for b in outs:
            rev[b].add(a)
    comp: dict[str, int] = {}
    ncomp = 0
    for node in reversed(order):
        if node in comp:
            continue
        stack = [node]
        comp[node] = ncomp
        while stack:
            cur = stack.pop()
            for nxt in rev[cur]:
                if nxt not in comp:
                    comp[nxt] = ncomp
                    stack.append(nxt)
        ncomp += 1

    for h in heads:
        for tgt in neg_edges[h]:
            if comp[h] == comp[tgt]:
                raise InvariantError(
                    f"negation cycle through predicates {h!r} and {tgt!r}"
                )

    # topological order of components (components on targets must come first)
    comp_deps: dict[int, set[int]] = {i: set() for i in range(ncomp)}
    for a, outs in all_edges.items():
        for b in outs:
            if comp[a] != comp[b]:
                comp_deps[comp[a]].add(comp[b])

    done: set[int] = set()
    comp_order: list[int] = []
    while len(done) < ncomp:
        progress = False
        for i in range(ncomp):
            if i in done:
                continue
            if comp_deps[i] <= done:
                comp_order.append(i)
                done.add(i)
                progress = True
        if not progress:  # pragma: no cover - cycles already merged into SCCs
            raise InvariantError("dependency resolution failed")

    strata: list[list[Rule]] = []
    for ci in comp_order:
        group = [r for r in rule_list if comp[r.head.pred] == ci]
        if group:
            strata.append(group)
    return strata


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

Relation = set  # set[tuple[Value, ...]]
State = dict  # dict[str, Relation]

IdGen = Callable[[str, tuple], Value]


class _Indexes:
    """Per-round hash indexes: (pred, bound-positions) -> value-key -> rows."""

    def __init__(self, state: State):
        self.state = state
        self.cache: dict[tuple[str, tuple[int, ...]], dict] = {}

    def lookup(self, pred: str, positions: tuple[int, ...], key: tuple) -> Iterable[tuple]:
        rel = self.state.get(pred, ())
        if not positions:
            return rel
        ck = (pred, positions)
        idx = self.cache.get(ck)
        if idx is None:
            idx = {}
            for row in rel:
                k = tuple(row[i] for i in positions)
                idx.setdefault(k, []).append(row)
            self.cache[ck] = idx
        return idx.get(key, ())

    def invalidate(self, pred: str):
        for ck in [k for k in self.cache if k[0] == pred]:
            del self.cache[ck]


def _order_body(
    body: Sequence[Literal],
    head_vars: frozenset[str],
    pre_bound: frozenset[str] = frozenset(),
) -> list[Literal]:
    """Static greedy join order: filters as soon as ready, then best join."""
    remaining = list(body)
    bound: set[str] = set(pre_bound)
    ordered: list[Literal] = []

    def ready(lit: Literal) -> bool:
        if isinstance(lit, RelLit):
            if not lit.neg:
                return True
            outside: set[str] = set(head_vars)
            for other in remaining:
                if other is not lit:
                    outside |= other.vars()
            return all(v in bound or v not in outside for v in lit.vars())
        if isinstance(lit, Compare):
            free = [v for v in lit.vars() if v not in bound]
            if not free:
                return True
            # binding equality: one free variable on one side of `=`
            return lit.op == "=" and len(free) == 1
        if isinstance(lit, CondLit):
            return lit.vars() <= bound
        if isinstance(lit, (FnAssign, IdAssign)):
            return lit.input_vars() <= bound
        if isinstance(lit, NegConj):
            outside: set[str] = set(head_vars)
            for other in remaining:
                if other is not lit:
                    outside |= other.vars()
            return all(v in bound or v not in outside for v in lit.vars())
        raise TypeError(repr(lit))

    while remaining:
        # 1. cheap filters/assignments first
        pick = None
        for lit in remaining:
            if not isinstance(lit, RelLit) and not isinstance(lit, NegConj) and ready(lit):
                pick = lit
                break
        # 2. then negations whose variables are settled
        if pick is None:
            for lit in remaining:
                if (isinstance(lit, NegConj) or (isinstance(lit, RelLit) and lit.neg)) and ready(lit):
                    pick = lit
                    break
        # 3. then the positive literal with the most bound positions
        if pick is None:
            best = (-1, -1)
            for i, lit in enumerate(remaining):
                if isinstance(lit, RelLit) and not lit.neg:
                    nb = sum(
                        1
                        for a in lit.args
                        if isinstance(a, Const) or (isinstance(a, Var) and a.name in bound)
                    )
                    if nb > best[0]:
                        best = (nb, i)
            if best[1] >= 0:
                pick = remaining[best[1]]
        if pick is None:
            raise InvariantError(
                "unsafe rule body: cannot order literals "
                + ", ".join(_print_literal(l, frozenset()) for l in remaining)
            )
        ordered.append(pick)
        remaining.remove(pick)
        bound |= pick.vars()
    return ordered


def _tv(t: Term, binding: dict) -> Value:
    if isinstance(t, Const):
        return t.value
    return binding[t.name]


def _match_row(args: tuple[Term, ...], row: tuple, binding: dict) -> Optional[dict]:
    new = binding
    copied = False
    for a, v in zip(args, row):
        if isinstance(a, Const):
            if not _values_eq(a.value, v):
                return None
        else:
            cur = new.get(a.name, _MISSING)
            if cur is _MISSING:
                if not copied:
                    new = dict(new)
                    copied = True
                new[a.name] = v
            elif not _values_eq(cur, v):
                return None
    return new if copied else dict(new)


_MISSING = object()


def compare_terms(a: Value, op: str, b: Value) -> bool:
    """Rule-level comparison: `=`/`!=` are identity tests where ω equals only
    itself (so `A != NULL` means 'A is present'); orderings fail on ω."""
    if op == "=":
        return _values_eq(a, b)
    if op == "!=":
        return not _values_eq(a, b)
    if is_omega(a) or is_omega(b):
        return False
    return C.compare_values(a, op, b)


def _values_eq(a: Value, b: Value) -> bool:
    if is_omega(a) or is_omega(b):
        return is_omega(a) and is_omega(b)
    if isinstance(a, bool) != isinstance(b, bool):
        return False
    return a == b


def _eval_literal(
    lit: Literal,
    binding: dict,
    idx: _Indexes,
    pre_idx: _Indexes,
    idgen: Optional[IdGen],
) -> Iterable[dict]:
    if isinstance(lit, RelLit):
        source = pre_idx if lit.old else idx
        if lit.neg:
            for _ in _scan(lit, binding, source):
                return
            yield binding
            return
        yield from _scan(lit, binding, source)
        return
    if isinstance(lit, Compare):
        lfree = isinstance(lit.left, Var) and lit.left.name not in binding
        rfree = isinstance(lit.right, Var) and lit.right.name not in binding
        if lfree or rfree:
            if lit.op != "=" or (lfree and rfree):
                raise InvariantError(f"unbound variable in comparison {lit}")
            new = dict(binding)
            if lfree:
                new[lit.left.name] = _tv(lit.right, binding)
            else:
                new[lit.right.name] = _tv(lit.left, binding)
            yield new
            return
        if compare_terms(_tv(lit.left, binding), lit.op, _tv(lit.right, binding)):
            yield binding
        return
    if isinstance(lit, CondLit):
        row = {v: binding[v] for v in lit.vars()}
        if C.eval_condition(lit.cond, row):
            yield binding
        return
    if isinstance(lit, FnAssign):
        row = {v: binding[v] for v in lit.input_vars()}
        try:
            val = C.eval_expression(lit.expr, row)
        except CellError as e:
            raise InvariantError(f"expression failed in {lit}: {e}") from None
        prev = binding.get(lit.out.name, _MISSING)
        if prev is _MISSING:
            new = dict(binding)
            new[lit.out.name] = val
            yield new
        elif _values_eq(prev, val):
            yield binding
        return
    if isinstance(lit, IdAssign):
        if idgen is None:
            raise InvariantError(f"no id generator available for {lit}")
        key = tuple(_tv(a, binding) for a in lit.args)
        val = idgen(lit.fn, key)
        prev = binding.get(lit.out.name, _MISSING)
        if prev is _MISSING:
            new = dict(binding)
            new[lit.out.name] = val
            yield new
        elif _values_eq(prev, val):
            yield binding
        return
    if isinstance(lit, NegConj):
        ordered = _order_body(lit.items, frozenset(binding), pre_bound=frozenset(binding))
        for _ in _join(ordered, binding, idx, pre_idx, idgen):
            return
        yield binding
        return
    raise TypeError(repr(lit))


def _scan(lit: RelLit, binding: dict, idx: _Indexes) -> Iterable[dict]:
    positions = []
    key = []
    for i, a in enumerate(lit.args):
        if isinstance(a, Const):
            positions.append(i)
            key.append(a.value)
        elif a.name in binding:
            positions.append(i)
            key.append(binding[a.name])
    for row in idx.lookup(lit.pred, tuple(positions), tuple(key)):
        m = _match_row(lit.args, row, binding)
        if m is not None:
            yield m


def _join(
    ordered: Sequence[Literal],
    binding: dict,
    idx: _Indexes,
    pre_idx: _Indexes,
    idgen: Optional[IdGen],
) -> Iterable[dict]:
    if not ordered:
        yield binding
        return
    first, rest = ordered[0], ordered[1:]
    for b in _eval_literal(first, binding, idx, pre_idx, idgen):
        yield from _join(rest, b, idx, pre_idx, idgen)


def evaluate(
    rules: Union[RuleSet, Sequence[Rule]],
    edb: Mapping[str, Iterable[tuple]],
    pre_state: Optional[Mapping[str, Iterable[tuple]]] = None,
    idgen: Optional[IdGen] = None,
    key_preds: Optional[frozenset] = None,
) -> State:
    """Evaluate rules bottom-up over the given data.

    Returns a fresh state containing every input relation plus everything
    derived.  `pre_state` backs the `@o` (pre-change) literals.  `idgen`
    resolves generator assignments.  For every predicate named in
    `key_preds`, two derived tuples agreeing on the first column but
    differing elsewhere raise InvariantError.
    """
    state: State = {p: set(rel) for p, rel in edb.items()}
    pre: State = {p: set(rel) for p, rel in (pre_state or {}).items()}
    idx = _Indexes(state)
    pre_idx = _Indexes(pre)
    keyed = key_preds or frozenset()

    for group in stratify(rules):
        plans = [(r, _order_body(r.body, r.head.vars())) for r in group]
        recursive = _group_recursive(group)
        changed = True
        while changed:
            changed = False
            for rule, ordered in plans:
                head = rule.head
                rel = state.setdefault(head.pred, set())
                fresh: list[tuple] = []
                for b in _join(ordered, {}, idx, pre_idx, idgen):
                    row = tuple(_tv(a, b) for a in head.args)
                    if row not in rel:
                        fresh.append(row)
                if fresh:
                    rel.update(fresh)
                    idx.invalidate(head.pred)
                    changed = True
            if not recursive:
                break

    for pred in keyed:
        rel = state.get(pred)
        if not rel:
            continue
        seen: dict[Value, tuple] = {}
        for row in rel:
            k = row[0]
            if k in seen and seen[k] != row:
                raise InvariantError(
                    f"key conflict in {pred}: rows {seen[k]!r} and {row!r} share key {k!r}"
                )
            seen[k] = row
    return state


def _group_recursive(group: Sequence[Rule]) -> bool:
    heads = {r.head.pred for r in group}
    for r in group:
        for lit in r.body:
            for p in _rel_preds(lit):
                if p in heads:
                    return True
    return False
