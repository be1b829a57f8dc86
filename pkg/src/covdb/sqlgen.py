"""SQL emission: views for reads and trigger sketches for writes.

Every virtual table version can be exposed to a plain SQL consumer as a
view over the physically stored relations: one UNION ALL branch per
mapping rule, with joins for shared variables, plain predicates for
condition literals and NOT EXISTS subselects for negations.  Rules that
call the engine's memoized id generators have no pure-SQL equivalent and
are refused; such tables must be read through the native propagation
path instead.

Write propagation is sketched as PostgreSQL-flavored statement-level
triggers whose bodies encode the change rules as conditional DML against
the neighbouring relations.  The trigger text is snapshot-tested, never
executed by this engine.

ω is rendered as SQL NULL; equality against it uses IS NOT DISTINCT FROM
so the emitted text keeps the engine's ω = ω semantics.
"""

from __future__ import annotations

from typing import Mapping, Optional, Sequence

from . import catalog as cat
from . import conditions as C
from .dlog import (
    Compare,
    CondLit,
    Const,
    FnAssign,
    IdAssign,
    NegConj,
    RelLit,
    Rule,
    RuleSet,
    Term,
    Var,
    stratify,
)
from .rulegen import delta_rules_for, rules_for
from .store import stored_relations
from .values import is_omega


class SqlGenError(ValueError):
    """The rule set has no faithful SQL rendering (id generators, ...)."""


# ---------------------------------------------------------------------------
# Scalar rendering
# ---------------------------------------------------------------------------


def _sql_value(v) -> str:
    if is_omega(v):
        return "NULL"
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    if isinstance(v, str):
        return "'" + v.replace("'", "''") + "'"
    return repr(v)


def _qualify(tree, binding: Mapping[str, str]):
    """Replace rule-variable column refs with their SQL expressions."""
    if isinstance(tree, C.Col):
        return C.Col(binding[tree.name])
    if isinstance(tree, C.Lit):
        return tree
    if isinstance(tree, C.Cmp):
        return C.Cmp(_qualify(tree.left, binding), tree.op, _qualify(tree.right, binding))
    if isinstance(tree, C.Not):
        return C.Not(_qualify(tree.item, binding))
    if isinstance(tree, C.And):
        return C.And(tuple(_qualify(x, binding) for x in tree.items))
    if isinstance(tree, C.Or):
        return C.Or(tuple(_qualify(x, binding) for x in tree.items))
    if isinstance(tree, C.BoolConst):
        return tree
    if isinstance(tree, C.BinOp):
        return C.BinOp(_qualify(tree.left, binding), tree.op, _qualify(tree.right, binding))
    if isinstance(tree, C.Neg):
        return C.Neg(_qualify(tree.item, binding))
    raise TypeError(f"not a condition/expression: {tree!r}")


def _term_sql(t: Term, binding: Mapping[str, str]) -> str:
    if isinstance(t, Const):
        return _sql_value(t.value)
    return binding[t.name]


def _eq_sql(a: str, b: str) -> str:
    # NULL-safe equality: the engine's ω equals itself and nothing else.
    if a == "NULL" or b == "NULL":
        return f"{a} IS NOT DISTINCT FROM {b}"
    return f"{a} = {b}"


def _compare_sql(lit: Compare, binding: Mapping[str, str]) -> str:
    left = _term_sql(lit.left, binding)
    right = _term_sql(lit.right, binding)
    if lit.op == "=":
        return _eq_sql(left, right)
    if lit.op == "!=" and (left == "NULL" or right == "NULL"):
        return f"{left} IS DISTINCT FROM {right}"
    return f"{left} {lit.op} {right}"


# ---------------------------------------------------------------------------
# One rule -> one SELECT
# ---------------------------------------------------------------------------


class _RuleSql:
    """Translates a single rule body into FROM/WHERE fragments."""

    def __init__(
        self,
        columns_of: Mapping[str, Sequence[str]],
        rename: Mapping[str, str],
        allow_old: bool = False,
    ):
        self.columns_of = columns_of
        self.rename = rename
        # trigger bodies run before the propagated change lands, so the
        # pre-change state of every other relation is just its current state
        self.allow_old = allow_old

    def _table(self, lit: RelLit) -> str:
        if lit.old:
            return f'"{lit.pred}"'
        name = self.rename.get(lit.pred, lit.pred)
        if name == "changed_rows":
            return name
        return f'"{name}"'

    def _positive(self, lit: RelLit, alias: str, binding: dict, where: list) -> None:
        cols = self.columns_of[lit.pred]
        if len(cols) != len(lit.args):
            raise SqlGenError(f"arity mismatch on {lit.pred}")
        for col, arg in zip(cols, lit.args):
            ref = f"{alias}.{col}"
            if isinstance(arg, Const):
                where.append(_eq_sql(ref, _sql_value(arg.value)))
            elif arg.name in binding:
                where.append(_eq_sql(ref, binding[arg.name]))
            else:
                binding[arg.name] = ref

    def _body(self, literals, binding: dict, prefix: str):
        """Returns (from-items, where-conjuncts); binding is extended."""
        positives = [l for l in literals if isinstance(l, RelLit) and not l.neg]
        frm: list[str] = []
        where: list[str] = []
        for i, lit in enumerate(positives, 1):
            if lit.old and not self.allow_old:
                raise SqlGenError(
                    f"rule reads the pre-change state of {lit.pred}; "
                    "views cannot express it"
                )
            alias = f"{prefix}{i}"
            frm.append(f"{self._table(lit)} {alias}")
            self._positive(lit, alias, binding, where)
        for lit in literals:
            if isinstance(lit, RelLit) and not lit.neg:
                continue
            if isinstance(lit, IdAssign):
                raise SqlGenError(
                    f"rule calls the id generator @{lit.fn}; generated "
                    "identifiers have no SQL view equivalent - use the "
                    "engine's native propagation for this table"
                )
            if isinstance(lit, FnAssign):
                expr = C.print_expression(_qualify(lit.expr, binding))
                if lit.out.name in binding:
                    where.append(_eq_sql(binding[lit.out.name], expr))
                else:
                    binding[lit.out.name] = expr
            elif isinstance(lit, Compare):
                where.append(_compare_sql(lit, binding))
            elif isinstance(lit, CondLit):
                where.append(C.print_condition(_qualify(lit.cond, binding), 3))
            elif isinstance(lit, RelLit):  # negated
                where.append(self._not_exists(RelLit(lit.pred, lit.args, False, lit.old), binding))
            elif isinstance(lit, NegConj):
                where.append(self._not_exists_group(lit.items, binding))
            else:
                raise SqlGenError(f"unsupported literal {lit!r}")
        return frm, where

    def _not_exists(self, lit: RelLit, binding: Mapping[str, str]) -> str:
        return self._not_exists_group((lit,), binding)

    def _not_exists_group(self, items, binding: Mapping[str, str]) -> str:
        inner = dict(binding)
        frm, where = self._body(
            [RelLit(l.pred, l.args, False, l.old) if isinstance(l, RelLit) else l
             for l in items],
            inner,
            "s",
        )
        if not frm:
            if not where:
                return "FALSE"  # negation of the empty conjunction
            # pure condition group: NOT (conjunction)
            return "NOT (" + " AND ".join(where) + ")"
        sql = "NOT EXISTS (SELECT 1 FROM " + ", ".join(frm)
        if where:
            sql += " WHERE " + " AND ".join(where)
        return sql + ")"

    def select(self, rule: Rule, out_columns: Sequence[str]) -> str:
        binding: dict = {}
        frm, where = self._body(list(rule.body), binding, "t")
        parts = []
        for col, arg in zip(out_columns, rule.head.args):
            parts.append(f"{_term_sql(arg, binding)} AS {col}")
        sql = "SELECT " + ", ".join(parts)
        if frm:
            sql += "\n  FROM " + ", ".join(frm)
        if where:
            sql += "\n  WHERE " + "\n    AND ".join(where)
        return sql


def _relation_columns(g: cat.Genealogy) -> dict:
    """Every predicate the rules may mention -> its column names."""
    out: dict = {}
    for tid, tv in g.table_versions.items():
        out[tid] = ("p",) + tv.columns
    for smo in g.smos.values():
        if smo.kind == "CreateTable":
            continue
        sr = rules_for(smo, g)
        for aux in sr.aux_tables:
            out[aux.name] = aux.columns
        # scratch predicates defined inside the rule sets
        for ruleset in (sr.gamma_src, sr.gamma_tgt):
            for rule in ruleset:
                out.setdefault(
                    rule.head.pred,
                    tuple(f"c{i}" for i in range(1, len(rule.head.args) + 1)),
                )
    return out


# ---------------------------------------------------------------------------
# Views
# ---------------------------------------------------------------------------


def emit_view(
    g: cat.Genealogy,
    name: str,
    columns: Sequence[str],
    rules: Sequence[Rule],
    rename: Optional[Mapping[str, str]] = None,
) -> str:
    """CREATE VIEW with one UNION ALL branch per defining rule."""
    tr = _RuleSql(_relation_columns(g), rename or {})
    branches = [tr.select(rule, columns) for rule in rules]
    if not branches:
        empty = ", ".join(f"NULL AS {c}" for c in columns)
        branches = [f"SELECT {empty} WHERE FALSE"]
    body = "\nUNION ALL\n".join(branches)
    collist = ", ".join(columns)
    return f'CREATE VIEW "{name}" ({collist}) AS\n{body};\n'


def _defining_hop(g: cat.Genealogy, tv_id: str):
    """(smo, ruleset) whose rules derive this virtual table version."""
    tv = g.table_versions[tv_id]
    if tv.insmo is not None:
        smo = g.smos[tv.insmo]
        if smo.kind != "CreateTable" and smo.state == cat.VIRTUALIZED:
            return smo, rules_for(smo, g).gamma_tgt
    for smo in g.outsmos(tv_id):
        if smo.state == cat.MATERIALIZED:
            return smo, rules_for(smo, g).gamma_src
    return None, None


def view_sql(g: cat.Genealogy, tv_id: str) -> str:
    """View stack (scratch predicates first) deriving one table version."""
    ms = g.materialization()
    tv = g.table_versions[tv_id]
    if tv_id in ms.physical:
        return f'-- "{tv_id}" ({tv.name}) is stored physically; no view needed.\n'
    smo, ruleset = _defining_hop(g, tv_id)
    if smo is None:
        raise SqlGenError(f"no rules derive {tv_id}")
    sr = rules_for(smo, g)
    if sr.remap is not None:
        # pure rename: the view is a column-renaming projection
        src_id, tgt_id = sr.remap
        other = src_id if tv_id == tgt_id else tgt_id
        here = g.table_versions[tv_id]
        there = g.table_versions[other]
        sel = ", ".join(
            f"t1.{a} AS {b}"
            for a, b in zip(("p",) + there.columns, ("p",) + here.columns)
        )
        collist = ", ".join(("p",) + here.columns)
        return (
            f'CREATE VIEW "{tv_id}" ({collist}) AS\n'
            f'SELECT {sel}\n  FROM "{other}" t1;\n'
        )
    columns_of = _relation_columns(g)
    stored = set(stored_relations(g))
    pieces: list[str] = []
    for group in stratify(list(ruleset)):
        by_head: dict[str, list[Rule]] = {}
        for rule in group:
            by_head.setdefault(rule.head.pred, []).append(rule)
        for head in sorted(by_head):
            if head in stored:
                continue
            cols = columns_of[head]
            pieces.append(emit_view(g, head, cols, by_head[head]))
    return "\n".join(pieces)


# ---------------------------------------------------------------------------
# Triggers
# ---------------------------------------------------------------------------

_KIND_WORD = {"insert": "INSERT", "delete": "DELETE", "update": "UPDATE"}
_DELTA_PREFIX = {"insert": "delta_ins_", "delete": "delta_del_", "update": "delta_upd_"}


def _write_hop(g: cat.Genealogy, tv_id: str):
    """(smo, delta-direction) through which writes on tv reach the store."""
    smo, ruleset = _defining_hop(g, tv_id)
    if smo is None:
        return None, None
    # derived from the source side -> write back toward it, and vice versa
    if tv_id in smo.targets and smo.state == cat.VIRTUALIZED:
        return smo, "forward"
    return smo, "backward"


def _dml_for_delta(tr: _RuleSql, rule: Rule, columns_of) -> str:
    head = rule.head.pred
    for kind, prefix in _DELTA_PREFIX.items():
        if head.startswith(prefix):
            target = head[len(prefix):]
            break
    else:
        raise SqlGenError(f"not a change rule: {head}")
    cols = columns_of[target]
    select = tr.select(rule, cols)
    collist = ", ".join(cols)
    indented = "  " + select.replace("\n", "\n  ")
    if kind == "insert":
        return f'INSERT INTO "{target}" ({collist})\n{indented};'
    if kind == "delete":
        return (
            f'DELETE FROM "{target}" WHERE ({collist}) IN (\n{indented}\n);'
        )
    key = cols[0]
    if len(cols) == 1:
        return f'-- "{target}" is key-only; updates cannot change it.'
    sets = ", ".join(f"{c} = d.{c}" for c in cols[1:])
    return (
        f'UPDATE "{target}" SET {sets}\n'
        f"  FROM (\n{indented}\n  ) d\n"
        f'  WHERE "{target}".{key} = d.{key};'
    )


def emit_triggers(g: cat.Genealogy, tv_id: str) -> str:
    """INSERT/UPDATE/DELETE trigger sketches propagating writes on one table."""
    tv = g.table_versions[tv_id]
    smo, direction = _write_hop(g, tv_id)
    if smo is None:
        return f'-- "{tv_id}" ({tv.name}) has no propagation hop; no triggers.\n'
    columns_of = _relation_columns(g)
    sr = rules_for(smo, g)
    chunks: list[str] = []
    for kind in ("insert", "delete", "update"):
        if sr.remap is not None:
            chunks.append(_remap_trigger(g, tv_id, sr.remap, kind))
            continue
        deltas = delta_rules_for(smo, g, kind, direction)
        # the change set of the written table comes from the transition table
        rename = {f"{_DELTA_PREFIX[kind]}{tv_id}": "changed_rows"}
        # recompute-and-diff rules compare the post-change derived state of
        # a relation against its stored rows; name the former "<rel>_new"
        for rule in deltas:
            base = rule.head.pred[len(_DELTA_PREFIX[kind]):]
            if base != tv_id:
                rename.setdefault(base, f"{base}_new")
        cols2 = dict(columns_of)
        for rule in deltas:
            cols2.setdefault(rule.head.pred, columns_of[rule.head.pred[len(_DELTA_PREFIX[kind]):]]
                             if rule.head.pred[len(_DELTA_PREFIX[kind]):] in columns_of
                             else tuple(f"c{i}" for i in range(1, len(rule.head.args) + 1)))
            for lit in rule.body:
                if isinstance(lit, RelLit) and lit.pred.startswith(_DELTA_PREFIX[kind]):
                    base = lit.pred[len(_DELTA_PREFIX[kind]):]
                    cols2.setdefault(lit.pred, cols2.get(base, tuple(
                        f"c{i}" for i in range(1, len(lit.args) + 1))))
        tr = _RuleSql(cols2, rename, allow_old=True)
        body_stmts: list[str] = []
        for rule in deltas:
            if rule.head.pred == f"{_DELTA_PREFIX[kind]}{tv_id}":
                continue  # the written table's own change set is the input
            try:
                body_stmts.append(_dml_for_delta(tr, rule, cols2))
            except SqlGenError as e:
                body_stmts.append(f"-- not expressible in SQL: {e}")
        chunks.append(_trigger_text(tv_id, kind, body_stmts))
    return "\n".join(chunks)


def _trigger_text(tv_id: str, kind: str, body_stmts: Sequence[str]) -> str:
    fn = f"{tv_id}_{kind}_propagate"
    body = "\n  ".join(s.replace("\n", "\n  ") for s in body_stmts) or "-- nothing to do"
    return (
        f"CREATE FUNCTION {fn}() RETURNS trigger AS $$\n"
        f"BEGIN\n"
        f"  {body}\n"
        f"  RETURN NULL;\n"
        f"END;\n"
        f"$$ LANGUAGE plpgsql;\n"
        f"\n"
        f"CREATE TRIGGER {fn}_trg\n"
        f'  AFTER {_KIND_WORD[kind]} ON "{tv_id}"\n'
        f"  REFERENCING {'OLD' if kind == 'delete' else 'NEW'} TABLE AS changed_rows\n"
        f"  FOR EACH STATEMENT EXECUTE FUNCTION {fn}();\n"
    )


def _remap_trigger(g: cat.Genealogy, tv_id: str, remap, kind: str) -> str:
    src_id, tgt_id = remap
    other = src_id if tv_id == tgt_id else tgt_id
    here = ("p",) + g.table_versions[tv_id].columns
    there = ("p",) + g.table_versions[other].columns
    if kind == "insert":
        sel = ", ".join(f"d.{a} AS {b}" for a, b in zip(here, there))
        stmt = (
            f'INSERT INTO "{other}" ({", ".join(there)})\n'
            f"  SELECT {sel} FROM changed_rows d;"
        )
    elif kind == "delete":
        stmt = f'DELETE FROM "{other}" WHERE p IN (SELECT d.p FROM changed_rows d);'
    else:
        sets = ", ".join(f"{b} = d.{a}" for a, b in zip(here[1:], there[1:]))
        stmt = (
            f'UPDATE "{other}" SET {sets}\n'
            f'  FROM changed_rows d WHERE "{other}".p = d.p;'
        )
    return _trigger_text(tv_id, kind, [stmt])


def emit_all(g: cat.Genealogy, version: Optional[str] = None) -> dict:
    """tv id -> SQL text (views + triggers) for each table version."""
    if version is not None:
        ids = sorted(g.schema_versions[version])
    else:
        ids = sorted(g.table_versions)
    out: dict = {}
    for tv_id in ids:
        tv = g.table_versions[tv_id]
        header = f"-- {tv_id}: {tv.name}({', '.join(tv.columns)})\n\n"
        try:
            views = view_sql(g, tv_id)
        except SqlGenError as e:
            views = f"-- view refused: {e}\n"
        triggers = emit_triggers(g, tv_id)
        out[tv_id] = header + views + "\n" + triggers
    return out
