"""Mapping-rule generation: one pair of rule sets per SMO instance.

For every schema-modification operation the engine derives two Datalog rule
sets: `gamma_tgt` maps a source-side state to the target side and
`gamma_src` maps a target-side state back.  Auxiliary predicates capture
exactly the information that would otherwise be lost in one direction
(split remnants, dropped-column values, generated identifiers, deleted
join combinations), which is what makes the pair bidirectional.

Predicate naming: data tables are referred to by table-version id (`t3`);
auxiliary tables are `<smo id>_<label>` (`s1_Tprime`); generator functions
are `<smo id>_id<role>`.  `@o`-marked body literals read the pre-change
state of a relation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from . import bidel
from . import conditions as C
from .catalog import Genealogy, SmoInstance, TableVersion
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
    Var,
)
from .values import OMEGA

OM = Const(OMEGA)


@dataclass(frozen=True)
class AuxTable:
    name: str
    columns: tuple[str, ...]  # first column is the key when keyed
    keyed: bool
    side: str  # source | target | both (which physical side stores it)


@dataclass(frozen=True)
class IdFunction:
    name: str
    payload_columns: tuple[str, ...]


@dataclass(frozen=True)
class SmoRules:
    gamma_src: RuleSet
    gamma_tgt: RuleSet
    aux_tables: tuple[AuxTable, ...]
    id_functions: tuple[IdFunction, ...]
    # for pure renames: target data relation is the source relation unchanged
    remap: Optional[tuple[str, str]] = None  # (source tv id, target tv id)


EMPTY = RuleSet(())


def _vars(cols, reserved) -> list[Var]:
    out: list[Var] = []
    used = set(reserved)
    for c in cols:
        name = c
        while name in used:
            name += "_"
        used.add(name)
        out.append(Var(name))
    return out


def _neq_omega(vs: list[Var]):
    if len(vs) == 1:
        return [Compare(vs[0], "!=", OM)]
    return [NegConj(tuple(Compare(v, "=", OM) for v in vs))]


def _eq_omega(vs: list[Var]):
    return [Compare(v, "=", OM) for v in vs]


def _omegas(n: int) -> tuple:
    return tuple([OM] * n)


def _cond(cond: C.Condition, cols, vs: list[Var], positive: bool = True) -> CondLit:
    renamed = C.rename_columns(cond, {c: v.name for c, v in zip(cols, vs)})
    return CondLit(renamed if positive else C.Not(renamed))


def _expr(expr: C.Expression, cols, vs: list[Var]) -> C.Expression:
    return C.rename_columns(expr, {c: v.name for c, v in zip(cols, vs)})


def _permute_wide(ruleset: RuleSet, wide_id: str, concept: tuple[str, ...], actual: tuple[str, ...]) -> RuleSet:
    """Reorder every literal over the wide table from A-then-B layout to
    the table's real column order (the user may declare them in any order)."""
    if sorted(concept) != sorted(actual):
        raise ValueError(
            f"columns {concept} do not cover wide table columns {actual}"
        )
    idx = {c: i for i, c in enumerate(concept)}
    order = tuple(idx[c] for c in actual)
    if order == tuple(range(len(actual))):
        return ruleset

    def fix_lit(lit):
        if isinstance(lit, RelLit) and lit.pred == wide_id:
            key, rest = lit.args[0], lit.args[1:]
            return RelLit(lit.pred, (key, *[rest[i] for i in order]), lit.neg, lit.old)
        if isinstance(lit, NegConj):
            return NegConj(tuple(fix_lit(it) for it in lit.items))
        return lit

    return RuleSet(tuple(
        Rule(fix_lit(rule.head), tuple(fix_lit(l) for l in rule.body))
        for rule in ruleset
    ))


def _finalize(
    gamma_src: RuleSet,
    gamma_tgt: RuleSet,
    aux_specs: list[tuple[str, tuple[str, ...], bool]],
    id_functions: tuple[IdFunction, ...] = (),
    wide: Optional[tuple["TableVersion", tuple[str, ...]]] = None,
) -> SmoRules:
    """Attach aux descriptors, deriving each one's side from who writes it."""
    if wide is not None:
        r_tv, concept = wide
        gamma_src = _permute_wide(gamma_src, r_tv.id, concept, r_tv.columns)
        gamma_tgt = _permute_wide(gamma_tgt, r_tv.id, concept, r_tv.columns)
    src_heads = gamma_src.head_preds()
    tgt_heads = gamma_tgt.head_preds()
    aux = []
    for name, columns, keyed in aux_specs:
        in_src, in_tgt = name in src_heads, name in tgt_heads
        if in_src and in_tgt:
            side = "both"
        elif in_src:
            side = "source"
        elif in_tgt:
            side = "target"
        else:
            continue  # optimized away (e.g. single-branch split remnants)
        aux.append(AuxTable(name, columns, keyed, side))
    return SmoRules(gamma_src, gamma_tgt, tuple(aux), id_functions)


def _swap(sr: SmoRules) -> SmoRules:
    flip = {"source": "target", "target": "source", "both": "both"}
    aux = tuple(replace(a, side=flip[a.side]) for a in sr.aux_tables)
    return SmoRules(sr.gamma_tgt, sr.gamma_src, aux, sr.id_functions, sr.remap)


# ---------------------------------------------------------------------------
# Per-kind template instantiation
# ---------------------------------------------------------------------------


def rules_for(smo: SmoInstance, g: Genealogy) -> SmoRules:
    kind = smo.kind
    if kind in ("CreateTable", "DropTable"):
        return SmoRules(EMPTY, EMPTY, (), ())
    if kind in ("RenameTable", "RenameColumn"):
        return SmoRules(EMPTY, EMPTY, (), (), remap=(smo.sources[0], smo.targets[0]))
    if kind == "AddColumn":
        return _add_column(smo, g, inverse=False)
    if kind == "DropColumn":
        return _swap(_add_column(smo, g, inverse=True))
    if kind == "Split":
        return _split(smo, g, inverse=False)
    if kind == "Merge":
        return _swap(_split(smo, g, inverse=True))
    if kind == "DecomposePK":
        return _decompose_pk(smo, g, inverse=False)
    if kind == "OuterJoinPK":
        return _swap(_decompose_pk(smo, g, inverse=True))
    if kind == "InnerJoinPK":
        return _inner_join_pk(smo, g)
    if kind == "DecomposeFK":
        return _decompose_fk(smo, g, inverse=False)
    if kind == "OuterJoinFK":
        return _swap(_decompose_fk(smo, g, inverse=True))
    if kind == "InnerJoinFK":
        return _inner_join_fk(smo, g)
    if kind == "DecomposeCond":
        return _decompose_cond(smo, g, inverse=False)
    if kind == "OuterJoinCond":
        return _swap(_decompose_cond(smo, g, inverse=True))
    if kind == "InnerJoinCond":
        return _inner_join_cond(smo, g)
    raise ValueError(f"no rule template for SMO kind {kind!r}")


# -- ADD COLUMN / DROP COLUMN ----------------------------------------------


def _add_column(smo: SmoInstance, g: Genealogy, inverse: bool) -> SmoRules:
    # inverse (DROP COLUMN): the narrow table is the target, so swap roles
    # here and let the caller flip the gammas back.
    if inverse:
        rp_tv = g.table_versions[smo.sources[0]]
        r_tv = g.table_versions[smo.targets[0]]
    else:
        r_tv = g.table_versions[smo.sources[0]]
        rp_tv = g.table_versions[smo.targets[0]]
    stmt = smo.smo
    assert isinstance(stmt, (bidel.AddColumn, bidel.DropColumn))
    bcol, fn = stmt.column, stmt.fn
    acols = r_tv.columns
    baux = f"{smo.id}_newcol"

    p = Var("p")
    avs = _vars(acols, {"p", "b"})
    b = Var("b")
    r = RelLit(r_tv.id, (p, *avs))
    rp = RelLit(rp_tv.id, (p, *avs, b))
    anon = Var("u1")

    gamma_tgt = RuleSet(
        (
            Rule(
                rp,
                (r, RelLit(baux, (p, anon), neg=True), FnAssign(b, _expr(fn, acols, avs))),
            ),
            Rule(rp, (r, RelLit(baux, (p, b)))),
        )
    )
    gamma_src = RuleSet(
        (
            Rule(r, (RelLit(rp_tv.id, (p, *avs, Var("u2"))),)),
            Rule(RelLit(baux, (p, b)), (RelLit(rp_tv.id, (p, *[Var(f"u{i+3}") for i in range(len(acols))], b)),)),
        )
    )
    return _finalize(gamma_src, gamma_tgt, [(baux, ("p", bcol), True)])


# -- SPLIT / MERGE ----------------------------------------------------------


def _split(smo: SmoInstance, g: Genealogy, inverse: bool) -> SmoRules:
    stmt = smo.smo
    if inverse:
        assert isinstance(stmt, bidel.Merge)
        t_tv = g.table_versions[smo.targets[0]]
        r_tv = g.table_versions[smo.sources[0]]
        s_tv = g.table_versions[smo.sources[1]]
        c_r, c_s = stmt.first_cond, stmt.second_cond
    else:
        assert isinstance(stmt, bidel.Split)
        t_tv = g.table_versions[smo.sources[0]]
        r_tv = g.table_versions[smo.targets[0]]
        s_tv = g.table_versions[smo.targets[1]] if len(smo.targets) > 1 else None
        c_r, c_s = stmt.first_cond, stmt.second_cond

    cols = t_tv.columns
    p = Var("p")
    avs = _vars(cols, {"p"})

    T = lambda args=None: RelLit(t_tv.id, (p, *(args or avs)))
    R = lambda args=None, **kw: RelLit(r_tv.id, (p, *(args or avs)), **kw)
    rminus = f"{smo.id}_Rminus"
    rstar = f"{smo.id}_Rstar"
    tprime = f"{smo.id}_Tprime"
    cr = lambda pos=True: _cond(c_r, cols, avs, pos)

    tgt_rules: list[Rule] = []
    src_rules: list[Rule] = []
    aux_specs: list[tuple[str, tuple[str, ...], bool]] = []

    if s_tv is not None:
        S = lambda args=None, **kw: RelLit(s_tv.id, (p, *(args or avs)), **kw)
        splus = f"{smo.id}_Splus"
        sminus = f"{smo.id}_Sminus"
        sstar = f"{smo.id}_Sstar"
        cs = lambda pos=True: _cond(c_s, cols, avs, pos)
        anon_u = [Var(f"u{i}") for i in range(len(cols))]
        tgt_rules += [
            Rule(R(), (T(), cr(), RelLit(rminus, (p,), neg=True))),
            Rule(R(), (T(), RelLit(rstar, (p,)))),
            Rule(
                S(),
                (T(), cs(), RelLit(sminus, (p,), neg=True), RelLit(splus, (p, *anon_u), neg=True)),
            ),
            Rule(S(), (RelLit(splus, (p, *avs)),)),
            Rule(S(), (T(), RelLit(sstar, (p,)), RelLit(splus, (p, *anon_u), neg=True))),
            Rule(
                RelLit(tprime, (p, *avs)),
                (T(), cr(False), cs(False), RelLit(rstar, (p,), neg=True), RelLit(sstar, (p,), neg=True)),
            ),
        ]
        src_rules += [
            Rule(T(), (R(),)),
            Rule(T(), (S(), RelLit(r_tv.id, (p, *anon_u), neg=True))),
            Rule(T(), (RelLit(tprime, (p, *avs)),)),
            Rule(
                RelLit(rminus, (p,)),
                (S(), RelLit(r_tv.id, (p, *[Var(f"w{i}") for i in range(len(cols))]), neg=True), cr()),
            ),
            Rule(RelLit(rstar, (p,)), (R(), cr(False))),
            Rule(
                RelLit(splus, (p, *[Var(v.name + "2") for v in avs])),
                (
                    RelLit(s_tv.id, (p, *[Var(v.name + "2") for v in avs])),
                    R(),
                    NegConj(tuple(Compare(Var(v.name + "2"), "=", v) for v in avs)),
                ),
            ),
            Rule(
                RelLit(sminus, (p,)),
                (R(), RelLit(s_tv.id, (p, *[Var(f"w{i}") for i in range(len(cols))]), neg=True), cs()),
            ),
            Rule(RelLit(sstar, (p,)), (S(), cs(False))),
        ]
        aux_specs = [
            (rminus, ("p",), True),
            (rstar, ("p",), True),
            (splus, ("p", *cols), True),
            (sminus, ("p",), True),
            (sstar, ("p",), True),
            (tprime, ("p", *cols), True),
        ]
    else:
        tgt_rules += [
            Rule(R(), (T(), cr())),
            Rule(R(), (T(), RelLit(rstar, (p,)))),
            Rule(RelLit(tprime, (p, *avs)), (T(), cr(False), RelLit(rstar, (p,), neg=True))),
        ]
        src_rules += [
            Rule(T(), (R(),)),
            Rule(T(), (RelLit(tprime, (p, *avs)),)),
            Rule(RelLit(rstar, (p,)), (R(), cr(False))),
        ]
        aux_specs = [(rstar, ("p",), True), (tprime, ("p", *cols), True)]

    return _finalize(RuleSet(tuple(src_rules)), RuleSet(tuple(tgt_rules)), aux_specs)


# -- DECOMPOSE / OUTER JOIN ON PK, INNER JOIN ON PK ------------------------


def _pk_parts(smo: SmoInstance, g: Genealogy, inverse: bool):
    if inverse:
        r_tv = g.table_versions[smo.targets[0]]
        s_tv = g.table_versions[smo.sources[0]]
        t_tv = g.table_versions[smo.sources[1]]
    else:
        r_tv = g.table_versions[smo.sources[0]]
        s_tv = g.table_versions[smo.targets[0]]
        t_tv = g.table_versions[smo.targets[1]]
    return r_tv, s_tv, t_tv


def _decompose_pk(smo: SmoInstance, g: Genealogy, inverse: bool) -> SmoRules:
    r_tv, s_tv, t_tv = _pk_parts(smo, g, inverse)
    # the wide table's columns are ordered A then B, matching the targets
    na, nb = len(s_tv.columns), len(t_tv.columns)
    p = Var("p")
    avs = _vars(s_tv.columns, {"p"})
    bvs = _vars(t_tv.columns, {"p", *[v.name for v in avs]})

    R = RelLit(r_tv.id, (p, *avs, *bvs))
    S = RelLit(s_tv.id, (p, *avs))
    T = RelLit(t_tv.id, (p, *bvs))

    gamma_tgt = RuleSet(
        (
            Rule(S, (R, *_neq_omega(avs))),
            Rule(T, (R, *_neq_omega(bvs))),
        )
    )
    gamma_src = RuleSet(
        (
            Rule(R, (S, T)),
            Rule(
                RelLit(r_tv.id, (p, *avs, *_omegas(nb))),
                (S, RelLit(t_tv.id, (p, *[Var(f"u{i}") for i in range(nb)]), neg=True)),
            ),
            Rule(
                RelLit(r_tv.id, (p, *_omegas(na), *bvs)),
                (RelLit(s_tv.id, (p, *[Var(f"u{i}") for i in range(na)]), neg=True), T),
            ),
        )
    )
    return _finalize(gamma_src, gamma_tgt, [], wide=(r_tv, s_tv.columns + t_tv.columns))


def _inner_join_pk(smo: SmoInstance, g: Genealogy) -> SmoRules:
    s_tv = g.table_versions[smo.sources[0]]
    t_tv = g.table_versions[smo.sources[1]]
    r_tv = g.table_versions[smo.targets[0]]
    na, nb = len(s_tv.columns), len(t_tv.columns)
    p = Var("p")
    avs = _vars(s_tv.columns, {"p"})
    bvs = _vars(t_tv.columns, {"p", *[v.name for v in avs]})
    splus = f"{smo.id}_Splus"
    tplus = f"{smo.id}_Tplus"

    R = RelLit(r_tv.id, (p, *avs, *bvs))
    S = RelLit(s_tv.id, (p, *avs))
    T = RelLit(t_tv.id, (p, *bvs))

    gamma_tgt = RuleSet(
        (
            Rule(R, (S, T)),
            Rule(
                RelLit(splus, (p, *avs)),
                (S, RelLit(t_tv.id, (p, *[Var(f"u{i}") for i in range(nb)]), neg=True)),
            ),
            Rule(
                RelLit(tplus, (p, *bvs)),
                (RelLit(s_tv.id, (p, *[Var(f"u{i}") for i in range(na)]), neg=True), T),
            ),
        )
    )
    gamma_src = RuleSet(
        (
            Rule(S, (RelLit(r_tv.id, (p, *avs, *[Var(f"u{i}") for i in range(nb)])),)),
            Rule(S, (RelLit(splus, (p, *avs)),)),
            Rule(T, (RelLit(r_tv.id, (p, *[Var(f"u{i}") for i in range(na)], *bvs)),)),
            Rule(T, (RelLit(tplus, (p, *bvs)),)),
        )
    )
    return _finalize(
        gamma_src,
        gamma_tgt,
        [(splus, ("p", *s_tv.columns), True), (tplus, ("p", *t_tv.columns), True)],
        wide=(r_tv, s_tv.columns + t_tv.columns),
    )


# -- DECOMPOSE / OUTER JOIN ON FK ------------------------------------------


def _decompose_fk(smo: SmoInstance, g: Genealogy, inverse: bool) -> SmoRules:
    stmt = smo.smo
    assert isinstance(stmt, (bidel.Decompose, bidel.Join))
    fkcol = stmt.on.fk_column
    if inverse:
        r_tv = g.table_versions[smo.targets[0]]
        s_tv = g.table_versions[smo.sources[0]]
        t_tv = g.table_versions[smo.sources[1]]
    else:
        r_tv = g.table_versions[smo.sources[0]]
        s_tv = g.table_versions[smo.targets[0]]
        t_tv = g.table_versions[smo.targets[1]]

    acols = tuple(c for c in s_tv.columns if c != fkcol)
    bcols = t_tv.columns
    na, nb = len(acols), len(bcols)
    idr = f"{smo.id}_IDR"
    tplus = f"{smo.id}_Tplus"
    idt_fn = f"{smo.id}_idT"

    p, t = Var("p"), Var("t")
    avs = _vars(acols, {"p", "t"})
    bvs = _vars(bcols, {"p", "t", *[v.name for v in avs]})
    anon_a = [Var(f"ua{i}") for i in range(na)]
    anon_b = [Var(f"ub{i}") for i in range(nb)]

    def Rl(a=None, b=None):
        return RelLit(r_tv.id, (p, *(a if a is not None else avs), *(b if b is not None else bvs)))

    Sl = RelLit(s_tv.id, (p, *avs, t))
    Tl = RelLit(t_tv.id, (t, *bvs))

    gamma_tgt = RuleSet(
        (
            # existing rows keep their remembered foreign key
            Rule(Tl, (Rl(a=anon_a), RelLit(idr, (p, t)), Compare(t, "!=", OM))),
            # fresh rows: reuse a pre-change parent with the same payload...
            Rule(
                Tl,
                (
                    Rl(a=anon_a),
                    *_neq_omega(bvs),
                    RelLit(idr, (p, Var("u1")), neg=True),
                    RelLit(t_tv.id, (t, *bvs), old=True),
                ),
            ),
            # ...or generate a new parent identifier
            Rule(
                Tl,
                (
                    Rl(a=anon_a),
                    *_neq_omega(bvs),
                    RelLit(idr, (p, Var("u1")), neg=True),
                    RelLit(t_tv.id, (Var("u2"), *bvs), neg=True, old=True),
                    IdAssign(t, idt_fn, tuple(bvs)),
                ),
            ),
            Rule(Tl, (RelLit(tplus, (t, *bvs)),)),
            Rule(Sl, (Rl(b=anon_b), RelLit(idr, (p, t)))),
            Rule(
                Sl,
                (Rl(), RelLit(idr, (p, Var("u1")), neg=True), *_neq_omega(bvs), Tl),
            ),
            Rule(
                RelLit(s_tv.id, (p, *avs, OM)),
                (Rl(), RelLit(idr, (p, Var("u1")), neg=True), *_eq_omega(bvs)),
            ),
        )
    )
    gamma_src = RuleSet(
        (
            Rule(Rl(), (Sl, Compare(t, "!=", OM), Tl)),
            Rule(
                RelLit(r_tv.id, (p, *avs, *_omegas(nb))),
                (RelLit(s_tv.id, (p, *avs, OM)),),
            ),
            Rule(
                RelLit(idr, (p, t)),
                (RelLit(s_tv.id, (p, *anon_a, t)), Compare(t, "!=", OM), RelLit(t_tv.id, (t, *anon_b))),
            ),
            Rule(RelLit(idr, (p, OM)), (RelLit(s_tv.id, (p, *anon_a, OM)),)),
            Rule(
                RelLit(tplus, (t, *bvs)),
                (Tl, RelLit(s_tv.id, (Var("u1"), *anon_a, t), neg=True)),
            ),
        )
    )
    return _finalize(
        gamma_src,
        gamma_tgt,
        [(idr, ("p", fkcol), True), (tplus, (fkcol, *bcols), True)],
        (IdFunction(idt_fn, bcols),),
        wide=(r_tv, acols + bcols),
    )


# -- INNER JOIN ON FK -------------------------------------------------------


def _inner_join_fk(smo: SmoInstance, g: Genealogy) -> SmoRules:
    stmt = smo.smo
    assert isinstance(stmt, bidel.Join)
    fkcol = stmt.on.fk_column
    s_tv = g.table_versions[smo.sources[0]]
    t_tv = g.table_versions[smo.sources[1]]
    r_tv = g.table_versions[smo.targets[0]]
    splus = f"{smo.id}_Splus"
    tplus = f"{smo.id}_Tplus"

    p = Var("p")
    avs = _vars(s_tv.columns, {"p"})
    f = avs[s_tv.columns.index(fkcol)]
    bvs = _vars(t_tv.columns, {"p", *[v.name for v in avs]})
    na, nb = len(s_tv.columns), len(t_tv.columns)

    S = RelLit(s_tv.id, (p, *avs))
    T = RelLit(t_tv.id, (f, *bvs))
    R = RelLit(r_tv.id, (p, *avs, *bvs))
    s_anon_fk = tuple(
        f if c == fkcol else Var(f"u{i}") for i, c in enumerate(s_tv.columns)
    )

    gamma_tgt = RuleSet(
        (
            Rule(R, (S, T)),
            Rule(RelLit(splus, (p, *avs)), (S, Compare(f, "=", OM))),
            Rule(
                RelLit(tplus, (f, *bvs)),
                (T, RelLit(s_tv.id, (Var("w0"), *s_anon_fk), neg=True)),
            ),
        )
    )
    gamma_src = RuleSet(
        (
            Rule(S, (RelLit(r_tv.id, (p, *avs, *[Var(f"u{i}") for i in range(nb)])),)),
            Rule(S, (RelLit(splus, (p, *avs)),)),
            Rule(T, (RelLit(r_tv.id, (Var("w0"), *avs, *bvs)),)),
            Rule(T, (RelLit(tplus, (f, *bvs)),)),
        )
    )
    return _finalize(
        gamma_src,
        gamma_tgt,
        [(splus, ("p", *s_tv.columns), True), (tplus, (fkcol, *t_tv.columns), True)],
        wide=(r_tv, s_tv.columns + t_tv.columns),
    )


# -- DECOMPOSE / OUTER JOIN / INNER JOIN ON CONDITION ----------------------


def _cond_sides(smo: SmoInstance, g: Genealogy, wide_is_target: bool):
    if wide_is_target:
        s_tv = g.table_versions[smo.sources[0]]
        t_tv = g.table_versions[smo.sources[1]]
        r_tv = g.table_versions[smo.targets[0]]
    else:
        r_tv = g.table_versions[smo.sources[0]]
        s_tv = g.table_versions[smo.targets[0]]
        t_tv = g.table_versions[smo.targets[1]]
    return r_tv, s_tv, t_tv


def _toward_narrow(smo, r_tv, s_tv, t_tv, with_plus: bool):
    """Rules mapping the wide table R to S, T and the id map.

    Used as gamma_tgt of DECOMPOSE ON COND and gamma_src of the condition
    joins.  `with_plus` adds the S+/T+ pass-through rules (inner join only).
    """
    ids = f"{smo.id}_ID"
    ids_fn, idt_fn = f"{smo.id}_idS", f"{smo.id}_idT"
    r, s, t = Var("r"), Var("s"), Var("t")
    avs = _vars(s_tv.columns, {"r", "s", "t"})
    bvs = _vars(t_tv.columns, {"r", "s", "t", *[v.name for v in avs]})
    na, nb = len(avs), len(bvs)
    anon_a = [Var(f"ua{i}") for i in range(na)]
    anon_b = [Var(f"ub{i}") for i in range(nb)]

    def Rw(a=None, b=None):
        return RelLit(r_tv.id, (r, *(a if a is not None else avs), *(b if b is not None else bvs)))

    no_id = RelLit(ids, (r, Var("x1"), Var("x2")), neg=True, old=True)
    rules = [
        Rule(
            RelLit(s_tv.id, (s, *avs)),
            (Rw(b=anon_b), RelLit(ids, (r, s, Var("x0")), old=True), Compare(s, "!=", OM)),
        ),
        Rule(
            RelLit(s_tv.id, (s, *avs)),
            (Rw(b=anon_b), no_id, *_neq_omega(avs), IdAssign(s, ids_fn, tuple(avs))),
        ),
        Rule(
            RelLit(t_tv.id, (t, *bvs)),
            (Rw(a=anon_a), RelLit(ids, (r, Var("x0"), t), old=True), Compare(t, "!=", OM)),
        ),
        Rule(
            RelLit(t_tv.id, (t, *bvs)),
            (Rw(a=anon_a), no_id, *_neq_omega(bvs), IdAssign(t, idt_fn, tuple(bvs))),
        ),
        Rule(RelLit(ids, (r, s, t)), (RelLit(ids, (r, s, t), old=True),)),
        Rule(
            RelLit(ids, (r, s, t)),
            (
                Rw(),
                no_id,
                *_neq_omega(avs),
                *_neq_omega(bvs),
                IdAssign(s, ids_fn, tuple(avs)),
                IdAssign(t, idt_fn, tuple(bvs)),
            ),
        ),
        Rule(
            RelLit(ids, (r, s, OM)),
            (Rw(), no_id, *_neq_omega(avs), *_eq_omega(bvs), IdAssign(s, ids_fn, tuple(avs))),
        ),
        Rule(
            RelLit(ids, (r, OM, t)),
            (Rw(), no_id, *_eq_omega(avs), *_neq_omega(bvs), IdAssign(t, idt_fn, tuple(bvs))),
        ),
    ]
    if with_plus:
        splus, tplus = f"{smo.id}_Splus", f"{smo.id}_Tplus"
        rules += [
            Rule(RelLit(s_tv.id, (s, *avs)), (RelLit(splus, (s, *avs)),)),
            Rule(RelLit(t_tv.id, (t, *bvs)), (RelLit(tplus, (t, *bvs)),)),
        ]
    return rules, (avs, bvs)


def _removed_pairs_rule(smo, r_tv, s_tv, t_tv, cond):
    """R-(s,t) <- S(s,A), T(t,B), c(A,B), not R(_,A,B)."""
    rminus = f"{smo.id}_Rminus"
    s, t = Var("s"), Var("t")
    avs = _vars(s_tv.columns, {"r", "s", "t"})
    bvs = _vars(t_tv.columns, {"r", "s", "t", *[v.name for v in avs]})
    return Rule(
        RelLit(rminus, (s, t)),
        (
            RelLit(s_tv.id, (s, *avs)),
            RelLit(t_tv.id, (t, *bvs)),
            _cond(cond, s_tv.columns + t_tv.columns, avs + bvs),
            RelLit(r_tv.id, (Var("x0"), *avs, *bvs), neg=True),
        ),
    )


def _toward_wide_core(smo, r_tv, s_tv, t_tv, cond, id_head: str):
    """Shared rules mapping S, T (+ id map) to the wide table R.

    `id_head` is the predicate the combination-map rules write to (the id
    map itself for the joins, a staging predicate for DECOMPOSE).
    """
    ids = f"{smo.id}_ID"
    rminus = f"{smo.id}_Rminus"
    idr_fn = f"{smo.id}_idR"
    r, s, t = Var("r"), Var("s"), Var("t")
    avs = _vars(s_tv.columns, {"r", "s", "t"})
    bvs = _vars(t_tv.columns, {"r", "s", "t", *[v.name for v in avs]})
    na, nb = len(avs), len(bvs)

    S = RelLit(s_tv.id, (s, *avs))
    T = RelLit(t_tv.id, (t, *bvs))
    clit = _cond(cond, s_tv.columns + t_tv.columns, avs + bvs)
    fresh_combo = (
        S,
        T,
        clit,
        RelLit(rminus, (s, t), neg=True),
        RelLit(ids, (Var("x0"), s, t), neg=True, old=True),
        IdAssign(r, idr_fn, tuple(avs) + tuple(bvs)),
    )
    rules = [
        Rule(
            RelLit(r_tv.id, (r, *avs, *bvs)),
            (
                RelLit(ids, (r, s, t), old=True),
                Compare(s, "!=", OM),
                Compare(t, "!=", OM),
                S,
                T,
            ),
        ),
        Rule(
            RelLit(r_tv.id, (r, *avs, *_omegas(nb))),
            (RelLit(ids, (r, s, OM), old=True), S),
        ),
        Rule(
            RelLit(r_tv.id, (r, *_omegas(na), *bvs)),
            (RelLit(ids, (r, OM, t), old=True), T),
        ),
        Rule(RelLit(r_tv.id, (r, *avs, *bvs)), fresh_combo),
        Rule(RelLit(id_head, (r, s, t)), (RelLit(ids, (r, s, t), old=True),)),
        Rule(RelLit(id_head, (r, s, t)), fresh_combo),
    ]
    return rules, (avs, bvs)


def _decompose_cond(smo: SmoInstance, g: Genealogy, inverse: bool) -> SmoRules:
    stmt = smo.smo
    assert isinstance(stmt, (bidel.Decompose, bidel.Join))
    cond = stmt.on.cond
    r_tv, s_tv, t_tv = _cond_sides(smo, g, wide_is_target=inverse)
    ids = f"{smo.id}_ID"
    idm = f"{smo.id}_IDm"
    rminus = f"{smo.id}_Rminus"

    tgt_rules, _ = _toward_narrow(smo, r_tv, s_tv, t_tv, with_plus=False)
    tgt_rules.append(_removed_pairs_rule(smo, r_tv, s_tv, t_tv, cond))

    src_rules, (avs, bvs) = _toward_wide_core(smo, r_tv, s_tv, t_tv, cond, id_head=idm)
    na, nb = len(avs), len(bvs)
    r, s, t = Var("r"), Var("s"), Var("t")
    S = RelLit(s_tv.id, (s, *avs))
    T = RelLit(t_tv.id, (t, *bvs))
    no_s = RelLit(idm, (Var("x0"), s, Var("x1")), neg=True)
    no_t = RelLit(idm, (Var("x0"), Var("x1"), t), neg=True)
    src_rules += [
        # target-side rows without any surviving combination keep their own
        # key when flowing back to the wide side
        Rule(RelLit(r_tv.id, (s, *avs, *_omegas(nb))), (S, no_s)),
        Rule(RelLit(r_tv.id, (t, *_omegas(na), *bvs)), (T, no_t)),
        Rule(RelLit(ids, (r, s, t)), (RelLit(idm, (r, s, t)),)),
        Rule(RelLit(ids, (s, s, OM)), (S, no_s)),
        Rule(RelLit(ids, (t, OM, t)), (T, no_t)),
    ]

    sr = _finalize(
        RuleSet(tuple(src_rules)),
        RuleSet(tuple(tgt_rules)),
        [
            (ids, ("r", "s", "t"), True),
            (rminus, ("s", "t"), False),
        ],
        (
            IdFunction(f"{smo.id}_idS", s_tv.columns),
            IdFunction(f"{smo.id}_idT", t_tv.columns),
            IdFunction(f"{smo.id}_idR", s_tv.columns + t_tv.columns),
        ),
        wide=(r_tv, s_tv.columns + t_tv.columns),
    )
    return sr


def _inner_join_cond(smo: SmoInstance, g: Genealogy) -> SmoRules:
    stmt = smo.smo
    assert isinstance(stmt, bidel.Join)
    cond = stmt.on.cond
    r_tv, s_tv, t_tv = _cond_sides(smo, g, wide_is_target=True)
    ids = f"{smo.id}_ID"
    rminus = f"{smo.id}_Rminus"
    splus, tplus = f"{smo.id}_Splus", f"{smo.id}_Tplus"

    tgt_rules, (avs, bvs) = _toward_wide_core(smo, r_tv, s_tv, t_tv, cond, id_head=ids)
    s, t = Var("s"), Var("t")
    tgt_rules += [
        Rule(
            RelLit(splus, (s, *avs)),
            (RelLit(s_tv.id, (s, *avs)), RelLit(ids, (Var("x0"), s, Var("x1")), neg=True)),
        ),
        Rule(
            RelLit(tplus, (t, *bvs)),
            (RelLit(t_tv.id, (t, *bvs)), RelLit(ids, (Var("x0"), Var("x1"), t), neg=True)),
        ),
    ]

    src_rules, _ = _toward_narrow(smo, r_tv, s_tv, t_tv, with_plus=True)
    src_rules.append(_removed_pairs_rule(smo, r_tv, s_tv, t_tv, cond))

    return _finalize(
        RuleSet(tuple(src_rules)),
        RuleSet(tuple(tgt_rules)),
        [
            (ids, ("r", "s", "t"), True),
            (rminus, ("s", "t"), False),
            (splus, ("s", *s_tv.columns), True),
            (tplus, ("t", *t_tv.columns), True),
        ],
        (
            IdFunction(f"{smo.id}_idS", s_tv.columns),
            IdFunction(f"{smo.id}_idT", t_tv.columns),
            IdFunction(f"{smo.id}_idR", s_tv.columns + t_tv.columns),
        ),
        wide=(r_tv, s_tv.columns + t_tv.columns),
    )


# ---------------------------------------------------------------------------
# Delta rules (incremental write propagation / trigger bodies)
# ---------------------------------------------------------------------------


def delta_rules_for(smo: SmoInstance, g: Genealogy, write_kind: str, direction: str) -> RuleSet:
    """Rules deriving the per-relation change sets for one write.

    `direction` is "forward" (toward the source side) or "backward" (toward
    the target side).  For a SPLIT insert propagated backward the dedicated
    minimal rules are produced; every other combination uses the generic
    recompute-and-diff encoding `Δ⁺q = q ∖ q_old`, `Δ⁻q = q_old ∖ q`.
    """
    if write_kind not in ("insert", "delete", "update"):
        raise ValueError(f"bad write kind {write_kind!r}")
    if direction not in ("forward", "backward"):
        raise ValueError(f"bad direction {direction!r}")
    sr = rules_for(smo, g)
    gamma = sr.gamma_tgt if direction == "backward" else sr.gamma_src

    if smo.kind == "Split" and write_kind == "insert" and direction == "backward":
        stmt = smo.smo
        assert isinstance(stmt, bidel.Split)
        t_tv = g.table_versions[smo.sources[0]]
        r_tv = g.table_versions[smo.targets[0]]
        cols = t_tv.columns
        p = Var("p")
        avs = _vars(cols, {"p"})
        dT = RelLit(f"delta_ins_{t_tv.id}", (p, *avs))
        rules = [
            Rule(
                RelLit(f"delta_ins_{r_tv.id}", (p, *avs)),
                (dT, _cond(stmt.first_cond, cols, avs), RelLit(r_tv.id, (p, *avs), neg=True, old=True)),
            )
        ]
        if len(smo.targets) > 1:
            s_tv = g.table_versions[smo.targets[1]]
            rules.append(
                Rule(
                    RelLit(f"delta_ins_{s_tv.id}", (p, *avs)),
                    (dT, _cond(stmt.second_cond, cols, avs), RelLit(s_tv.id, (p, *avs), neg=True, old=True)),
                )
            )
        neg_parts = [_cond(stmt.first_cond, cols, avs, positive=False)]
        if stmt.second_cond is not None:
            neg_parts.append(_cond(stmt.second_cond, cols, avs, positive=False))
        tprime = f"{smo.id}_Tprime"
        rules.append(
            Rule(
                RelLit(f"delta_ins_{tprime}", (p, *avs)),
                (dT, *neg_parts, RelLit(tprime, (p, *avs), neg=True, old=True)),
            )
        )
        return RuleSet(tuple(rules))

    # generic recompute-and-diff
    arities: dict[str, int] = {}
    for rule in gamma:
        arities[rule.head.pred] = len(rule.head.args)
    rules = []
    for pred in sorted(arities):
        n = arities[pred]
        vs = tuple(Var(f"x{i}") for i in range(n))
        cur = RelLit(pred, vs)
        old = RelLit(pred, vs, old=True)
        if write_kind == "insert":
            rules.append(Rule(RelLit(f"delta_ins_{pred}", vs), (cur, RelLit(pred, vs, neg=True, old=True))))
        elif write_kind == "delete":
            rules.append(Rule(RelLit(f"delta_del_{pred}", vs), (old, RelLit(pred, vs, neg=True))))
        else:
            vs2 = tuple(Var(f"y{i}") for i in range(1, n))
            rules.append(
                Rule(
                    RelLit(f"delta_upd_{pred}", vs),
                    (
                        cur,
                        RelLit(pred, (vs[0], *vs2), old=True),
                        NegConj(tuple(Compare(a, "=", b) for a, b in zip(vs[1:], vs2))),
                    ),
                )
            )
    return RuleSet(tuple(rules))
