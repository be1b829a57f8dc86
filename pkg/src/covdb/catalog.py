"""Schema version catalog: table versions, SMO instances, materialization.

The catalog is a directed acyclic hypergraph.  Vertices are table versions;
each hyperedge is one schema-modification operation (SMO) instance mapping
its source table versions to its target table versions.  Schema versions
are named subsets of table versions; versions share a table version when
the table does not change between them.

All values here are immutable; every mutating operation returns a new
catalog.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

from . import bidel
from . import conditions as C

VIRTUALIZED = "virtualized"
MATERIALIZED = "materialized"


class CatalogError(ValueError):
    """Semantic error against the catalog (unknown table, bad columns, ...)."""


@dataclass(frozen=True)
class TableVersion:
    id: str
    name: str
    columns: tuple[str, ...]
    insmo: Optional[str]  # id of the SMO that creates this table version

    def __post_init__(self):
        if len(set(self.columns)) != len(self.columns):
            raise CatalogError(f"duplicate column in {self.name}: {self.columns}")


@dataclass(frozen=True)
class SmoInstance:
    id: str
    kind: str
    smo: bidel.Smo  # the parsed statement carrying all parameters
    sources: tuple[str, ...]
    targets: tuple[str, ...]
    state: str = VIRTUALIZED


@dataclass(frozen=True)
class MaterializationSchema:
    materialized: frozenset  # SMO ids (M)
    physical: frozenset  # TableVersion ids (P)


@dataclass(frozen=True)
class Genealogy:
    table_versions: dict = field(default_factory=dict)  # id -> TableVersion
    smos: dict = field(default_factory=dict)  # id -> SmoInstance
    schema_versions: dict = field(default_factory=dict)  # name -> frozenset of tv ids
    version_parents: dict = field(default_factory=dict)  # name -> parent name or None
    version_smos: dict = field(default_factory=dict)  # name -> tuple of SMO ids
    next_tv: int = 0
    next_smo: int = 0

    # -- lookups ----------------------------------------------------------

    def tables_of(self, version: str) -> dict:
        """Table name -> TableVersion for one schema version."""
        try:
            ids = self.schema_versions[version]
        except KeyError:
            raise CatalogError(f"unknown schema version {version!r}") from None
        return {self.table_versions[i].name: self.table_versions[i] for i in sorted(ids)}

    def resolve(self, version: str, table: str) -> TableVersion:
        tabs = self.tables_of(version)
        try:
            return tabs[table]
        except KeyError:
            raise CatalogError(f"no table {table!r} in schema version {version!r}") from None

    def outsmos(self, tv_id: str) -> list[SmoInstance]:
        return [s for s in self.smos.values() if tv_id in s.sources]

    def with_state(self, smo_id: str, state: str) -> "Genealogy":
        smos = dict(self.smos)
        smos[smo_id] = replace(smos[smo_id], state=state)
        return replace(self, smos=smos)

    def materialization(self) -> MaterializationSchema:
        m = frozenset(
            s.id
            for s in self.smos.values()
            if s.state == MATERIALIZED and s.kind != "CreateTable"
        )
        return MaterializationSchema(m, physical_tables(self, m))


def smo_kind(smo: bidel.Smo) -> str:
    if isinstance(smo, bidel.CreateTable):
        return "CreateTable"
    if isinstance(smo, bidel.DropTable):
        return "DropTable"
    if isinstance(smo, bidel.RenameTable):
        return "RenameTable"
    if isinstance(smo, bidel.RenameColumn):
        return "RenameColumn"
    if isinstance(smo, bidel.AddColumn):
        return "AddColumn"
    if isinstance(smo, bidel.DropColumn):
        return "DropColumn"
    if isinstance(smo, bidel.Decompose):
        return "Decompose" + smo.on.kind.upper() if smo.on.kind != "cond" else "DecomposeCond"
    if isinstance(smo, bidel.Join):
        base = "OuterJoin" if smo.outer else "InnerJoin"
        return base + ("Cond" if smo.on.kind == "cond" else smo.on.kind.upper())
    if isinstance(smo, bidel.Split):
        return "Split"
    if isinstance(smo, bidel.Merge):
        return "Merge"
    raise TypeError(repr(smo))


ALL_KINDS = (
    "CreateTable",
    "DropTable",
    "RenameTable",
    "RenameColumn",
    "AddColumn",
    "DropColumn",
    "DecomposePK",
    "DecomposeFK",
    "DecomposeCond",
    "OuterJoinPK",
    "OuterJoinFK",
    "OuterJoinCond",
    "InnerJoinPK",
    "InnerJoinFK",
    "InnerJoinCond",
    "Split",
    "Merge",
)


# ---------------------------------------------------------------------------
# Evolution
# ---------------------------------------------------------------------------


def register_evolution(
    g: Genealogy,
    old_version: Optional[str],
    new_version: str,
    smos: Iterable[bidel.Smo],
) -> Genealogy:
    if new_version in g.schema_versions:
        raise CatalogError(f"schema version {new_version!r} already exists")
    if old_version is not None and old_version not in g.schema_versions:
        raise CatalogError(f"unknown schema version {old_version!r}")

    table_versions = dict(g.table_versions)
    smo_map = dict(g.smos)
    next_tv, next_smo = g.next_tv, g.next_smo
    # working view: table name -> tv id, evolving as SMOs apply
    current: dict = {}
    if old_version is not None:
        for name, tv in g.tables_of(old_version).items():
            current[name] = tv.id
    smo_ids: list[str] = []

    def fresh_tv(name: str, columns: tuple[str, ...], insmo: str) -> str:
        nonlocal next_tv
        tid = f"t{next_tv}"
        next_tv += 1
        table_versions[tid] = TableVersion(tid, name, columns, insmo)
        return tid

    def need(name: str) -> TableVersion:
        if name not in current:
            raise CatalogError(f"unknown table {name!r} in evolution to {new_version!r}")
        return table_versions[current[name]]

    def need_cols(cols: Iterable[str], have: tuple[str, ...], what: str):
        missing = [c for c in cols if c not in have]
        if missing:
            raise CatalogError(f"{what} references unknown column(s) {missing}")

    for smo in smos:
        sid = f"s{next_smo}"
        next_smo += 1
        kind = smo_kind(smo)
        state = MATERIALIZED if kind == "CreateTable" else VIRTUALIZED
        sources: list[str] = []
        targets: list[str] = []

        if isinstance(smo, bidel.CreateTable):
            if smo.table in current:
                raise CatalogError(f"table {smo.table!r} already exists")
            targets.append(fresh_tv(smo.table, smo.columns, sid))
            current[smo.table] = targets[0]
        elif isinstance(smo, bidel.DropTable):
            tv = need(smo.table)
            sources.append(tv.id)
            del current[smo.table]
        elif isinstance(smo, bidel.RenameTable):
            tv = need(smo.table)
            if smo.new_name in current and smo.new_name != smo.table:
                raise CatalogError(f"table {smo.new_name!r} already exists")
            sources.append(tv.id)
            targets.append(fresh_tv(smo.new_name, tv.columns, sid))
            del current[smo.table]
            current[smo.new_name] = targets[0]
        elif isinstance(smo, bidel.RenameColumn):
            tv = need(smo.table)
            if smo.column not in tv.columns:
                raise CatalogError(f"no column {smo.column!r} in {smo.table!r}")
            if smo.new_name in tv.columns:
                raise CatalogError(f"column {smo.new_name!r} already exists in {smo.table!r}")
            cols = tuple(smo.new_name if c == smo.column else c for c in tv.columns)
            sources.append(tv.id)
            targets.append(fresh_tv(tv.name, cols, sid))
            current[smo.table] = targets[0]
        elif isinstance(smo, bidel.AddColumn):
            tv = need(smo.table)
            if smo.column in tv.columns:
                raise CatalogError(f"column {smo.column!r} already exists in {smo.table!r}")
            need_cols(C.expression_columns(smo.fn), tv.columns, "ADD COLUMN expression")
            sources.append(tv.id)
            targets.append(fresh_tv(tv.name, tv.columns + (smo.column,), sid))
            current[smo.table] = targets[0]
        elif isinstance(smo, bidel.DropColumn):
            tv = need(smo.table)
            if smo.column not in tv.columns:
                raise CatalogError(f"no column {smo.column!r} in {smo.table!r}")
            cols = tuple(c for c in tv.columns if c != smo.column)
            need_cols(C.expression_columns(smo.fn), cols, "DROP COLUMN default")
            sources.append(tv.id)
            targets.append(fresh_tv(tv.name, cols, sid))
            current[smo.table] = targets[0]
        elif isinstance(smo, bidel.Decompose):
            tv = need(smo.table)
            a, b = smo.first_columns, smo.second_columns
            if set(a) & set(b):
                raise CatalogError("decompose column lists overlap")
            if set(a) | set(b) != set(tv.columns):
                raise CatalogError(
                    f"decompose column lists must cover {smo.table!r}'s columns exactly"
                )
            first_cols = a
            if smo.on.kind == "fk":
                if smo.on.fk_column in a:
                    raise CatalogError(
                        f"foreign key column {smo.on.fk_column!r} collides with a kept column"
                    )
                first_cols = a + (smo.on.fk_column,)
            if smo.on.kind == "cond":
                need_cols(C.condition_columns(smo.on.cond), tv.columns, "decompose condition")
            sources.append(tv.id)
            del current[smo.table]
            for name, cols in ((smo.first, first_cols), (smo.second, b)):
                if name in current:
                    raise CatalogError(f"table {name!r} already exists")
                tid = fresh_tv(name, cols, sid)
                targets.append(tid)
                current[name] = tid
        elif isinstance(smo, bidel.Join):
            s_tv, t_tv = need(smo.first), need(smo.second)
            if smo.on.kind == "fk":
                if smo.on.fk_column not in s_tv.columns:
                    raise CatalogError(
                        f"no foreign key column {smo.on.fk_column!r} in {smo.first!r}"
                    )
                # an outer join absorbs the foreign key into the row identity;
                # an inner join keeps it so unmatched child rows stay expressible
                if smo.outer:
                    a = tuple(c for c in s_tv.columns if c != smo.on.fk_column)
                else:
                    a = s_tv.columns
            else:
                a = s_tv.columns
            b = t_tv.columns
            if set(a) & set(b):
                raise CatalogError("join would produce duplicate column names")
            if smo.on.kind == "cond":
                need_cols(C.condition_columns(smo.on.cond), a + b, "join condition")
            sources.extend((s_tv.id, t_tv.id))
            del current[smo.first]
            del current[smo.second]
            if smo.table in current:
                raise CatalogError(f"table {smo.table!r} already exists")
            tid = fresh_tv(smo.table, a + b, sid)
            targets.append(tid)
            current[smo.table] = tid
        elif isinstance(smo, bidel.Split):
            tv = need(smo.table)
            need_cols(C.condition_columns(smo.first_cond), tv.columns, "split condition")
            if smo.second_cond is not None:
                need_cols(C.condition_columns(smo.second_cond), tv.columns, "split condition")
            sources.append(tv.id)
            del current[smo.table]
            branch_names = [smo.first] + ([smo.second] if smo.second else [])
            for name in branch_names:
                if name in current:
                    raise CatalogError(f"table {name!r} already exists")
                tid = fresh_tv(name, tv.columns, sid)
                targets.append(tid)
                current[name] = tid
        elif isinstance(smo, bidel.Merge):
            r_tv, s_tv = need(smo.first), need(smo.second)
            if r_tv.columns != s_tv.columns:
                raise CatalogError("merge requires identical column lists")
            sources.extend((r_tv.id, s_tv.id))
            del current[smo.first]
            del current[smo.second]
            if smo.table in current:
                raise CatalogError(f"table {smo.table!r} already exists")
            tid = fresh_tv(smo.table, r_tv.columns, sid)
            targets.append(tid)
            current[smo.table] = tid
        else:
            raise TypeError(repr(smo))

        smo_map[sid] = SmoInstance(sid, kind, smo, tuple(sources), tuple(targets), state)
        smo_ids.append(sid)

    schema_versions = dict(g.schema_versions)
    schema_versions[new_version] = frozenset(current.values())
    version_parents = dict(g.version_parents)
    version_parents[new_version] = old_version
    version_smos = dict(g.version_smos)
    version_smos[new_version] = tuple(smo_ids)
    return Genealogy(
        table_versions,
        smo_map,
        schema_versions,
        version_parents,
        version_smos,
        next_tv,
        next_smo,
    )


# ---------------------------------------------------------------------------
# Dropping versions
# ---------------------------------------------------------------------------


def _version_path_smos(g: Genealogy, a: str, b: str) -> set:
    """SMO ids along the genealogy-tree walk between two versions."""
    anc_a: list[str] = []
    cur: Optional[str] = a
    while cur is not None:
        anc_a.append(cur)
        cur = g.version_parents.get(cur)
    seen = set(anc_a)
    path_b: list[str] = []
    cur = b
    while cur is not None and cur not in seen:
        path_b.append(cur)
        cur = g.version_parents.get(cur)
    if cur is None:
        return set()  # disconnected roots: nothing to share
    out: set = set()
    for v in path_b:
        out.update(g.version_smos.get(v, ()))
    for v in anc_a:
        if v == cur:
            break
        out.update(g.version_smos.get(v, ()))
    return out


def drop_schema_version(g: Genealogy, name: str) -> Genealogy:
    if name not in g.schema_versions:
        raise CatalogError(f"unknown schema version {name!r}")
    remaining = [v for v in g.schema_versions if v != name]

    keep_smos: set = set()
    for a, b in itertools.combinations(remaining, 2):
        keep_smos |= _version_path_smos(g, a, b)

    keep_tvs: set = set()
    for v in remaining:
        keep_tvs |= set(g.schema_versions[v])
    for sid in keep_smos:
        s = g.smos[sid]
        keep_tvs |= set(s.sources) | set(s.targets)
    # table versions referenced by kept versions keep their creating SMO
    for tid in list(keep_tvs):
        ins = g.table_versions[tid].insmo
        if ins is not None and g.smos[ins].kind == "CreateTable":
            keep_smos.add(ins)

    table_versions = {}
    for tid in keep_tvs:
        tv = g.table_versions[tid]
        if tv.insmo is not None and tv.insmo not in keep_smos:
            tv = replace(tv, insmo=None)  # now a root table
        table_versions[tid] = tv
    smos = {sid: g.smos[sid] for sid in g.smos if sid in keep_smos}
    schema_versions = {v: g.schema_versions[v] for v in remaining}
    version_parents = {}
    for v in remaining:
        p = g.version_parents.get(v)
        while p is not None and p not in schema_versions:
            p = g.version_parents.get(p)
        version_parents[v] = p
    version_smos = {}
    for v in remaining:
        version_smos[v] = tuple(s for s in g.version_smos.get(v, ()) if s in keep_smos)
    return Genealogy(
        table_versions,
        smos,
        schema_versions,
        version_parents,
        version_smos,
        g.next_tv,
        g.next_smo,
    )


# ---------------------------------------------------------------------------
# Materialization validity
# ---------------------------------------------------------------------------


def is_valid(g: Genealogy, M: Iterable[str]) -> bool:
    """True iff M is a valid materialization schema.

    For every materialized SMO s and every source table version t of s:
      1. the SMO creating t is materialized too (table creation counts), and
      2. no other SMO consuming t is materialized (t has a single taker).
    Table-drop SMOs are catalog bookkeeping only and can never be
    materialized.
    """
    mset = set(M)
    for sid in mset:
        if sid not in g.smos:
            raise CatalogError(f"unknown SMO id {sid!r}")
    for sid in mset:
        s = g.smos[sid]
        if s.kind == "DropTable":
            return False
        if s.kind == "CreateTable":
            continue
        for tid in s.sources:
            ins = g.table_versions[tid].insmo
            if ins is not None and g.smos[ins].kind != "CreateTable" and ins not in mset:
                return False
            for other in g.outsmos(tid):
                if other.id != sid and other.id in mset and other.kind != "DropTable":
                    return False
    return True


def physical_tables(g: Genealogy, M: Iterable[str]) -> frozenset:
    """Table versions physically present under materialization schema M."""
    mset = set(M)
    out = set()
    for tid, tv in g.table_versions.items():
        ins = tv.insmo
        created = ins is None or g.smos[ins].kind == "CreateTable" or ins in mset
        if not created:
            continue
        taken = any(
            o.id in mset and o.kind != "DropTable" for o in g.outsmos(tid)
        )
        if not taken:
            out.add(tid)
    return frozenset(out)


ENUMERATION_BOUND = 20


def enumerate_valid(g: Genealogy, bound: int = ENUMERATION_BOUND) -> set:
    """All valid materialization schemas, by exhaustive subset check."""
    candidates = [
        s.id for s in g.smos.values() if s.kind not in ("CreateTable", "DropTable")
    ]
    if len(candidates) > bound:
        raise CatalogError(
            f"refusing to enumerate over {len(candidates)} SMOs (bound {bound})"
        )
    out = set()
    for k in range(len(candidates) + 1):
        for combo in itertools.combinations(candidates, k):
            m = frozenset(combo)
            if is_valid(g, m):
                out.add(MaterializationSchema(m, physical_tables(g, m)))
    return out


# ---------------------------------------------------------------------------
# Text serialization (snapshot `catalog.txt`)
# ---------------------------------------------------------------------------


def to_text(g: Genealogy) -> str:
    lines = [f"counters tv={g.next_tv} smo={g.next_smo}"]
    for tid in sorted(g.table_versions, key=_natural):
        tv = g.table_versions[tid]
        lines.append(
            f"table {tv.id} name={tv.name} insmo={tv.insmo or '-'} "
            f"columns={','.join(tv.columns)}"
        )
    for sid in sorted(g.smos, key=_natural):
        s = g.smos[sid]
        lines.append(
            f"smo {s.id} kind={s.kind} state={s.state} "
            f"sources={','.join(s.sources) or '-'} targets={','.join(s.targets) or '-'} "
            f"stmt={bidel.print_smo(s.smo)}"
        )
    for v in g.schema_versions:
        parent = g.version_parents.get(v) or "-"
        tvs = ",".join(sorted(g.schema_versions[v], key=_natural))
        vsmos = ",".join(g.version_smos.get(v, ())) or "-"
        lines.append(f"version {v} parent={parent} tables={tvs} smos={vsmos}")
    return "\n".join(lines) + "\n"


def from_text(text: str) -> Genealogy:
    table_versions: dict = {}
    smos: dict = {}
    schema_versions: dict = {}
    version_parents: dict = {}
    version_smos: dict = {}
    next_tv = next_smo = 0
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tag, rest = line.split(" ", 1)
        if tag == "counters":
            fields = dict(kv.split("=", 1) for kv in rest.split())
            next_tv, next_smo = int(fields["tv"]), int(fields["smo"])
        elif tag == "table":
            tid, rest = rest.split(" ", 1)
            fields = dict(kv.split("=", 1) for kv in rest.split())
            cols = tuple(fields["columns"].split(",")) if fields["columns"] else ()
            ins = None if fields["insmo"] == "-" else fields["insmo"]
            table_versions[tid] = TableVersion(tid, fields["name"], cols, ins)
        elif tag == "smo":
            sid, rest = rest.split(" ", 1)
            head, stmt = rest.split("stmt=", 1)
            fields = dict(kv.split("=", 1) for kv in head.split())
            src = tuple(fields["sources"].split(",")) if fields["sources"] != "-" else ()
            tgt = tuple(fields["targets"].split(",")) if fields["targets"] != "-" else ()
            smos[sid] = SmoInstance(
                sid, fields["kind"], bidel.parse_smo(stmt), src, tgt, fields["state"]
            )
        elif tag == "version":
            vname, rest = rest.split(" ", 1)
            fields = dict(kv.split("=", 1) for kv in rest.split())
            schema_versions[vname] = frozenset(
                fields["tables"].split(",") if fields["tables"] else ()
            )
            version_parents[vname] = None if fields["parent"] == "-" else fields["parent"]
            version_smos[vname] = (
                tuple(fields["smos"].split(",")) if fields["smos"] != "-" else ()
            )
        else:
            raise CatalogError(f"bad catalog line: {raw!r}")
    return Genealogy(
        table_versions,
        smos,
        schema_versions,
        version_parents,
        version_smos,
        next_tv,
        next_smo,
    )


def _natural(ident: str):
    head = ident.rstrip("0123456789")
    tail = ident[len(head) :]
    return (head, int(tail) if tail else -1)
