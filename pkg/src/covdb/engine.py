"""High-level operations: script execution, mini-DML, bulk loading.

This is the layer the command line sits on.  It ties the script/DML
parser, the catalog, the store and the propagation machinery together;
each function mutates the in-memory `Database` and leaves persistence to
the caller.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from . import bidel
from . import catalog as cat
from . import conditions as C
from . import migration, propagation
from .store import Database, stored_relations
from .values import OMEGA, decode_cell, encode_cell


class DmlError(ValueError):
    """A statement is well-formed but wrong against the catalog or data."""


@dataclass(frozen=True)
class DmlResult:
    columns: tuple[str, ...]  # () for write statements
    rows: tuple  # sorted tuples for SELECT
    affected: int  # touched row count for writes


# ---------------------------------------------------------------------------
# Script execution
# ---------------------------------------------------------------------------


def apply_statement(db: Database, st: bidel.Statement) -> str:
    """Apply one evolution/migration statement; returns a report line."""
    if isinstance(st, bidel.CreateSchemaVersion):
        db.genealogy = cat.register_evolution(db.genealogy, st.parent, st.name, st.smos)
        return f"created schema version {st.name} ({len(st.smos)} operations)"
    if isinstance(st, bidel.DropSchemaVersion):
        db.genealogy = cat.drop_schema_version(db.genealogy, st.name)
        # relations whose tables were pruned are no longer part of the store
        keep = set(stored_relations(db.genealogy))
        for name in list(db.relations):
            if name not in keep:
                del db.relations[name]
        return f"dropped schema version {st.name}"
    if isinstance(st, bidel.Materialize):
        versions = {v for v, _ in st.targets}
        if len(versions) != 1:
            raise DmlError("MATERIALIZE targets must name a single schema version")
        (version,) = versions
        named = {t for _, t in st.targets}
        present = set(db.genealogy.tables_of(version))
        unknown = named - present
        if unknown:
            raise cat.CatalogError(
                f"no table {sorted(unknown)[0]!r} in schema version {version!r}"
            )
        steps = migration.materialize(db, version)
        return f"materialized {version} ({len(steps)} migration steps)"
    raise DmlError(f"unsupported statement {st!r}")


def run_script(db: Database, text: str) -> list[str]:
    script = bidel.parse_script(text)
    return [apply_statement(db, st) for st in script.statements]


# ---------------------------------------------------------------------------
# Mini-DML
# ---------------------------------------------------------------------------


def _row_dict(columns: Sequence[str], row: tuple) -> dict:
    return dict(zip(("p",) + tuple(columns), row))


def _matching(table: cat.TableVersion, rows: Iterable[tuple], where) -> set:
    if where is None:
        return set(rows)
    return {r for r in rows if C.eval_condition(where, _row_dict(table.columns, r))}


def _sort_key(row: tuple):
    return tuple((type(c).__name__, repr(c)) for c in row)


def run_dml(db: Database, stmt: bidel.DmlStatement) -> DmlResult:
    g = db.genealogy
    table = g.resolve(stmt.version, stmt.table)
    current = propagation.read(db, stmt.version)[stmt.table]

    if isinstance(stmt, bidel.Select):
        hit = _matching(table, current, stmt.where)
        return DmlResult(("p",) + table.columns, tuple(sorted(hit, key=_sort_key)), len(hit))

    if isinstance(stmt, bidel.Insert):
        unknown = set(stmt.columns) - set(table.columns)
        if unknown:
            raise DmlError(f"unknown column {sorted(unknown)[0]!r} in {stmt.table}")
        if len(stmt.columns) != len(set(stmt.columns)):
            raise DmlError("duplicate column in INSERT")
        if len(stmt.columns) != len(stmt.values):
            raise DmlError(
                f"{len(stmt.columns)} columns but {len(stmt.values)} values"
            )
        given = dict(zip(stmt.columns, stmt.values))
        row = (db.fresh_p(),) + tuple(given.get(c, OMEGA) for c in table.columns)
        rows = set(current)
        rows.add(row)
        kind, affected = "insert", 1
    elif isinstance(stmt, bidel.Update):
        for col, _ in stmt.assignments:
            if col not in table.columns:
                raise DmlError(f"unknown column {col!r} in {stmt.table}")
        hit = _matching(table, current, stmt.where)
        rows = set(current) - hit
        for r in hit:
            env = _row_dict(table.columns, r)
            for col, expr in stmt.assignments:
                env[col] = C.eval_expression(expr, _row_dict(table.columns, r))
            rows.add((r[0],) + tuple(env[c] for c in table.columns))
        kind, affected = "update", len(hit)
    elif isinstance(stmt, bidel.Delete):
        hit = _matching(table, current, stmt.where)
        rows = set(current) - hit
        kind, affected = "delete", len(hit)
    else:
        raise DmlError(f"unsupported statement {stmt!r}")

    if rows != current:
        propagation.write(db, stmt.version, {table.id: rows}, write_kind=kind)
    return DmlResult((), (), affected)


# ---------------------------------------------------------------------------
# Bulk loading
# ---------------------------------------------------------------------------


def load_rows(db: Database, version: str, table: str, lines: Iterable[str]) -> int:
    """Load TSV rows (header first) into one table and propagate.

    A leading `p` column supplies tuple identifiers; otherwise fresh ones
    are assigned.
    """
    it = iter(lines)
    try:
        header = next(it).rstrip("\n").split("\t")
    except StopIteration:
        raise DmlError("empty input: expected a TSV header line")
    tv = db.genealogy.resolve(version, table)
    with_p = header and header[0] == "p"
    expected = list(("p",) + tv.columns) if with_p else list(tv.columns)
    if header != expected:
        raise DmlError(f"header {header} does not match {expected}")
    rows = set(propagation.read(db, version)[table])
    n = 0
    for line in it:
        line = line.rstrip("\n")
        if not line:
            continue
        cells = [decode_cell(c) for c in line.split("\t")]
        if len(cells) != len(expected):
            raise DmlError(f"row {line!r} has {len(cells)} cells, expected {len(expected)}")
        if with_p:
            if not isinstance(cells[0], int):
                raise DmlError(f"p must be an integer, got {cells[0]!r}")
            db.next_p = max(db.next_p, cells[0] + 1)
            rows.add(tuple(cells))
        else:
            rows.add((db.fresh_p(), *cells))
        n += 1
    propagation.write(db, version, {tv.id: rows}, write_kind="insert")
    return n


def dump_tsv(columns: Sequence[str], rows: Iterable[tuple]) -> str:
    out = ["\t".join(columns)]
    for row in sorted(rows, key=_sort_key):
        out.append("\t".join(encode_cell(c) for c in row))
    return "\n".join(out) + "\n"
