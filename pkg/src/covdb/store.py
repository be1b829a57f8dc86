"""Physical storage: one directory per database.

Layout:

    catalog.txt        genealogy (table versions, SMOs, schema versions)
    meta.txt           counters (next p value, next generated id)
    idmap.tsv          generator memo: fn, id, payload cells
    rel/<name>.tsv     one file per stored relation, header = column names

Stored relations are the physical data tables of the current
materialization schema plus, per SMO, the auxiliary tables living on its
physical side (source side while virtualized, target side once
materialized; "both"-sided auxiliaries are always stored).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import catalog as cat
from .rulegen import rules_for
from .values import Value, decode_cell, encode_cell


class StoreError(Exception):
    pass


@dataclass
class Database:
    genealogy: cat.Genealogy
    relations: dict = field(default_factory=dict)  # name -> set of row tuples
    id_memo: dict = field(default_factory=dict)  # fn name -> {payload: id}
    next_p: int = 1
    next_id: int = 1

    # -- engine-managed identifiers ---------------------------------------

    def fresh_p(self) -> int:
        p = self.next_p
        self.next_p += 1
        return p

    def id_fn(self) -> Callable[[str, tuple], Value]:
        """Memoized generator usable as the evaluator's `idgen`."""

        def gen(fn: str, payload: tuple) -> Value:
            memo = self.id_memo.setdefault(fn, {})
            if payload not in memo:
                memo[payload] = f"#{self.next_id}"
                self.next_id += 1
            return memo[payload]

        return gen

    # -- relation access ---------------------------------------------------

    def rows(self, name: str) -> set:
        return self.relations.get(name, set())

    def set_rows(self, name: str, rows) -> None:
        rows = set(rows)
        if rows:
            self.relations[name] = rows
        else:
            self.relations.pop(name, None)


def stored_relations(g: cat.Genealogy) -> dict:
    """Name -> header columns for every relation the store may hold."""
    out: dict = {}
    ms = g.materialization()
    for tid in sorted(ms.physical, key=_natural):
        tv = g.table_versions[tid]
        out[tid] = ("p",) + tv.columns
    for smo in g.smos.values():
        if smo.kind == "CreateTable":
            continue
        sr = rules_for(smo, g)
        here = "target" if smo.state == cat.MATERIALIZED else "source"
        for aux in sr.aux_tables:
            if aux.side in (here, "both"):
                out[aux.name] = aux.columns
    return out


def _natural(s: str):
    head = s.rstrip("0123456789")
    tail = s[len(head):]
    return (head, int(tail) if tail else -1)


# ---------------------------------------------------------------------------
# Snapshot persistence
# ---------------------------------------------------------------------------


def init(path: str, g: Optional[cat.Genealogy] = None) -> Database:
    if os.path.exists(os.path.join(path, "catalog.txt")):
        raise StoreError(f"database already exists at {path}")
    db = Database(g if g is not None else cat.Genealogy())
    save(db, path)
    return db


def save(db: Database, path: str) -> None:
    os.makedirs(os.path.join(path, "rel"), exist_ok=True)
    with open(os.path.join(path, "catalog.txt"), "w") as f:
        f.write(cat.to_text(db.genealogy))
    with open(os.path.join(path, "meta.txt"), "w") as f:
        f.write(f"next_p={db.next_p}\nnext_id={db.next_id}\n")
    with open(os.path.join(path, "idmap.tsv"), "w") as f:
        for fn in sorted(db.id_memo):
            for payload, val in sorted(db.id_memo[fn].items(), key=repr):
                cells = [fn, encode_cell(val)] + [encode_cell(c) for c in payload]
                f.write("\t".join(cells) + "\n")

    headers = stored_relations(db.genealogy)
    reldir = os.path.join(path, "rel")
    for name, cols in headers.items():
        rows = db.relations.get(name, set())
        with open(os.path.join(reldir, f"{name}.tsv"), "w") as f:
            f.write("\t".join(cols) + "\n")
            for row in sorted(rows, key=_row_key):
                if len(row) != len(cols):
                    raise StoreError(
                        f"relation {name!r}: row arity {len(row)} != {len(cols)}"
                    )
                f.write("\t".join(encode_cell(c) for c in row) + "\n")
    # drop files for relations that no longer exist (e.g. after migration)
    for fn in os.listdir(reldir):
        if fn.endswith(".tsv") and fn[:-4] not in headers:
            os.remove(os.path.join(reldir, fn))


def load(path: str) -> Database:
    cat_path = os.path.join(path, "catalog.txt")
    if not os.path.exists(cat_path):
        raise StoreError(f"no database at {path}")
    with open(cat_path) as f:
        g = cat.from_text(f.read())
    db = Database(g)
    with open(os.path.join(path, "meta.txt")) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            key, _, val = line.partition("=")
            if key == "next_p":
                db.next_p = int(val)
            elif key == "next_id":
                db.next_id = int(val)
            else:
                raise StoreError(f"unknown meta entry {key!r}")
    idmap = os.path.join(path, "idmap.tsv")
    if os.path.exists(idmap):
        with open(idmap) as f:
            for line in f:
                line = line.rstrip("\n")
                if not line:
                    continue
                cells = line.split("\t")
                fn, val = cells[0], decode_cell(cells[1])
                payload = tuple(decode_cell(c) for c in cells[2:])
                db.id_memo.setdefault(fn, {})[payload] = val

    headers = stored_relations(g)
    reldir = os.path.join(path, "rel")
    for name, cols in headers.items():
        fpath = os.path.join(reldir, f"{name}.tsv")
        if not os.path.exists(fpath):
            continue
        with open(fpath) as f:
            header = f.readline().rstrip("\n").split("\t")
            if tuple(header) != tuple(cols):
                raise StoreError(
                    f"relation {name!r}: stored header {header} != expected {list(cols)}"
                )
            rows = set()
            for line in f:
                line = line.rstrip("\n")
                if not line:
                    continue
                cells = tuple(decode_cell(c) for c in line.split("\t"))
                if len(cells) != len(cols):
                    raise StoreError(f"relation {name!r}: bad row {line!r}")
                rows.add(cells)
            if rows:
                db.relations[name] = rows
    return db


def _row_key(row: tuple):
    return tuple((type(c).__name__, repr(c)) for c in row)
