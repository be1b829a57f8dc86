"""Shared builders for the test suite: genealogies, databases, random data."""

from __future__ import annotations

import random

from covdb import catalog as cat
from covdb import engine, propagation
from covdb.bidel import parse_script
from covdb.store import Database
from covdb.values import OMEGA

TASKY_SCRIPT = """\
CREATE SCHEMA VERSION TasKy WITH
  CREATE TABLE Task(author, task, prio);
CREATE SCHEMA VERSION Do! FROM TasKy WITH
  SPLIT TABLE Task INTO Todo WITH prio=1;
  DROP COLUMN prio FROM Todo DEFAULT 1;
CREATE SCHEMA VERSION TasKy2 FROM TasKy WITH
  DECOMPOSE TABLE Task INTO Task(task, prio), Author(author) ON FK author;
  RENAME COLUMN author IN Author TO name;
"""


def build_genealogy(text: str) -> cat.Genealogy:
    g = cat.Genealogy()
    for st in parse_script(text).statements:
        g = cat.register_evolution(g, st.parent, st.name, st.smos)
    return g


def build_db(text: str) -> Database:
    return Database(build_genealogy(text))


def tasky_db() -> Database:
    return build_db(TASKY_SCRIPT)


def load_table(db: Database, version: str, table: str, rows) -> None:
    """Set one table's contents at a version and propagate to the store."""
    tv = db.genealogy.resolve(version, table)
    propagation.write(db, version, {tv.id: set(rows)}, write_kind="update")


def insert_task(db: Database, author: str, task: str, prio: int) -> int:
    rows = set(propagation.read(db, "TasKy")["Task"])
    p = db.fresh_p()
    rows.add((p, author, task, prio))
    tv = db.genealogy.resolve("TasKy", "Task")
    propagation.write(db, "TasKy", {tv.id: rows}, write_kind="insert")
    return p


def random_payload(rng: random.Random, ncols: int, omega_ok: bool = True):
    cells = []
    for _ in range(ncols):
        roll = rng.random()
        if omega_ok and roll < 0.08:
            cells.append(OMEGA)
        elif roll < 0.5:
            cells.append(rng.randrange(5))
        else:
            cells.append(rng.choice("abcde"))
    return tuple(cells)


def canonical(relations: dict) -> dict:
    """Order-insensitive, generated-id-insensitive comparison form."""
    from covdb.migration import canonicalize_ids

    return canonicalize_ids({k: set(v) for k, v in relations.items()})
