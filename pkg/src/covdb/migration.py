"""Moving the physical representation between materialization states.

Materializing toward a schema version makes exactly the SMOs on its
evolution path physical: their target tables (and target-side auxiliary
relations) become stored, everything else becomes derived.  The logical
content of every schema version is unchanged by migration, up to a
bijection on generated identifiers.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import catalog as cat
from .dlog import InvariantError
from .propagation import _run_hop, Hop
from .store import Database, stored_relations


@dataclass(frozen=True)
class MigrationStep:
    smo_id: str
    action: str  # "materialize" | "virtualize"


def _target_m(g: cat.Genealogy, version: str) -> frozenset:
    """SMO ids that must be materialized so `version`'s tables are stored."""
    if version not in g.schema_versions:
        raise cat.CatalogError(f"unknown schema version {version!r}")
    chain: list[str] = []
    v = version
    while v is not None:
        chain.append(v)
        v = g.version_parents[v]
    m: set[str] = set()
    for v in chain:
        for sid in g.version_smos[v]:
            if g.smos[sid].kind not in ("CreateTable", "DropTable"):
                m.add(sid)
    return frozenset(m)


def plan_migration(g: cat.Genealogy, version: str) -> list[MigrationStep]:
    target = _target_m(g, version)
    if not cat.is_valid(g, target):
        raise cat.CatalogError(
            f"version {version!r} has no valid materialization (a DROP TABLE "
            "or branching evolution is in the way)"
        )
    current = g.materialization().materialized
    order = sorted(target - current, key=_smo_order(g))
    steps = [MigrationStep(s, "materialize") for s in order]
    order = sorted(current - target, key=_smo_order(g), reverse=True)
    steps += [MigrationStep(s, "virtualize") for s in order]
    return steps


def _smo_order(g: cat.Genealogy):
    """Topological depth of an SMO in the genealogy (root tables = 0)."""
    depth: dict[str, int] = {}

    def tv_depth(tv: str) -> int:
        ins = g.table_versions[tv].insmo
        if ins is None or g.smos[ins].kind == "CreateTable":
            return 0
        return smo_depth(ins) + 1

    def smo_depth(sid: str) -> int:
        if sid not in depth:
            smo = g.smos[sid]
            depth[sid] = max((tv_depth(t) for t in smo.sources), default=0)
        return depth[sid]

    return smo_depth


def full_state(db: Database) -> dict:
    """Every table version and auxiliary relation, derived from the store."""
    g = db.genealogy
    ms = g.materialization()
    state = {k: set(v) for k, v in db.relations.items()}
    available: set[str] = set(ms.physical)
    pending = [s for s in g.smos.values() if s.kind not in ("CreateTable", "DropTable")]
    while pending:
        progressed = False
        for smo in list(pending):
            direction = "src" if smo.id in ms.materialized else "tgt"
            inputs = smo.targets if direction == "src" else smo.sources
            if all(tv in available for tv in inputs):
                state = _run_hop(db, Hop(smo.id, direction), state, db.relations)
                available.update(smo.sources)
                available.update(smo.targets)
                pending.remove(smo)
                progressed = True
        if not progressed:
            raise InvariantError(
                "cannot derive table versions " + ", ".join(sorted(
                    tv for s in pending for tv in s.sources + s.targets
                    if tv not in available
                ))
            )
    return state


def materialize(db: Database, version: str) -> list[MigrationStep]:
    """Migrate the store so `version`'s tables are the physical ones."""
    g = db.genealogy
    steps = plan_migration(g, version)
    if not steps:
        return steps
    state = full_state(db)
    g2 = g
    for step in steps:
        g2 = g2.with_state(
            step.smo_id,
            cat.MATERIALIZED if step.action == "materialize" else cat.VIRTUALIZED,
        )
    db.genealogy = g2
    new_store = {}
    for name in stored_relations(g2):
        rows = state.get(name, set())
        if rows:
            new_store[name] = set(rows)
    db.relations = new_store
    return steps


def canonicalize_ids(relations: dict, prefix: str = "#") -> dict:
    """Rename generated ids consistently so isomorphic states compare equal."""
    is_id = lambda v: isinstance(v, str) and v.startswith(prefix)
    mapping: dict = {}

    def canon_cell(c):
        if not is_id(c):
            return c
        if c not in mapping:
            mapping[c] = f"{prefix}{len(mapping) + 1}"
        return mapping[c]

    out = {}
    for name in sorted(relations):
        rows = sorted(
            relations[name],
            key=lambda r: tuple(
                ("\0id",) if is_id(c) else (type(c).__name__, repr(c)) for c in r
            ),
        )
        out[name] = {tuple(canon_cell(c) for c in row) for row in rows}
    return out
