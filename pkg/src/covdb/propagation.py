"""Reading and writing any schema version over the single physical store.

A read plan is a sequence of hops from the physically stored tables to the
requested version.  Each hop evaluates one SMO's mapping rule set:

* case 1 - the table version is stored physically: no hop;
* case 2 - it was consumed by a materialized SMO: hop back through that
  SMO's source-directed rules;
* case 3 - its producing SMO is still virtualized: hop forward through the
  target-directed rules.

Writes run map-apply-map: materialize the full state of the written
version (data plus the auxiliary relations of that side), apply the
change, then map hop-by-hop back onto the store, replacing every stored
relation wholesale.  `@o` literals always read the pre-write store.  The
incremental variant replays the same hops through per-relation change
sets and must be observably identical.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import catalog as cat
from .dlog import InvariantError, evaluate
from .rulegen import delta_rules_for, rules_for
from .store import Database, stored_relations
from .values import is_omega


class WriteError(Exception):
    """A rejected write (constraint violation at the written version)."""


@dataclass(frozen=True)
class Hop:
    smo_id: str
    direction: str  # "tgt": evaluate gamma_tgt (forward), "src": gamma_src

    def inverted(self) -> "Hop":
        return Hop(self.smo_id, "src" if self.direction == "tgt" else "tgt")


@dataclass(frozen=True)
class ReadPlan:
    version: str
    hops: tuple


def read_plan(g: cat.Genealogy, version: str) -> ReadPlan:
    ms = g.materialization()
    hops: list[Hop] = []
    done_tv: set[str] = set()
    done_smo: set[str] = set()

    def ensure_smo(smo: cat.SmoInstance, direction: str) -> None:
        if smo.id in done_smo:
            return
        done_smo.add(smo.id)
        inputs = smo.sources if direction == "tgt" else smo.targets
        for tv in inputs:
            ensure_tv(tv)
        hops.append(Hop(smo.id, direction))
        for tv in smo.targets if direction == "tgt" else smo.sources:
            done_tv.add(tv)

    def ensure_tv(tv: str) -> None:
        if tv in done_tv:
            return
        done_tv.add(tv)
        if tv in ms.physical:
            return
        for s in g.outsmos(tv):
            if s.id in ms.materialized:
                ensure_smo(s, "src")
                return
        insmo = g.table_versions[tv].insmo
        if insmo is None:
            raise InvariantError(f"table version {tv} has no physical source")
        ensure_smo(g.smos[insmo], "tgt")

    for tv in sorted(g.schema_versions[version]):
        ensure_tv(tv)
    return ReadPlan(version, tuple(hops))


def _key_preds(g: cat.Genealogy) -> frozenset:
    preds = set(g.table_versions)
    for smo in g.smos.values():
        if smo.kind == "CreateTable":
            continue
        for aux in rules_for(smo, g).aux_tables:
            if aux.keyed:
                preds.add(aux.name)
    return frozenset(preds)


def _run_hop(db: Database, hop: Hop, state: dict, pre_state: dict) -> dict:
    smo = db.genealogy.smos[hop.smo_id]
    sr = rules_for(smo, db.genealogy)
    if sr.remap is not None:
        src_tv, tgt_tv = sr.remap
        a, b = (src_tv, tgt_tv) if hop.direction == "tgt" else (tgt_tv, src_tv)
        out = dict(state)
        out[b] = set(state.get(a, set()))
        return out
    gamma = sr.gamma_tgt if hop.direction == "tgt" else sr.gamma_src
    heads = gamma.head_preds()
    edb = {k: v for k, v in state.items() if k not in heads}
    result = evaluate(
        gamma.rules,
        edb,
        pre_state=pre_state,
        idgen=db.id_fn(),
        key_preds=_key_preds(db.genealogy),
    )
    out = dict(state)
    for h in heads:
        out[h] = result.get(h, set())
    for k, v in result.items():
        if k not in out:
            out[k] = v
    return out


def version_state(db: Database, plan: ReadPlan) -> dict:
    """Full derived state (all hops applied) starting from the store."""
    state = {k: set(v) for k, v in db.relations.items()}
    for hop in plan.hops:
        state = _run_hop(db, hop, state, db.relations)
    return state


def read(db: Database, version: str) -> dict:
    """Table name -> set of rows (key first) for one schema version."""
    g = db.genealogy
    plan = read_plan(g, version)
    state = version_state(db, plan)
    return {
        g.table_versions[tv].name: set(state.get(tv, set()))
        for tv in g.schema_versions[version]
    }


# ---------------------------------------------------------------------------
# Writes
# ---------------------------------------------------------------------------


def _validate_written(g: cat.Genealogy, version: str, state: dict, written) -> None:
    for tv in written:
        table = g.table_versions[tv]
        ncols = len(table.columns)
        seen_keys: set = set()
        for row in state.get(tv, set()):
            if len(row) != ncols + 1:
                raise WriteError(
                    f"{table.name}: row arity {len(row)} != {ncols + 1}"
                )
            if is_omega(row[0]):
                raise WriteError(f"{table.name}: key may not be NULL")
            if row[0] in seen_keys:
                raise WriteError(f"{table.name}: duplicate key {row[0]!r}")
            seen_keys.add(row[0])
            if ncols and all(is_omega(c) for c in row[1:]):
                raise WriteError(
                    f"{table.name}: row {row[0]!r} has an entirely NULL payload"
                )
    # referential integrity for foreign keys visible at this version
    tvs = g.schema_versions[version]
    for smo in g.smos.values():
        fk = _fk_pair(g, smo)
        if fk is None:
            continue
        s_tv, t_tv, fk_pos = fk
        if s_tv not in tvs or t_tv not in tvs:
            continue
        parents = {row[0] for row in state.get(t_tv, set())}
        for row in state.get(s_tv, set()):
            v = row[1 + fk_pos]
            if not is_omega(v) and v not in parents:
                raise WriteError(
                    f"{g.table_versions[s_tv].name}: foreign key {v!r} has no parent row"
                )


def _fk_pair(g: cat.Genealogy, smo: cat.SmoInstance):
    """(child tv, parent tv, fk column position) when `smo` relates them."""
    if smo.kind == "DecomposeFK":
        s_tv, t_tv = smo.targets
    elif smo.kind in ("OuterJoinFK", "InnerJoinFK"):
        s_tv, t_tv = smo.sources
    else:
        return None
    child = g.table_versions[s_tv]
    return (s_tv, t_tv, child.columns.index(smo.smo.on.fk_column))


def write(
    db: Database,
    version: str,
    new_tables: dict,
    *,
    incremental: bool = False,
    write_kind: str = "update",
) -> None:
    """Replace the contents of tables at `version` and propagate to the store.

    `new_tables` maps table-version id -> full new row set.  `write_kind`
    labels the change (insert/delete/update) so the incremental path can
    pick specialized change rules where they exist.
    """
    g = db.genealogy
    plan = read_plan(g, version)
    state = version_state(db, plan)
    old_state = {k: set(v) for k, v in state.items()}
    for tv, rows in new_tables.items():
        if tv not in g.schema_versions[version]:
            raise WriteError(f"table version {tv} is not part of version {version!r}")
        state[tv] = set(rows)
    _validate_written(g, version, state, new_tables)

    # `@o` literals on the way back read the pre-write state; use the fully
    # derived old state so auxiliaries that only existed as derivations
    # (e.g. an id map over freshly loaded data) keep identifying rows.
    for hop in reversed(plan.hops):
        back = hop.inverted()
        if incremental:
            state = _run_hop_incremental(db, back, state, old_state, write_kind)
        else:
            state = _run_hop(db, back, state, old_state)

    headers = stored_relations(g)
    for name in headers:
        db.set_rows(name, state.get(name, set()))


def _run_hop_incremental(
    db: Database,
    hop: Hop,
    state: dict,
    old_state: dict,
    write_kind: str,
) -> dict:
    """One write-back hop via change sets applied to the hop's old outputs."""
    g = db.genealogy
    smo = g.smos[hop.smo_id]
    sr = rules_for(smo, g)
    if sr.remap is not None:
        return _run_hop(db, hop, state, old_state)
    gamma = sr.gamma_tgt if hop.direction == "tgt" else sr.gamma_src
    head_preds = gamma.head_preds()

    direction = "backward" if hop.direction == "tgt" else "forward"
    use_split_fast_path = (
        smo.kind == "Split" and write_kind == "insert" and direction == "backward"
    )
    if use_split_fast_path:
        # dedicated insert rules: seed the T change set, derive the others
        t_tv = smo.sources[0]
        deltas = delta_rules_for(smo, g, "insert", "backward")
        edb = {
            f"delta_ins_{t_tv}": state.get(t_tv, set()) - old_state.get(t_tv, set())
        }
        dstate = evaluate(deltas.rules, edb, pre_state=old_state, idgen=db.id_fn())
        out = dict(state)
        for pred in head_preds:
            rows = set(old_state.get(pred, set()))
            rows |= dstate.get(f"delta_ins_{pred}", set())
            out[pred] = rows
        return out

    # generic path: recompute the hop, then express it as change sets over
    # the old outputs and apply those (observably identical to _run_hop)
    full = _run_hop(db, hop, state, old_state)
    out = dict(state)
    for pred in head_preds:
        new_rows = full.get(pred, set())
        old_rows = old_state.get(pred, set())
        ins = new_rows - old_rows
        dels = old_rows - new_rows
        rows = (set(old_rows) - dels) | ins
        out[pred] = rows
    return out


def hop_count(g: cat.Genealogy, version: str) -> int:
    return len(read_plan(g, version).hops)
