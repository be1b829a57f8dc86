"""Command-line front end.

Subcommands operate on a snapshot directory (`--db`, default `./ivdb`):

    init [dir]                create an empty database
    exec <script>             run an evolution/migration script
    dml "<statement>"         run one SELECT/INSERT/UPDATE/DELETE
    load-data <v.t> <tsv>     bulk-load TSV rows into one table
    materialize <v.t,...>     migrate the physical representation
    verify [--smo X] [--all]  check mapping-rule bidirectionality
    plan [--read v.t] [--rules smo]   inspect propagation plans and rules
    gen-sql [--version V] [--out dir] emit SQL views and trigger sketches
    bench --workload mix:...  micro-benchmark across materializations

Exit codes: 0 success, 1 user error (`error:` on stderr), 2 broken
internal invariant (`invariant:` on stderr).
"""

from __future__ import annotations

import argparse
import os
import random
import sys
import time

from . import bidel
from . import catalog as cat
from . import engine, migration, propagation, sqlgen, store, verify
from .dlog import InvariantError, print_rule
from .lex import ParseError
from .rulegen import rules_for


class CliError(ValueError):
    pass


USER_ERRORS = (
    CliError,
    ParseError,
    cat.CatalogError,
    engine.DmlError,
    propagation.WriteError,
    sqlgen.SqlGenError,
    store.StoreError,
    OSError,
)


def _open(args) -> store.Database:
    return store.load(args.db)


def _qualified(text: str) -> tuple[str, str]:
    version, dot, table = text.rpartition(".")
    if not dot or not version or not table:
        raise CliError(f"expected <version>.<table>, got {text!r}")
    return version, table


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_init(args) -> int:
    target = args.dir if args.dir is not None else args.db
    store.init(target)
    print(f"initialized empty database at {target}")
    return 0


def cmd_exec(args) -> int:
    with open(args.script) as f:
        text = f.read()
    db = _open(args)
    for line in engine.run_script(db, text):
        print(line)
    store.save(db, args.db)
    return 0


def cmd_dml(args) -> int:
    stmt = bidel.parse_dml(args.statement)
    db = _open(args)
    result = engine.run_dml(db, stmt)
    if result.columns:
        sys.stdout.write(engine.dump_tsv(result.columns, result.rows))
    else:
        store.save(db, args.db)
        print(f"{result.affected} row(s) affected")
    return 0


def cmd_load_data(args) -> int:
    version, table = _qualified(args.target)
    db = _open(args)
    with open(args.tsv) as f:
        n = engine.load_rows(db, version, table, f)
    store.save(db, args.db)
    print(f"loaded {n} row(s) into {version}.{table}")
    return 0


def cmd_materialize(args) -> int:
    targets = [_qualified(t.strip()) for t in args.targets.split(",") if t.strip()]
    if not targets:
        raise CliError("no migration targets given")
    db = _open(args)
    report = engine.apply_statement(db, bidel.Materialize(tuple(targets)))
    store.save(db, args.db)
    g = db.genealogy
    ms = g.materialization()
    if args.porcelain:
        for tid in sorted(ms.physical):
            print(f"physical\t{tid}\t{g.table_versions[tid].name}")
        for sid in sorted(ms.materialized):
            print(f"materialized\t{sid}\t{g.smos[sid].kind}")
    else:
        print(report)
        names = ", ".join(
            f"{tid} ({g.table_versions[tid].name})" for tid in sorted(ms.physical)
        )
        print(f"physical tables: {names}")
    return 0


def cmd_verify(args) -> int:
    db = _open(args)
    g = db.genealogy
    smos = [s for s in g.smos.values() if s.kind != "CreateTable"]
    if args.smo is not None:
        smos = [s for s in smos if s.id == args.smo or s.kind == args.smo]
        if not smos:
            raise CliError(f"no operation matches {args.smo!r}")
    elif not args.all:
        raise CliError("pass --all or --smo <kind-or-id>")
    failures = 0
    for smo in smos:
        for direction in ("src", "tgt"):
            verdict = verify.check_direction(smo, g, direction)
            if args.porcelain:
                print(f"{smo.id}\t{smo.kind}\t{direction}\t"
                      f"{'identity' if verdict.identity else 'residual'}")
            else:
                print(f"{smo.id} ({smo.kind}) [{direction}]: "
                      f"{'Identity' if verdict.identity else 'NOT bidirectional'}")
            if args.trace:
                for line in verdict.proof:
                    print(f"    {line}")
            if not verdict.identity:
                failures += 1
                for r in verdict.residual:
                    print(f"    residual: {r}")
    if failures:
        raise CliError(f"{failures} direction(s) failed verification")
    return 0


def cmd_plan(args) -> int:
    db = _open(args)
    g = db.genealogy
    did = False
    if args.read is not None:
        version, table = _qualified(args.read)
        g.resolve(version, table)
        plan = propagation.read_plan(g, version)
        did = True
        if args.porcelain:
            for hop in plan.hops:
                print(f"{hop.smo_id}\t{g.smos[hop.smo_id].kind}\t{hop.direction}")
        else:
            print(f"read plan for {version} ({len(plan.hops)} hop(s)):")
            for hop in plan.hops:
                smo = g.smos[hop.smo_id]
                arrow = "forward" if hop.direction == "tgt" else "backward"
                print(f"  {hop.smo_id} {smo.kind} [{arrow}]")
            if not plan.hops:
                print("  local (all tables physical)")
    if args.rules is not None:
        if args.rules not in g.smos:
            raise CliError(f"unknown operation id {args.rules!r}")
        sr = rules_for(g.smos[args.rules], g)
        did = True
        for label, ruleset in (("gamma_tgt", sr.gamma_tgt), ("gamma_src", sr.gamma_src)):
            print(f"{label}:")
            for rule in ruleset:
                print(f"  {print_rule(rule)}")
    if not did:
        raise CliError("pass --read <version.table> and/or --rules <smo-id>")
    return 0


def cmd_gen_sql(args) -> int:
    db = _open(args)
    texts = sqlgen.emit_all(db.genealogy, args.version)
    if args.out is not None:
        os.makedirs(args.out, exist_ok=True)
        for tv_id, text in texts.items():
            path = os.path.join(args.out, f"{tv_id}.sql")
            with open(path, "w") as f:
                f.write(text)
            print(f"wrote {path}")
    else:
        for tv_id in sorted(texts):
            sys.stdout.write(texts[tv_id])
            sys.stdout.write("\n")
    return 0


# ---------------------------------------------------------------------------
# Benchmark
# ---------------------------------------------------------------------------


def _parse_workload(spec: str) -> list[tuple[str, int]]:
    """`mix:50r20i20u10d` -> [("read", 50), ("insert", 20), ...]."""
    kind, _, body = spec.partition(":")
    if kind != "mix" or not body:
        raise CliError(f"unsupported workload {spec!r} (expected mix:<counts>)")
    ops = {"r": "read", "i": "insert", "u": "update", "d": "delete"}
    out: list[tuple[str, int]] = []
    num = ""
    for ch in body:
        if ch.isdigit():
            num += ch
        elif ch in ops and num:
            out.append((ops[ch], int(num)))
            num = ""
        else:
            raise CliError(f"bad workload token {ch!r} in {spec!r}")
    if num or not out:
        raise CliError(f"malformed workload {spec!r}")
    return out


def _bench_ops(db, version: str, mix, rng) -> tuple[int, float]:
    """Run the mix against one version; returns (hops used, seconds)."""
    g = db.genealogy
    tables = sorted(g.tables_of(version))
    hops = propagation.hop_count(g, version)
    used = 0
    t0 = time.perf_counter()
    for op, count in mix:
        for _ in range(count):
            table = rng.choice(tables)
            tv = g.resolve(version, table)
            rows = set(propagation.read(db, version)[table])
            used += hops
            if op == "read":
                continue
            if op == "insert":
                rows.add((db.fresh_p(),) + tuple(
                    f"{c}{rng.randrange(1000)}" for c in tv.columns
                ))
                kind = "insert"
            elif rows:
                victim = rng.choice(sorted(rows, key=engine._sort_key))
                rows.discard(victim)
                if op == "update":
                    rows.add((victim[0],) + tuple(
                        f"{c}{rng.randrange(1000)}" for c in tv.columns
                    ))
                kind = op
            else:
                continue
            propagation.write(db, version, {tv.id: rows}, write_kind=kind)
            used += hops
    return used, time.perf_counter() - t0


def cmd_bench(args) -> int:
    mix = _parse_workload(args.workload)
    versions = [v.strip() for v in args.versions.split(",") if v.strip()]
    if not versions:
        raise CliError("pass --versions <name>[,<name>...]")
    db = _open(args)
    for v in versions:
        if v not in db.genealogy.schema_versions:
            raise CliError(f"unknown schema version {v!r}")
    rng = random.Random(args.seed)
    rows = []
    for target in versions:
        db = _open(args)  # fresh snapshot per materialization
        migration.materialize(db, target)
        for v in versions:
            hops = propagation.hop_count(db.genealogy, v)
            used, secs = _bench_ops(db, v, mix, random.Random(rng.randrange(2**32)))
            rows.append((target, v, hops, used, secs))
    if args.porcelain:
        for target, v, hops, used, secs in rows:
            print(f"{target}\t{v}\t{hops}\t{used}\t{secs:.6f}")
    else:
        print(f"{'materialized':<16}{'workload on':<16}{'hops':>6}{'hop-ops':>9}{'seconds':>10}")
        for target, v, hops, used, secs in rows:
            print(f"{target:<16}{v:<16}{hops:>6}{used:>9}{secs:>10.3f}")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="covdb", description=__doc__.split("\n")[0])
    p.add_argument("--db", default="./ivdb", help="database directory (default ./ivdb)")
    p.add_argument("--porcelain", action="store_true", help="machine-readable TSV output")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("init", help="create an empty database")
    sp.add_argument("dir", nargs="?", default=None)
    sp.set_defaults(fn=cmd_init)

    sp = sub.add_parser("exec", help="run an evolution/migration script")
    sp.add_argument("script")
    sp.set_defaults(fn=cmd_exec)

    sp = sub.add_parser("dml", help="run one DML statement")
    sp.add_argument("statement")
    sp.set_defaults(fn=cmd_dml)

    sp = sub.add_parser("load-data", help="bulk-load a TSV file into one table")
    sp.add_argument("target", metavar="version.table")
    sp.add_argument("tsv")
    sp.set_defaults(fn=cmd_load_data)

    sp = sub.add_parser("materialize", help="migrate the physical representation")
    sp.add_argument("targets", metavar="version.table[,version.table...]")
    sp.set_defaults(fn=cmd_materialize)

    sp = sub.add_parser("verify", help="check mapping-rule bidirectionality")
    sp.add_argument("--smo", default=None, help="operation id or kind")
    sp.add_argument("--all", action="store_true")
    sp.add_argument("--trace", action="store_true")
    sp.set_defaults(fn=cmd_verify)

    sp = sub.add_parser("plan", help="inspect read plans and mapping rules")
    sp.add_argument("--read", default=None, metavar="version.table")
    sp.add_argument("--rules", default=None, metavar="smo-id")
    sp.set_defaults(fn=cmd_plan)

    sp = sub.add_parser("gen-sql", help="emit SQL views and trigger sketches")
    sp.add_argument("--version", default=None)
    sp.add_argument("--out", default=None)
    sp.set_defaults(fn=cmd_gen_sql)

    sp = sub.add_parser("bench", help="micro-benchmark across materializations")
    sp.add_argument("--workload", required=True)
    sp.add_argument("--versions", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(fn=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except USER_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except InvariantError as e:
        print(f"invariant: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - last resort
        print(f"invariant: unexpected {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
