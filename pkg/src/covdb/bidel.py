"""Parser for evolution scripts and the mini-DML.

A script is a `;`-separated sequence of statements:

    CREATE SCHEMA VERSION v2 FROM v1 WITH <smo>; <smo>; ...
    DROP SCHEMA VERSION v2;
    MATERIALIZE v2.Todo, v2.Author;

SMO statements (keywords case-insensitive, identifiers case-sensitive,
`!` allowed in version names):

    CREATE TABLE R(c1, ..., cn)
    DROP TABLE R
    RENAME TABLE R INTO R2
    RENAME COLUMN c IN R TO c2
    ADD COLUMN b AS <expr> INTO R
    DROP COLUMN b FROM R DEFAULT <expr>
    DECOMPOSE TABLE R INTO S(A...), T(B...) ON (PK | FK fkcol | <cond>)
    [OUTER] JOIN TABLE S, T INTO R ON (PK | FK fkcol | <cond>)
    SPLIT TABLE T INTO R WITH <cond> [, S WITH <cond>]
    MERGE TABLE R (<cond>), S (<cond>) INTO T

PARTITION is accepted as an alias of SPLIT.  `--` starts a line comment.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from . import conditions as C
from .lex import ParseError, TokenStream, tokenize
from .values import Value

# ---------------------------------------------------------------------------
# SMO AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CreateTable:
    table: str
    columns: tuple[str, ...]


@dataclass(frozen=True)
class DropTable:
    table: str


@dataclass(frozen=True)
class RenameTable:
    table: str
    new_name: str


@dataclass(frozen=True)
class RenameColumn:
    table: str
    column: str
    new_name: str


@dataclass(frozen=True)
class AddColumn:
    table: str
    column: str
    fn: C.Expression  # value of the new column, computed from the old columns


@dataclass(frozen=True)
class DropColumn:
    table: str
    column: str
    fn: C.Expression  # default recomputed when a new-side row flows back


@dataclass(frozen=True)
class JoinSpec:
    """ON clause of DECOMPOSE/JOIN: primary key, foreign key, or condition."""

    kind: str  # "pk" | "fk" | "cond"
    fk_column: Optional[str] = None
    cond: Optional[C.Condition] = None


@dataclass(frozen=True)
class Decompose:
    table: str
    first: str
    first_columns: tuple[str, ...]
    second: str
    second_columns: tuple[str, ...]
    on: JoinSpec


@dataclass(frozen=True)
class Join:
    first: str
    second: str
    table: str  # result
    on: JoinSpec
    outer: bool


@dataclass(frozen=True)
class Split:
    table: str
    first: str
    first_cond: C.Condition
    second: Optional[str] = None
    second_cond: Optional[C.Condition] = None


@dataclass(frozen=True)
class Merge:
    first: str
    first_cond: C.Condition
    second: str
    second_cond: Optional[C.Condition]
    table: str  # result


Smo = Union[
    CreateTable,
    DropTable,
    RenameTable,
    RenameColumn,
    AddColumn,
    DropColumn,
    Decompose,
    Join,
    Split,
    Merge,
]


# ---------------------------------------------------------------------------
# Statements
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CreateSchemaVersion:
    name: str
    parent: Optional[str]
    smos: tuple[Smo, ...]


@dataclass(frozen=True)
class DropSchemaVersion:
    name: str


@dataclass(frozen=True)
class Materialize:
    targets: tuple[tuple[str, str], ...]  # (version, table)


Statement = Union[CreateSchemaVersion, DropSchemaVersion, Materialize]


@dataclass(frozen=True)
class BidelScript:
    statements: tuple[Statement, ...]


@dataclass(frozen=True)
class Select:
    version: str
    table: str
    where: Optional[C.Condition] = None


@dataclass(frozen=True)
class Insert:
    version: str
    table: str
    columns: tuple[str, ...]
    values: tuple[Value, ...]


@dataclass(frozen=True)
class Update:
    version: str
    table: str
    assignments: tuple[tuple[str, C.Expression], ...]
    where: Optional[C.Condition] = None


@dataclass(frozen=True)
class Delete:
    version: str
    table: str
    where: Optional[C.Condition] = None


DmlStatement = Union[Select, Insert, Update, Delete]


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def _ident(ts: TokenStream) -> str:
    return ts.expect_ident().text


def _column_list(ts: TokenStream) -> tuple[str, ...]:
    ts.expect_op("(")
    cols = [_ident(ts)]
    while ts.take_op(","):
        cols.append(_ident(ts))
    ts.expect_op(")")
    return tuple(cols)


def _qualified(ts: TokenStream) -> tuple[str, str]:
    version = _ident(ts)
    ts.expect_op(".")
    table = _ident(ts)
    return version, table


def _join_spec(ts: TokenStream) -> JoinSpec:
    t = ts.peek()
    if t.is_kw("PK"):
        ts.next()
        return JoinSpec("pk")
    if t.is_kw("FK"):
        ts.next()
        return JoinSpec("fk", fk_column=_ident(ts))
    return JoinSpec("cond", cond=C.parse_condition_tokens(ts))


def _parse_smo(ts: TokenStream) -> Smo:
    t = ts.peek()
    if t.is_kw("CREATE"):
        ts.next()
        ts.expect_kw("TABLE")
        name = _ident(ts)
        cols = _column_list(ts)
        return CreateTable(name, cols)
    if t.is_kw("DROP"):
        ts.next()
        nxt = ts.expect_kw("TABLE", "COLUMN")
        if nxt.is_kw("TABLE"):
            return DropTable(_ident(ts))
        col = _ident(ts)
        ts.expect_kw("FROM")
        table = _ident(ts)
        ts.expect_kw("DEFAULT")
        fn = C.parse_expression_tokens(ts)
        return DropColumn(table, col, fn)
    if t.is_kw("RENAME"):
        ts.next()
        nxt = ts.expect_kw("TABLE", "COLUMN")
        if nxt.is_kw("TABLE"):
            old = _ident(ts)
            ts.expect_kw("INTO")
            return RenameTable(old, _ident(ts))
        col = _ident(ts)
        ts.expect_kw("IN")
        table = _ident(ts)
        ts.expect_kw("TO")
        return RenameColumn(table, col, _ident(ts))
    if t.is_kw("ADD"):
        ts.next()
        ts.expect_kw("COLUMN")
        col = _ident(ts)
        ts.expect_kw("AS")
        fn = C.parse_expression_tokens(ts)
        ts.expect_kw("INTO")
        return AddColumn(_ident(ts), col, fn)
    if t.is_kw("DECOMPOSE"):
        ts.next()
        ts.expect_kw("TABLE")
        table = _ident(ts)
        ts.expect_kw("INTO")
        first = _ident(ts)
        first_cols = _column_list(ts)
        ts.expect_op(",")
        second = _ident(ts)
        second_cols = _column_list(ts)
        ts.expect_kw("ON")
        return Decompose(table, first, first_cols, second, second_cols, _join_spec(ts))
    if t.is_kw("OUTER") or t.is_kw("JOIN"):
        outer = False
        if t.is_kw("OUTER"):
            ts.next()
            outer = True
        ts.expect_kw("JOIN")
        ts.expect_kw("TABLE")
        first = _ident(ts)
        ts.expect_op(",")
        second = _ident(ts)
        ts.expect_kw("INTO")
        table = _ident(ts)
        ts.expect_kw("ON")
        return Join(first, second, table, _join_spec(ts), outer)
    if t.is_kw("SPLIT", "PARTITION"):
        ts.next()
        ts.expect_kw("TABLE")
        table = _ident(ts)
        ts.expect_kw("INTO")
        first = _ident(ts)
        ts.expect_kw("WITH")
        first_cond = C.parse_condition_tokens(ts)
        second = second_cond = None
        if ts.take_op(","):
            second = _ident(ts)
            ts.expect_kw("WITH")
            second_cond = C.parse_condition_tokens(ts)
        return Split(table, first, first_cond, second, second_cond)
    if t.is_kw("MERGE"):
        ts.next()
        ts.expect_kw("TABLE")
        first = _ident(ts)
        ts.expect_op("(")
        first_cond = C.parse_condition_tokens(ts)
        ts.expect_op(")")
        ts.expect_op(",")
        second = _ident(ts)
        ts.expect_op("(")
        second_cond = C.parse_condition_tokens(ts)
        ts.expect_op(")")
        ts.expect_kw("INTO")
        return Merge(first, first_cond, second, second_cond, _ident(ts))
    raise ParseError("expected an SMO statement", t.line, t.col, t.text)


def _starts_statement(ts: TokenStream) -> bool:
    """True when the upcoming tokens begin a new top-level statement."""
    t = ts.peek()
    if t.kind == "EOF":
        return True
    if t.is_kw("MATERIALIZE"):
        return True
    if t.is_kw("CREATE", "DROP"):
        nxt = ts.toks[ts.pos + 1] if ts.pos + 1 < len(ts.toks) else t
        return nxt.is_kw("SCHEMA")
    return False


def parse_script(text: str) -> BidelScript:
    ts = TokenStream(tokenize(text))
    statements: list[Statement] = []
    while ts.peek().kind != "EOF":
        t = ts.peek()
        if t.is_kw("CREATE") and ts.toks[ts.pos + 1].is_kw("SCHEMA"):
            ts.next()
            ts.expect_kw("SCHEMA")
            ts.expect_kw("VERSION")
            name = _ident(ts)
            parent = None
            if ts.peek().is_kw("FROM"):
                ts.next()
                parent = _ident(ts)
            smos: list[Smo] = []
            if ts.peek().is_kw("WITH"):
                ts.next()
                smos.append(_parse_smo(ts))
                while ts.take_op(";"):
                    if _starts_statement(ts):
                        break
                    smos.append(_parse_smo(ts))
            else:
                ts.take_op(";")
            statements.append(CreateSchemaVersion(name, parent, tuple(smos)))
            continue
        if t.is_kw("DROP") and ts.toks[ts.pos + 1].is_kw("SCHEMA"):
            ts.next()
            ts.expect_kw("SCHEMA")
            ts.expect_kw("VERSION")
            statements.append(DropSchemaVersion(_ident(ts)))
            ts.take_op(";")
            continue
        if t.is_kw("MATERIALIZE"):
            ts.next()
            targets = [_qualified(ts)]
            while ts.take_op(","):
                targets.append(_qualified(ts))
            statements.append(Materialize(tuple(targets)))
            ts.take_op(";")
            continue
        raise ParseError("expected a statement", t.line, t.col, t.text)
    if not statements:
        raise ParseError("empty script")
    return BidelScript(tuple(statements))


def parse_dml(text: str) -> DmlStatement:
    ts = TokenStream(tokenize(text))
    t = ts.peek()
    stmt: DmlStatement
    if t.is_kw("SELECT"):
        ts.next()
        ts.expect_op("*")
        ts.expect_kw("FROM")
        version, table = _qualified(ts)
        where = None
        if ts.peek().is_kw("WHERE"):
            ts.next()
            where = C.parse_condition_tokens(ts)
        stmt = Select(version, table, where)
    elif t.is_kw("INSERT"):
        ts.next()
        ts.expect_kw("INTO")
        version, table = _qualified(ts)
        cols = _column_list(ts)
        # both `VALUES (...)` and `= (...)` are accepted
        if ts.peek().is_kw("VALUES"):
            ts.next()
        else:
            ts.expect_op("=")
        ts.expect_op("(")
        values = [_dml_value(ts)]
        while ts.take_op(","):
            values.append(_dml_value(ts))
        ts.expect_op(")")
        if len(cols) != len(values):
            raise ParseError(
                f"insert names {len(cols)} columns but provides {len(values)} values"
            )
        stmt = Insert(version, table, cols, tuple(values))
    elif t.is_kw("UPDATE"):
        ts.next()
        version, table = _qualified(ts)
        ts.expect_kw("SET")
        assignments = [_assignment(ts)]
        while ts.take_op(","):
            assignments.append(_assignment(ts))
        where = None
        if ts.peek().is_kw("WHERE"):
            ts.next()
            where = C.parse_condition_tokens(ts)
        stmt = Update(version, table, tuple(assignments), where)
    elif t.is_kw("DELETE"):
        ts.next()
        ts.expect_kw("FROM")
        version, table = _qualified(ts)
        where = None
        if ts.peek().is_kw("WHERE"):
            ts.next()
            where = C.parse_condition_tokens(ts)
        stmt = Delete(version, table, where)
    else:
        raise ParseError("expected SELECT, INSERT, UPDATE or DELETE", t.line, t.col, t.text)
    end = ts.take_op(";")
    tail = ts.peek()
    if tail.kind != "EOF":
        raise ParseError("trailing input after statement", tail.line, tail.col, tail.text)
    return stmt


def _dml_value(ts: TokenStream) -> Value:
    t = ts.peek()
    # bare identifiers in a value tuple are taken as text
    if t.kind == "IDENT" and not t.is_kw("TRUE", "FALSE", "NULL", "OMEGA"):
        ts.next()
        return t.text
    if ts.at_op("-"):
        ts.next()
        n = ts.peek()
        if n.kind != "NUMBER":
            raise ParseError("expected a number after '-'", n.line, n.col, n.text)
        ts.next()
        return -(float(n.text) if "." in n.text or "e" in n.text.lower() else int(n.text))
    lit = C._parse_value_token(ts)
    return lit.value


def _assignment(ts: TokenStream) -> tuple[str, C.Expression]:
    col = _ident(ts)
    ts.expect_op("=")
    return col, C.parse_expression_tokens(ts)


# ---------------------------------------------------------------------------
# Canonical printing (round-trips through parse_script / parse_dml)
# ---------------------------------------------------------------------------


def print_smo(smo: Smo) -> str:
    if isinstance(smo, CreateTable):
        return f"CREATE TABLE {smo.table}({', '.join(smo.columns)})"
    if isinstance(smo, DropTable):
        return f"DROP TABLE {smo.table}"
    if isinstance(smo, RenameTable):
        return f"RENAME TABLE {smo.table} INTO {smo.new_name}"
    if isinstance(smo, RenameColumn):
        return f"RENAME COLUMN {smo.column} IN {smo.table} TO {smo.new_name}"
    if isinstance(smo, AddColumn):
        return f"ADD COLUMN {smo.column} AS {C.print_expression(smo.fn)} INTO {smo.table}"
    if isinstance(smo, DropColumn):
        return (
            f"DROP COLUMN {smo.column} FROM {smo.table} DEFAULT {C.print_expression(smo.fn)}"
        )
    if isinstance(smo, Decompose):
        return (
            f"DECOMPOSE TABLE {smo.table} INTO {smo.first}({', '.join(smo.first_columns)}), "
            f"{smo.second}({', '.join(smo.second_columns)}) ON {_print_spec(smo.on)}"
        )
    if isinstance(smo, Join):
        outer = "OUTER " if smo.outer else ""
        return (
            f"{outer}JOIN TABLE {smo.first}, {smo.second} INTO {smo.table} "
            f"ON {_print_spec(smo.on)}"
        )
    if isinstance(smo, Split):
        s = f"SPLIT TABLE {smo.table} INTO {smo.first} WITH {C.print_condition(smo.first_cond)}"
        if smo.second is not None:
            s += f", {smo.second} WITH {C.print_condition(smo.second_cond)}"
        return s
    if isinstance(smo, Merge):
        second = f"{smo.second} ({C.print_condition(smo.second_cond)})"
        return (
            f"MERGE TABLE {smo.first} ({C.print_condition(smo.first_cond)}), "
            f"{second} INTO {smo.table}"
        )
    raise TypeError(repr(smo))


def _print_spec(spec: JoinSpec) -> str:
    if spec.kind == "pk":
        return "PK"
    if spec.kind == "fk":
        return f"FK {spec.fk_column}"
    return C.print_condition(spec.cond)


def print_statement(st: Statement) -> str:
    if isinstance(st, CreateSchemaVersion):
        head = f"CREATE SCHEMA VERSION {st.name}"
        if st.parent:
            head += f" FROM {st.parent}"
        if st.smos:
            head += " WITH " + "; ".join(print_smo(s) for s in st.smos)
        return head + ";"
    if isinstance(st, DropSchemaVersion):
        return f"DROP SCHEMA VERSION {st.name};"
    if isinstance(st, Materialize):
        return "MATERIALIZE " + ", ".join(f"{v}.{t}" for v, t in st.targets) + ";"
    raise TypeError(repr(st))


def print_script(script: BidelScript) -> str:
    return "\n".join(print_statement(s) for s in script.statements)


def parse_smo(text: str) -> Smo:
    """Parse a single SMO statement (used by the catalog text format)."""
    ts = TokenStream(tokenize(text))
    smo = _parse_smo(ts)
    ts.take_op(";")
    t = ts.peek()
    if t.kind != "EOF":
        raise ParseError("trailing input after SMO", t.line, t.col, t.text)
    return smo
