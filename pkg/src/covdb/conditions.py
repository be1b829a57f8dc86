"""Boolean conditions and scalar expressions over table rows.

Conditions are boolean trees of comparisons (`col < 5 AND name = 'x'`);
expressions are arithmetic/concatenation terms used to compute new column
values.  Both evaluate against a row given as a dict from column name to
value.  The explicit null OMEGA fails every comparison except `ω = ω` and
propagates through every expression.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Union

from .lex import ParseError, TokenStream, tokenize
from .values import OMEGA, CellError, Value, is_omega, same_type_comparable

# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Col:
    name: str


@dataclass(frozen=True)
class Lit:
    value: Value


Operand = Union[Col, Lit]


@dataclass(frozen=True)
class Cmp:
    left: Operand
    op: str  # = != < <= > >=
    right: Operand


@dataclass(frozen=True)
class Not:
    item: "Condition"


@dataclass(frozen=True)
class And:
    items: tuple["Condition", ...]


@dataclass(frozen=True)
class Or:
    items: tuple["Condition", ...]


@dataclass(frozen=True)
class BoolConst:
    value: bool


Condition = Union[Cmp, Not, And, Or, BoolConst]

TRUE = BoolConst(True)
FALSE = BoolConst(False)


@dataclass(frozen=True)
class BinOp:
    left: "Expression"
    op: str  # + - * / ||
    right: "Expression"


@dataclass(frozen=True)
class Neg:
    item: "Expression"


Expression = Union[Col, Lit, BinOp, Neg]


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

_NEGATED = {"=": "!=", "!=": "=", "<": ">=", "<=": ">", ">": "<=", ">=": "<"}


def _operand_value(o: Operand, row: Mapping[str, Value]) -> Value:
    if isinstance(o, Lit):
        return o.value
    try:
        return row[o.name]
    except KeyError:
        raise CellError(f"unknown column {o.name!r}") from None


def compare_values(a: Value, op: str, b: Value) -> bool:
    if is_omega(a) or is_omega(b):
        return op == "=" and is_omega(a) and is_omega(b)
    if not same_type_comparable(a, b):
        raise CellError(f"type mismatch in comparison: {a!r} {op} {b!r}")
    if op == "=":
        return a == b
    if op == "!=":
        return a != b
    if isinstance(a, bool) or isinstance(b, bool):
        raise CellError(f"ordering comparison on boolean: {a!r} {op} {b!r}")
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    raise CellError(f"unknown comparison operator {op!r}")


def eval_condition(c: Condition, row: Mapping[str, Value]) -> bool:
    if isinstance(c, BoolConst):
        return c.value
    if isinstance(c, Cmp):
        return compare_values(_operand_value(c.left, row), c.op, _operand_value(c.right, row))
    if isinstance(c, Not):
        return not eval_condition(c.item, row)
    if isinstance(c, And):
        return all(eval_condition(x, row) for x in c.items)
    if isinstance(c, Or):
        return any(eval_condition(x, row) for x in c.items)
    raise TypeError(f"not a condition: {c!r}")


def eval_expression(e: Expression, row: Mapping[str, Value]) -> Value:
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Col):
        v = _operand_value(e, row)
        return v
    if isinstance(e, Neg):
        v = eval_expression(e.item, row)
        if is_omega(v):
            return OMEGA
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise CellError(f"cannot negate {v!r}")
        return -v
    if isinstance(e, BinOp):
        a = eval_expression(e.left, row)
        b = eval_expression(e.right, row)
        if is_omega(a) or is_omega(b):
            return OMEGA
        if e.op == "||":
            if not isinstance(a, str) or not isinstance(b, str):
                raise CellError(f"|| requires text operands: {a!r} || {b!r}")
            return a + b
        if isinstance(a, bool) or isinstance(b, bool) or not (
            isinstance(a, (int, float)) and isinstance(b, (int, float))
        ):
            raise CellError(f"arithmetic on non-numeric operands: {a!r} {e.op} {b!r}")
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            if b == 0:
                raise CellError("division by zero")
            return a / b
        raise CellError(f"unknown operator {e.op!r}")
    raise TypeError(f"not an expression: {e!r}")


def condition_columns(c: Condition) -> frozenset[str]:
    if isinstance(c, Cmp):
        cols = set()
        for o in (c.left, c.right):
            if isinstance(o, Col):
                cols.add(o.name)
        return frozenset(cols)
    if isinstance(c, Not):
        return condition_columns(c.item)
    if isinstance(c, (And, Or)):
        out: set[str] = set()
        for x in c.items:
            out |= condition_columns(x)
        return frozenset(out)
    return frozenset()


def expression_columns(e: Expression) -> frozenset[str]:
    if isinstance(e, Col):
        return frozenset({e.name})
    if isinstance(e, Neg):
        return expression_columns(e.item)
    if isinstance(e, BinOp):
        return expression_columns(e.left) | expression_columns(e.right)
    return frozenset()


def negate(c: Condition) -> Condition:
    """Structural negation, pushing NOT through one level where cheap."""
    if isinstance(c, BoolConst):
        return BoolConst(not c.value)
    if isinstance(c, Not):
        return c.item
    if isinstance(c, Cmp):
        # NOT (a < b) is not simply (a >= b) under ω (both sides false when
        # an operand is ω), so keep the explicit NOT node.
        return Not(c)
    return Not(c)


def rename_columns(c, mapping: Mapping[str, str]):
    """Rewrite column references in a condition or expression."""
    if isinstance(c, Col):
        return Col(mapping.get(c.name, c.name))
    if isinstance(c, Lit):
        return c
    if isinstance(c, Cmp):
        return Cmp(rename_columns(c.left, mapping), c.op, rename_columns(c.right, mapping))
    if isinstance(c, Not):
        return Not(rename_columns(c.item, mapping))
    if isinstance(c, And):
        return And(tuple(rename_columns(x, mapping) for x in c.items))
    if isinstance(c, Or):
        return Or(tuple(rename_columns(x, mapping) for x in c.items))
    if isinstance(c, BoolConst):
        return c
    if isinstance(c, Neg):
        return Neg(rename_columns(c.item, mapping))
    if isinstance(c, BinOp):
        return BinOp(rename_columns(c.left, mapping), c.op, rename_columns(c.right, mapping))
    raise TypeError(f"cannot rename columns in {c!r}")


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------


def _print_operand(o: Operand) -> str:
    if isinstance(o, Col):
        return o.name
    v = o.value
    if is_omega(v):
        return "NULL"
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    if isinstance(v, str):
        return "'" + v.replace("'", "''") + "'"
    return repr(v)


def print_condition(c: Condition, _prec: int = 0) -> str:
    # precedence: OR=1, AND=2, NOT=3, atoms=4
    if isinstance(c, BoolConst):
        return "TRUE" if c.value else "FALSE"
    if isinstance(c, Cmp):
        return f"{_print_operand(c.left)} {c.op} {_print_operand(c.right)}"
    if isinstance(c, Not):
        s = "NOT " + print_condition(c.item, 3)
        return f"({s})" if _prec > 3 else s
    if isinstance(c, And):
        s = " AND ".join(print_condition(x, 3) for x in c.items)
        return f"({s})" if _prec > 2 else s
    if isinstance(c, Or):
        s = " OR ".join(print_condition(x, 2) for x in c.items)
        return f"({s})" if _prec > 1 else s
    raise TypeError(f"not a condition: {c!r}")


def print_expression(e: Expression, _prec: int = 0) -> str:
    # precedence: + - || = 1, * / = 2, unary - = 3
    if isinstance(e, (Col, Lit)):
        return _print_operand(e)
    if isinstance(e, Neg):
        s = "-" + print_expression(e.item, 3)
        return f"({s})" if _prec > 3 else s
    if isinstance(e, BinOp):
        p = 2 if e.op in ("*", "/") else 1
        s = f"{print_expression(e.left, p)} {e.op} {print_expression(e.right, p + 1)}"
        return f"({s})" if _prec > p else s
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _parse_value_token(ts: TokenStream) -> Lit:
    t = ts.peek()
    if t.kind == "STRING":
        ts.next()
        return Lit(t.text)
    if t.kind == "NUMBER":
        ts.next()
        txt = t.text
        if "." in txt or "e" in txt or "E" in txt:
            return Lit(float(txt))
        return Lit(int(txt))
    if t.is_kw("TRUE"):
        ts.next()
        return Lit(True)
    if t.is_kw("FALSE"):
        ts.next()
        return Lit(False)
    if t.is_kw("NULL", "OMEGA"):
        ts.next()
        return Lit(OMEGA)
    raise ParseError("expected a value", t.line, t.col, t.text)


_CMP_OPS = ("=", "!=", "<>", "<", "<=", ">", ">=")


def _parse_operand(ts: TokenStream) -> Operand:
    t = ts.peek()
    if t.kind == "IDENT" and not t.is_kw("TRUE", "FALSE", "NULL", "OMEGA"):
        ts.next()
        return Col(t.text)
    return _parse_value_token(ts)


def _parse_cmp_or_group(ts: TokenStream) -> Condition:
    t = ts.peek()
    if ts.at_op("("):
        ts.next()
        inner = _parse_or(ts)
        ts.expect_op(")")
        return inner
    if t.is_kw("TRUE"):
        ts.next()
        return TRUE
    if t.is_kw("FALSE"):
        ts.next()
        return FALSE
    left = _parse_operand(ts)
    opt = ts.peek()
    if opt.kind != "OP" or opt.text not in _CMP_OPS:
        raise ParseError("expected comparison operator", opt.line, opt.col, opt.text)
    ts.next()
    op = "!=" if opt.text == "<>" else opt.text
    right = _parse_operand(ts)
    return Cmp(left, op, right)


def _parse_not(ts: TokenStream) -> Condition:
    if ts.peek().is_kw("NOT"):
        ts.next()
        return Not(_parse_not(ts))
    return _parse_cmp_or_group(ts)


def _parse_and(ts: TokenStream) -> Condition:
    items = [_parse_not(ts)]
    while ts.peek().is_kw("AND"):
        ts.next()
        items.append(_parse_not(ts))
    return items[0] if len(items) == 1 else And(tuple(items))


def _parse_or(ts: TokenStream) -> Condition:
    items = [_parse_and(ts)]
    while ts.peek().is_kw("OR"):
        ts.next()
        items.append(_parse_and(ts))
    return items[0] if len(items) == 1 else Or(tuple(items))


def parse_condition_tokens(ts: TokenStream) -> Condition:
    return _parse_or(ts)


def parse_condition(text: str) -> Condition:
    ts = TokenStream(tokenize(text))
    c = parse_condition_tokens(ts)
    t = ts.peek()
    if t.kind != "EOF":
        raise ParseError("trailing input after condition", t.line, t.col, t.text)
    return c


def _parse_factor(ts: TokenStream) -> Expression:
    if ts.at_op("("):
        ts.next()
        inner = _parse_sum(ts)
        ts.expect_op(")")
        return inner
    if ts.at_op("-"):
        ts.next()
        return Neg(_parse_factor(ts))
    return _parse_operand(ts)


def _parse_term(ts: TokenStream) -> Expression:
    e = _parse_factor(ts)
    while ts.at_op("*", "/"):
        op = ts.next().text
        e = BinOp(e, op, _parse_factor(ts))
    return e


def _parse_sum(ts: TokenStream) -> Expression:
    e = _parse_term(ts)
    while ts.at_op("+", "-", "||"):
        op = ts.next().text
        e = BinOp(e, op, _parse_term(ts))
    return e


def parse_expression_tokens(ts: TokenStream) -> Expression:
    return _parse_sum(ts)


def parse_expression(text: str) -> Expression:
    ts = TokenStream(tokenize(text))
    e = parse_expression_tokens(ts)
    t = ts.peek()
    if t.kind != "EOF":
        raise ParseError("trailing input after expression", t.line, t.col, t.text)
    return e
