"""Tokenizer shared by the evolution-script, DML, condition and expression parsers."""

from __future__ import annotations

from dataclasses import dataclass


class ParseError(ValueError):
    def __init__(self, msg: str, line: int = 0, col: int = 0, token: str = ""):
        self.line, self.col, self.token = line, col, token
        where = f" at line {line}, column {col}" if line else ""
        tok = f" (near {token!r})" if token else ""
        super().__init__(f"{msg}{where}{tok}")


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT | NUMBER | STRING | OP | EOF
    text: str
    line: int
    col: int

    def is_kw(self, *words: str) -> bool:
        return self.kind == "IDENT" and self.text.upper() in words


_TWO_CHAR_OPS = ("!=", "<>", "<=", ">=", "||", ":=")
_ONE_CHAR_OPS = "=<>+-*/(),;.%"

# '!' is legal inside identifiers (version names like Do!) but only after the
# first character, so `a!=b` still lexes as a comparison.
_IDENT_START = lambda c: c.isalpha() or c == "_"
_IDENT_CONT = lambda c: c.isalnum() or c in "_!?"


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    i, line, linestart = 0, 1, 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            i += 1
            linestart = i
            continue
        if c in " \t\r":
            i += 1
            continue
        if text.startswith("--", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        col = i - linestart + 1
        if _IDENT_START(c):
            j = i + 1
            while j < n and _IDENT_CONT(text[j]):
                j += 1
            toks.append(Token("IDENT", text[i:j], line, col))
            i = j
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            seen_dot = seen_exp = False
            while j < n:
                ch = text[j]
                if ch.isdigit():
                    j += 1
                elif ch == "." and not seen_dot and not seen_exp:
                    # a trailing dot followed by an identifier is qualification,
                    # not a float (e.g. `v1.Task`)
                    if j + 1 < n and _IDENT_START(text[j + 1]):
                        break
                    seen_dot = True
                    j += 1
                elif ch in "eE" and not seen_exp and j + 1 < n and (
                    text[j + 1].isdigit() or text[j + 1] in "+-"
                ):
                    seen_exp = True
                    j += 1 if text[j + 1].isdigit() else 2
                else:
                    break
            toks.append(Token("NUMBER", text[i:j], line, col))
            i = j
            continue
        if c == "'":
            j = i + 1
            buf = []
            while True:
                if j >= n:
                    raise ParseError("unterminated string literal", line, col)
                if text[j] == "'":
                    if j + 1 < n and text[j + 1] == "'":
                        buf.append("'")
                        j += 2
                        continue
                    break
                if text[j] == "\n":
                    raise ParseError("newline in string literal", line, col)
                buf.append(text[j])
                j += 1
            toks.append(Token("STRING", "".join(buf), line, col))
            i = j + 1
            continue
        two = text[i : i + 2]
        if two in _TWO_CHAR_OPS:
            toks.append(Token("OP", two, line, col))
            i += 2
            continue
        if c in _ONE_CHAR_OPS:
            toks.append(Token("OP", c, line, col))
            i += 1
            continue
        raise ParseError("unexpected character", line, col, c)
    toks.append(Token("EOF", "", line, n - linestart + 1))
    return toks


class TokenStream:
    def __init__(self, toks: list[Token]):
        self.toks = toks
        self.pos = 0

    def peek(self) -> Token:
        return self.toks[self.pos]

    def next(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != "EOF":
            self.pos += 1
        return t

    def expect_op(self, op: str) -> Token:
        t = self.peek()
        if t.kind != "OP" or t.text != op:
            raise ParseError(f"expected {op!r}", t.line, t.col, t.text)
        return self.next()

    def expect_kw(self, *words: str) -> Token:
        t = self.peek()
        if not t.is_kw(*words):
            raise ParseError(f"expected {'/'.join(words)}", t.line, t.col, t.text)
        return self.next()

    def expect_ident(self) -> Token:
        t = self.peek()
        if t.kind != "IDENT":
            raise ParseError("expected identifier", t.line, t.col, t.text)
        return self.next()

    def at_op(self, *ops: str) -> bool:
        t = self.peek()
        return t.kind == "OP" and t.text in ops

    def take_op(self, *ops: str):
        if self.at_op(*ops):
            return self.next()
        return None
