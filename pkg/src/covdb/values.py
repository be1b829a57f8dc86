"""Dynamically typed cell values and the snapshot cell codec.

A cell is one of: int, float, bool, str, or the explicit null ``OMEGA``.
OMEGA is a first-class value (a gap produced by outer-join-shaped operators),
not SQL NULL: it compares unequal to everything except itself and poisons
arithmetic (omega in -> omega out).
"""

from __future__ import annotations

import re


class _Omega:
    """Singleton explicit-null marker."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "ω"

    def __reduce__(self):  # keep singleton identity through pickling
        return (_Omega, ())


OMEGA = _Omega()

Value = object  # int | float | bool | str | _Omega

_INT_RE = re.compile(r"-?\d+$")
_FLOAT_RE = re.compile(r"-?(\d+\.\d*|\.\d+|\d+[eE][+-]?\d+|\d+\.\d*[eE][+-]?\d+)$")


def is_omega(v) -> bool:
    return v is OMEGA


def same_type_comparable(a, b) -> bool:
    """True if a and b may be ordered against each other."""
    num = (int, float)
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool)
    if isinstance(a, num) and isinstance(b, num):
        return True
    return isinstance(a, str) and isinstance(b, str)


class CellError(ValueError):
    pass


def encode_cell(v) -> str:
    r"""Encode one value as a TSV cell.

    Escapes: ``\\`` backslash, ``\t`` tab, ``\n`` newline, ``\N`` omega.
    Text that would be misread as a number/bool/omega on load gets a ``\:``
    prefix.
    """
    if v is OMEGA:
        return "\\N"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if not isinstance(v, str):
        raise CellError(f"unsupported cell type {type(v).__name__}")
    body = v.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")
    if body == "" or _looks_nontext(v):
        return "\\:" + body
    return body


def _looks_nontext(s: str) -> bool:
    return (
        s in ("true", "false")
        or _INT_RE.match(s) is not None
        or _FLOAT_RE.match(s) is not None
        or s.startswith("\\")
    )


def decode_cell(cell: str):
    """Inverse of :func:`encode_cell`."""
    if cell == "\\N":
        return OMEGA
    forced_text = cell.startswith("\\:")
    if forced_text:
        cell = cell[2:]
    out, i = [], 0
    while i < len(cell):
        ch = cell[i]
        if ch == "\\":
            if i + 1 >= len(cell):
                raise CellError(f"dangling escape in cell {cell!r}")
            nxt = cell[i + 1]
            if nxt == "\\":
                out.append("\\")
            elif nxt == "t":
                out.append("\t")
            elif nxt == "n":
                out.append("\n")
            else:
                raise CellError(f"bad escape \\{nxt} in cell {cell!r}")
            i += 2
        else:
            out.append(ch)
            i += 1
    s = "".join(out)
    if forced_text:
        return s
    if s == "true":
        return True
    if s == "false":
        return False
    if _INT_RE.match(s):
        return int(s)
    if _FLOAT_RE.match(s):
        return float(s)
    return s
