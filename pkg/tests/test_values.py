"""Cell values: ω semantics and the TSV cell codec."""

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from covdb.values import OMEGA, CellError, decode_cell, encode_cell, is_omega

values = st.one_of(
    st.integers(min_value=-(10**12), max_value=10**12),
    st.floats(allow_nan=False, allow_infinity=False, width=32),
    st.booleans(),
    st.text(max_size=40),
    st.just(OMEGA),
)


def test_omega_is_singleton():
    assert OMEGA is type(OMEGA)()
    assert is_omega(OMEGA)
    assert not is_omega("")
    assert not is_omega(None)


def test_omega_encodes_as_backslash_n():
    assert encode_cell(OMEGA) == r"\N"
    assert decode_cell(r"\N") is OMEGA


@pytest.mark.parametrize(
    "v,cell",
    [
        (1, "1"),
        (-3, "-3"),
        (True, "true"),
        ("a\tb", "a\\tb"),
        ("a\nb", "a\\nb"),
        ("a\\b", "a\\\\b"),
    ],
)
def test_known_encodings(v, cell):
    assert encode_cell(v) == cell
    assert decode_cell(cell) == v


@given(values)
def test_cell_roundtrip(v):
    cell = encode_cell(v)
    assert "\t" not in cell and "\n" not in cell
    back = decode_cell(cell)
    if is_omega(v):
        assert back is OMEGA
    elif isinstance(v, float):
        assert isinstance(back, float) and math.isclose(back, v, rel_tol=1e-15)
    else:
        assert back == v and type(back) is type(v)


def test_string_that_looks_like_a_number_roundtrips_as_string():
    cell = encode_cell("42")
    assert decode_cell(cell) == "42"
    assert isinstance(decode_cell(cell), str)


def test_decode_rejects_garbage_escape():
    with pytest.raises(CellError):
        decode_cell("a\\x")
