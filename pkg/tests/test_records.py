from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, strategies as st

from qesquartic.core import QESSolution
from qesquartic.records import (
    OutputRecord,
    RecordError,
    decode_real,
    encode_real,
    from_json,
    rows_from_csv,
    solution_row,
    to_csv,
    to_json,
)


def _record(bits):
    if bits > 53:
        with mpmath.workprec(bits):
            E = mpmath.mpc(1, 1) / 3
            F = mpmath.mpc(2) / 7
            omega = [mpmath.mpc(1), mpmath.mpc(0, -1) / 3]
    else:
        E, F, omega = complex(1, 1) / 3, complex(2) / 7, [1 + 0j, -1j / 3]
    sol = QESSolution(E=E, F=F, omega=omega, residual_norm=1e-17, method_tag="newton",
                      precision_bits=bits, branch="k=0")
    return OutputRecord(
        command="solve",
        arguments={"N": 1},
        parameters={"internal": {"beta": Fraction(1, 2), "gamma": Fraction(-3, 10), "ell": Fraction(0)}},
        solutions=[solution_row(sol, D=Fraction(-27, 10))],
        extras={"note": "x"},
        precision_bits=bits,
    )


@pytest.mark.parametrize("bits", [53, 128])
def test_json_round_trip(bits):
    rec = _record(bits)
    back = from_json(to_json(rec))
    assert back == rec
    assert back.parameters["internal"]["gamma"] == Fraction(-3, 10)
    if bits > 53:
        assert isinstance(back.solutions[0]["E_re"], mpmath.mpf)
        with mpmath.workprec(bits):
            assert back.solutions[0]["E_re"] == mpmath.mpf(1) / 3


@pytest.mark.parametrize("bits", [53, 128])
def test_csv_and_json_payloads_agree(bits):
    rec = _record(bits)
    from_csv = rows_from_csv(to_csv(rec))
    from_js = from_json(to_json(rec)).solutions
    assert from_csv == from_js


def test_csv_has_header_and_footer():
    text = to_csv(_record(53))
    lines = text.splitlines()
    assert lines[0].startswith("branch,method_tag,precision_bits")
    assert lines[-1].startswith("# ")


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_round_trip(x):
    assert decode_real(encode_real(x)) == x


@given(st.fractions())
def test_fraction_round_trip(q):
    assert decode_real(encode_real(q)) == q


def test_error_positions():
    with pytest.raises(RecordError, match="line 2 col"):
        from_json('{\n "schema_version": }')
    good = to_json(_record(53))
    with pytest.raises(RecordError, match="schema_version"):
        from_json(good.replace('"schema_version": "1"', '"schema_version": "9"'))
    with pytest.raises(RecordError, match=r"solutions\[0\]\.E_re"):
        from_json(good.replace('"E_re": 0.3333333333333333', '"E_re": "abc"'))
    with pytest.raises(RecordError, match="solutions"):
        from_json('{"schema_version": "1", "command": "solve", "parameters": {}}')
