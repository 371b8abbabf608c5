import csv
import io
import itertools

import pytest
from hypothesis import given, strategies as st

from logbm.report import (
    EXIT_FAIL,
    EXIT_INCONCLUSIVE,
    EXIT_PASS,
    Bound,
    Report,
    Status,
    UnsoundAssertion,
)

SOUND_LHS = {Bound.EXACT, Bound.LOWER}
SOUND_RHS = {Bound.EXACT, Bound.UPPER}


def fresh():
    return Report("verify-logbm", ["cube", "cross-polytope"], 0x5EED, "icosahedral-5")


@pytest.mark.parametrize("lk,rk", list(itertools.product(Bound, Bound)))
def test_flipped_bound_directions_are_refused(lk, rk):
    r = fresh()
    if lk in SOUND_LHS and rk in SOUND_RHS:
        row = r.assert_geq("c", 2.0, lk, 1.0, rk, 1e-3)
        assert row.sound and row.status is Status.PASS
    else:
        with pytest.raises(UnsoundAssertion):
            r.assert_geq("c", 2.0, lk, 1.0, rk, 1e-3)
        assert r.rows == []


def test_flipping_a_certified_row():
    # the certified orientation works; swapping which side is the lower bound does not
    r = fresh()
    r.assert_geq("vol", 1.5, Bound.LOWER, 1.2, Bound.EXACT, 1e-3)
    with pytest.raises(UnsoundAssertion):
        r.assert_geq("vol-flipped", 1.2, Bound.EXACT, 1.5, Bound.LOWER, 1e-3)


@pytest.mark.parametrize(
    "margin,status",
    [(0.1, Status.PASS), (0.0, Status.PASS), (-5e-11, Status.PASS), (-1e-4, Status.INCONCLUSIVE),
     (-9e-4, Status.INCONCLUSIVE), (-2e-3, Status.FAIL)],
)
def test_status_thresholds(margin, status):
    r = fresh()
    row = r.assert_geq("c", 1.0 + margin, Bound.LOWER, 1.0, Bound.EXACT, 1e-3)
    assert row.status is status
    assert ("bug signal" in row.note) == (status is Status.FAIL)


def test_exit_code_precedence():
    r = fresh()
    assert r.exit_code == EXIT_PASS
    r.info("i", 1.0, 2.0)
    assert r.exit_code == EXIT_PASS
    r.inconclusive("grid", "too coarse")
    assert r.exit_code == EXIT_INCONCLUSIVE
    r.assert_true("b", False)
    assert r.exit_code == EXIT_FAIL and r.status == "fail"


def test_statistical_rows():
    r = fresh()
    assert r.assert_statistical("g", 0.5, 0.52, stderr=0.01).status is Status.PASS
    assert r.assert_statistical("g", 0.5, 0.54, stderr=0.01).status is Status.FAIL
    assert not r.rows[0].sound and r.rows[0].tolerance == pytest.approx(0.03 + 1e-10)


def test_csv_layout():
    r = fresh()
    r.assert_geq("margin", 0.1 + 0.2, Bound.LOWER, 0.3, Bound.EXACT, 1e-9)
    r.assert_true("detector", True)
    text = r.to_csv()
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["check", "lhs", "rhs", "margin", "sound", "tolerance", "seed", "grid"]
    assert rows[1] == ["margin", "0.30000000000000004", "0.29999999999999999", "5.5511151231257827e-17",
                       "true", "1.0000000000000001e-09", str(0x5EED), "icosahedral-5"]
    assert rows[2][4] == "true" and rows[2][1] == "1"


@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
def test_margin_recomputable_from_csv(a, b):
    r = fresh()
    r.info("x", a, b)
    row = list(csv.reader(io.StringIO(r.to_csv())))[1]
    lhs, rhs, margin = (float(row[i]) for i in (1, 2, 3))
    assert (lhs, rhs) == (a, b) and margin == lhs - rhs


def test_text_has_digest_and_rows():
    r = fresh()
    r.assert_true("ok", True)
    r.notes.append("hello")
    t = r.render("text")
    assert f"inputs digest: {r.digest}" in t and "[pass] ok" in t and "note: hello" in t
    assert len(r.digest) == 16
    other = Report("verify-logbm", ["cube", "cube"], 0x5EED, "icosahedral-5")
    assert other.digest != r.digest
    with pytest.raises(ValueError):
        r.render("json")
