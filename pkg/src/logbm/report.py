"""Verification reports with sound-direction bookkeeping.

Every asserted inequality ``lhs >= rhs`` carries the kind of each side
(``exact``, ``lower``, ``upper``, ``estimate``).  A certified verdict needs a
lower (or exact) bound on the large side and an upper (or exact) bound on the
small side; anything else is refused with :class:`UnsoundAssertion`.
"""
from __future__ import annotations

import csv
import enum
import hashlib
import io
from dataclasses import dataclass, field

PASS_FLOOR = 1e-10  # margins above -PASS_FLOOR count as verified

EXIT_PASS, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_INPUT = 0, 1, 2, 3


class Bound(enum.Enum):
    EXACT = "exact"
    LOWER = "lower"
    UPPER = "upper"
    ESTIMATE = "estimate"


class Status(enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive"
    INFO = "info"


class UnsoundAssertion(RuntimeError):
    pass


@dataclass(frozen=True)
class Row:
    check: str
    lhs: float
    rhs: float
    margin: float
    sound: bool
    tolerance: float
    status: Status
    note: str = ""


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int,)):
        return str(x)
    return format(float(x), ".17g")


@dataclass
class Report:
    command: str
    inputs: list[str]
    seed: int
    grid: str
    rows: list[Row] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    # -- digest ---------------------------------------------------------
    @property
    def digest(self) -> str:
        h = hashlib.sha256()
        for part in [self.command, *self.inputs]:
            h.update(part.encode("utf-8"))
            h.update(b"\0")
        return h.hexdigest()[:16]

    # -- row builders ---------------------------------------------------
    def assert_geq(self, check, lhs, lhs_kind: Bound, rhs, rhs_kind: Bound, tolerance: float,
                   note: str = "") -> Row:
        """Certified ``lhs >= rhs``; ``tolerance`` is the numerical uncertainty of the margin.

        margin >= -1e-10: pass; within ``-tolerance``: inconclusive; below: fail
        (for inequalities proved under the inputs' hypotheses a certified
        negative margin beyond the uncertainty is an implementation bug).
        """
        if lhs_kind not in (Bound.EXACT, Bound.LOWER) or rhs_kind not in (Bound.EXACT, Bound.UPPER):
            raise UnsoundAssertion(
                f"{check}: cannot certify lhs >= rhs from a {lhs_kind.value} lhs and a {rhs_kind.value} rhs"
            )
        margin = lhs - rhs
        if margin >= -PASS_FLOOR:
            status = Status.PASS
        elif margin >= -tolerance:
            status = Status.INCONCLUSIVE
        else:
            status = Status.FAIL
            note = (note + "; " if note else "") + "certified negative margin: implementation bug signal"
        return self._add(Row(check, lhs, rhs, margin, True, tolerance, status, note))

    def assert_close(self, check, lhs, rhs, tolerance: float, sound: bool, note: str = "") -> Row:
        """``|lhs - rhs| <= tolerance``: equality-case checks and identities."""
        margin = lhs - rhs
        status = Status.PASS if abs(margin) <= tolerance else Status.FAIL
        return self._add(Row(check, lhs, rhs, margin, sound, tolerance, status, note))

    def assert_statistical(self, check, lhs, rhs, stderr: float, k: float = 3.0, note: str = "") -> Row:
        """Monte-Carlo ``lhs >= rhs``: fails only when the margin is below ``-k * stderr``
        (plus the roundoff floor)."""
        margin = lhs - rhs
        tol = k * stderr + PASS_FLOOR
        status = Status.PASS if margin >= -tol else Status.FAIL
        return self._add(Row(check, lhs, rhs, margin, False, tol, status, note))

    def assert_true(self, check, ok: bool, note: str = "") -> Row:
        """A boolean check, recorded as ``lhs = 1`` (true) or ``0`` against ``rhs = 1``."""
        lhs = 1.0 if ok else 0.0
        status = Status.PASS if ok else Status.FAIL
        return self._add(Row(check, lhs, 1.0, lhs - 1.0, True, 0.0, status, note))

    def info(self, check, lhs, rhs, tolerance: float = 0.0, note: str = "") -> Row:
        return self._add(Row(check, float(lhs), float(rhs), float(lhs) - float(rhs), False, tolerance, Status.INFO, note))

    def inconclusive(self, check, note: str) -> Row:
        nan = float("nan")
        return self._add(Row(check, nan, nan, nan, False, nan, Status.INCONCLUSIVE, note))

    def _add(self, row: Row) -> Row:
        self.rows.append(row)
        return row

    # -- verdict --------------------------------------------------------
    @property
    def exit_code(self) -> int:
        st = {r.status for r in self.rows}
        if Status.FAIL in st:
            return EXIT_FAIL
        if Status.INCONCLUSIVE in st:
            return EXIT_INCONCLUSIVE
        return EXIT_PASS

    @property
    def status(self) -> str:
        return {EXIT_PASS: "pass", EXIT_FAIL: "fail", EXIT_INCONCLUSIVE: "inconclusive"}[self.exit_code]

    # -- output ---------------------------------------------------------
    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["check", "lhs", "rhs", "margin", "sound", "tolerance", "seed", "grid"])
        for r in self.rows:
            w.writerow([r.check, _fmt(r.lhs), _fmt(r.rhs), _fmt(r.margin), _fmt(r.sound),
                        _fmt(r.tolerance), str(self.seed), self.grid])
        return buf.getvalue()

    def to_text(self) -> str:
        out = [
            f"command: {self.command}",
            f"inputs digest: {self.digest}",
            f"seed: {self.seed}",
            f"grid: {self.grid}",
            f"status: {self.status}",
            "",
        ]
        for r in self.rows:
            out.append(
                f"[{r.status.value}] {r.check}: lhs={_fmt(r.lhs)} rhs={_fmt(r.rhs)} margin={_fmt(r.margin)} "
                f"tol={_fmt(r.tolerance)} sound={_fmt(r.sound)}" + (f"  ({r.note})" if r.note else "")
            )
        if self.notes:
            out.append("")
            out += [f"note: {n}" for n in self.notes]
        return "\n".join(out) + "\n"

    def render(self, fmt: str) -> str:
        if fmt == "csv":
            return self.to_csv()
        if fmt == "text":
            return self.to_text()
        raise ValueError(f"unknown report format {fmt!r}")
