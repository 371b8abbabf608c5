"""Body-spec text format.

A spec is one structured-text value: objects ``{key: value, ...}`` with bare or
quoted keys, arrays ``[...]``, double-quoted strings, numbers, and bare
identifiers (a bare identifier in body position names a fixture).  ``#``
starts a comment.  Example::

    {kind:"direct-sum", children:[hexagon2d, segment1d]}

Body kinds: ``named``, ``vrep``, ``hrep``, ``quadric``, ``transform``,
``direct-sum``; any body object may also carry ``scale`` (dilation factor) or
``volume`` (dilate to this volume).
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass

import numpy as np

from . import fixtures
from .geometry import (
    GeometryError,
    HPolytope,
    QuadricBody,
    VPolytope,
    affine_dim,
    as_polytope,
    direct_sum,
    scale,
    transform,
    volume,
)


class SpecError(ValueError):
    def __init__(self, msg, line=None, col=None):
        self.line, self.col = line, col
        where = f" at line {line}, column {col}" if line is not None else ""
        super().__init__(msg + where)


class Ident(str):
    """A bare identifier (as opposed to a quoted string)."""


# ---------------------------------------------------------------------------
# parsing

_NUMBER = re.compile(r"-?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_\-.]*")


class _Parser:
    def __init__(self, text: str):
        self.s = text
        self.i = 0

    def pos(self, i=None):
        i = self.i if i is None else i
        line = self.s.count("\n", 0, i) + 1
        col = i - (self.s.rfind("\n", 0, i) + 1) + 1
        return line, col

    def error(self, msg, i=None):
        raise SpecError(msg, *self.pos(i))

    def skip(self):
        while self.i < len(self.s):
            c = self.s[self.i]
            if c in " \t\r\n":
                self.i += 1
            elif c == "#":
                j = self.s.find("\n", self.i)
                self.i = len(self.s) if j < 0 else j
            else:
                break

    def peek(self):
        self.skip()
        return self.s[self.i] if self.i < len(self.s) else ""

    def expect(self, ch):
        if self.peek() != ch:
            got = self.s[self.i] if self.i < len(self.s) else "end of input"
            self.error(f"expected {ch!r}, found {got!r}")
        self.i += 1

    def value(self):
        c = self.peek()
        if c == "{":
            return self.obj()
        if c == "[":
            return self.arr()
        if c == '"':
            return self.string()
        m = _NUMBER.match(self.s, self.i)
        if m and (c.isdigit() or c in "-."):
            self.i = m.end()
            txt = m.group()
            return float(txt) if any(ch in txt for ch in ".eE") else int(txt)
        m = _IDENT.match(self.s, self.i)
        if m:
            self.i = m.end()
            word = m.group()
            return {"true": True, "false": False, "null": None}.get(word, Ident(word))
        if not c:
            self.error("unexpected end of input")
        self.error(f"unexpected character {c!r}")

    def string(self):
        # JSON string syntax; scan to the closing quote, then let json decode escapes
        start = self.i
        j = start + 1
        while j < len(self.s) and self.s[j] != '"':
            j += 2 if self.s[j] == "\\" else 1
        if j >= len(self.s):
            self.error("unterminated string", start)
        try:
            out = json.loads(self.s[start : j + 1], strict=False)
        except json.JSONDecodeError as e:
            self.error(f"bad string literal: {e.msg}", start + e.pos)
        self.i = j + 1
        return out

    def key(self):
        c = self.peek()
        if c == '"':
            return self.string()
        m = _IDENT.match(self.s, self.i)
        if not m:
            self.error("expected a key")
        self.i = m.end()
        return m.group()

    def obj(self):
        self.expect("{")
        out = {}
        while self.peek() != "}":
            kpos = self.i
            k = self.key()
            if k in out:
                self.error(f"duplicate key {k!r}", kpos)
            self.expect(":")
            out[k] = self.value()
            if self.peek() == ",":
                self.i += 1
            elif self.peek() != "}":
                self.error("expected ',' or '}'")
        self.i += 1
        return out

    def arr(self):
        self.expect("[")
        out = []
        while self.peek() != "]":
            out.append(self.value())
            if self.peek() == ",":
                self.i += 1
            elif self.peek() != "]":
                self.error("expected ',' or ']'")
        self.i += 1
        return out


def parse_spec(text: str):
    """Text to a plain value tree (dicts, lists, str/Ident, numbers)."""
    p = _Parser(text)
    v = p.value()
    if p.peek():
        p.error("trailing characters after the body spec")
    return v


# ---------------------------------------------------------------------------
# emission


def _fmt_number(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if not math.isfinite(x):
        raise SpecError("non-finite number in spec")
    return repr(float(x))


def emit_spec(v) -> str:
    """Canonical single-line text; ``parse_spec(emit_spec(v)) == v``."""
    if isinstance(v, dict):
        parts = []
        for k, x in v.items():
            key = k if _IDENT.fullmatch(k) else json.dumps(k)
            parts.append(f"{key}:{emit_spec(x)}")
        return "{" + ", ".join(parts) + "}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(emit_spec(x) for x in v) + "]"
    if isinstance(v, Ident):
        return str(v)
    if isinstance(v, str):
        return json.dumps(v)
    if v is None:
        return "null"
    if isinstance(v, (bool, int, float, np.floating, np.integer)):
        return _fmt_number(v.item() if hasattr(v, "item") else v)
    raise SpecError(f"cannot emit value of type {type(v).__name__}")


# ---------------------------------------------------------------------------
# building bodies


def _matrix(v, what, shape=None) -> np.ndarray:
    try:
        A = np.array(v, dtype=float)
    except (TypeError, ValueError):
        raise SpecError(f"{what} must be a numeric array") from None
    if shape is not None and A.ndim != shape:
        raise SpecError(f"{what} must be a {shape}-D array")
    if not np.all(np.isfinite(A)):
        raise SpecError(f"{what} has non-finite entries")
    return A


def _require(d: dict, key: str, kind: str):
    if key not in d:
        raise SpecError(f"{kind} body needs field {key!r}")
    return d[key]


def build_body(v):
    """Construct the body described by a parsed spec value."""
    if isinstance(v, str):
        try:
            return fixtures.named(str(v))
        except (KeyError, ValueError) as e:
            raise SpecError(str(e).strip("'\"")) from None
    if not isinstance(v, dict):
        raise SpecError("a body spec must be an object or a fixture name")
    kind = v.get("kind")
    if kind is None:
        raise SpecError("body object needs a 'kind' field")
    kind = str(kind)
    if kind == "named":
        name = str(_require(v, "name", kind))
        n = v.get("n")
        try:
            body = fixtures.named(name, None if n is None else int(n))
        except (KeyError, ValueError) as e:
            raise SpecError(str(e).strip("'\"")) from None
    elif kind == "vrep":
        V = _matrix(_require(v, "vertices", kind), "vertices", 2)
        body = VPolytope(V)
        d = affine_dim(V)
        if d < body.dim:
            raise SpecError(f"invalid body: vertices span only {d} of {body.dim} dimensions")
    elif kind == "hrep":
        hs = _require(v, "halfspaces", kind)
        if not isinstance(hs, list) or not all(isinstance(h, dict) for h in hs):
            raise SpecError("halfspaces must be a list of {u, h} objects")
        U = _matrix([_require(h, "u", "halfspace") for h in hs], "halfspace normals", 2)
        b = _matrix([_require(h, "h", "halfspace") for h in hs], "halfspace offsets", 1)
        body = HPolytope.from_inequalities(U, b)
    elif kind == "quadric":
        cons = _require(v, "constraints", kind)
        pairs = []
        for c in cons:
            if not isinstance(c, dict):
                raise SpecError("quadric constraints must be {I, rho} objects")
            idx = [int(i) for i in _require(c, "I", "constraint")]
            pairs.append((idx, float(_require(c, "rho", "constraint"))))
        n = int(v.get("n", max(max(I) for I, _ in pairs)))
        body = QuadricBody.from_one_based(n, pairs)
    elif kind == "transform":
        A = _matrix(_require(v, "matrix", kind), "matrix", 2)
        child = build_body(_require(v, "child", kind))
        if A.shape != (child.dim, child.dim):
            raise SpecError(f"matrix shape {A.shape} does not match child dimension {child.dim}")
        if np.linalg.cond(A) > 1e12:
            raise SpecError("transform matrix is not invertible")
        body = transform(child, A)
    elif kind == "direct-sum":
        children = _require(v, "children", kind)
        if not isinstance(children, list) or not children:
            raise SpecError("direct-sum needs a nonempty children list")
        body = direct_sum([build_body(c) for c in children])
    else:
        raise SpecError(f"unknown body kind {kind!r}")
    if "scale" in v:
        c = float(v["scale"])
        if c <= 0:
            raise SpecError("scale must be positive")
        body = scale(body, c)
    if "volume" in v:
        target = float(v["volume"])
        P = as_polytope(body)
        if P is None or target <= 0:
            raise SpecError("volume normalisation needs a polytope and a positive target")
        body = scale(P, (target / volume(P)) ** (1.0 / P.dim))
    return body


def parse_body_spec(text: str):
    try:
        return build_body(parse_spec(text))
    except GeometryError as e:
        raise SpecError(f"invalid body: {e}") from e


def children_of(v) -> list | None:
    """Children of a top-level direct-sum spec (else ``None``)."""
    if isinstance(v, dict) and str(v.get("kind")) == "direct-sum":
        return list(v["children"])
    return None


def vrep_spec(P: VPolytope) -> dict:
    return {"kind": "vrep", "vertices": [[float(x) for x in row] for row in P.vertices]}


@dataclass(frozen=True)
class LoadedBody:
    spec: object
    text: str  # canonical text, used in input digests
    body: object


def load_body(arg: str) -> LoadedBody:
    """Inline spec text, a bare fixture name, or a path to a spec file."""
    s = arg.strip()
    if not (s.startswith("{") or _IDENT.fullmatch(s) and not s.endswith((".spec", ".txt", ".body"))):
        try:
            with open(arg, encoding="utf-8") as fh:
                s = fh.read()
        except OSError as e:
            raise SpecError(f"cannot read body spec {arg!r}: {e.strerror}") from None
    v = parse_spec(s)
    try:
        body = build_body(v)
    except GeometryError as e:
        raise SpecError(f"invalid body: {e}") from e
    return LoadedBody(v, emit_spec(v), body)
