"""Potentials V(x, y): quadratic forms, a small expression language, and
confinement profiles.

Coordinates are split into n slow dimensions (x1..xn) and p fast dimensions
(y1..yp).  A potential is either an exact quadratic form <Ax,x> + <By,y> or a
parsed arithmetic expression over the coordinate variables.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ExprError",
    "PotentialDomainError",
    "NotPositiveDefiniteError",
    "PotentialExpr",
    "Potential",
    "ConfinementProfile",
    "parse_potential",
    "quadratic_potential",
    "expression_potential",
    "eval_potential",
    "confinement_profile",
]


class ExprError(ValueError):
    """Syntax or binding error in a potential expression."""

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class PotentialDomainError(ValueError):
    """Evaluation produced a non-finite value (division by zero, overflow)."""


class NotPositiveDefiniteError(ValueError):
    """A quadratic-form matrix has an eigenvalue <= 0."""


# ---------------------------------------------------------------------------
# Expression AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    axis: str   # "x" or "y"
    index: int  # 1-based within its axis


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # "+", "-", "*", "/"
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str  # "abs" or "exp"
    arg: "Node"


Node = Num | Var | Neg | BinOp | Pow | Call

_FUNCS = ("abs", "exp")

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise ExprError(f"unexpected character {text[pos:].strip()[0]!r}", pos)
        for kind in ("num", "ident", "op"):
            if m.group(kind) is not None:
                start = m.start(kind)
                text_val = text[start:m.end()]
                tokens.append((kind, text_val, start))
                break
        pos = m.end()
    return tokens


_VAR_RE = re.compile(r"([xy])([1-9]\d*)$")


class _Parser:
    """Precedence-climbing parser for the fixed arithmetic grammar."""

    def __init__(self, text: str, n: int, p: int):
        self.text = text
        self.n = n
        self.p = p
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        if self.i < len(self.tokens):
            return self.tokens[self.i]
        return ("end", "", len(self.text))

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, val, pos = self.next()
        if kind != "op" or val != op:
            raise ExprError(f"expected {op!r}, found {val!r}" if kind != "end"
                            else f"expected {op!r}, found end of input", pos)

    def parse(self) -> Node:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprError(f"unexpected trailing token {val!r}", pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.next()
                node = BinOp(val, node, self.term())
            else:
                return node

    def term(self) -> Node:
        node = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.next()
                node = BinOp(val, node, self.factor())
            else:
                return node

    def factor(self) -> Node:
        node = self.base()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.next()
            node = Pow(node, self.integer())
        return node

    def integer(self) -> int:
        sign = 1
        kind, val, pos = self.next()
        if kind == "op" and val == "-":
            sign = -1
            kind, val, pos = self.next()
        if kind != "num":
            raise ExprError(f"expected integer exponent, found {val!r}", pos)
        if not re.fullmatch(r"\d+", val):
            raise ExprError(f"non-integer exponent {val!r}", pos)
        return sign * int(val)

    def base(self) -> Node:
        kind, val, pos = self.next()
        if kind == "num":
            return Num(float(val))
        if kind == "op" and val == "-":
            return Neg(self.base())
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        if kind == "ident":
            if val in _FUNCS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Call(val, arg)
            m = _VAR_RE.match(val)
            if m is None:
                raise ExprError(f"unbound variable name {val!r}", pos)
            axis, idx = m.group(1), int(m.group(2))
            bound = self.n if axis == "x" else self.p
            if idx > bound:
                raise ExprError(
                    f"unbound variable {val!r}: only {bound} {axis}-dimension(s) declared",
                    pos,
                )
            return Var(axis, idx)
        if kind == "end":
            raise ExprError("unexpected end of input", pos)
        raise ExprError(f"unexpected token {val!r}", pos)


def to_string(node: Node) -> str:
    """Fully parenthesized rendering; reparsing yields the identical AST."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return f"{node.axis}{node.index}"
    if isinstance(node, Neg):
        # parenthesize the operand: "^" would otherwise bind to the negated base
        return f"(-({to_string(node.operand)}))"
    if isinstance(node, BinOp):
        return f"({to_string(node.left)} {node.op} {to_string(node.right)})"
    if isinstance(node, Pow):
        base = to_string(node.base)
        if isinstance(node.base, (BinOp, Neg, Pow)):
            base = f"({base})"
        return f"{base}^{node.exponent}"
    if isinstance(node, Call):
        return f"{node.func}({to_string(node.arg)})"
    raise TypeError(f"not an AST node: {node!r}")


def _eval_node(node: Node, xs, ys):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return xs[node.index - 1] if node.axis == "x" else ys[node.index - 1]
    if isinstance(node, Neg):
        return -_eval_node(node.operand, xs, ys)
    if isinstance(node, BinOp):
        a = _eval_node(node.left, xs, ys)
        b = _eval_node(node.right, xs, ys)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        return np.divide(a, b)
    if isinstance(node, Pow):
        return np.power(_eval_node(node.base, xs, ys), float(node.exponent))
    if isinstance(node, Call):
        v = _eval_node(node.arg, xs, ys)
        return np.abs(v) if node.func == "abs" else np.exp(v)
    raise TypeError(f"not an AST node: {node!r}")


@dataclass(frozen=True)
class PotentialExpr:
    """Parsed expression over x1..xn, y1..yp."""

    ast: Node
    n: int
    p: int

    def evaluate(self, point) -> float:
        point = np.asarray(point, dtype=float)
        if point.shape != (self.n + self.p,):
            raise ValueError(
                f"point has dimension {point.shape}, expected {self.n + self.p}")
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            val = _eval_node(self.ast, point[: self.n], point[self.n:])
        val = float(val)
        if not np.isfinite(val):
            raise PotentialDomainError(
                f"expression evaluated to non-finite value at {point.tolist()}")
        return val

    def evaluate_many(self, coords: np.ndarray) -> np.ndarray:
        """Vectorized evaluation; coords has shape (m, n+p)."""
        coords = np.asarray(coords, dtype=float)
        xs = [coords[:, j] for j in range(self.n)]
        ys = [coords[:, self.n + j] for j in range(self.p)]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            vals = _eval_node(self.ast, xs, ys)
        vals = np.broadcast_to(np.asarray(vals, dtype=float), (coords.shape[0],)).copy()
        if not np.all(np.isfinite(vals)):
            bad = int(np.flatnonzero(~np.isfinite(vals))[0])
            raise PotentialDomainError(
                f"expression evaluated to non-finite value at {coords[bad].tolist()}")
        return vals


def parse_potential(text: str, n: int, p: int) -> PotentialExpr:
    """Parse a potential expression with n x-variables and p y-variables.

    p = 0 permits purely semiclassical operators with no fast dimensions.
    """
    if not text or not text.strip():
        raise ExprError("empty expression")
    if n < 1 or p < 0:
        raise ValueError(f"need n >= 1 and p >= 0, got n={n}, p={p}")
    text = text.replace("−", "-")  # unicode minus
    return PotentialExpr(_Parser(text, n, p).parse(), n, p)


# ---------------------------------------------------------------------------
# Potential objects
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Potential:
    kind: str  # "quadratic" | "expression"
    n: int
    p: int
    nonnegative_claimed: bool
    a: np.ndarray | None = None
    b: np.ndarray | None = None
    expr: PotentialExpr | None = None
    frequencies: tuple = field(default=())  # (w, mu) square roots, quadratic only

    @property
    def dim(self) -> int:
        return self.n + self.p

    def evaluate(self, point) -> float:
        return eval_potential(self, point)

    def evaluate_many(self, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords, dtype=float)
        if coords.ndim != 2 or coords.shape[1] != self.dim:
            raise ValueError(f"coords must have shape (m, {self.dim})")
        if self.kind == "quadratic":
            x = coords[:, : self.n]
            vals = np.einsum("mi,ij,mj->m", x, self.a, x)
            if self.p:
                y = coords[:, self.n:]
                vals = vals + np.einsum("mi,ij,mj->m", y, self.b, y)
            return vals
        return self.expr.evaluate_many(coords)

    def min_curvature(self) -> float:
        """Smallest eigenvalue of blkdiag(A, B); quadratic kind only."""
        if self.kind != "quadratic":
            raise ValueError("min_curvature requires a quadratic potential")
        w, mu = self.frequencies
        return float(min(list(w) + list(mu)) ** 2)


def _symmetric_eigenvalues(m: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(m)


def quadratic_potential(a, b=None) -> Potential:
    """Build V(x, y) = <Ax,x> + <By,y>; matrices are symmetrized as (M+M^T)/2.

    Both matrices must be strictly positive definite (omit B for p = 0).
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[0] != a.shape[1]:
        raise ValueError("A must be square")
    a = (a + a.T) / 2
    mats = [("A", a)]
    if b is not None and np.size(b) > 0:
        b = np.atleast_2d(np.asarray(b, dtype=float))
        if b.shape[0] != b.shape[1]:
            raise ValueError("B must be square")
        b = (b + b.T) / 2
        mats.append(("B", b))
    else:
        b = None
    freqs = []
    for name, m in mats:
        eigs = _symmetric_eigenvalues(m)
        if np.any(eigs <= 0):
            raise NotPositiveDefiniteError(
                f"matrix {name} is not positive definite (eigenvalue {eigs.min():g})")
        freqs.append(tuple(np.sort(np.sqrt(eigs))))
    w = freqs[0]
    mu = freqs[1] if len(freqs) > 1 else ()
    return Potential(
        kind="quadratic",
        n=a.shape[0],
        p=0 if b is None else b.shape[0],
        nonnegative_claimed=True,
        a=a,
        b=b,
        frequencies=(w, mu),
    )


def expression_potential(text: str, n: int, p: int,
                         nonnegative: bool = False) -> Potential:
    expr = parse_potential(text, n, p)
    return Potential(kind="expression", n=n, p=p,
                     nonnegative_claimed=nonnegative, expr=expr)


def eval_potential(pot: Potential, point) -> float:
    point = np.asarray(point, dtype=float)
    if point.shape != (pot.dim,):
        raise ValueError(
            f"point has shape {point.shape}, expected ({pot.dim},)")
    if pot.kind == "quadratic":
        x = point[: pot.n]
        val = float(x @ pot.a @ x)
        if pot.p:
            y = point[pot.n:]
            val += float(y @ pot.b @ y)
        return val
    return pot.expr.evaluate(point)


# ---------------------------------------------------------------------------
# Confinement profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConfinementProfile:
    """Sampled estimates of inf V outside balls of increasing radius."""

    radii: tuple
    inf_estimates: tuple
    sample_count: int
    exact_infima: tuple | None = None  # lambda_min * q^2, quadratic kind only


def _exterior_stream(rng: np.random.Generator, half_widths: np.ndarray,
                     radius: float, samples: int) -> np.ndarray:
    """First `samples` points of the seeded box stream lying outside B(0, radius)."""
    out = []
    have = 0
    attempts = 0
    max_attempts = max(100_000, 10_000 * samples)
    while have < samples:
        batch = rng.uniform(-half_widths, half_widths,
                            size=(max(samples, 256), len(half_widths)))
        keep = batch[np.linalg.norm(batch, axis=1) > radius]
        if keep.size:
            out.append(keep[: samples - have])
            have += len(out[-1])
        attempts += len(batch)
        if attempts > max_attempts:
            raise ValueError(
                f"exterior of B(0, {radius}) has negligible volume in the box")
    return np.vstack(out)


def confinement_profile(pot: Potential, radii, box_half_widths, samples: int,
                        seed: int = 0) -> ConfinementProfile:
    """Estimate inf V over {box \\ B(0, q)} for each radius q by seeded sampling.

    The same seeded point stream backs every radius, so adding samples never
    increases an estimate and results are reproducible.
    """
    radii = [float(q) for q in radii]
    if any(b >= a for a, b in zip(radii[1:], radii)):
        raise ValueError("radii must be strictly ascending")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    hw = np.asarray(box_half_widths, dtype=float)
    if hw.shape != (pot.dim,):
        raise ValueError(f"box must have {pot.dim} half-widths")
    diagonal = float(np.linalg.norm(hw))
    estimates = []
    for q in radii:
        if q >= diagonal:
            raise ValueError(
                f"radius {q} leaves no exterior inside the box (diagonal {diagonal:g})")
        rng = np.random.default_rng(seed)
        pts = _exterior_stream(rng, hw, q, samples)
        estimates.append(float(np.min(pot.evaluate_many(pts))))
    exact = None
    if pot.kind == "quadratic":
        lam_min = pot.min_curvature()
        exact = tuple(lam_min * q * q for q in radii)
    return ConfinementProfile(
        radii=tuple(radii),
        inf_estimates=tuple(estimates),
        sample_count=samples,
        exact_infima=exact,
    )
