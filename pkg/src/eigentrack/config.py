"""Run configuration: parameter box, eigenvalue window, coefficient family,
mesh resolution, matching weights, verification tolerances and level caps.

Configs are read from INI-style files with sections [problem], [tolerances],
[grid] and [output]; see the repository README for the full schema.
Coefficient entries are small arithmetic expressions over mu1..mud parsed
into an AST here, never passed to eval().
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


class ConfigError(ValueError):
    """Schema or invariant violation in a run configuration."""


class CoefficientError(ValueError):
    """Evaluation failure of a coefficient matrix (division by zero, not SPD)."""


# ---------------------------------------------------------------------------
# Coefficient expressions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float

    def __call__(self, mu):
        return self.value


@dataclass(frozen=True)
class Var:
    index: int  # 0-based parameter axis

    def __call__(self, mu):
        return mu[self.index]


@dataclass(frozen=True)
class Neg:
    arg: "Expr"

    def __call__(self, mu):
        return -self.arg(mu)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"

    def __call__(self, mu):
        a, b = self.left(mu), self.right(mu)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if b == 0.0:
            raise CoefficientError("division by zero in coefficient expression")
        return a / b


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int

    def __call__(self, mu):
        v = self.base(mu)
        if v == 0.0 and self.exponent < 0:
            raise CoefficientError("division by zero in coefficient expression")
        return v ** self.exponent


Expr = Num | Var | Neg | BinOp | Pow


def _tokenize(text: str) -> list[str]:
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "+-*/^()":
            tokens.append(ch)
            i += 1
        elif ch.isdigit() or ch == ".":
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            tokens.append(text[i:j])
            i = j
        elif text[i : i + 2] == "mu":
            j = i + 2
            while j < n and text[j].isdigit():
                j += 1
            if j == i + 2:
                raise ConfigError(f"variable without index near {text[i:]!r}")
            tokens.append(text[i:j])
            i = j
        else:
            raise ConfigError(f"unexpected character {ch!r} in expression {text!r}")
    return tokens


class _ExprParser:
    """Recursive-descent parser for +, -, *, /, integer ^ and parentheses."""

    def __init__(self, text: str, dim: int):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.dim = dim
        self.text = text

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> str:
        tok = self.peek()
        if tok is None:
            raise ConfigError(f"unexpected end of expression {self.text!r}")
        self.pos += 1
        return tok

    def parse(self) -> Expr:
        e = self.expr()
        if self.peek() is not None:
            raise ConfigError(f"trailing tokens in expression {self.text!r}")
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek() in ("+", "-"):
            e = BinOp(self.take(), e, self.term())
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.peek() in ("*", "/"):
            e = BinOp(self.take(), e, self.factor())
        return e

    def factor(self) -> Expr:
        if self.peek() in ("+", "-"):
            op = self.take()
            arg = self.factor()
            return arg if op == "+" else Neg(arg)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek() == "^":
            self.take()
            sign = 1
            if self.peek() in ("+", "-"):
                sign = -1 if self.take() == "-" else 1
            tok = self.take()
            if not tok.isdigit():
                raise ConfigError(f"exponent must be an integer in {self.text!r}")
            return Pow(base, sign * int(tok))
        return base

    def atom(self) -> Expr:
        tok = self.take()
        if tok == "(":
            e = self.expr()
            if self.take() != ")":
                raise ConfigError(f"unbalanced parentheses in {self.text!r}")
            return e
        if tok.startswith("mu"):
            idx = int(tok[2:])
            if not 1 <= idx <= self.dim:
                raise ConfigError(f"variable {tok} exceeds dimension {self.dim}")
            return Var(idx - 1)
        try:
            return Num(float(tok))
        except ValueError:
            raise ConfigError(f"invalid token {tok!r} in expression {self.text!r}") from None


def parse_expression(text: str, dim: int) -> Expr:
    return _ExprParser(text, dim).parse()


@dataclass(frozen=True)
class CoeffSpec:
    """The four entries of the 2x2 coefficient matrix as expression trees.

    The off-diagonal sources must be syntactically identical, which makes
    every evaluation symmetric by construction.
    """

    dim: int
    sources: tuple[str, str, str, str]  # c11, c12, c21, c22
    entries: tuple[Expr, Expr, Expr, Expr]

    @classmethod
    def from_sources(cls, dim: int, c11: str, c12: str, c21: str, c22: str) -> "CoeffSpec":
        if _tokenize(c12) != _tokenize(c21):
            raise ConfigError("c12 and c21 must be syntactically identical")
        entries = tuple(parse_expression(s, dim) for s in (c11, c12, c21, c22))
        return cls(dim=dim, sources=(c11, c12, c21, c22), entries=entries)

    @classmethod
    def identity(cls, dim: int) -> "CoeffSpec":
        return cls.from_sources(dim, "1", "0", "0", "1")


def eval_coefficient(spec: CoeffSpec, mu: Sequence[float]) -> np.ndarray:
    """Evaluate the coefficient matrix at a physical parameter value.

    Returns a symmetric 2x2 array; raises CoefficientError if the result is
    not symmetric positive definite (checked via trace and determinant).
    """
    c11, c12, c21, c22 = (e(mu) for e in spec.entries)
    mat = np.array([[c11, c12], [c21, c22]], dtype=float)
    trace = mat[0, 0] + mat[1, 1]
    det = mat[0, 0] * mat[1, 1] - mat[0, 1] * mat[1, 0]
    if not (np.isfinite(mat).all() and trace > 0.0 and det > 0.0):
        raise CoefficientError(f"coefficient matrix at mu={tuple(mu)} is not SPD: {mat.tolist()}")
    return mat


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    """Validated, immutable description of one tracking run."""

    dim: int
    box: tuple[tuple[float, float], ...]
    window: tuple[float, float]
    coefficient: CoeffSpec
    mesh_n: int
    w1: float
    w2: float
    t_pi: float
    t_lambda: float
    initial_level: int
    max_level: int
    cache_dir: Path
    output_dir: Path

    def __post_init__(self):
        for a, b in self.box:
            if not a < b:
                raise ConfigError(f"degenerate box axis [{a}, {b}]")
        if not self.window[0] < self.window[1]:
            raise ConfigError(f"degenerate window {self.window}")
        if self.w1 < 0 or self.w2 < 0 or self.w1 + self.w2 <= 0:
            raise ConfigError("weights must be nonnegative with w1 + w2 > 0")
        if not 0.0 < self.t_pi < 1.0:
            raise ConfigError("t_pi must lie in (0, 1)")
        if self.t_lambda <= 0.0:
            raise ConfigError("t_lambda must be positive")
        if self.mesh_n < 3:
            raise ConfigError("mesh_n must be at least 3")
        if self.initial_level < 0:
            raise ConfigError("initial_level must be nonnegative")
        if self.max_level < 0:
            raise ConfigError("max_level must be nonnegative")


_SCHEMA = {
    "problem": {"box", "window", "c11", "c12", "c21", "c22", "mesh_n"},
    "tolerances": {"w1", "w2", "t_pi", "t_lambda"},
    "grid": {"initial_level", "max_level"},
    "output": {"cache_dir", "output_dir"},
}
_REQUIRED = {
    "problem": {"box", "window", "c11", "c12", "c21", "c22"},
    "tolerances": {"w1", "w2", "t_pi", "t_lambda"},
}


def _parse_intervals(text: str, key: str) -> tuple[tuple[float, float], ...]:
    out = []
    for part in text.split(";"):
        pieces = [p.strip() for p in part.split(",")]
        if len(pieces) != 2:
            raise ConfigError(f"key {key!r}: expected 'lo, hi' pairs, got {part!r}")
        try:
            out.append((float(pieces[0]), float(pieces[1])))
        except ValueError:
            raise ConfigError(f"key {key!r}: non-numeric bound in {part!r}") from None
    return tuple(out)


def _get_float(section, key: str) -> float:
    try:
        return float(section[key])
    except ValueError:
        raise ConfigError(f"key {key!r}: expected a number, got {section[key]!r}") from None


def _get_int(section, key: str) -> int:
    try:
        return int(section[key])
    except ValueError:
        raise ConfigError(f"key {key!r}: expected an integer, got {section[key]!r}") from None


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration document."""
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    for name in parser.sections():
        if name not in _SCHEMA:
            raise ConfigError(f"unknown section [{name}]")
        for key in parser[name]:
            if key not in _SCHEMA[name]:
                raise ConfigError(f"unknown key {key!r} in section [{name}]")
    for name, keys in _REQUIRED.items():
        if name not in parser:
            raise ConfigError(f"missing section [{name}]")
        for key in sorted(keys):
            if key not in parser[name]:
                raise ConfigError(f"missing key {key!r} in section [{name}]")

    problem = parser["problem"]
    tol = parser["tolerances"]
    grid = parser["grid"] if "grid" in parser else {}
    output = parser["output"] if "output" in parser else {}

    box = _parse_intervals(problem["box"], "box")
    window = _parse_intervals(problem["window"], "window")
    if len(window) != 1:
        raise ConfigError("key 'window': expected a single interval")
    dim = len(box)
    coeff = CoeffSpec.from_sources(
        dim, problem["c11"], problem["c12"], problem["c21"], problem["c22"]
    )

    return RunConfig(
        dim=dim,
        box=box,
        window=window[0],
        coefficient=coeff,
        mesh_n=_get_int(problem, "mesh_n") if "mesh_n" in problem else 65,
        w1=_get_float(tol, "w1"),
        w2=_get_float(tol, "w2"),
        t_pi=_get_float(tol, "t_pi"),
        t_lambda=_get_float(tol, "t_lambda"),
        initial_level=_get_int(grid, "initial_level") if "initial_level" in grid else 1,
        max_level=_get_int(grid, "max_level") if "max_level" in grid else 10,
        cache_dir=Path(output.get("cache_dir", ".eigentrack_cache")),
        output_dir=Path(output.get("output_dir", "eigentrack_out")),
    )


def parse_config_file(path: str | Path) -> RunConfig:
    return parse_config(Path(path).read_text())
