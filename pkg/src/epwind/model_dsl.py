"""Matrix families H(kappa) written as small arithmetic expressions.

Grammar (recursive descent)::

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := ('-' | '+') unary | power
    power := atom ('^' unary)?          # right associative
    atom  := NUMBER | NUMBER 'i' | IDENT | IDENT '(' expr ')' | '(' expr ')'

The bare identifier ``i`` is the imaginary unit.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Mapping, Union

import numpy as np

from .errors import EvaluationError, InvalidInputError, ParseError

FUNCTIONS = ("sqrt", "exp", "sin", "cos", "conj", "abs", "re", "im")


# --------------------------------------------------------------------------
# AST
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: complex


@dataclass(frozen=True)
class Ident:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Ident, Neg, BinOp, Call]

I = Num(1j)


def Add(a, b):
    return BinOp("+", a, b)


def Sub(a, b):
    return BinOp("-", a, b)


def Mul(a, b):
    return BinOp("*", a, b)


def Div(a, b):
    return BinOp("/", a, b)


def Pow(a, b):
    return BinOp("^", a, b)


# --------------------------------------------------------------------------
# tokenizer + parser
# --------------------------------------------------------------------------

_NUMBER = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")


@dataclass
class _Token:
    kind: str  # num, imag, ident, op, end
    text: str
    offset: int


def _tokenize(src: str) -> list:
    data = src.encode("utf-8")
    tokens = []
    pos = 0
    text = src
    # byte offsets are tracked alongside character positions
    char_to_byte = []
    b = 0
    for ch in text:
        char_to_byte.append(b)
        b += len(ch.encode("utf-8"))
    char_to_byte.append(len(data))
    while pos < len(text):
        ch = text[pos]
        if ch.isspace():
            pos += 1
            continue
        m = _NUMBER.match(text, pos)
        if m:
            end = m.end()
            if end < len(text) and text[end] == "i" and not (end + 1 < len(text) and (text[end + 1].isalnum() or text[end + 1] == "_")):
                tokens.append(_Token("imag", m.group(0), char_to_byte[pos]))
                pos = end + 1
            else:
                tokens.append(_Token("num", m.group(0), char_to_byte[pos]))
                pos = end
            continue
        if ch.isalpha() or ch == "_":
            end = pos + 1
            while end < len(text) and (text[end].isalnum() or text[end] == "_"):
                end += 1
            tokens.append(_Token("ident", text[pos:end], char_to_byte[pos]))
            pos = end
            continue
        if ch in "+-*/^()":
            tokens.append(_Token("op", ch, char_to_byte[pos]))
            pos += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", char_to_byte[pos])
    tokens.append(_Token("end", "", len(data)))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.tokens = _tokenize(src)
        self.pos = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.pos]

    def _is_op(self, text):
        return self.tok.kind == "op" and self.tok.text == text

    def _expect_op(self, text):
        if not self._is_op(text):
            raise ParseError(f"unexpected {self.tok.text or 'end of input'!r}", self.tok.offset, {repr(text)})
        self.pos += 1

    def parse(self) -> Expr:
        node = self.expr()
        if self.tok.kind != "end":
            raise ParseError(f"unexpected {self.tok.text!r}", self.tok.offset, {"'+'", "'-'", "'*'", "'/'", "'^'", "end of input"})
        return node

    def expr(self):
        node = self.term()
        while self._is_op("+") or self._is_op("-"):
            op = self.tok.text
            self.pos += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self._is_op("*") or self._is_op("/"):
            op = self.tok.text
            self.pos += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self._is_op("-"):
            self.pos += 1
            return Neg(self.unary())
        if self._is_op("+"):
            self.pos += 1
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self._is_op("^"):
            self.pos += 1
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        tok = self.tok
        if tok.kind == "num":
            self.pos += 1
            return Num(complex(float(tok.text), 0.0))
        if tok.kind == "imag":
            self.pos += 1
            return Num(complex(0.0, float(tok.text)))
        if tok.kind == "ident":
            self.pos += 1
            if self._is_op("("):
                if tok.text not in FUNCTIONS:
                    raise ParseError(f"unknown function {tok.text!r}", tok.offset, {repr(f) for f in FUNCTIONS})
                self.pos += 1
                arg = self.expr()
                self._expect_op(")")
                return Call(tok.text, arg)
            if tok.text == "i":
                return I
            return Ident(tok.text)
        if self._is_op("("):
            self.pos += 1
            node = self.expr()
            self._expect_op(")")
            return node
        raise ParseError(
            f"unexpected {tok.text or 'end of input'!r}", tok.offset, {"number", "identifier", "'('", "'-'"}
        )


def parse_expr(src: str) -> Expr:
    return _Parser(src).parse()


# --------------------------------------------------------------------------
# printing
# --------------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def _fmt_real(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _fmt_num(z: complex) -> tuple:
    re_, im_ = z.real, z.imag
    if im_ == 0 and re_ >= 0:
        return _fmt_real(re_), "atom"
    if re_ == 0 and im_ > 0:
        return ("i" if im_ == 1 else _fmt_real(im_) + "i"), "atom"
    # anything else is written as a compound expression
    if re_ == 0:
        return "-" + ("i" if im_ == -1 else _fmt_real(-im_) + "i"), "neg"
    if im_ == 0:
        return "-" + _fmt_real(-re_), "neg"
    sign = "+" if im_ > 0 else "-"
    mag = abs(im_)
    return f"{_fmt_real(re_)} {sign} {'i' if mag == 1 else _fmt_real(mag) + 'i'}", "+"


def _pp(e) -> tuple:
    if isinstance(e, Num):
        return _fmt_num(e.value)
    if isinstance(e, Ident):
        return e.name, "atom"
    if isinstance(e, Call):
        return f"{e.func}({_pp(e.arg)[0]})", "atom"
    if isinstance(e, Neg):
        s, p = _pp(e.operand)
        if _PREC[p] < _PREC["neg"]:
            s = f"({s})"
        return "-" + s, "neg"
    if isinstance(e, BinOp):
        ls, lp = _pp(e.left)
        rs, rp = _pp(e.right)
        me = _PREC[e.op]
        if e.op == "^":
            if _PREC[lp] <= me:
                ls = f"({ls})"
            if _PREC[rp] < _PREC["neg"]:
                rs = f"({rs})"
            return f"{ls}^{rs}", "^"
        if _PREC[lp] < me:
            ls = f"({ls})"
        # left-associative: right operand at equal precedence needs parens
        if _PREC[rp] <= me or (rp == "neg" and me >= _PREC["neg"]):
            rs = f"({rs})"
        if rp == "neg":
            rs = f"({rs})"
        return f"{ls} {e.op} {rs}", e.op
    raise TypeError(f"not an expression node: {e!r}")


def pretty_print(e: Expr) -> str:
    return _pp(e)[0]


def identifiers(e: Expr) -> set:
    if isinstance(e, Ident):
        return {e.name}
    if isinstance(e, Neg):
        return identifiers(e.operand)
    if isinstance(e, Call):
        return identifiers(e.arg)
    if isinstance(e, BinOp):
        return identifiers(e.left) | identifiers(e.right)
    return set()


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------

def _int_exponent(e):
    if isinstance(e, Num) and e.value.imag == 0 and e.value.real == int(e.value.real):
        return int(e.value.real)
    if isinstance(e, Neg):
        k = _int_exponent(e.operand)
        return None if k is None else -k
    return None


_NP_FUNCS = {
    "sqrt": np.sqrt,
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "conj": np.conj,
    "abs": lambda z: np.abs(z) + 0j,
    "re": lambda z: np.real(z) + 0j,
    "im": lambda z: np.imag(z) + 0j,
}


def eval_expr(e: Expr, bindings: Mapping):
    """Evaluate with complex arithmetic; binding values may be numpy arrays."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Ident):
        try:
            v = bindings[e.name]
        except KeyError:
            raise EvaluationError(f"unbound identifier {e.name!r}") from None
        return np.asarray(v, dtype=complex) if np.ndim(v) else complex(v)
    if isinstance(e, Neg):
        # 0 - x keeps a +0 imaginary part so principal sqrt(-1) is +i
        return 0.0 - eval_expr(e.operand, bindings)
    if isinstance(e, Call):
        return _NP_FUNCS[e.func](eval_expr(e.arg, bindings))
    if isinstance(e, BinOp):
        a = eval_expr(e.left, bindings)
        if e.op == "^":
            k = _int_exponent(e.right)
            if k is not None and k >= 0:
                out = 1.0 + 0j
                for _ in range(k):
                    out = out * a
                return out
            b = eval_expr(e.right, bindings)
            if k is not None and np.any(np.asarray(a) == 0):
                raise EvaluationError("division by zero in negative power")
            return np.power(np.asarray(a, dtype=complex), b) if np.ndim(a) or np.ndim(b) else complex(a) ** complex(b)
        b = eval_expr(e.right, bindings)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            if np.any(np.asarray(b) == 0):
                raise EvaluationError("division by zero")
            return a / b
    raise TypeError(f"not an expression node: {e!r}")


_CMATH_FUNCS = {
    "sqrt": "cmath.sqrt({})",
    "exp": "cmath.exp({})",
    "sin": "cmath.sin({})",
    "cos": "cmath.cos({})",
    "conj": "({}).conjugate()",
    "abs": "complex(abs({}))",
    "re": "complex(({}).real)",
    "im": "complex(({}).imag)",
}


def to_python(e: Expr, names: Mapping[str, str]) -> str:
    """Scalar Python source for ``e`` using ``cmath``; ``names`` maps identifiers to variables."""
    if isinstance(e, Num):
        return f"complex({e.value.real!r}, {e.value.imag!r})"
    if isinstance(e, Ident):
        return names[e.name]
    if isinstance(e, Neg):
        return f"(0.0 - {to_python(e.operand, names)})"
    if isinstance(e, Call):
        return _CMATH_FUNCS[e.func].format(to_python(e.arg, names))
    if isinstance(e, BinOp):
        a = to_python(e.left, names)
        if e.op == "^":
            k = _int_exponent(e.right)
            if k is not None and 0 <= k <= 16:
                return "(" + " * ".join([a] * k) + ")" if k else "complex(1.0, 0.0)"
            return f"(({a}) ** ({to_python(e.right, names)}))"
        return f"({a} {e.op} {to_python(e.right, names)})"
    raise TypeError(f"not an expression node: {e!r}")


# --------------------------------------------------------------------------
# families
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MatrixFamily:
    n: int
    sources: tuple  # n x n entry source strings
    params: Mapping[str, complex] = field(default_factory=dict)
    variable: str = "kappa"
    name: str = ""

    def __post_init__(self):
        if self.n < 1 or len(self.sources) != self.n or any(len(r) != self.n for r in self.sources):
            raise InvalidInputError(f"family entries must form a {self.n}x{self.n} array")
        srcs = tuple(tuple(str(s) for s in row) for row in self.sources)
        object.__setattr__(self, "sources", srcs)
        object.__setattr__(self, "params", {k: complex(v) for k, v in dict(self.params).items()})
        entries = tuple(tuple(parse_expr(s) for s in row) for row in srcs)
        object.__setattr__(self, "entries", entries)
        known = set(self.params) | {self.variable}
        for row in entries:
            for ex in row:
                missing = identifiers(ex) - known
                if missing:
                    raise InvalidInputError(f"unbound identifiers in family: {sorted(missing)}")

    def with_params(self, **overrides) -> "MatrixFamily":
        p = dict(self.params)
        p.update({k: complex(v) for k, v in overrides.items()})
        return MatrixFamily(self.n, self.sources, p, self.variable, self.name)

    def __call__(self, kappa):
        return eval_family(self, kappa)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "variable": self.variable,
            "params": {k: [v.real, v.imag] for k, v in sorted(self.params.items())},
            "entries": [list(r) for r in self.sources],
        }

    def __hash__(self):
        return hash((self.n, self.sources, tuple(sorted(self.params.items())), self.variable))


def eval_family(f: MatrixFamily, kappa) -> np.ndarray:
    """H(kappa); an array of kappa values gives a stack of shape (..., n, n)."""
    k = np.asarray(kappa, dtype=complex)
    bindings = dict(f.params)
    bindings[f.variable] = k
    out = np.empty(k.shape + (f.n, f.n), dtype=complex)
    for i, row in enumerate(f.entries):
        for j, ex in enumerate(row):
            out[..., i, j] = eval_expr(ex, bindings)
    return out


def builtin_paper4(J: complex = 1.0, gamma: complex = 1.0) -> MatrixFamily:
    """Four-site chain with gain i*gamma and loss -i*gamma at the ends and a
    tunable central coupling kappa."""
    entries = (
        ("i*gamma", "J", "0", "0"),
        ("J", "0", "kappa", "0"),
        ("0", "kappa", "0", "J"),
        ("0", "0", "J", "-i*gamma"),
    )
    return MatrixFamily(4, entries, {"J": J, "gamma": gamma}, "kappa", "paper4")


BUILTINS = {"paper4": builtin_paper4}


def family_from_json(doc: Mapping, name: str = "") -> MatrixFamily:
    try:
        n = int(doc["n"])
        entries = doc["entries"]
        params = {k: complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v) for k, v in doc.get("params", {}).items()}
        variable = doc.get("variable", "kappa")
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise InvalidInputError(f"malformed family document: {exc}") from None
    return MatrixFamily(n, tuple(tuple(r) for r in entries), params, variable, name)


def load_family(ref) -> MatrixFamily:
    """A built-in name (e.g. ``"paper4"``), a JSON file path, or an inline dict."""
    if isinstance(ref, MatrixFamily):
        return ref
    if isinstance(ref, Mapping):
        return family_from_json(ref)
    if ref in BUILTINS:
        return BUILTINS[ref]()
    path = FsPath(ref)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InvalidInputError(f"family file not found: {ref}") from None
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"family file {ref} is not valid JSON: {exc}") from None
    return family_from_json(doc, path.stem)
