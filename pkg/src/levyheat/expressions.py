"""Tiny arithmetic expression language for coefficient functions.

Grammar: identifiers {x}, numeric constants, binary + - * /, unary -,
parentheses, and the function set {sin, cos, exp, tanh, abs, min, max}.
min/max are binary, the rest unary.  Expressions compile to closures that
evaluate vectorized over numpy arrays.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["Expression", "ExpressionError", "compile_expression"]

_UNARY_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "tanh": np.tanh,
    "abs": np.abs,
}
_BINARY_FUNCS = {"min": np.minimum, "max": np.maximum}


class ExpressionError(ValueError):
    """Syntax or semantic error in a coefficient expression."""

    def __init__(self, message, source, position):
        super().__init__(f"{message} at position {position}: {source!r}")
        self.source = source
        self.position = position


def _tokenize(source):
    tokens = []
    i, n = 0, len(source)
    while i < n:
        c = source[i]
        if c.isspace():
            i += 1
            continue
        if c in "+-*/(),":
            tokens.append((c, c, i))
            i += 1
            continue
        if c.isdigit() or c == ".":
            j = i
            seen_e = False
            while j < n and (source[j].isdigit() or source[j] == "." or
                             (source[j] in "eE" and not seen_e) or
                             (source[j] in "+-" and j > i and source[j - 1] in "eE")):
                if source[j] in "eE":
                    seen_e = True
                j += 1
            try:
                value = float(source[i:j])
            except ValueError:
                raise ExpressionError("invalid number", source, i) from None
            tokens.append(("num", value, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(("name", source[i:j], i))
            i = j
            continue
        raise ExpressionError(f"unexpected character {c!r}", source, i)
    tokens.append(("end", None, n))
    return tokens


class _Parser:
    def __init__(self, source):
        self.source = source
        self.tokens = _tokenize(source)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind):
        tok = self.advance()
        if tok[0] != kind:
            raise ExpressionError(f"expected {kind!r}", self.source, tok[2])
        return tok

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ExpressionError("trailing input", self.source, tok[2])
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] in ("+", "-"):
            op = self.advance()[0]
            rhs = self.term()
            node = ("add" if op == "+" else "sub", node, rhs)
        return node

    def term(self):
        node = self.factor()
        while self.peek()[0] in ("*", "/"):
            op = self.advance()[0]
            rhs = self.factor()
            node = ("mul" if op == "*" else "div", node, rhs)
        return node

    def factor(self):
        tok = self.peek()
        if tok[0] == "-":
            self.advance()
            return ("neg", self.factor())
        if tok[0] == "+":
            self.advance()
            return self.factor()
        return self.atom()

    def atom(self):
        tok = self.advance()
        if tok[0] == "num":
            return ("const", tok[1])
        if tok[0] == "(":
            node = self.expr()
            self.expect(")")
            return node
        if tok[0] == "name":
            name = tok[1]
            if self.peek()[0] == "(":
                self.advance()
                args = [self.expr()]
                while self.peek()[0] == ",":
                    self.advance()
                    args.append(self.expr())
                self.expect(")")
                if name in _UNARY_FUNCS:
                    if len(args) != 1:
                        raise ExpressionError(f"{name} takes one argument", self.source, tok[2])
                    return ("call1", name, args[0])
                if name in _BINARY_FUNCS:
                    if len(args) != 2:
                        raise ExpressionError(f"{name} takes two arguments", self.source, tok[2])
                    return ("call2", name, args[0], args[1])
                raise ExpressionError(f"unknown function {name!r}", self.source, tok[2])
            if name == "x":
                return ("var",)
            raise ExpressionError(f"unknown identifier {name!r}", self.source, tok[2])
        raise ExpressionError("expected value", self.source, tok[2])


def _evaluate(node, x):
    kind = node[0]
    if kind == "const":
        return node[1]
    if kind == "var":
        return x
    if kind == "neg":
        return -_evaluate(node[1], x)
    if kind == "add":
        return _evaluate(node[1], x) + _evaluate(node[2], x)
    if kind == "sub":
        return _evaluate(node[1], x) - _evaluate(node[2], x)
    if kind == "mul":
        return _evaluate(node[1], x) * _evaluate(node[2], x)
    if kind == "div":
        return _evaluate(node[1], x) / _evaluate(node[2], x)
    if kind == "call1":
        return _UNARY_FUNCS[node[1]](_evaluate(node[2], x))
    if kind == "call2":
        return _BINARY_FUNCS[node[1]](_evaluate(node[2], x), _evaluate(node[3], x))
    raise AssertionError(f"bad node {node!r}")


class Expression:
    """Compiled coefficient expression, callable on scalars and arrays."""

    def __init__(self, source):
        self.source = source.strip()
        self._ast = _Parser(self.source).parse()
        self.is_constant = self._ast_constant(self._ast)

    @staticmethod
    def _ast_constant(node):
        kind = node[0]
        if kind == "const":
            return True
        if kind == "var":
            return False
        return all(Expression._ast_constant(child) for child in node[1:]
                   if isinstance(child, tuple))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = _evaluate(self._ast, x)
        return np.broadcast_to(np.asarray(out, dtype=float), x.shape).copy() \
            if np.ndim(out) == 0 and x.ndim > 0 else np.asarray(out, dtype=float)

    def derivative(self, x, step=None):
        """Central finite-difference derivative; step scales with |x|."""
        x = np.asarray(x, dtype=float)
        if step is None:
            step = math.sqrt(np.finfo(float).eps) * 16.0
        h = step * np.maximum(1.0, np.abs(x))
        return (self(x + h) - self(x - h)) / (2.0 * h)

    def __repr__(self):
        return f"Expression({self.source!r})"


def compile_expression(source):
    """Parse ``source`` and return an :class:`Expression`."""
    return Expression(source)
