"""Canonical text and JSON forms of series, and the expression parser.

The text form lists terms by descending total degree, then by exponent
vector in variable-id order, with coefficients written as ``p/q``::

    1/2*x^2*q_1 - x + 3

Parsing accepts ``+ - * / ^``, parentheses, integer literals and variable
names; division is only allowed by a nonzero number. Products of odd
variables are normalized with their Koszul sign, so the text printed for a
parsed series parses back to the same series.
"""
from __future__ import annotations

import ast
from fractions import Fraction

from .kernel import Series, VariableTable


class ExpressionError(ValueError):
    def __init__(self, msg, text=None, col=None):
        where = f" at column {col + 1}" if col is not None else ""
        super().__init__(f"{msg}{where}" + (f" in {text!r}" if text else ""))
        self.col = col


def _coeff(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def render_monomial(table: VariableTable, m) -> str:
    parts = []
    for vid, e in m:
        name = table[vid].name
        parts.append(name if e == 1 else f"{name}^{e}")
    return "*".join(parts)


def render(f: Series) -> str:
    if f.is_zero():
        return "0"
    out = []
    for i, (m, c) in enumerate(f.sorted_terms()):
        neg = c < 0
        a = -c if neg else c
        mono = render_monomial(f.table, m)
        if not mono:
            body = _coeff(a)
        elif a == 1:
            body = mono
        else:
            body = f"{_coeff(a)}*{mono}"
        if i == 0:
            out.append(f"-{body}" if neg else body)
        else:
            out.append(f" - {body}" if neg else f" + {body}")
    return "".join(out)


def parse(text: str, table: VariableTable, truncation=None) -> Series:
    """Parse an infix expression over the variables of ``table``."""
    src = text.replace("^", "**")
    try:
        tree = ast.parse(src.strip(), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError("malformed expression", text, (exc.offset or 1) - 1) from None

    def num(node):
        if isinstance(node, ast.Constant) and isinstance(node.value, int) \
                and not isinstance(node.value, bool):
            return Fraction(node.value)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = num(node.operand)
            return None if v is None else (-v if isinstance(node.op, ast.USub) else v)
        if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Div):
            a, b = num(node.left), num(node.right)
            if a is not None and b:
                return a / b
        return None

    def walk(node) -> Series:
        col = getattr(node, "col_offset", None)
        if isinstance(node, ast.Constant):
            if isinstance(node.value, int) and not isinstance(node.value, bool):
                return Series.constant(table, node.value)
            raise ExpressionError("only integer literals are allowed", text, col)
        if isinstance(node, ast.Name):
            v = table.get(node.id)
            if v is None:
                raise ExpressionError(f"unknown variable {node.id!r}", text, col)
            return Series.variable(table, v)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            s = walk(node.operand)
            return -s if isinstance(node.op, ast.USub) else s
        if isinstance(node, ast.BinOp):
            if isinstance(node.op, ast.Add):
                return walk(node.left) + walk(node.right)
            if isinstance(node.op, ast.Sub):
                return walk(node.left) - walk(node.right)
            if isinstance(node.op, ast.Mult):
                return walk(node.left) * walk(node.right)
            if isinstance(node.op, ast.Div):
                d = num(node.right)
                if not d:
                    raise ExpressionError("division only by a nonzero number", text, col)
                return walk(node.left).scale(1 / d)
            if isinstance(node.op, ast.Pow):
                n = num(node.right)
                if n is None or n.denominator != 1 or n < 0:
                    raise ExpressionError("exponent must be a non-negative integer", text, col)
                return walk(node.left) ** int(n)
        raise ExpressionError("unsupported syntax", text, col)

    result = walk(tree.body)
    return result.with_truncation(truncation) if truncation else result


def to_json(f: Series) -> dict:
    terms = []
    for m, c in f.sorted_terms():
        terms.append({"coeff": _coeff(c),
                      "monomial": [[f.table[vid].name, e] for vid, e in m]})
    return {"terms": terms, "truncation": dict(sorted(f.truncation.items()))}


def from_json(data: dict, table: VariableTable) -> Series:
    out = Series.zero(table)
    for t in data["terms"]:
        factors = [(table[name], e) for name, e in t["monomial"]]
        out = out + Series.monomial(table, factors, Fraction(t["coeff"]))
    return out.with_truncation(data.get("truncation") or {})
