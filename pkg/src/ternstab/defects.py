"""Pointwise defect vectors of the functional equations being tested."""

from __future__ import annotations

from .algebra import Element, ternary_product as tp
from .maps import EvaluableMap, evaluate


def jensen_arguments(x: Element, y: Element, z: Element):
    """The three arguments (x+y+z)/3, (x-2y+z)/3, (x+y-2z)/3."""
    return (x + y + z) / 3, (x - 2 * y + z) / 3, (x + y - 2 * z) / 3


def jensen_defect(f: EvaluableMap, x, y, z, mu: complex = 1.0) -> Element:
    """μf((x+y+z)/3) + μf((x-2y+z)/3) + μf((x+y-2z)/3) - f(μx)."""
    w, t, s = jensen_arguments(x, y, z)
    return mu * (evaluate(f, w) + evaluate(f, t) + evaluate(f, s)) - evaluate(f, mu * x)


def additivity_defect(f: EvaluableMap, w, t, s) -> Element:
    """f(w+t+s) - f(w) - f(t) - f(s)."""
    return evaluate(f, w + t + s) - evaluate(f, w) - evaluate(f, t) - evaluate(f, s)


def homogeneity_defect(f: EvaluableMap, x, lam: complex) -> Element:
    """f(λx) - λf(x)."""
    return evaluate(f, lam * x) - lam * evaluate(f, x)


def bracket_defect(f: EvaluableMap, a, b, c) -> Element:
    """f([abc]) - [f(a)bc] - [af(b)c] - [abf(c)]."""
    return (evaluate(f, tp(a, b, c)) - tp(evaluate(f, a), b, c)
            - tp(a, evaluate(f, b), c) - tp(a, b, evaluate(f, c)))
