"""Maps A -> A as lazy expression trees, and the generalized metric on them.

A map is built from a few node types (inner derivations, power perturbations,
sums, scalar multiples and dilation iterates) and evaluated point by point.
Nothing is tabulated, so evaluating an iterate at a dilated point 3^n x is as
accurate as evaluating the base map there.

Evaluation first expands a tree into a linear combination of dilated atoms,
keyed by (atom, net dilation). Distances subtract these term by term, so a
component shared by two maps (the exact derivation underneath a perturbed map
and its iterates, say) cancels exactly instead of leaving rounding noise of the
size of its value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .algebra import AlgebraDescriptor, Element, operator_norm

DEFAULT_RATIO_CAP = 1e12


class Mode(str, Enum):
    EXPAND = "EXPAND"
    CONTRACT = "CONTRACT"

    @classmethod
    def parse(cls, value) -> "Mode":
        if isinstance(value, Mode):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise ValueError(f"mode must be EXPAND or CONTRACT, got {value!r}") from None


class NonFiniteEvaluation(ArithmeticError):
    """Evaluation produced NaN or Inf."""

    def __init__(self, node, shift: int):
        self.node = node
        self.shift = shift
        super().__init__(f"non-finite value from {node!r} at dilation 3^{shift}")


class EvaluableMap:
    """Base class for map nodes. Supports ``f(x)``, ``f + g`` and ``lam * f``."""

    def __call__(self, x: Element) -> Element:
        return evaluate(self, x)

    def __add__(self, other: "EvaluableMap") -> "Sum":
        return Sum(self, other)

    def __rmul__(self, lam) -> "ScalarMultiple":
        return ScalarMultiple(lam, self)


class _Atom(EvaluableMap):
    linear = False

    def key(self) -> tuple:
        raise NotImplementedError

    def apply(self, x: Element) -> Element:
        raise NotImplementedError


@dataclass(frozen=True, eq=False, repr=False)
class InnerDerivation(_Atom):
    """x -> m x - x m."""

    m: Element
    linear = True

    def key(self):
        return ("inner", self.m.shape, self.m.tobytes())

    def apply(self, x):
        return self.m @ x - x @ self.m

    def __repr__(self):
        return f"InnerDerivation(k={self.m.shape[0]}, |m|={operator_norm(self.m):.3g})"


@dataclass(frozen=True, eq=False)
class Identity(_Atom):
    """x -> x. Additive and homogeneous, but not a derivation."""

    linear = True

    def key(self):
        return ("identity",)

    def apply(self, x):
        return x


@dataclass(frozen=True, eq=False, repr=False)
class PowerPerturbation(_Atom):
    """x -> amplitude * ‖x‖^p * u, with 0 -> 0."""

    amplitude: float
    p: float
    u: Element

    def __post_init__(self):
        if not (self.amplitude >= 0 and math.isfinite(self.amplitude)):
            raise ValueError(f"amplitude must be finite and nonnegative, got {self.amplitude!r}")
        if abs(operator_norm(self.u) - 1.0) > 1e-9:
            raise ValueError("direction u must have unit operator norm")

    def key(self):
        return ("power", float(self.amplitude), float(self.p), self.u.tobytes())

    def apply(self, x):
        r = operator_norm(x)
        if r == 0.0:
            return np.zeros_like(self.u)
        with np.errstate(over="ignore"):
            # overflow becomes inf here and is reported as a non-finite evaluation
            mag = self.amplitude * np.float64(r) ** self.p
        return mag * self.u

    def __repr__(self):
        return f"PowerPerturbation(amplitude={self.amplitude!r}, p={self.p!r})"


@dataclass(frozen=True, eq=False)
class Sum(EvaluableMap):
    left: EvaluableMap
    right: EvaluableMap


@dataclass(frozen=True, eq=False)
class ScalarMultiple(EvaluableMap):
    lam: complex
    base: EvaluableMap

    def __post_init__(self):
        if not np.isfinite(self.lam):
            raise ValueError(f"scalar must be finite, got {self.lam!r}")


@dataclass(frozen=True, eq=False)
class DilationIterate(EvaluableMap):
    """n-fold dilation: 3^-n base(3^n x) (EXPAND) or 3^n base(x / 3^n) (CONTRACT)."""

    base: EvaluableMap
    n: int
    mode: Mode

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 0:
            raise ValueError(f"iterate count must be a nonnegative integer, got {self.n!r}")
        object.__setattr__(self, "mode", Mode.parse(self.mode))

    @property
    def shift(self) -> int:
        return self.n if self.mode is Mode.EXPAND else -self.n


def zero_map(k: int) -> InnerDerivation:
    return InnerDerivation(np.zeros((k, k), dtype=np.complex128))


def _collect(f, x, coeff, shift, out):
    if isinstance(f, _Atom):
        if f.linear:
            # J fixes additive homogeneous maps: 3^-s L(3^s x) = L(x)
            key, value = f.key(), f.apply(x)
        else:
            key = (f.key(), shift)
            if shift == 0:
                value = f.apply(x)
            else:
                s = 3.0 ** shift
                value = f.apply(s * x) / s
        if not np.all(np.isfinite(value)):
            raise NonFiniteEvaluation(f, shift)
        contribution = value if coeff == 1 else coeff * value
        if key in out:
            out[key] = out[key] + contribution
        else:
            out[key] = contribution
    elif isinstance(f, Sum):
        _collect(f.left, x, coeff, shift, out)
        _collect(f.right, x, coeff, shift, out)
    elif isinstance(f, ScalarMultiple):
        _collect(f.base, x, coeff * f.lam, shift, out)
    elif isinstance(f, DilationIterate):
        _collect(f.base, x, coeff, shift + f.shift, out)
    else:
        raise TypeError(f"not an evaluable map: {f!r}")


def terms(f: EvaluableMap, x: Element) -> dict:
    """Expand ``f(x)`` into its keyed contributions (insertion-ordered)."""
    out: dict = {}
    _collect(f, x, 1, 0, out)
    return out


def _sum_terms(parts, like: Element) -> Element:
    total = np.zeros_like(like, dtype=np.complex128)
    for v in parts:
        total = total + v
    return total


def evaluate(f: EvaluableMap, x: Element) -> Element:
    if not np.all(np.isfinite(x)):
        raise ValueError("evaluation point has non-finite entries")
    value = _sum_terms(terms(f, x).values(), x)
    if not np.all(np.isfinite(value)):
        raise NonFiniteEvaluation(f, 0)
    return value


def difference(g: EvaluableMap, h: EvaluableMap, x: Element) -> Element:
    """``g(x) - h(x)`` with shared terms cancelled exactly.

    Terms are combined in a canonical key order, so ``difference(h, g, x)`` is
    exactly the negative of ``difference(g, h, x)``.
    """
    tg, th = terms(g, x), terms(h, x)
    parts = []
    for key in sorted(tg.keys() | th.keys(), key=repr):
        v, w = tg.get(key), th.get(key)
        if w is None:
            parts.append(v)
        elif v is None:
            parts.append(-w)
        elif not np.array_equal(v, w):
            parts.append(v - w)
    return _sum_terms(parts, x)


def apply_J(f: EvaluableMap, mode) -> DilationIterate:
    """One more dilation step; collapses onto an existing iterate of the same mode."""
    mode = Mode.parse(mode)
    if isinstance(f, DilationIterate) and f.mode is mode:
        return DilationIterate(f.base, f.n + 1, mode)
    return DilationIterate(f, 1, mode)


@dataclass(frozen=True)
class ControlFunction:
    """Power-type control θ·Σ‖x_i‖^p over ``arity`` arguments (6, or 4 for Jordan)."""

    theta: float
    p: float
    arity: int = 6
    mode_hint: Mode = Mode.EXPAND

    def __post_init__(self):
        if not (self.theta >= 0 and math.isfinite(self.theta)):
            raise ValueError(f"theta must be finite and nonnegative, got {self.theta!r}")
        if not math.isfinite(self.p):
            raise ValueError(f"p must be finite, got {self.p!r}")
        if self.arity not in (4, 6):
            raise ValueError(f"arity must be 6 or 4, got {self.arity!r}")
        object.__setattr__(self, "mode_hint", Mode.parse(self.mode_hint))

    def _power(self, a: Element | None) -> float:
        if a is None:
            return 0.0
        r = operator_norm(a)
        return 0.0 if r == 0.0 else r ** self.p

    def __call__(self, *args) -> float:
        if len(args) != self.arity:
            raise TypeError(f"control function takes {self.arity} arguments, got {len(args)}")
        return self.theta * sum(self._power(a) for a in args)

    def at(self, x: Element) -> float:
        """φ(x, 0, ..., 0)."""
        return self.theta * self._power(x)

    def contraction_constant(self) -> float:
        """Least L with φ(x) ≤ 3L φ(x/3) (EXPAND) or φ(x) ≤ (L/3) φ(3x) (CONTRACT)."""
        if self.mode_hint is Mode.EXPAND:
            return 3.0 ** (self.p - 1)
        return 3.0 ** (1 - self.p)


@dataclass(frozen=True, eq=False)
class ProbeSet:
    """Finite sample of nonzero elements and scalars on which sups are estimated."""

    elements: tuple
    unit_scalars: tuple
    complex_scalars: tuple = ()
    triples: tuple = ()
    seed: int | None = None

    def __post_init__(self):
        for x in self.elements:
            if not np.any(x):
                raise ValueError("0 cannot be a probe element")

    @classmethod
    def generate(cls, desc: AlgebraDescriptor, seed: int = 0, element_count: int = 24,
                 r_min: float = 0.1, r_max: float = 10.0, mu_count: int = 8,
                 triple_count: int = 64, scalar_count: int = 8,
                 scalar_range: tuple = (0.5, 2.0)) -> "ProbeSet":
        if element_count < 1:
            raise ValueError("probe set needs at least one element")
        if not (0 < r_min <= r_max):
            raise ValueError(f"need 0 < r_min <= r_max, got {r_min!r}, {r_max!r}")
        if mu_count < 1:
            raise ValueError("mu_count must be positive")
        radii = np.geomspace(r_min, r_max, element_count)
        elements = tuple(desc.random_element(seed * 100_003 + i, float(r))
                         for i, r in enumerate(radii))
        mus = [np.exp(2j * np.pi * j / mu_count) for j in range(mu_count)]
        for extra in (1.0, 1j, -1.0):
            if not any(abs(extra - m) < 1e-12 for m in mus):
                mus.append(complex(extra))
        rng = np.random.default_rng([seed, 303])
        lams = rng.uniform(*scalar_range, scalar_count) * np.exp(2j * np.pi * rng.uniform(size=scalar_count))
        triples = tuple(tuple(int(i) for i in t)
                        for t in rng.integers(element_count, size=(triple_count, 3)))
        return cls(elements, tuple(complex(m) for m in mus),
                   tuple(complex(v) for v in lams), triples, seed)

    def extended(self, other: "ProbeSet") -> "ProbeSet":
        n = len(self.elements)
        return ProbeSet(self.elements + other.elements,
                        self.unit_scalars + other.unit_scalars,
                        self.complex_scalars + other.complex_scalars,
                        self.triples + tuple(tuple(i + n for i in t) for t in other.triples),
                        self.seed)

    def element_triples(self, unit_ball: bool = False):
        """Sampled triples, optionally only those inside the closed unit ball."""
        triples = [tuple(self.elements[i] for i in t) for t in self.triples]
        if unit_ball:
            triples = [t for t in triples if all(operator_norm(a) <= 1.0 + 1e-12 for a in t)]
        return triples

    def unit_ball_elements(self):
        return [x for x in self.elements if operator_norm(x) <= 1.0 + 1e-12]


def distance_ratios(h: EvaluableMap, g: EvaluableMap, phi: ControlFunction,
                    probes: ProbeSet) -> np.ndarray:
    """Per-probe ratios ‖g(x) - h(x)‖ / φ(x, 0, ..., 0)."""
    if not probes.elements:
        raise ValueError("empty probe set")
    ratios = []
    for i, x in enumerate(probes.elements):
        denom = phi.at(x)
        if denom <= 0:
            raise ValueError("control function vanishes at a probe element")
        try:
            ratios.append(operator_norm(difference(g, h, x)) / denom)
        except NonFiniteEvaluation as exc:
            exc.probe_index = i
            raise
    return np.array(ratios)


def generalized_distance(h: EvaluableMap, g: EvaluableMap, phi: ControlFunction,
                         probes: ProbeSet, cap: float = DEFAULT_RATIO_CAP) -> float:
    """Probe estimate of d(h, g) = inf{C : ‖g(x) - h(x)‖ ≤ C φ(x, 0, ..., 0)}.

    This is a lower bound for the metric over the whole algebra. Returns
    ``math.inf`` when some ratio exceeds ``cap``.
    """
    sup = float(np.max(distance_ratios(h, g, phi, probes)))
    return math.inf if sup > cap else sup
