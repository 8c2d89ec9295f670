"""Concrete ternary Banach algebras: k x k complex matrices.

The triple product is the associative matrix product ``[abc] = a @ b @ c`` and
the norm is the operator norm (largest singular value). The module is the
algebra itself, so every module action is the same triple product.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

Element = np.ndarray

DEFAULT_NORM_TOLERANCE = 1e-10
# draws whose norm falls below this are resampled
_DEGENERATE_NORM_FLOOR = 1e-8
_RANDOM_RETRIES = 16


class DimensionError(ValueError):
    """Raised when elements of different sizes are combined."""


class DegenerateDrawError(RuntimeError):
    """Raised when the seeded stream keeps producing near-zero elements."""


def as_element(values, k: int | None = None) -> Element:
    """Coerce ``values`` to a finite complex square matrix."""
    arr = np.asarray(values, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"element must be a square matrix, got shape {arr.shape}")
    if k is not None and arr.shape[0] != k:
        raise DimensionError(f"expected a {k}x{k} element, got {arr.shape[0]}x{arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("element has non-finite entries")
    return arr


def _check_same_size(*elements: Element) -> None:
    shapes = {e.shape for e in elements}
    if len(shapes) != 1:
        raise DimensionError(f"dimension mismatch: {sorted(shapes)}")


def add(a: Element, b: Element) -> Element:
    _check_same_size(a, b)
    return a + b


def scale(lam: complex, a: Element) -> Element:
    if not np.isfinite(lam):
        raise ValueError(f"scalar must be finite, got {lam!r}")
    return lam * a


def ternary_product(a: Element, b: Element, c: Element) -> Element:
    """Return ``[abc] = a @ b @ c``."""
    _check_same_size(a, b, c)
    return a @ b @ c


def _power_iteration_norm(a: Element, tol: float, max_iter: int = 10_000) -> float:
    gram = a.conj().T @ a
    v = np.ones(a.shape[1], dtype=np.complex128) / np.sqrt(a.shape[1])
    # a fixed start vector can be orthogonal to the top singular vector
    v = v + 1e-3 * np.arange(1, a.shape[1] + 1)
    v /= np.linalg.norm(v)
    sigma2 = 0.0
    for _ in range(max_iter):
        w = gram @ v
        w_norm = np.linalg.norm(w)
        if w_norm == 0.0:
            return 0.0
        v = w / w_norm
        if abs(w_norm - sigma2) <= tol * w_norm:
            sigma2 = w_norm
            break
        sigma2 = w_norm
    return float(np.sqrt(sigma2))


def operator_norm(a: Element, tol: float = DEFAULT_NORM_TOLERANCE) -> float:
    """Largest singular value of ``a``.

    Falls back to power iteration on ``a^H a`` if the SVD does not converge.
    """
    if not np.any(a):
        return 0.0
    try:
        return float(np.linalg.svd(a, compute_uv=False)[0])
    except np.linalg.LinAlgError:
        return _power_iteration_norm(a, tol)


@dataclass(frozen=True)
class AlgebraDescriptor:
    """A k x k matrix ternary algebra with operator norm."""

    k: int
    norm_tolerance: float = DEFAULT_NORM_TOLERANCE
    product_rule: str = "triple_matrix_product"
    norm_rule: str = "operator_norm"

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"matrix size k must be a positive integer, got {self.k!r}")
        if not (0 < self.norm_tolerance < 1):
            raise ValueError(f"norm_tolerance must lie in (0, 1), got {self.norm_tolerance!r}")

    def zero(self) -> Element:
        return np.zeros((self.k, self.k), dtype=np.complex128)

    def identity(self) -> Element:
        return np.eye(self.k, dtype=np.complex128)

    def unit(self, i: int, j: int) -> Element:
        """Matrix unit e_ij, 1-based to match the usual notation."""
        e = self.zero()
        e[i - 1, j - 1] = 1.0
        return e

    def norm(self, a: Element) -> float:
        return operator_norm(a, self.norm_tolerance)

    def random_element(self, seed: int, target_norm: float, real: bool = False) -> Element:
        """Seeded element rescaled to operator norm ``target_norm``.

        The pre-scale draw depends only on ``seed``, so elements drawn with the
        same seed and different targets are scalar multiples of each other.
        """
        if not (target_norm > 0 and np.isfinite(target_norm)):
            raise ValueError(f"target_norm must be positive and finite, got {target_norm!r}")
        for sub in range(_RANDOM_RETRIES):
            rng = np.random.default_rng([int(seed), sub])
            raw = rng.standard_normal((self.k, self.k))
            if not real:
                raw = raw + 1j * rng.standard_normal((self.k, self.k))
            raw = raw.astype(np.complex128)
            n = self.norm(raw)
            if n >= _DEGENERATE_NORM_FLOOR:
                return raw * (target_norm / n)
        raise DegenerateDrawError(
            f"seed {seed} produced {_RANDOM_RETRIES} degenerate draws in a row")


@dataclass
class SuiteResult:
    name: str
    passed: int = 0
    failed: int = 0
    worst: float = 0.0

    @property
    def total(self) -> int:
        return self.passed + self.failed

    @property
    def ok(self) -> bool:
        return self.failed == 0 and self.passed > 0

    def record(self, ok: bool, value: float = 0.0) -> None:
        if ok:
            self.passed += 1
        else:
            self.failed += 1
        self.worst = max(self.worst, value)


def _seeded_norms(rng: np.random.Generator, count: int, lo: float, hi: float) -> np.ndarray:
    return np.exp(rng.uniform(np.log(lo), np.log(hi), size=count))


def _aligned_triple(desc: AlgebraDescriptor, rng: np.random.Generator):
    """Rank-one triple a = u v*, b = v w*, c = w z* attaining ‖abc‖ = ‖a‖‖b‖‖c‖."""
    vecs = []
    for _ in range(4):
        v = rng.standard_normal(desc.k) + 1j * rng.standard_normal(desc.k)
        vecs.append(v / np.linalg.norm(v))
    u, v, w, z = vecs
    return np.outer(u, v.conj()), np.outer(v, w.conj()), np.outer(w, z.conj())


def check_submultiplicativity(desc: AlgebraDescriptor, count: int = 1000, seed: int = 0,
                              norm=None, lo: float = 0.1, hi: float = 2.0) -> SuiteResult:
    """Check ‖[abc]‖ ≤ ‖a‖‖b‖‖c‖ and the three module norm inequalities.

    Every tenth triple is a rank-one aligned triple for which the inequality is
    an equality, so a norm that overstates products is caught reliably.
    ``norm`` defaults to the descriptor's norm; passing a different one is how
    the self-test injects faults.
    """
    norm = norm or desc.norm
    rng = np.random.default_rng([seed, 101])
    radii = _seeded_norms(rng, 3 * count, lo, hi).reshape(count, 3)
    slack = 1 + 10 * desc.norm_tolerance
    result = SuiteResult("submultiplicativity")
    for i in range(count):
        if i % 10 == 0:
            a, b, c = (r * m for r, m in zip(radii[i], _aligned_triple(desc, rng)))
        else:
            a, b, c = (desc.random_element(int(rng.integers(2**62)), r) for r in radii[i])
        bound = desc.norm(a) * desc.norm(b) * desc.norm(c)
        # module actions: x in each of the three slots, the others from A
        lhs = max(norm(ternary_product(*t)) for t in permutations((a, b, c)))
        ratio = lhs / bound
        result.record(ratio <= slack, ratio)
    return result


def _bracketings(t):
    t0, t1, t2, t3, t4 = t
    return (ternary_product(ternary_product(t0, t1, t2), t3, t4),
            ternary_product(t0, ternary_product(t1, t2, t3), t4),
            ternary_product(t0, t1, ternary_product(t2, t3, t4)))


def check_module_identities(desc: AlgebraDescriptor, count: int = 1000, seed: int = 0,
                            rel_tol: float = 1e-12) -> SuiteResult:
    """Check the five module compatibility identities.

    With X = A each identity says that the three bracketings of a five-fold
    product agree, for the module element in each of the five positions.
    """
    rng = np.random.default_rng([seed, 202])
    result = SuiteResult("module_identities")
    for _ in range(count):
        radii = _seeded_norms(rng, 5, 0.1, 2.0)
        x, a, b, c, d = (desc.random_element(int(rng.integers(2**62)), r) for r in radii)
        scale_ = float(np.prod(radii))
        worst = 0.0
        for pos in range(5):
            rest = [a, b, c, d]
            rest.insert(pos, x)
            p0, p1, p2 = _bracketings(rest)
            worst = max(worst, np.max(np.abs(p0 - p1)), np.max(np.abs(p0 - p2)))
        rel = worst / scale_
        result.record(rel <= rel_tol, rel)
    return result
