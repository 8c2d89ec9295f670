"""Exact ternary derivations, their perturbations, and premise checks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .algebra import AlgebraDescriptor, Element, as_element, operator_norm
from .defects import bracket_defect, jensen_defect
from .maps import (ControlFunction, EvaluableMap, InnerDerivation, PowerPerturbation,
                   ProbeSet, Sum)

PREMISE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class PerturbationSpec:
    theta_prime: float
    p: float
    direction_seed: int = 0
    kind: str = "POWER"

    def __post_init__(self):
        if not (self.theta_prime >= 0 and math.isfinite(self.theta_prime)):
            raise ValueError(f"theta_prime must be finite and nonnegative, got {self.theta_prime!r}")
        if not math.isfinite(self.p):
            raise ValueError(f"p must be finite, got {self.p!r}")
        if self.kind != "POWER":
            raise ValueError(f"only POWER perturbations are supported, got {self.kind!r}")

    def direction(self, desc: AlgebraDescriptor) -> Element:
        return desc.random_element(self.direction_seed, 1.0)


@dataclass(frozen=True)
class PremiseReport:
    sup_additive_ratio: float
    sup_bracket_ratio: float
    holds: tuple
    domain_note: str

    @property
    def ok(self) -> bool:
        return all(self.holds)

    def to_dict(self) -> dict:
        return {"sup_additive_ratio": self.sup_additive_ratio,
                "sup_bracket_ratio": self.sup_bracket_ratio,
                "holds": list(self.holds),
                "domain_note": self.domain_note}


def make_inner_derivation(m) -> InnerDerivation:
    """The inner derivation x -> m x - x m, an exact ternary derivation."""
    return InnerDerivation(as_element(m))


def make_perturbed_map(D0: EvaluableMap, spec: PerturbationSpec,
                       desc: AlgebraDescriptor) -> Sum:
    """D0 plus the power perturbation x -> θ'‖x‖^p u."""
    return Sum(D0, PowerPerturbation(spec.theta_prime, spec.p, spec.direction(desc)))


def _ratio(lhs: float, bound: float) -> float:
    if bound > 0:
        return lhs / bound
    return 0.0 if lhs == 0.0 else math.inf


def verify_premise(f: EvaluableMap, phi: ControlFunction, probes: ProbeSet,
                   tolerance: float = PREMISE_TOLERANCE) -> PremiseReport:
    """Check the Jensen premise and the bracket premise separately on probes.

    The Jensen premise is sampled over the probe triples (plus the degenerate
    cases (x, 0, 0) and (x, x, x)) and every unit scalar. The bracket premise
    is sampled only on triples inside the closed unit ball; for a Jordan
    (arity 4) control function only diagonal triples (a, a, a) are used.
    """
    if not probes.elements:
        raise ValueError("empty probe set")
    zero = np.zeros_like(probes.elements[0])
    pad = (zero,) * (phi.arity - 3)

    jensen_args = list(probes.element_triples())
    for x in probes.elements:
        jensen_args.append((x, zero, zero))
        jensen_args.append((x, x, x))
    sup_add = 0.0
    for x, y, z in jensen_args:
        bound = phi(x, y, z, *pad)
        for mu in probes.unit_scalars:
            lhs = operator_norm(jensen_defect(f, x, y, z, mu))
            sup_add = max(sup_add, _ratio(lhs, bound))

    if phi.arity == 6:
        bracket_args = probes.element_triples(unit_ball=True)
        shape = "triples (a, b, c)"
    else:
        bracket_args = [(a, a, a) for a in probes.unit_ball_elements()]
        shape = "diagonal triples (a, a, a)"
    if not bracket_args:
        raise ValueError("no probe triples inside the unit ball; lower r_min")
    sup_br = 0.0
    for a, b, c in bracket_args:
        if phi.arity == 6:
            bound = phi(zero, zero, zero, a, b, c)
        else:
            bound = phi(zero, zero, zero, a)
        lhs = operator_norm(bracket_defect(f, a, b, c))
        sup_br = max(sup_br, _ratio(lhs, bound))

    note = (f"Jensen premise over {len(jensen_args)} argument triples x "
            f"{len(probes.unit_scalars)} unit scalars; bracket premise over "
            f"{len(bracket_args)} {shape} in the closed unit ball")
    return PremiseReport(sup_add, sup_br,
                         (sup_add <= 1 + tolerance, sup_br <= 1 + tolerance), note)
