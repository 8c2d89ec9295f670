"""Dilation iteration towards the exact derivation, with stability certificates.

Two iterations are supported. EXPAND uses J(h)(x) = h(3x)/3 and needs a
control exponent p < 1; CONTRACT uses J(h)(x) = 3 h(x/3) and needs p > 1.
Iteration stops once the generalized distance between successive iterates
drops below the convergence tolerance. The a-posteriori bound
d(f, D) ≤ d(f, Jf) / (1 - L) is then the guarantee the certificate rests on.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .maps import (DEFAULT_RATIO_CAP, ControlFunction, DilationIterate, EvaluableMap, Mode,
                   NonFiniteEvaluation, ProbeSet, apply_J, evaluate, generalized_distance)

BOUND_TOLERANCE = 1e-6


class HypothesisError(ValueError):
    """The control function does not give a contraction for the chosen mode."""


class IterationError(ArithmeticError):
    def __init__(self, n: int, cause: NonFiniteEvaluation):
        self.n = n
        self.probe_index = getattr(cause, "probe_index", None)
        super().__init__(f"iteration {n}, probe {self.probe_index}: {cause}")


@dataclass(frozen=True)
class StabilizerConfig:
    mode: Mode = Mode.EXPAND
    max_iterations: int = 40
    convergence_tolerance: float = 1e-9
    ratio_cap: float = DEFAULT_RATIO_CAP
    bound_tolerance: float = BOUND_TOLERANCE

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError(f"max_iterations must be a positive integer, got {self.max_iterations!r}")
        if not self.convergence_tolerance > 0:
            raise ValueError("convergence_tolerance must be positive")
        if not self.ratio_cap > 0:
            raise ValueError("ratio_cap must be positive")


def iterate(f: EvaluableMap, n: int, mode) -> EvaluableMap:
    """J^n f."""
    return f if n == 0 else DilationIterate(f, n, Mode.parse(mode))


def paper_bound_constant(L: float, mode) -> float:
    """Claimed constant for ‖f - D‖ / φ(x, 0, ...): L/(1-L) or L/(3-3L)."""
    if Mode.parse(mode) is Mode.EXPAND:
        return L / (1 - L)
    return L / (3 - 3 * L)


@dataclass
class StabilityCertificate:
    mode: str
    L: float
    n_star: int
    d_f_Jf: float
    d_f_D: float
    paper_bound: float
    sound_bound: float
    contraction_profile: list
    paper_bound_holds: bool | None
    sound_bound_holds: bool | None
    converged: bool
    residuals: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "StabilityCertificate":
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    @classmethod
    def from_json(cls, text: str) -> "StabilityCertificate":
        return cls.from_dict(json.loads(text))

    def profile_is_contractive(self, tolerance: float = 1e-9) -> bool:
        prof = self.contraction_profile
        return all(b <= self.L * a * (1 + tolerance) for a, b in zip(prof, prof[1:]))


def _check_hypotheses(f: EvaluableMap, phi: ControlFunction, cfg: StabilizerConfig,
                      probes: ProbeSet) -> float:
    if phi.mode_hint is not cfg.mode:
        raise HypothesisError(
            f"control function is set up for {phi.mode_hint.value}, stabilizer for {cfg.mode.value}")
    L = phi.contraction_constant()
    if not L < 1:
        raise HypothesisError(
            f"contraction constant L = {L!r} >= 1 for p = {phi.p!r} in {cfg.mode.value} mode")
    if not probes.elements:
        raise ValueError("empty probe set")
    origin = np.zeros_like(probes.elements[0])
    if np.any(evaluate(f, origin)):
        raise ValueError("starting map must send 0 to 0")
    return L


def _distance(h, g, phi, probes, cfg, n):
    try:
        return generalized_distance(h, g, phi, probes, cfg.ratio_cap)
    except NonFiniteEvaluation as exc:
        raise IterationError(n, exc) from exc


def stabilize(f: EvaluableMap, phi: ControlFunction, cfg: StabilizerConfig,
              probes: ProbeSet):
    """Iterate J from ``f`` until successive iterates agree on the probes.

    Returns ``(D, certificate)`` where ``D = J^n_star f``. If the iteration
    does not converge within ``cfg.max_iterations`` the certificate has
    ``converged = False`` and its bound flags are left unset.
    """
    L = _check_hypotheses(f, phi, cfg, probes)
    profile = []
    converged = False
    n_star = cfg.max_iterations
    for n in range(cfg.max_iterations):
        d = _distance(iterate(f, n, cfg.mode), iterate(f, n + 1, cfg.mode), phi, probes, cfg, n)
        profile.append(d)
        if math.isinf(d):
            n_star = n + 1
            break
        if d < cfg.convergence_tolerance:
            converged = True
            n_star = n + 1
            break
    D = iterate(f, n_star, cfg.mode)

    d_f_Jf = profile[0]
    d_f_D = _distance(f, D, phi, probes, cfg, n_star)
    paper_bound = paper_bound_constant(L, cfg.mode)
    sound_bound = d_f_Jf / (1 - L)
    slack = 1 + cfg.bound_tolerance
    cert = StabilityCertificate(
        mode=cfg.mode.value, L=L, n_star=n_star, d_f_Jf=d_f_Jf, d_f_D=d_f_D,
        paper_bound=paper_bound, sound_bound=sound_bound, contraction_profile=profile,
        paper_bound_holds=(d_f_D <= paper_bound * slack) if converged else None,
        sound_bound_holds=(d_f_D <= sound_bound * slack) if converged else None,
        converged=converged)
    return D, cert


@dataclass
class AlternateOutcome:
    d_f_g: float
    in_lambda: bool
    converged: bool = False
    limit_distance: float = math.nan
    same_limit: bool = False
    d_g_D: float = math.nan
    a_posteriori_bound: float = math.nan
    a_posteriori_holds: bool = False


@dataclass
class FixedPointReport:
    profile_finite: bool
    converged: bool
    alternates: list
    certificate: StabilityCertificate

    @property
    def unique(self) -> bool:
        return all(a.same_limit for a in self.alternates if a.in_lambda)

    @property
    def a_posteriori(self) -> bool:
        return self.certificate.sound_bound_holds is True and all(
            a.a_posteriori_holds for a in self.alternates if a.in_lambda)

    @property
    def ok(self) -> bool:
        return self.profile_finite and self.converged and self.unique and self.a_posteriori


def fixed_point_alternative_check(f: EvaluableMap, phi: ControlFunction, cfg: StabilizerConfig,
                                  probes: ProbeSet, alternates=(),
                                  limit_tolerance: float | None = None) -> FixedPointReport:
    """Empirically check the four conclusions of the fixed point alternative.

    (i) successive distances are finite, (ii) the iterates converge, (iii) every
    alternate start at finite distance from ``f`` reaches the same limit, and
    (iv) d(g, D) ≤ d(g, Jg) / (1 - L) for each such alternate.
    """
    if limit_tolerance is None:
        limit_tolerance = 10 * cfg.convergence_tolerance
    D, cert = stabilize(f, phi, cfg, probes)
    L = cert.L
    slack = 1 + cfg.bound_tolerance
    outcomes = []
    for g in alternates:
        d_f_g = _distance(f, g, phi, probes, cfg, 0)
        out = AlternateOutcome(d_f_g=d_f_g, in_lambda=math.isfinite(d_f_g))
        if out.in_lambda:
            Dg, cert_g = stabilize(g, phi, cfg, probes)
            out.converged = cert_g.converged
            out.limit_distance = _distance(D, Dg, phi, probes, cfg, cert_g.n_star)
            out.same_limit = cert_g.converged and out.limit_distance <= limit_tolerance
            out.d_g_D = _distance(g, D, phi, probes, cfg, cert.n_star)
            out.a_posteriori_bound = cert_g.d_f_Jf / (1 - L)
            out.a_posteriori_holds = out.d_g_D <= out.a_posteriori_bound * slack
        outcomes.append(out)
    return FixedPointReport(
        profile_finite=all(math.isfinite(d) for d in cert.contraction_profile),
        converged=cert.converged, alternates=outcomes, certificate=cert)
