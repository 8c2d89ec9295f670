"""Residuals of the target identities, bound checks, and the discrepancy ledger."""

from __future__ import annotations

import csv
import math
import os
import threading
from dataclasses import asdict, dataclass, fields

import numpy as np

from .algebra import AlgebraDescriptor, operator_norm
from .defects import (additivity_defect, bracket_defect, homogeneity_defect, jensen_arguments,
                      jensen_defect)
from .maps import ControlFunction, EvaluableMap, Mode, ProbeSet, distance_ratios
from .perturbation import PerturbationSpec, make_inner_derivation, make_perturbed_map, verify_premise
from .stabilizer import BOUND_TOLERANCE, StabilizerConfig, stabilize

RECONSTRUCTION_TOLERANCE = 1e-15


def _norms(*args) -> float:
    return sum(operator_norm(a) for a in args)


def _sup(samples, normalized: bool) -> float:
    """Sup of defect norms, each divided by its scale when ``normalized``."""
    if normalized:
        return max((d / sc for d, sc in samples), default=0.0)
    return max((d for d, _ in samples), default=0.0)


def _jensen_samples(D, probes):
    args = list(probes.element_triples()) + [(x, x, x) for x in probes.elements]
    for x, y, z in args:
        scale = 1 + _norms(x, y, z)
        for mu in probes.unit_scalars:
            yield operator_norm(jensen_defect(D, x, y, z, mu)), scale


def jensen_residual(D: EvaluableMap, probes: ProbeSet, normalized: bool = True) -> float:
    """Sup of ‖μD((x+y+z)/3) + μD((x-2y+z)/3) + μD((x+y-2z)/3) - D(μx)‖."""
    return _sup(list(_jensen_samples(D, probes)), normalized)


def change_of_variables_error(probes: ProbeSet) -> float:
    """Largest relative entrywise gap between w + t + s and x over probe triples."""
    worst = 0.0
    for x, y, z in probes.element_triples():
        w, t, s = jensen_arguments(x, y, z)
        scale = np.abs(x) + np.abs(y) + np.abs(z)
        gap = np.abs((w + t + s) - x)
        worst = max(worst, float(np.max(gap / np.where(scale > 0, scale, 1.0))))
    return worst


def _additivity_samples(D, probes):
    err = change_of_variables_error(probes)
    if err > RECONSTRUCTION_TOLERANCE:
        raise ArithmeticError(f"w + t + s differs from x by {err:.3g} (relative)")
    for x, y, z in probes.element_triples():
        w, t, s = jensen_arguments(x, y, z)
        yield operator_norm(additivity_defect(D, w, t, s)), 1 + _norms(w, t, s)


def substitution_check(D: EvaluableMap, probes: ProbeSet, normalized: bool = True) -> float:
    """Sup of ‖D(w+t+s) - D(w) - D(t) - D(s)‖ with (w, t, s) built from probe triples.

    Raises ``ArithmeticError`` if the change of variables itself fails to
    reconstruct x to within ``RECONSTRUCTION_TOLERANCE``.
    """
    return _sup(list(_additivity_samples(D, probes)), normalized)


def _homogeneity_samples(D, probes, scalars):
    for x in probes.elements:
        for lam in scalars:
            yield operator_norm(homogeneity_defect(D, x, lam)), 1 + _norms(x, lam * x)


def homogeneity_residual(D: EvaluableMap, probes: ProbeSet, scalars=None,
                         normalized: bool = True) -> float:
    """Sup of ‖D(λx) - λD(x)‖ over probe elements and ``scalars`` (unit circle by default)."""
    scalars = probes.unit_scalars if scalars is None else scalars
    return _sup(list(_homogeneity_samples(D, probes, scalars)), normalized)


def _derivation_samples(D, probes, unit_ball):
    triples = probes.element_triples(unit_ball=unit_ball)
    triples += [(x, x, x) for x in (probes.unit_ball_elements() if unit_ball else probes.elements)]
    for a, b, c in triples:
        yield operator_norm(bracket_defect(D, a, b, c)), 1 + _norms(a, b, c)


def derivation_residual(D: EvaluableMap, probes: ProbeSet, unit_ball: bool = False,
                        normalized: bool = True) -> float:
    """Sup of ‖D(xyz) - D(x)yz - xD(y)z - xyD(z)‖ over probe triples."""
    return _sup(list(_derivation_samples(D, probes, unit_ball)), normalized)


def _jordan_samples(D, probes, unit_ball):
    for x in (probes.unit_ball_elements() if unit_ball else probes.elements):
        yield operator_norm(bracket_defect(D, x, x, x)), 1 + 3 * operator_norm(x)


def jordan_residual(D: EvaluableMap, probes: ProbeSet, unit_ball: bool = False,
                    normalized: bool = True) -> float:
    """The derivation residual restricted to diagonal triples (x, x, x)."""
    return _sup(list(_jordan_samples(D, probes, unit_ball)), normalized)


@dataclass
class ResidualReport:
    jensen: float
    additivity: float
    homogeneity_T: float
    homogeneity_C: float
    derivation: float
    jordan: float
    raw: dict

    @property
    def max(self) -> float:
        return max(self.jensen, self.additivity, self.homogeneity_T, self.homogeneity_C,
                   self.derivation, self.jordan)

    def to_dict(self) -> dict:
        return asdict(self)


_RESIDUAL_NAMES = ("jensen", "additivity", "homogeneity_T", "homogeneity_C", "derivation", "jordan")


def residual_report(D: EvaluableMap, probes: ProbeSet, unit_ball_brackets: bool = True) -> ResidualReport:
    """All six residuals, normalized by (1 + Σ argument norms), plus raw values."""
    samples = [list(_jensen_samples(D, probes)),
               list(_additivity_samples(D, probes)),
               list(_homogeneity_samples(D, probes, probes.unit_scalars)),
               list(_homogeneity_samples(D, probes, probes.complex_scalars)),
               list(_derivation_samples(D, probes, unit_ball_brackets)),
               list(_jordan_samples(D, probes, unit_ball_brackets))]
    raw = {name: _sup(s, False) for name, s in zip(_RESIDUAL_NAMES, samples)}
    return ResidualReport(*(_sup(s, True) for s in samples), raw=raw)


def bound_check(f: EvaluableMap, D: EvaluableMap, phi: ControlFunction, constant: float,
                probes: ProbeSet, tolerance: float = BOUND_TOLERANCE):
    """Return ``(sup ‖f(x) - D(x)‖ / φ(x, 0, ...), holds)``."""
    if not constant > 0:
        raise ValueError(f"constant must be positive, got {constant!r}")
    sup_ratio = float(np.max(distance_ratios(D, f, phi, probes)))
    return sup_ratio, sup_ratio <= constant * (1 + tolerance)


def corollary_constant(p: float, mode) -> float:
    """The power-type constant as stated for the corollaries, relative to θ‖x‖^p.

    EXPAND: 2^p / (2 - 2^p). CONTRACT: 1 / (3^p - 3).
    """
    if Mode.parse(mode) is Mode.EXPAND:
        return 2.0 ** p / (2 - 2.0 ** p)
    return 1.0 / (3.0 ** p - 3)


def derived_constant(p: float, mode) -> float:
    """Constant obtained from the dilation hypothesis and d(f, D) ≤ d(f, Jf)/(1 - L).

    EXPAND: L = 3^(p-1) and d(f, Jf) ≤ L give L/(1 - L) = 3^p / (3 - 3^p).
    CONTRACT: L = 3^(1-p); putting y = z = 0 in the Jensen premise only gives
    d(f, Jf) ≤ 1, hence 1/(1 - L).
    """
    if Mode.parse(mode) is Mode.EXPAND:
        L = 3.0 ** (p - 1)
        return L / (1 - L)
    return 1.0 / (1 - 3.0 ** (1 - p))


def in_corollary_range(p: float, mode) -> bool:
    if Mode.parse(mode) is Mode.EXPAND:
        return 0 < p < 1
    return p > 3


@dataclass
class PipelineResult:
    f: EvaluableMap
    D0: EvaluableMap
    D: EvaluableMap | None
    phi: ControlFunction
    premise: object
    certificate: object | None
    residuals: ResidualReport | None


def run_pipeline(desc: AlgebraDescriptor, derivation_seed: int, spec: PerturbationSpec,
                 theta: float, arity: int, cfg: StabilizerConfig, probes: ProbeSet,
                 derivation_norm: float = 1.0) -> PipelineResult:
    """Build D0 + perturbation, check premises, stabilize, and fill residuals.

    Stops after the premise check when it fails (``D`` and ``certificate`` are
    then ``None``).
    """
    D0 = make_inner_derivation(desc.random_element(derivation_seed, derivation_norm))
    f = make_perturbed_map(D0, spec, desc)
    phi = ControlFunction(theta, spec.p, arity, cfg.mode)
    premise = verify_premise(f, phi, probes)
    if not premise.ok:
        return PipelineResult(f, D0, None, phi, premise, None, None)
    D, cert = stabilize(f, phi, cfg, probes)
    residuals = residual_report(D, probes)
    cert.residuals = residuals.to_dict()
    return PipelineResult(f, D0, D, phi, premise, cert, residuals)


@dataclass
class LedgerEntry:
    status: str
    mode: str
    arity: int
    k: int
    p: float
    theta_prime: float
    theta: float
    derivation_seed: int
    direction_seed: int
    probe_seed: int
    L: float
    in_paper_range: bool
    measured: float
    paper_constant: float
    derived_constant: float
    sound_constant: float
    paper_holds: bool | None
    derived_holds: bool | None
    sound_holds: bool | None
    derived_le_paper: bool
    converged: bool
    n_star: int

    @classmethod
    def columns(cls):
        return [f.name for f in fields(cls)]


def ledger_entry(result: PipelineResult, desc: AlgebraDescriptor, derivation_seed: int,
                 spec: PerturbationSpec, probes: ProbeSet,
                 tolerance: float = BOUND_TOLERANCE) -> LedgerEntry:
    """Summarize a pipeline run as a ledger row (constants relative to φ(x, 0, ...))."""
    phi = result.phi
    mode = phi.mode_hint
    paper_c = corollary_constant(spec.p, mode)
    derived_c = derived_constant(spec.p, mode)
    in_range = in_corollary_range(spec.p, mode)
    common = dict(mode=mode.value, arity=phi.arity, k=desc.k, p=spec.p,
                  theta_prime=spec.theta_prime, theta=phi.theta,
                  derivation_seed=derivation_seed, direction_seed=spec.direction_seed,
                  probe_seed=probes.seed, L=phi.contraction_constant(), in_paper_range=in_range,
                  paper_constant=paper_c, derived_constant=derived_c,
                  derived_le_paper=derived_c <= paper_c)
    cert = result.certificate
    if cert is None:
        return LedgerEntry(status="PREMISE_FAIL", measured=math.nan, sound_constant=math.nan,
                           paper_holds=None, derived_holds=None, sound_holds=None,
                           converged=False, n_star=0, **common)
    slack = 1 + tolerance
    measured = cert.d_f_D
    ok = cert.converged
    return LedgerEntry(
        status="OK" if in_range else "EXTRA", measured=measured, sound_constant=cert.sound_bound,
        paper_holds=(measured <= paper_c * slack) if ok else None,
        derived_holds=(measured <= derived_c * slack) if ok else None,
        sound_holds=cert.sound_bound_holds, converged=ok, n_star=cert.n_star, **common)


class DiscrepancyLedger:
    """Append-only record of stated vs. derived vs. certified constants.

    Rows are kept in memory and, when ``path`` is given, appended to a CSV file.
    Appends are serialized with a lock.
    """

    def __init__(self, path: str | os.PathLike | None = None):
        self.path = path
        self.entries: list[LedgerEntry] = []
        self._lock = threading.Lock()

    def append(self, entry: LedgerEntry) -> None:
        with self._lock:
            self.entries.append(entry)
            if self.path is None:
                return
            new = not os.path.exists(self.path) or os.path.getsize(self.path) == 0
            with open(self.path, "a", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                if new:
                    writer.writerow(LedgerEntry.columns())
                writer.writerow([format_value(v) for v in asdict(entry).values()])


def format_value(v) -> str:
    """Shortest round-trip text for numbers, lowercase booleans, empty for None."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def corollary_check(theta_prime: float, p: float, mode, probes: ProbeSet,
                    desc: AlgebraDescriptor | None = None, arity: int = 6,
                    theta_factor: float = 4.0, derivation_seed: int = 1,
                    direction_seed: int = 2, cfg: StabilizerConfig | None = None,
                    ledger: DiscrepancyLedger | None = None) -> LedgerEntry:
    """Run the canonical pipeline and record how the stated constant fares.

    θ = ``theta_factor`` * θ' (θ = ``theta_factor`` when θ' = 0, so the control
    function stays positive). Out-of-range p gives an EXTRA row rather than an
    error; a failed premise gives a PREMISE_FAIL row with no bound claims.
    """
    mode = Mode.parse(mode)
    if desc is None:
        desc = AlgebraDescriptor(probes.elements[0].shape[0])
    cfg = cfg or StabilizerConfig(mode=mode)
    if cfg.mode is not mode:
        raise ValueError("stabilizer mode disagrees with requested mode")
    spec = PerturbationSpec(theta_prime, p, direction_seed)
    theta = theta_factor * theta_prime if theta_prime > 0 else theta_factor
    result = run_pipeline(desc, derivation_seed, spec, theta, arity, cfg, probes)
    entry = ledger_entry(result, desc, derivation_seed, spec, probes, cfg.bound_tolerance)
    if ledger is not None:
        ledger.append(entry)
    return entry
