"""Invariant suites of every module at fixed seeds."""

from __future__ import annotations

import math

import numpy as np

from .algebra import (AlgebraDescriptor, SuiteResult, check_module_identities,
                      check_submultiplicativity, operator_norm, scale, ternary_product)
from .maps import (ControlFunction, Mode, ProbeSet, apply_J, distance_ratios,
                   generalized_distance)
from .perturbation import PerturbationSpec, make_inner_derivation, make_perturbed_map, verify_premise
from .stabilizer import StabilizerConfig, stabilize
from .verifier import derivation_residual, jordan_residual, residual_report

EXACT = 1e-12


def suite_norm_homogeneity(desc, count=100, seed=0):
    rng = np.random.default_rng([seed, 404])
    res = SuiteResult("norm_homogeneity")
    for i in range(count):
        a = desc.random_element(seed * 1000 + i, float(rng.uniform(0.1, 2)))
        lam = complex(rng.normal(), rng.normal())
        rel = abs(operator_norm(scale(lam, a)) - abs(lam) * operator_norm(a)) / (abs(lam) * operator_norm(a))
        res.record(rel <= 10 * desc.norm_tolerance, rel)
    return res


def suite_slot_linearity(desc, count=100, seed=0):
    res = SuiteResult("slot_linearity")
    for i in range(count):
        a, a2, b, c = (desc.random_element(seed * 7919 + 4 * i + j, 1.0) for j in range(4))
        lhs = ternary_product(a + a2, b, c)
        rhs = ternary_product(a, b, c) + ternary_product(a2, b, c)
        rel = float(np.max(np.abs(lhs - rhs))) / max(float(np.max(np.abs(lhs))), 1.0)
        res.record(rel <= EXACT, rel)
    return res


def _canonical(desc, theta_prime, p, seed, direction_seed=None):
    D0 = make_inner_derivation(desc.random_element(seed, 1.0))
    spec = PerturbationSpec(theta_prime, p, seed + 1 if direction_seed is None else direction_seed)
    return D0, make_perturbed_map(D0, spec, desc)


def suite_pseudometric(desc, probes, count=50, seed=0):
    res = SuiteResult("pseudometric")
    phi = ControlFunction(0.04, 0.5)
    for i in range(count):
        maps = [_canonical(desc, 0.01 * (j + 1), 0.5, seed + 10 * i + j)[1] for j in range(3)]
        f, g, h = maps
        dfg, dgf = generalized_distance(f, g, phi, probes), generalized_distance(g, f, phi, probes)
        dgh, dfh = generalized_distance(g, h, phi, probes), generalized_distance(f, h, phi, probes)
        ok = dfg == dgf and dfh <= (dfg + dgh) * (1 + EXACT)
        res.record(ok)
    return res


def suite_canonical_constancy(desc, probes):
    res = SuiteResult("canonical_ratio_constancy")
    for p in (0.25, 0.5, 0.75, 4.0, 5.0):
        D0, f = _canonical(desc, 0.01, p, 3)
        phi = ControlFunction(0.04, p)
        ratios = distance_ratios(D0, f, phi, probes)
        spread = float(np.max(np.abs(ratios - 0.25))) / 0.25
        res.record(spread <= 1e-9, spread)
    return res


def suite_inner_exact(desc, probes, count=5):
    res = SuiteResult("inner_derivation_exact")
    for i in range(count):
        D = make_inner_derivation(desc.random_element(50 + i, 1.0))
        rep = residual_report(D, probes, unit_ball_brackets=False)
        res.record(rep.max <= EXACT, rep.max)
    return res


def suite_premise(desc, probes):
    res = SuiteResult("canonical_premise")
    for p in (0.25, 0.5, 0.75, 4.0, 5.0):
        _, f = _canonical(desc, 0.01, p, 5)
        mode = Mode.EXPAND if p < 1 else Mode.CONTRACT
        for arity in (6, 4):
            rep = verify_premise(f, ControlFunction(0.04, p, arity, mode), probes)
            res.record(rep.ok, max(rep.sup_additive_ratio, rep.sup_bracket_ratio))
    return res


def suite_stabilizer(desc, probes):
    """Geometric contraction, dilation invariance of the limit and the sound bound."""
    res = SuiteResult("stabilizer")
    for p in (0.25, 0.5, 0.75, 4.0, 5.0):
        mode = Mode.EXPAND if p < 1 else Mode.CONTRACT
        _, f = _canonical(desc, 0.01, p, 7)
        phi = ControlFunction(0.04, p, 6, mode)
        # L = 3^-0.25 at p = 0.75 needs about 66 steps to reach 1e-9
        cfg = StabilizerConfig(mode, max_iterations=100)
        D, cert = stabilize(f, phi, cfg, probes)
        prof = cert.contraction_profile
        geometric = all(abs(prof[n] - cert.L ** n * prof[0]) <= 1e-9 * cert.L ** n * prof[0]
                        for n in range(min(len(prof), 21)))
        invariant = generalized_distance(apply_J(D, mode), D, phi, probes) < cfg.convergence_tolerance
        res.record(cert.converged and geometric and invariant and cert.sound_bound_holds is True)
    return res


def suite_jordan_le_derivation(desc, probes):
    res = SuiteResult("jordan_le_derivation")
    for p in (0.5, 4.0):
        _, f = _canonical(desc, 0.1, p, 9)
        for unit_ball in (False, True):
            ok = jordan_residual(f, probes, unit_ball) <= derivation_residual(f, probes, unit_ball)
            res.record(ok)
    return res


def run_suites(seed: int = 0, probe_kwargs=None, tamper_norm: float | None = None,
               verbose: bool = True) -> list:
    """Run all suites; ``tamper_norm`` inflates the norm of products by that factor."""
    probe_kwargs = dict(probe_kwargs or {})
    results = []
    for k in (2, 3):
        desc = AlgebraDescriptor(k)
        norm = None if tamper_norm is None else (lambda a, d=desc: tamper_norm * d.norm(a))
        results += [check_submultiplicativity(desc, 1000, seed, norm=norm),
                    check_module_identities(desc, 100, seed),
                    suite_norm_homogeneity(desc, 100, seed),
                    suite_slot_linearity(desc, 100, seed)]
    desc = AlgebraDescriptor(2)
    probes = ProbeSet.generate(desc, seed=seed, **probe_kwargs)
    results += [suite_pseudometric(desc, probes, 50, seed),
                suite_canonical_constancy(desc, probes),
                suite_inner_exact(desc, probes),
                suite_premise(desc, probes),
                suite_stabilizer(desc, probes),
                suite_jordan_le_derivation(desc, probes)]
    if verbose:
        for r in results:
            status = "ok" if r.ok else "FAIL"
            worst = "" if r.worst == 0 or math.isnan(r.worst) else f" worst={r.worst:.3g}"
            print(f"{r.name:28s} {r.passed}/{r.total} {status}{worst}")
    return results
