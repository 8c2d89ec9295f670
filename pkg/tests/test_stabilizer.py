import math

import numpy as np
import pytest

from ternstab.algebra import operator_norm
from ternstab.maps import (ControlFunction, Mode, PowerPerturbation, ProbeSet, ScalarMultiple,
                           Identity, _Atom, apply_J, generalized_distance)
from ternstab.perturbation import PerturbationSpec, make_inner_derivation, make_perturbed_map
from ternstab.stabilizer import (HypothesisError, IterationError, StabilityCertificate,
                                 StabilizerConfig, fixed_point_alternative_check, iterate,
                                 paper_bound_constant, stabilize)

THETA_PRIME = 0.01
THETA = 0.04


def canonical(desc, p, theta_prime=THETA_PRIME, direction_seed=2):
    D0 = make_inner_derivation(desc.random_element(1, 1.0))
    return D0, make_perturbed_map(D0, PerturbationSpec(theta_prime, p, direction_seed), desc)


def setup(desc, p, arity=6, max_iterations=100):
    mode = Mode.EXPAND if p < 1 else Mode.CONTRACT
    D0, f = canonical(desc, p)
    return D0, f, ControlFunction(THETA, p, arity, mode), StabilizerConfig(mode, max_iterations)


def test_exact_derivation_is_a_fixed_point(desc2, probes2):
    D = make_inner_derivation(desc2.random_element(3, 1.0))
    for mode, p in ((Mode.EXPAND, 0.5), (Mode.CONTRACT, 4.0)):
        limit, cert = stabilize(D, ControlFunction(THETA, p, 6, mode), StabilizerConfig(mode), probes2)
        assert cert.converged and cert.n_star == 1 and cert.d_f_D == 0.0
        x = probes2.elements[5]
        assert np.array_equal(limit(x), D(x))
        assert cert.paper_bound_holds and cert.sound_bound_holds


@pytest.mark.parametrize("p", [0.25, 0.5, 0.75, 4.0, 5.0])
def test_canonical_profile_closed_form(desc2, probes2, p):
    _, f, phi, cfg = setup(desc2, p)
    _, cert = stabilize(f, phi, cfg, probes2)
    L = phi.contraction_constant()
    # J^n f = D0 + L^n θ'‖x‖^p u, so successive distances are (θ'/θ) L^n (1 - L)
    expected = [THETA_PRIME / THETA * L ** n * (1 - L) for n in range(len(cert.contraction_profile))]
    np.testing.assert_allclose(cert.contraction_profile, expected, rtol=1e-9)
    assert cert.converged and cert.profile_is_contractive()
    assert cert.d_f_D == pytest.approx(THETA_PRIME / THETA * (1 - L ** cert.n_star), rel=1e-9)
    assert cert.sound_bound == pytest.approx(THETA_PRIME / THETA, rel=1e-9)
    assert cert.sound_bound_holds is True


@pytest.mark.parametrize("p,n_star", [(0.25, 24), (0.5, 35), (4.0, 7), (5.0, 6)])
def test_iteration_counts(desc2, probes2, p, n_star):
    _, f, phi, cfg = setup(desc2, p, max_iterations=40)
    assert stabilize(f, phi, cfg, probes2)[1].n_star == n_star


@pytest.mark.parametrize("p", [0.5, 4.0])
def test_limit_is_the_underlying_derivation(desc2, probes2, p):
    D0, f, phi, cfg = setup(desc2, p)
    D, cert = stabilize(f, phi, cfg, probes2)
    assert generalized_distance(D, D0, phi, probes2) <= 10 * cfg.convergence_tolerance
    assert generalized_distance(apply_J(D, cfg.mode), D, phi, probes2) < cfg.convergence_tolerance


def test_mode_duality(desc2, probes2):
    """EXPAND at p and CONTRACT at 2 - p share L, so their profiles coincide."""
    _, f1, phi1, cfg1 = setup(desc2, 0.5)
    _, f2, phi2, cfg2 = setup(desc2, 1.5)
    assert phi1.contraction_constant() == pytest.approx(phi2.contraction_constant(), rel=1e-15)
    prof1 = stabilize(f1, phi1, cfg1, probes2)[1].contraction_profile
    prof2 = stabilize(f2, phi2, cfg2, probes2)[1].contraction_profile
    assert len(prof1) == len(prof2)
    np.testing.assert_allclose(prof1, prof2, rtol=1e-9)


def test_paper_bound_constants():
    L = 3.0 ** -0.5
    assert paper_bound_constant(L, Mode.EXPAND) == pytest.approx(L / (1 - L))
    assert paper_bound_constant(3.0 ** -3, Mode.CONTRACT) == pytest.approx(1 / 78)


@pytest.mark.parametrize("mode,p", [(Mode.EXPAND, 1.0), (Mode.EXPAND, 1.5), (Mode.CONTRACT, 0.5),
                                    (Mode.CONTRACT, 1.0)])
def test_refuses_non_contraction(desc2, probes2, mode, p):
    _, f = canonical(desc2, p)
    with pytest.raises(HypothesisError):
        stabilize(f, ControlFunction(THETA, p, 6, mode), StabilizerConfig(mode), probes2)


def test_refuses_mode_mismatch(desc2, probes2):
    _, f = canonical(desc2, 0.5)
    with pytest.raises(HypothesisError):
        stabilize(f, ControlFunction(THETA, 0.5, 6, Mode.EXPAND), StabilizerConfig(Mode.CONTRACT),
                  probes2)


class _Shift(_Atom):
    def __init__(self, c):
        self.c = c

    def key(self):
        return ("shift",)

    def apply(self, x):
        return x + self.c


def test_refuses_map_not_fixing_zero(desc2, probes2):
    with pytest.raises(ValueError, match="0 to 0"):
        stabilize(_Shift(desc2.identity()), ControlFunction(THETA, 0.5), StabilizerConfig(), probes2)


def test_non_convergence_leaves_bounds_unset(desc2, probes2):
    _, f, phi, _ = setup(desc2, 0.5)
    _, cert = stabilize(f, phi, StabilizerConfig(Mode.EXPAND, max_iterations=3), probes2)
    assert not cert.converged and cert.n_star == 3 and len(cert.contraction_profile) == 3
    assert cert.paper_bound_holds is None and cert.sound_bound_holds is None


def test_infinite_distance_stops_iteration(desc2, probes2):
    f = ScalarMultiple(1e14, PowerPerturbation(1.0, 0.5, desc2.random_element(2, 1.0)))
    _, cert = stabilize(f, ControlFunction(THETA, 0.5), StabilizerConfig(), probes2)
    assert cert.contraction_profile == [math.inf] and not cert.converged


def test_nonfinite_evaluation_reports_iteration_and_probe(desc2, probes2):
    D0 = make_inner_derivation(desc2.random_element(1, 1.0))
    f = D0 + PowerPerturbation(1.0, 400.0, desc2.random_element(2, 1.0))
    phi = ControlFunction(1.0, 4.0, 6, Mode.CONTRACT)
    with pytest.raises(IterationError) as info:
        stabilize(f, phi, StabilizerConfig(Mode.CONTRACT), probes2)
    assert info.value.n == 0 and info.value.probe_index is not None


def test_iterate_helper(desc2):
    _, f = canonical(desc2, 0.5)
    assert iterate(f, 0, Mode.EXPAND) is f
    assert iterate(f, 3, "expand").n == 3


def test_config_validation():
    with pytest.raises(ValueError):
        StabilizerConfig(max_iterations=0)
    with pytest.raises(ValueError):
        StabilizerConfig(convergence_tolerance=0.0)
    with pytest.raises(ValueError):
        StabilizerConfig(mode="SIDEWAYS")


def test_certificate_json_round_trip(desc2, probes2):
    _, f, phi, cfg = setup(desc2, 0.5)
    _, cert = stabilize(f, phi, cfg, probes2)
    back = StabilityCertificate.from_json(cert.to_json())
    assert back == cert


@pytest.mark.parametrize("p", [0.5, 4.0])
def test_fixed_point_alternative(desc2, probes2, p):
    D0, f, phi, cfg = setup(desc2, p)
    u2 = desc2.random_element(77, 1.0)
    alternates = [f,
                  D0 + PowerPerturbation(2 * THETA_PRIME, p, PerturbationSpec(0, p, 2).direction(desc2)),
                  D0 + PowerPerturbation(THETA_PRIME, p, u2),
                  D0 + ScalarMultiple(1e14, Identity())]
    report = fixed_point_alternative_check(f, phi, cfg, probes2, alternates)
    assert report.ok and report.unique and report.a_posteriori
    assert [a.in_lambda for a in report.alternates] == [True, True, True, False]
    for a in report.alternates[:3]:
        assert a.converged and a.limit_distance <= 10 * cfg.convergence_tolerance


def test_other_probe_sets_give_same_limit(desc2):
    D0, f, phi, cfg = setup(desc2, 0.5)
    for seed in (3, 4):
        probes = ProbeSet.generate(desc2, seed=seed)
        D, cert = stabilize(f, phi, cfg, probes)
        x = desc2.random_element(99, 5.0)
        assert operator_norm(D(x) - D0(x)) <= 1e-8 * phi.at(x)
