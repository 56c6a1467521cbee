from __future__ import annotations

import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floquet_certify.bounds import FAIL, PASS
from floquet_certify.errors import InputError
from floquet_certify.hamiltonian import (
    BOUNDARY,
    CENTRAL,
    NONCENTRAL,
    UNSTABLE,
    certificate_threshold,
    certify_thm9,
    certify_thm10,
    certify_thm11,
    classify_multipliers,
    krein_classic,
    lambda1_oracle,
    multiplier_oracle,
    recommend_norm,
)
from floquet_certify.linalg import expm
from floquet_certify.system import (
    GainFunction,
    HamiltonianSpec,
    SecondOrderSpec,
    SystemSpec,
    TrigMatrixFunction,
    symplectic_j,
)

from randsys import random_hamiltonian

seeds = st.integers(min_value=0, max_value=2**32 - 1)
HALF_PI = math.pi / 2


def ham(H, T):
    return HamiltonianSpec(TrigMatrixFunction.constant(np.asarray(H, dtype=float), T))


def second(P, T):
    return SecondOrderSpec(TrigMatrixFunction.constant(np.atleast_2d(np.asarray(P, dtype=float)), T))


# -- certificates -------------------------------------------------------------------


@pytest.mark.parametrize("T, verdict", [(3.0, PASS), (3.2, FAIL)])
def test_thm9_identity(T, verdict):
    cert = certify_thm9(ham(np.eye(2), T))
    assert cert.verdict == verdict
    assert cert.lhs == pytest.approx(T, abs=1e-10) and cert.rhs == math.pi


def test_thm9_diag_uses_brute_force_norm():
    H = np.diag([1.0, 4.0])
    JH = symplectic_j(1) @ H
    # oracle: largest singular value of [[0, -4], [1, 0]]
    sigma = max(np.linalg.svd(JH, compute_uv=False))
    assert sigma == pytest.approx(4.0)
    cert = certify_thm9(ham(H, 0.7))
    assert cert.lhs == pytest.approx(0.7 * sigma, abs=1e-10)
    assert cert.verdict == PASS


def test_thm9_norm_choice():
    h = ham(np.diag([1.0, 4.0]), 0.7)
    assert certify_thm9(h, "sup").lhs == pytest.approx(2.8)
    assert certify_thm9(h, "one").details["norm"] == "one"


@pytest.mark.parametrize("P, T, verdict", [
    (4.0, HALF_PI - 0.01, PASS),
    (4.0, HALF_PI + 0.01, FAIL),
    (1.0, 3.0, PASS),
    (1.0, 3.15, FAIL),
])
def test_thm10_examples(P, T, verdict):
    cert = certify_thm10(second(P, T))
    assert cert.verdict == verdict
    assert cert.c_star == pytest.approx(math.sqrt(P), abs=1e-6)
    assert cert.lhs == pytest.approx(4 * math.sqrt(P) * T / 2, abs=1e-8)


@pytest.mark.parametrize("lam0", [0.25, 9.0])
def test_thm10_threshold_is_sharp(lam0):
    T = certificate_threshold(lambda T: certify_thm10(second(lam0, T)), 0.1 / math.sqrt(lam0),
                              5 / math.sqrt(lam0), tol=1e-8)
    assert T == pytest.approx(math.pi / math.sqrt(lam0), abs=1e-6)


@pytest.mark.parametrize("P, T, verdict", [(4.0, 0.9, PASS), (4.0, 1.1, FAIL), (1.0, 1.9, PASS),
                                           (1.0, 2.1, FAIL)])
def test_krein_classic_examples(P, T, verdict):
    cert = krein_classic(second(P, T))
    assert cert.verdict == verdict
    assert cert.details["R"] == pytest.approx(P * T, abs=1e-10)


def test_krein_classic_uses_entrywise_absolute_values():
    # P = [[2, -cos t], [-cos t, 2]]: integral of |p_12| over 2 pi is 4
    P = TrigMatrixFunction(2 * math.pi, 2 * np.eye(2), ((1, -np.array([[0, 1], [1, 0.0]])),))
    cert = krein_classic(SecondOrderSpec(P))
    Pplus = np.array(cert.details["P_plus_integral"])
    assert np.allclose(Pplus, [[4 * math.pi, 4], [4, 4 * math.pi]], atol=1e-8)
    assert cert.details["R"] == pytest.approx(4 * math.pi + 4, abs=1e-8)


def test_krein_vs_thm10_ratio():
    p = lambda T: second(4.0, T)
    t_krein = certificate_threshold(lambda T: krein_classic(p(T)), 0.1, 3.0, tol=1e-8)
    t_thm10 = certificate_threshold(lambda T: certify_thm10(p(T)), 0.1, 3.0, tol=1e-8)
    assert t_krein == pytest.approx(1.0, abs=1e-8)
    assert t_thm10 == pytest.approx(HALF_PI, abs=1e-7)
    assert t_thm10 / t_krein == pytest.approx(HALF_PI, abs=1e-6)


@pytest.mark.parametrize("g, T, verdict", [
    (GainFunction.constant(1.0), 3.0, PASS),
    (GainFunction.constant(1.0), 3.2, FAIL),
    (GainFunction(2 * math.pi, 2.0, ((1, 1.0),)), HALF_PI, FAIL),
])
def test_thm11_examples(g, T, verdict):
    cert = certify_thm11(g, T)
    assert cert.verdict == verdict
    if g.cos_terms:
        assert cert.lhs == pytest.approx(math.pi + 1, abs=1e-10)


def test_thm11_default_period_and_errors():
    assert certify_thm11(GainFunction.constant(0.4, 7.0)).lhs == pytest.approx(2.8)
    with pytest.raises(InputError):
        certify_thm11(GainFunction.constant(1.0), 0.0)


def test_certificate_threshold_needs_bracket():
    f = lambda T: certify_thm9(ham(np.eye(2), T))
    with pytest.raises(InputError):
        certificate_threshold(f, 3.5, 4.0)
    with pytest.raises(InputError):
        certificate_threshold(f, 1.0, 2.0)


@settings(max_examples=15, deadline=None)
@given(seed=seeds, s=st.floats(1.0, 5.0))
def test_thm9_margin_monotone_under_scaling(seed, s):
    h = random_hamiltonian(np.random.default_rng(seed))
    assert certify_thm9(h.scaled(s)).margin <= certify_thm9(h).margin + 1e-12


# -- multiplier oracle --------------------------------------------------------------


def test_oracle_rotation_central():
    rep = multiplier_oracle(ham(np.eye(2), 3.0))
    assert rep.verdict == CENTRAL
    assert np.allclose(sorted(rep.multipliers, key=lambda z: z.imag),
                       [cmath.exp(-3j), cmath.exp(3j)], atol=1e-9)
    kinds = dict(zip([z.imag > 0 for z in rep.multipliers], rep.krein_types))
    assert kinds == {True: "first_kind", False: "second_kind"}
    assert rep.symplectic_residual < 1e-10 and rep.pairing_error < 1e-9
    assert rep.as_dict()["verdict"] == CENTRAL


def test_oracle_boundary_at_minus_one():
    rep = multiplier_oracle(second(4.0, HALF_PI))
    assert rep.verdict == BOUNDARY
    assert rep.distance_to_minus_one < 1e-6
    assert np.allclose(rep.multipliers, -1, atol=1e-6)


def test_oracle_past_minus_one_is_not_central():
    rep = multiplier_oracle(ham(np.eye(2), 3.15))
    assert rep.verdict == NONCENTRAL
    assert all(abs(m - 1) < 1e-9 for m in rep.moduli)


def test_oracle_parametric_resonance_unstable():
    # x'' + (1/4 + 0.2 cos t) x = 0 sits inside the first resonance tongue
    P = TrigMatrixFunction(2 * math.pi, np.array([[0.25]]), ((1, np.array([[0.2]])),))
    rep = multiplier_oracle(SecondOrderSpec(P))
    assert rep.verdict == UNSTABLE
    assert max(rep.moduli) > 1.01
    assert set(rep.krein_types) == {"off_circle"}
    assert min(rep.moduli) * max(rep.moduli) == pytest.approx(1.0, abs=1e-8)


def test_oracle_rejects_plain_systems():
    with pytest.raises(InputError):
        multiplier_oracle(SystemSpec.constant([[0, 1], [-1, 0]], 1.0))


def test_classify_multipliers_degenerate():
    J = symplectic_j(1)
    _, _, verdict = classify_multipliers(np.eye(2), J)
    assert verdict == BOUNDARY
    # double multiplier e^{i}, once of each kind: indefinite on the cluster
    J2 = symplectic_j(2)
    W = expm(J2 @ np.diag([1.0, -1.0, 1.0, -1.0]) * 1.0)
    _, kinds, verdict = classify_multipliers(W.real, J2)
    assert verdict == BOUNDARY and "indefinite" in kinds


def test_classify_multipliers_mixed_kinds_noncentral():
    # H = diag(1, -2, 1, -2) is indefinite; its second pair rotates backwards,
    # putting a first-kind multiplier in the lower half plane
    J2 = symplectic_j(2)
    W = expm(J2 @ np.diag([1.0, -2.0, 1.0, -2.0]) * 1.0).real
    rhos, kinds, verdict = classify_multipliers(W, J2)
    assert verdict == NONCENTRAL
    assert all(np.isclose(abs(z), 1) for z in rhos)


@settings(max_examples=10, deadline=None)
@given(seed=seeds)
def test_random_hamiltonian_symplectic_and_paired(seed):
    h = random_hamiltonian(np.random.default_rng(seed))
    rep = multiplier_oracle(h)
    assert rep.symplectic_residual <= 1e-8 * max(1.0, max(rep.moduli) ** 2)
    assert rep.pairing_error <= 1e-6


# -- lambda_1 -----------------------------------------------------------------------


@pytest.mark.parametrize("T", [1.0, 3.0, math.pi])
def test_lambda1_rotation(T):
    res = lambda1_oracle(ham(np.eye(2), T))
    assert res.found
    assert res.lambda1 == pytest.approx(math.pi / T, abs=1e-8)
    assert res.residual < 1e-6
    assert res.bracket[0] <= res.lambda1 <= res.bracket[1]


def test_lambda1_second_order_boundary():
    res = lambda1_oracle(second(4.0, HALF_PI))
    assert res.lambda1 == pytest.approx(1.0, abs=1e-6)
    assert res.residual < 1e-6


def test_lambda1_out_of_range():
    res = lambda1_oracle(ham(np.eye(2), 1.0), lam_range=(1e-3, 1.0))
    assert not res.found and res.lambda1 == math.inf
    assert res.as_dict()["found"] is False


# -- norm recommendation ------------------------------------------------------------


def test_recommend_norm_hermitian():
    A = TrigMatrixFunction(1.0, np.array([[2, 1 - 1j], [1 + 1j, 3]]), ((1, np.array([[1, 0], [0, -1.0]])),))
    rep = recommend_norm(SystemSpec(A))
    assert rep["recommended"] == "euclidean" and rep["all_normal"]


def test_recommend_norm_nonnormal():
    rep = recommend_norm(SystemSpec.constant([[1, 0], [1, 0]], 1.0))
    assert not rep["all_normal"] and rep["fraction_nonnormal"] == 1.0
    assert rep["integrals"]["euclidean"] == pytest.approx(math.sqrt(2))
    assert rep["integrals"]["sup"] == pytest.approx(1.0)
    assert rep["recommended"] == "sup"


def test_recommend_norm_jh_not_normal():
    JH = symplectic_j(1) @ np.diag([1.0, 2.0])
    assert not np.allclose(JH @ JH.T, JH.T @ JH)
    rep = recommend_norm(ham(np.diag([1.0, 2.0]), 1.0))
    assert rep["matrix"] == "JH(t)" and not rep["all_normal"]
    assert set(rep["integrals"]) == {"euclidean", "sup", "one"}
    with pytest.raises(InputError):
        recommend_norm(np.eye(2))
