from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from floquet_certify.errors import InputError, NumericalFailure
from floquet_certify.linalg import (
    ALL_NORMS,
    NormKind,
    eigenvalues,
    expm,
    is_normal,
    mat_norm,
    mat_norms,
    norm_comparison,
    spectral_radius,
    vec_norm,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def cmat(rng, n):
    return rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))


def random_unitary(rng, n):
    Q, R = np.linalg.qr(cmat(rng, n))
    return Q * (np.diag(R) / np.abs(np.diag(R)))


# -- vector and matrix norms ---------------------------------------------------------


@pytest.mark.parametrize("v, kind, expected", [
    ((3, 4), "euclidean", 5.0),
    ((1, -2, 3), "one", 6.0),
    ((1 + 1j, 1), "sup", math.sqrt(2)),
])
def test_vec_norm_examples(v, kind, expected):
    assert vec_norm(v, kind) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("kind", ALL_NORMS)
def test_identity_has_norm_one(kind):
    assert mat_norm(np.eye(3), kind) == pytest.approx(1.0, abs=1e-14)


def test_mat_norm_examples():
    # largest eigenvalue of A^T A = [[2, 0], [0, 0]]
    assert mat_norm([[1, 0], [1, 0]], "euclidean") == pytest.approx(math.sqrt(2), abs=1e-14)
    assert mat_norm([[0, -2], [2, 0]], "euclidean") == pytest.approx(2.0, abs=1e-14)
    assert mat_norm([[1, -2], [3, 4]], "sup") == 7.0
    assert mat_norm([[1, -2], [3, 4]], "one") == 6.0


def test_norm_kind_parse():
    assert NormKind.parse("Euclidean") is NormKind.EUCLIDEAN
    assert NormKind.parse("SUP") is NormKind.SUP
    assert NormKind.parse(NormKind.ONE) is NormKind.ONE
    with pytest.raises(InputError):
        NormKind.parse("frobenius")


def test_mat_norm_rejects_non_square_and_nonfinite():
    with pytest.raises(InputError):
        mat_norm(np.ones((2, 3)))
    with pytest.raises(InputError):
        mat_norm([[np.nan]])


@settings(max_examples=40, deadline=None)
@given(seed=seeds, n=st.integers(1, 6))
def test_mat_norm_matches_numpy(seed, n):
    A = cmat(np.random.default_rng(seed), n)
    assert mat_norm(A, "euclidean") == pytest.approx(np.linalg.norm(A, 2), rel=1e-12)
    assert mat_norm(A, "sup") == pytest.approx(np.linalg.norm(A, np.inf), rel=1e-14)
    assert mat_norm(A, "one") == pytest.approx(np.linalg.norm(A, 1), rel=1e-14)


def test_batched_norms_agree_with_single():
    rng = np.random.default_rng(5)
    As = np.stack([cmat(rng, 3) for _ in range(7)])
    for kind in ALL_NORMS:
        single = [mat_norm(A, kind) for A in As]
        assert np.allclose(mat_norms(As, kind), single, rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=seeds, n=st.integers(1, 5), a=st.floats(-3, 3))
def test_norm_axioms(seed, n, a):
    rng = np.random.default_rng(seed)
    A, B = cmat(rng, n), cmat(rng, n)
    v, w = A[0], B[0]
    for kind in ALL_NORMS:
        assert vec_norm(v + w, kind) <= vec_norm(v, kind) + vec_norm(w, kind) + 1e-12
        assert vec_norm(a * v, kind) == pytest.approx(abs(a) * vec_norm(v, kind), rel=1e-12, abs=1e-12)
        assert vec_norm(v, kind) > 0
        assert mat_norm(A + B, kind) <= mat_norm(A, kind) + mat_norm(B, kind) + 1e-12
        assert mat_norm(a * A, kind) == pytest.approx(abs(a) * mat_norm(A, kind), rel=1e-12, abs=1e-12)
        assert mat_norm(A @ B, kind) <= mat_norm(A, kind) * mat_norm(B, kind) + 1e-10
        assert spectral_radius(A) <= mat_norm(A, kind) + 1e-10


@settings(max_examples=30, deadline=None)
@given(x1=st.floats(-1e3, 1e3), x2=st.floats(-1e3, 1e3))
def test_rotated_pair_keeps_norm(x1, x2):
    # ||(x2, -x1)|| = ||(x1, x2)|| for the Euclidean, max and sum norms
    for kind in ALL_NORMS:
        assert vec_norm((x2, -x1), kind) == vec_norm((x1, x2), kind)


# -- normal matrices ---------------------------------------------------------------


def test_is_normal_examples():
    assert is_normal([[2, 1 - 1j], [1 + 1j, 3]])
    assert is_normal([[0, -1], [1, 0]])
    assert not is_normal([[1, 0], [1, 0]])


def test_norm_comparison_examples():
    r = norm_comparison(np.diag([1.0, 2.0]))
    assert (r.euclidean, r.sup, r.one, r.normal) == (pytest.approx(2.0), 2.0, 2.0, True)
    r = norm_comparison([[1, 0], [1, 0]])
    assert r.euclidean == pytest.approx(math.sqrt(2)) and r.sup == 1.0 and not r.normal
    assert r.euclidean_minimal is None
    r = norm_comparison([[0, -1], [1, 0]])
    assert r.as_dict()["normal"] and r.euclidean_minimal
    assert r.euclidean == pytest.approx(1.0) and r.sup == r.one == 1.0


@settings(max_examples=50, deadline=None)
@given(seed=seeds, n=st.integers(1, 6))
def test_euclidean_norm_minimal_for_normal(seed, n):
    rng = np.random.default_rng(seed)
    U = random_unitary(rng, n)
    A = U.conj().T @ np.diag(rng.standard_normal(n) + 1j * rng.standard_normal(n)) @ U
    assert is_normal(A, 1e-10)
    e = mat_norm(A, "euclidean")
    assert e <= mat_norm(A, "sup") + 1e-9
    assert e <= mat_norm(A, "one") + 1e-9
    assert e == pytest.approx(spectral_radius(A), rel=1e-10)


# -- eigenvalues -------------------------------------------------------------------


def _sorted(z):
    z = np.asarray(z)
    return z[np.lexsort((z.imag, z.real))]


@pytest.mark.parametrize("A, expected", [
    (np.diag([1.0, 2.0]), [1, 2]),
    ([[0, 1], [-1, 0]], [-1j, 1j]),
    ([[0, 1], [0, 0]], [0, 0]),
])
def test_eigenvalue_examples(A, expected):
    assert np.allclose(_sorted(eigenvalues(A)), _sorted(expected), atol=1e-14)


@settings(max_examples=60, deadline=None)
@given(seed=seeds, n=st.integers(1, 9))
def test_eigenvalues_against_lapack(seed, n):
    A = cmat(np.random.default_rng(seed), n)
    ours = _sorted(eigenvalues(A))
    ref = _sorted(np.linalg.eigvals(A))
    scale = 1 + np.linalg.norm(A, 2)
    # match as multisets via optimal pairing
    from scipy.optimize import linear_sum_assignment

    D = np.abs(ours[:, None] - ref[None, :])
    r, c = linear_sum_assignment(D)
    assert D[r, c].max() < 1e-10 * scale
    assert abs(ours.sum() - np.trace(A)) < 1e-9 * scale
    assert abs(np.prod(ours) - np.linalg.det(A)) < 1e-9 * scale ** n


def test_eigenvalues_real_matrix_with_complex_pairs():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((7, 7))
    ev = eigenvalues(A)
    assert np.allclose(_sorted(ev), _sorted(np.linalg.eigvals(A)), atol=1e-10)


def test_eigenvalues_degenerate_inputs():
    assert np.allclose(eigenvalues(np.zeros((4, 4))), 0)
    assert np.allclose(eigenvalues(np.eye(5) * (2 - 1j)), 2 - 1j)
    J = np.diag(np.ones(5), 1)  # nilpotent Jordan block
    assert np.max(np.abs(eigenvalues(J))) < 1e-12
    with pytest.raises(InputError):
        eigenvalues(np.ones((2, 3)))


# -- expm --------------------------------------------------------------------------


def test_expm_examples():
    assert np.allclose(expm(np.zeros((3, 3))), np.eye(3), atol=0)
    assert np.allclose(expm([[0, -math.pi], [math.pi, 0]]), -np.eye(2), atol=1e-14)
    assert np.allclose(expm(np.diag([math.log(2), 0.0])), np.diag([2.0, 1.0]), atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(seed=seeds, n=st.integers(1, 6), scale=st.floats(1e-3, 30))
def test_expm_against_scipy(seed, n, scale):
    A = cmat(np.random.default_rng(seed), n)
    A *= scale / np.linalg.norm(A, 1)
    ref = scipy.linalg.expm(A)
    assert np.linalg.norm(expm(A) - ref) <= 1e-12 * (1 + np.linalg.norm(ref)) * max(1, scale)


@settings(max_examples=30, deadline=None)
@given(seed=seeds, n=st.integers(1, 6))
def test_expm_skew_hermitian_is_unitary(seed, n):
    B = cmat(np.random.default_rng(seed), n) * 3
    S = expm(B - B.conj().T)
    assert np.allclose(np.linalg.svd(S, compute_uv=False), 1.0, atol=1e-10)


def test_expm_stack_and_overflow():
    rng = np.random.default_rng(2)
    As = np.stack([cmat(rng, 3) * 0.5 for _ in range(4)])
    E = expm(As)
    for A, X in zip(As, E):
        assert np.allclose(X, scipy.linalg.expm(A), rtol=1e-12, atol=1e-13)
    with pytest.raises(NumericalFailure):
        expm([[1e4]])
