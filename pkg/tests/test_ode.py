from __future__ import annotations

import cmath
import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from floquet_certify.errors import InputError, NumericalFailure
from floquet_certify.linalg import mat_norm
from floquet_certify.ode import (
    Grid,
    fundamental_matrix,
    fundamental_path,
    monodromy,
    multiplier_paths,
    propagate,
    scaled_fundamental_matrices,
)
from floquet_certify.system import SystemSpec, TrigMatrixFunction, companion_lift

from randsys import random_hamiltonian, random_trig_system

seeds = st.integers(min_value=0, max_value=2**32 - 1)
TWO_PI = 2 * math.pi


def scalar(a: complex, T: float = TWO_PI) -> SystemSpec:
    return SystemSpec.constant([[a]], T)


def mathieu(eps: float = 0.2) -> SystemSpec:
    E = np.array([[0, 0], [1.0, 0]])
    return SystemSpec(TrigMatrixFunction(TWO_PI, np.array([[0, 1], [-1.0, 0]]), ((1, -eps * E),)))


@pytest.mark.parametrize("method", ["rk4", "piecewise_exp"])
def test_full_turns(method):
    assert fundamental_matrix(scalar(1j), TWO_PI, 1024, method)[0, 0] == pytest.approx(1.0, abs=1e-9)
    rot = SystemSpec.constant([[0, 1], [-1, 0]], TWO_PI)
    assert np.allclose(fundamental_matrix(rot, TWO_PI, 1024, method), np.eye(2), atol=1e-9)


def test_mathieu_step_refinement():
    W1 = fundamental_matrix(mathieu(), TWO_PI, 1024)
    W2 = fundamental_matrix(mathieu(), TWO_PI, 16384)
    assert np.max(np.abs(W1 - W2)) < 1e-7


def test_monodromy_examples():
    res = monodromy(scalar(1j))
    assert res.W[0, 0] == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(res.multipliers, [1.0], atol=1e-9)
    osc = companion_lift(SystemSpec.constant([[-4.0]], math.pi / 2, order=2))
    res = monodromy(osc)
    assert np.allclose(res.W, -np.eye(2), atol=1e-9)
    assert np.allclose(res.multipliers, [-1, -1], atol=1e-9)
    assert np.array_equal(monodromy(SystemSpec.constant(np.zeros((3, 3)), 2.0)).W, np.eye(3))


def test_monodromy_auto_steps_meets_tolerance():
    res = monodromy(mathieu(0.5))
    assert res.error_estimate < 1e-9 * (1 + mat_norm(res.W))
    assert res.liouville_residual < 1e-8
    fixed = monodromy(mathieu(0.5), steps=64)
    assert fixed.steps == 64 and fixed.error_estimate > res.error_estimate
    d = res.as_dict()
    assert set(d) >= {"W", "multipliers", "liouville_residual", "steps", "method"}


@pytest.mark.parametrize("method", ["rk4", "pe"])
def test_constant_system_matches_expm(method):
    rng = np.random.default_rng(11)
    A = 0.4 * (rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
    W = fundamental_matrix(SystemSpec.constant(A, 2.0), 2.0, 2048, method)
    # midpoint sampling of a constant matrix is exact
    tol = 1e-12 if method == "pe" else 1e-10
    assert np.allclose(W, scipy.linalg.expm(2.0 * A), atol=tol)


@settings(max_examples=20, deadline=None)
@given(seed=seeds)
def test_liouville_identity(seed):
    spec = random_trig_system(np.random.default_rng(seed))
    W = fundamental_matrix(spec, spec.period, 2048)
    expected = cmath.exp(spec.matrix.trace_integral(spec.period))
    assert abs(np.linalg.det(W) - expected) <= 1e-8 * (1 + abs(np.linalg.det(W)))


def shifted(m: TrigMatrixFunction, t1: float) -> TrigMatrixFunction:
    """s -> A(s + t1) as a trig function, by the angle-addition formulas."""
    w = m.omega
    cos_c, sin_c = {}, {}
    for k, M in m.cos_terms:
        cos_c[k] = cos_c.get(k, 0) + math.cos(k * w * t1) * M
        sin_c[k] = sin_c.get(k, 0) - math.sin(k * w * t1) * M
    for k, M in m.sin_terms:
        sin_c[k] = sin_c.get(k, 0) + math.cos(k * w * t1) * M
        cos_c[k] = cos_c.get(k, 0) + math.sin(k * w * t1) * M
    return TrigMatrixFunction(m.period, m.A0, tuple(sorted(cos_c.items())), tuple(sorted(sin_c.items())))


@settings(max_examples=15, deadline=None)
@given(seed=seeds, j=st.integers(1, 7))
def test_group_property(seed, j):
    spec = random_trig_system(np.random.default_rng(seed))
    T = spec.period
    path = fundamental_path(spec, T, 2048, stride=256)
    t1 = j * T / 8
    assert np.allclose(shifted(spec.matrix, t1)(0.3), spec.matrix(t1 + 0.3))
    W_rest = fundamental_matrix(shifted(spec.matrix, t1), T - t1, 256 * (8 - j))
    assert np.allclose(W_rest @ path[j], path[-1], atol=1e-8 * (1 + np.abs(path[-1]).max()))


def test_group_property_scalar_closed_form():
    # z' = i (1 + cos t) z: W(t, s) = exp(i (t - s + sin t - sin s))
    spec = SystemSpec(TrigMatrixFunction(TWO_PI, np.array([[1j]]), ((1, np.array([[1j]])),)))
    path = fundamental_path(spec, TWO_PI, 4096, stride=512)
    t = np.linspace(0, TWO_PI, 9)
    assert np.allclose(path[:, 0, 0], np.exp(1j * (t + np.sin(t))), atol=1e-10)


def test_scaled_matrices_match_individual_runs():
    spec = mathieu()
    lams = [0.5, 1.0, 2.5]
    Ws = scaled_fundamental_matrices(spec, TWO_PI, lams, 1024)
    for lam, W in zip(lams, Ws):
        ref = fundamental_matrix(SystemSpec(spec.matrix.scaled(lam)), TWO_PI, 1024)
        assert np.allclose(W, ref, atol=1e-12)
    Wpe = scaled_fundamental_matrices(spec, TWO_PI, lams, 512, "pe")
    assert np.allclose(Wpe[1], fundamental_matrix(spec, TWO_PI, 512, "pe"), atol=1e-12)


def test_propagate_examples():
    traj = propagate(scalar(1j), [1.0], TWO_PI, 64)
    assert np.allclose(traj.z[:, 0], np.exp(1j * traj.t), atol=1e-9)
    zero = propagate(SystemSpec.constant(np.zeros((2, 2)), 1.0), [1.0, 2.0], 1.0, 10)
    assert np.array_equal(zero.z, np.tile([1.0, 2.0], (11, 1)))
    yorke = propagate(scalar(2j, math.pi), [1.0], math.pi, 256, substeps=4)
    assert yorke.z[-1, 0] == pytest.approx(1.0, abs=1e-10)
    assert yorke.grid.steps == 256
    with pytest.raises(InputError):
        propagate(scalar(1j), [1.0, 2.0])


def test_multiplier_path_examples():
    (p,) = multiplier_paths(scalar(1j))
    assert abs(p.log_path[-1]) == pytest.approx(TWO_PI, abs=1e-9)
    assert np.allclose(p.log_path, 1j * p.t, atol=1e-9)
    # e^{+-it} collide at -1 when t = pi, so the matching there is ambiguous
    paths = multiplier_paths(SystemSpec.constant([[0, 1], [-1, 0]], TWO_PI))
    assert not all(q.resolved for q in paths)
    half = paths[0].t <= 3.0
    args = sorted((q.arg[half] for q in paths), key=lambda a: a[-1])
    assert np.allclose(args[0], -paths[0].t[half], atol=1e-9)
    assert np.allclose(args[1], paths[0].t[half], atol=1e-9)
    spec = SystemSpec(TrigMatrixFunction(TWO_PI, np.array([[1j]]), ((1, np.array([[1j]])),)))
    (p,) = multiplier_paths(spec)
    assert np.allclose(p.arg, p.t + np.sin(p.t), atol=1e-9)


def test_multiplier_paths_refine_coarse_grid():
    # 6 grid steps would move the argument by 2 pi / 3 per step for z' = 2 i z over 2 pi
    (p,) = multiplier_paths(scalar(2j), grid_steps=6)
    assert len(p.t) > 7
    assert p.arg[-1] == pytest.approx(2 * TWO_PI, abs=1e-4)  # rk4 on the refined 12-step grid


@settings(max_examples=10, deadline=None)
@given(seed=seeds)
def test_multiplier_product_is_determinant(seed):
    spec = random_trig_system(np.random.default_rng(seed))
    paths = multiplier_paths(spec, grid_steps=64)
    W = fundamental_path(spec, spec.period, 64 * 8, stride=8)
    prod = np.prod(np.stack([p.values for p in paths]), axis=0)
    det = np.linalg.det(W)
    assert np.allclose(prod, det, atol=1e-8 * (1 + np.abs(det).max()))


@pytest.mark.parametrize("method, lo, hi", [("rk4", 8, 32), ("piecewise_exp", 2.5, 6)])
def test_convergence_order(method, lo, hi):
    rng = np.random.default_rng(21)
    for _ in range(3):
        spec = random_trig_system(rng, n_max=3)
        T = spec.period
        ref = fundamental_matrix(spec, T, 8192)
        e1 = np.linalg.norm(fundamental_matrix(spec, T, 64, method) - ref)
        e2 = np.linalg.norm(fundamental_matrix(spec, T, 128, method) - ref)
        if e1 < 1e-11:
            continue  # constant draw, the midpoint exponential is exact
        assert lo <= e1 / e2 <= hi


def test_hamiltonian_monodromy_is_symplectic():
    rng = np.random.default_rng(2)
    for _ in range(5):
        h = random_hamiltonian(rng)
        W = fundamental_matrix(h.system(), h.period, 2048).real
        assert np.linalg.norm(W.T @ h.J @ W - h.J, 2) <= 1e-8


def test_errors():
    with pytest.raises(InputError):
        fundamental_matrix(scalar(1j), 1.0, 0)
    with pytest.raises(InputError):
        fundamental_matrix(scalar(1j), -1.0)
    with pytest.raises(InputError):
        fundamental_matrix(scalar(1j), 1.0, method="euler")
    with pytest.raises(InputError):
        fundamental_matrix(SystemSpec.constant([[1.0]], 1.0, order=2), 1.0)
    with pytest.raises(InputError):
        Grid(1.0, 0)
    with pytest.raises(NumericalFailure):
        monodromy(scalar(5.0, 1000.0))
