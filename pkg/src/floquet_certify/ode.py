"""Fundamental matrices, monodromy and multiplier paths of z' = A(t) z."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericalFailure
from .linalg import NormKind, eigenvalues, expm, mat_norm
from .system import SystemSpec, TrigMatrixFunction

METHODS = ("rk4", "piecewise_exp")
DEFAULT_STEPS = 1024
MAX_STEPS = 1 << 17
COLLISION_DISTANCE = 1e-8
_CHUNK = 4096


def _method(method: str) -> str:
    if method in ("pe", "piecewise-exp"):
        return "piecewise_exp"
    if method not in METHODS:
        raise InputError(f"unknown method {method!r}; expected rk4 or piecewise_exp")
    return method


def _matrix_of(spec) -> TrigMatrixFunction:
    if isinstance(spec, TrigMatrixFunction):
        return spec
    if spec.order != 1:
        raise InputError("integration needs a first-order system; apply companion_lift first")
    return spec.matrix


@dataclass(frozen=True)
class Grid:
    t_end: float
    steps: int

    def __post_init__(self):
        if not self.t_end > 0:
            raise InputError("t_end must be positive")
        if int(self.steps) != self.steps or self.steps < 1:
            raise InputError("steps must be a positive integer")

    @property
    def t_points(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.steps + 1)

    @property
    def h(self) -> float:
        return self.t_end / self.steps


def _integrate(A: TrigMatrixFunction, t_end: float, steps: int, method: str,
               scales=None, stride: int | None = None) -> np.ndarray:
    """Core integrator.

    Returns W at every ``stride``-th step (including t=0 and t_end) when
    ``stride`` is given, otherwise only W(t_end).  ``scales`` integrates the
    stack of systems z' = s_j A(t) z at once.
    """
    method = _method(method)
    if not t_end > 0:
        raise InputError("t_end must be positive")
    if int(steps) != steps or steps < 1:
        raise InputError("steps must be a positive integer")
    n = A.n
    h = t_end / steps
    lam = None if scales is None else np.asarray(scales, dtype=float)[:, None, None]
    W = np.eye(n, dtype=complex) if lam is None else np.broadcast_to(
        np.eye(n, dtype=complex), (lam.shape[0], n, n)).copy()
    kept = [W.copy()] if stride else None
    chunk = _CHUNK if lam is None else max(64, _CHUNK // lam.shape[0])
    # overflow is detected below and reported as a NumericalFailure
    with np.errstate(over="ignore", invalid="ignore"):
        for start in range(0, steps, chunk):
            idx = np.arange(start, min(steps, start + chunk))
            t0 = idx * h
            if method == "rk4":
                A1, A2, A3 = A(t0), A(t0 + 0.5 * h), A(t0 + h)
                if lam is not None:
                    A1, A2, A3 = (lam * X[:, None] for X in (A1, A2, A3))
                for j, i in enumerate(idx):
                    a1, a2, a3 = A1[j], A2[j], A3[j]
                    k1 = a1 @ W
                    k2 = a2 @ (W + (0.5 * h) * k1)
                    k3 = a2 @ (W + (0.5 * h) * k2)
                    k4 = a3 @ (W + h * k3)
                    W = W + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                    if stride and (i + 1) % stride == 0:
                        kept.append(W.copy())
            else:
                mids = A(t0 + 0.5 * h) * h
                if lam is not None:
                    mids = lam * mids[:, None]
                    E = expm(mids.reshape(-1, n, n)).reshape(mids.shape)
                else:
                    E = expm(mids)
                for j, i in enumerate(idx):
                    W = E[j] @ W
                    if stride and (i + 1) % stride == 0:
                        kept.append(W.copy())
            if not np.all(np.isfinite(W)):
                raise NumericalFailure("fundamental matrix became non-finite")
    return np.array(kept) if stride else W


def fundamental_matrix(spec: SystemSpec | TrigMatrixFunction, t_end: float,
                       steps: int = DEFAULT_STEPS, method: str = "rk4") -> np.ndarray:
    """W(t_end, 0) by classical RK4 on W' = A W, or by the ordered product of
    exp(A(midpoint) h) over ``steps`` subintervals."""
    return _integrate(_matrix_of(spec), t_end, steps, method)


def fundamental_path(spec, t_end: float, steps: int = DEFAULT_STEPS, method: str = "rk4",
                     stride: int = 1) -> np.ndarray:
    """W(t_i, 0) at t_i = i * stride * h, shape (steps // stride + 1, n, n)."""
    if steps % stride:
        raise InputError("steps must be a multiple of stride")
    return _integrate(_matrix_of(spec), t_end, steps, method, stride=stride)


def scaled_fundamental_matrices(spec, t_end: float, scales, steps: int = DEFAULT_STEPS,
                                method: str = "rk4") -> np.ndarray:
    """W_s(t_end, 0) for z' = s A(t) z, one matrix per entry of ``scales``."""
    return _integrate(_matrix_of(spec), t_end, steps, method, scales=scales)


@dataclass(frozen=True, eq=False)
class MonodromyResult:
    W: np.ndarray
    method: str
    steps: int
    error_estimate: float
    liouville_residual: float  # relative: |det W - exp int tr A| / |exp int tr A|
    multipliers: np.ndarray

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "steps": self.steps,
            "error_estimate": self.error_estimate,
            "liouville_residual": self.liouville_residual,
            "W": [[[z.real, z.imag] for z in row] for row in self.W.tolist()],
            "multipliers": [[z.real, z.imag] for z in self.multipliers.tolist()],
            "multiplier_moduli": [abs(z) for z in self.multipliers.tolist()],
        }


def liouville_residual(A: TrigMatrixFunction, W: np.ndarray, t_end: float) -> float:
    expected = cmath.exp(A.trace_integral(t_end))
    return abs(complex(np.linalg.det(W)) - expected) / max(abs(expected), np.finfo(float).tiny)


def monodromy(spec: SystemSpec | TrigMatrixFunction, steps: int | None = None,
              method: str = "rk4", tol: float = 1e-9, t_end: float | None = None) -> MonodromyResult:
    """Monodromy W(T, 0) with a step-halving error estimate.

    With ``steps=None`` the step count starts at 1024 and doubles until
    ||W_s - W_2s|| < tol (1 + ||W||), capped at 2^17.
    """
    A = _matrix_of(spec)
    method = _method(method)
    T = A.period if t_end is None else t_end
    auto = steps is None
    s = DEFAULT_STEPS if auto else int(steps)
    W = _integrate(A, T, s, method)
    while True:
        W2 = _integrate(A, T, 2 * s, method)
        err = mat_norm(W - W2, NormKind.EUCLIDEAN)
        scale = 1.0 + mat_norm(W2, NormKind.EUCLIDEAN)
        if not auto or err < tol * scale or 2 * s >= MAX_STEPS:
            break
        s, W = 2 * s, W2
    resid = liouville_residual(A, W, T)
    allowed = 1e-8 + A.n * err / max(abs(cmath.exp(A.trace_integral(T))), 1e-300)
    if resid > 100 * allowed:
        raise NumericalFailure(
            f"Liouville identity violated: relative residual {resid:.3e} (allowed {allowed:.3e})")
    return MonodromyResult(W, method, s, err, resid, eigenvalues(W))


@dataclass(frozen=True, eq=False)
class Trajectory:
    t: np.ndarray
    z: np.ndarray  # shape (len(t), n)

    @property
    def grid(self) -> Grid:
        return Grid(float(self.t[-1]), len(self.t) - 1)


def propagate(spec, z0, t_end: float | None = None, steps: int = DEFAULT_STEPS,
              method: str = "rk4", substeps: int = 1) -> Trajectory:
    """z(t_i) = W(t_i, 0) z0 on a uniform grid of ``steps`` intervals.

    ``substeps`` integration steps are taken per grid interval.
    """
    A = _matrix_of(spec)
    z0 = np.asarray(z0, dtype=complex).ravel()
    if z0.size != A.n:
        raise InputError(f"initial state has dimension {z0.size}, system has {A.n}")
    T = A.period if t_end is None else t_end
    path = _integrate(A, T, steps * substeps, method, stride=substeps)
    return Trajectory(np.linspace(0.0, T, steps + 1), path @ z0)


# -- multiplier paths ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MultiplierPath:
    k: int
    t: np.ndarray
    values: np.ndarray
    log_path: np.ndarray  # ln|rho| + i * (argument continued from 0)
    resolved: bool = True

    @property
    def abs_log(self) -> np.ndarray:
        return np.abs(self.log_path)

    @property
    def arg(self) -> np.ndarray:
        return self.log_path.imag


def _greedy_match(prev: np.ndarray, cur: np.ndarray) -> np.ndarray:
    """perm such that cur[perm[k]] continues prev[k]."""
    n = len(prev)
    D = np.abs(prev[:, None] - cur[None, :])
    if n > 8:
        from scipy.optimize import linear_sum_assignment

        rows, cols = linear_sum_assignment(D)
        perm = np.empty(n, dtype=int)
        perm[rows] = cols
        return perm
    perm = np.full(n, -1)
    D = D.copy()
    for _ in range(n):
        i, j = np.unravel_index(np.argmin(D), D.shape)
        perm[i] = j
        D[i, :] = np.inf
        D[:, j] = np.inf
    return perm


def _track(t: np.ndarray, eigs: list[np.ndarray]):
    n = len(eigs[0])
    m = len(eigs)
    values = np.empty((m, n), dtype=complex)
    logs = np.empty((m, n), dtype=complex)
    values[0] = eigs[0]
    logs[0] = 0.0
    resolved = np.ones(n, dtype=bool)
    for i in range(1, m):
        prev = values[i - 1]
        cur = eigs[i]
        perm = _greedy_match(prev, cur)
        nxt = cur[perm]
        if np.any(nxt == 0):
            raise NumericalFailure("zero multiplier: fundamental matrix is singular")
        darg = np.angle(nxt / prev)
        if np.any(np.abs(darg) >= 0.5 * math.pi):
            return None
        values[i] = nxt
        logs[i] = np.log(np.abs(nxt)) + 1j * (logs[i - 1].imag + darg)
        if n > 1:
            gap = np.abs(nxt[:, None] - nxt[None, :]) + np.diag(np.full(n, np.inf))
            close = np.argwhere(gap < COLLISION_DISTANCE)
            for a, b in close:
                if abs(logs[i, a] - logs[i, b]) > 1e-6:
                    resolved[a] = resolved[b] = False
    return [MultiplierPath(k, t, values[:, k].copy(), logs[:, k].copy(), bool(resolved[k]))
            for k in range(n)]


def multiplier_paths(spec, grid_steps: int = 256, t_end: float | None = None,
                     substeps: int = 8, method: str = "rk4",
                     max_grid_steps: int = 1 << 14) -> list[MultiplierPath]:
    """Eigenvalues rho_k(t) of W(t, 0), continued along a uniform grid.

    At each grid point the eigenvalues are matched to the previous ones by
    minimal distance and the argument is continued from arg rho_k(0) = 0.
    The grid is doubled while a step moves some argument by pi/2 or more;
    near-coincident eigenvalues whose continued logarithms differ mark the
    affected paths unresolved.
    """
    A = _matrix_of(spec)
    T = A.period if t_end is None else t_end
    while True:
        path = _integrate(A, T, grid_steps * substeps, method, stride=substeps)
        t = np.linspace(0.0, T, grid_steps + 1)
        eigs = [np.ones(A.n, dtype=complex)] + [eigenvalues(W) for W in path[1:]]
        tracked = _track(t, eigs)
        if tracked is not None:
            return tracked
        if 2 * grid_steps > max_grid_steps:
            raise NumericalFailure("multiplier arguments jump by >= pi/2 at the finest grid")
        grid_steps *= 2
