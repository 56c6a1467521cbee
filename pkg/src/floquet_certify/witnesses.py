"""Extremal and counterexample systems, with numerical sharpness checks.

Each witness is a small system at which one of the bounds is attained (or,
for ``nonoscillatory``, a periodic solution that is not oscillatory).  The
``verify_sharpness`` report compares the bound with what the simulated
system actually does.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import (
    FAIL,
    INDETERMINATE,
    PASS,
    cumulative_norm_integral,
    optimize_period_bound,
    yorke_bound,
)
from .errors import FloquetError, InputError
from .hamiltonian import certificate_threshold, certify_thm10, multiplier_oracle
from .linalg import ALL_NORMS, NormKind
from .ode import Trajectory, fundamental_matrix, multiplier_paths, propagate
from .phase import classify, unwrap_phase
from .system import (
    GainFunction,
    MatrixNormGain,
    SecondOrderSpec,
    SystemSpec,
    TrigMatrixFunction,
    companion_lift,
)

TWO_PI = 2.0 * math.pi

DEFAULTS: dict[str, dict] = {
    "scalar_spectrum": {"s": (0.0, 0.5, 1.0), "g0": 1.0, "g1": 1.0, "h1": 0.0, "period": TWO_PI},
    "rotation": {"g0": 1.0, "g1": 1.0, "h1": 0.0, "period": TWO_PI, "n": 1},
    "yorke": {"L": 2.0, "n": 1},
    "order_r": {"L": 16.0, "r": 4},
    "real_odd_r": {"L": 2.0, "r": 3},
    "nonoscillatory": {"s": 1.0, "K": 30},
    "sharp_second_order": {"lambda0": 4.0, "n": 1, "T": None},
}
WITNESS_NAMES = tuple(DEFAULTS)
_ALIASES = {"A": "L", "λ₀": "lambda0", "lam0": "lambda0"}
_INT_PARAMS = {"n", "r", "K"}

TOLERANCES = {
    "scalar_spectrum": 1e-8,
    "rotation": 1e-8,
    "yorke": 1e-6,
    "order_r": 1e-6,
    "real_odd_r": 1e-6,
    "nonoscillatory": 1e-6,
    "sharp_second_order": 1e-6,
}


@dataclass(frozen=True)
class WitnessId:
    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in DEFAULTS:
            raise InputError(f"unknown witness {self.name!r}; expected one of {', '.join(WITNESS_NAMES)}")
        merged = dict(DEFAULTS[self.name])
        for key, value in self.params.items():
            key = _ALIASES.get(key, key)
            if key not in merged:
                raise InputError(f"witness {self.name}: unknown parameter {key!r} "
                                 f"(allowed: {', '.join(sorted(merged))})")
            merged[key] = value
        object.__setattr__(self, "params", _validate(self.name, merged))

    def as_dict(self) -> dict:
        return {"name": self.name, "params": {k: (list(v) if isinstance(v, tuple) else v)
                                              for k, v in sorted(self.params.items())}}


def _positive(p: dict, key: str, name: str) -> float:
    try:
        v = float(p[key])
    except (TypeError, ValueError):
        raise InputError(f"witness {name}: {key} must be a number, got {p[key]!r}") from None
    if not (math.isfinite(v) and v > 0):
        raise InputError(f"witness {name}: {key} must be positive, got {p[key]!r}")
    return v


def _validate(name: str, p: dict) -> dict:
    out = dict(p)
    for key in _INT_PARAMS & set(p):
        v = p[key]
        if isinstance(v, float) and v.is_integer():
            v = int(v)
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise InputError(f"witness {name}: {key} must be a positive integer, got {p[key]!r}")
        out[key] = v
    for key in ("L", "period", "lambda0"):
        if key in p:
            out[key] = _positive(p, key, name)
    if name == "nonoscillatory":
        out["s"] = _positive(p, "s", name)
    if name == "scalar_spectrum":
        s = p["s"]
        s = (s,) if isinstance(s, (int, float)) else tuple(s)
        if not s or not all(isinstance(v, (int, float)) and 0.0 <= v <= 1.0 for v in s):
            raise InputError(f"witness {name}: every s_k must lie in [0, 1], got {p['s']!r}")
        out["s"] = tuple(float(v) for v in s)
    if name in ("scalar_spectrum", "rotation"):
        for key in ("g0", "g1", "h1"):
            try:
                out[key] = float(p[key])
            except (TypeError, ValueError):
                raise InputError(f"witness {name}: {key} must be a number") from None
        # raises if g is negative somewhere
        GainFunction(out["period"], out["g0"], ((1, out["g1"]),), ((1, out["h1"]),))
    if name == "real_odd_r" and out["r"] not in (1, 3):
        raise InputError(f"witness real_odd_r: r must be 1 or 3, got {out['r']}")
    if name == "sharp_second_order" and p["T"] is not None:
        out["T"] = _positive(p, "T", name)
    return out


def witness(name: str, **params) -> WitnessId:
    return WitnessId(name, params)


# -- construction ------------------------------------------------------------------


def _gain_terms(p: dict):
    return p["g0"], ((1, p["g1"]),), ((1, p["h1"]),)


def _diag_gain_system(p: dict, diag: np.ndarray) -> SystemSpec:
    g0, cos_terms, sin_terms = _gain_terms(p)
    D = np.diag(diag)
    return SystemSpec(TrigMatrixFunction(p["period"], g0 * D, tuple((k, a * D) for k, a in cos_terms),
                                         tuple((k, b * D) for k, b in sin_terms)))


def _signs(n: int) -> np.ndarray:
    return np.array([1.0 if k % 2 == 0 else -1.0 for k in range(n)])


def _nonoscillatory_coefficient(K: int) -> tuple[float, list[tuple[int, float]]]:
    """Fourier series of a(t) = cos t / (2 + cos t) = 1 - 2 / (2 + cos t).

    1 / (2 + cos t) = (1 / sqrt 3) (1 + 2 sum_k (-beta)^k cos kt), beta = 2 - sqrt 3,
    truncated after K harmonics (beta^30 is below 1e-17).
    """
    r3 = math.sqrt(3.0)
    beta = 2.0 - r3
    a0 = 1.0 - 2.0 / r3
    return a0, [(k, -4.0 / r3 * (-beta) ** k) for k in range(1, K + 1)]


def make_witness(wid: WitnessId | str, **params):
    if isinstance(wid, str):
        wid = WitnessId(wid, params)
    p, name = wid.params, wid.name
    if name == "scalar_spectrum":
        return _diag_gain_system(p, np.exp(1j * np.array(p["s"])))
    if name == "rotation":
        return _diag_gain_system(p, 1j * _signs(p["n"]))
    if name == "yorke":
        L = p["L"]
        return SystemSpec.constant(np.diag(1j * L * _signs(p["n"])), TWO_PI / L)
    if name == "order_r":
        L, r = p["L"], p["r"]
        return SystemSpec.constant(np.array([[(1j ** r) * L]]), TWO_PI / L ** (1.0 / r), order=r)
    if name == "real_odd_r":
        L, r = p["L"], p["r"]
        q = (r + 1) // 2
        sigma = (-1.0) ** q
        A = sigma * L * np.array([[0.0, 1.0], [-1.0, 0.0]])
        return SystemSpec.constant(A, TWO_PI / L ** (1.0 / r), order=r)
    if name == "nonoscillatory":
        s, K = p["s"], p["K"]
        a0, terms = _nonoscillatory_coefficient(K)
        E = np.array([[0.0, 0.0], [1.0, 0.0]])
        A0 = np.array([[0.0, s], [-s * a0, 0.0]])
        return SystemSpec(TrigMatrixFunction(TWO_PI / s, A0, tuple((k, -s * c * E) for k, c in terms)))
    if name == "sharp_second_order":
        lam0, n = p["lambda0"], p["n"]
        T = p["T"] if p["T"] is not None else math.pi / math.sqrt(lam0)
        return SecondOrderSpec(TrigMatrixFunction.constant(lam0 * np.eye(n), T))
    raise InputError(f"unknown witness {name!r}")  # pragma: no cover - guarded by WitnessId


# -- verification ------------------------------------------------------------------


@dataclass(frozen=True)
class SharpnessReport:
    name: str
    params: dict
    bound: float
    observed: float
    gap: float
    tolerance: float
    verdict: str
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def as_dict(self) -> dict:
        """Result row: lhs = observed, rhs = bound, margin = tolerance - gap."""
        return {
            "criterion": f"witness:{self.name}",
            "lhs": self.observed,
            "rhs": self.bound,
            "margin": self.tolerance - self.gap,
            "verdict": self.verdict,
            "details": {"gap": self.gap, "tolerance": self.tolerance,
                        "params": WitnessId(self.name, self.params).as_dict()["params"],
                        **self.details},
        }


def observed_period(spec: SystemSpec, z0, weights, horizon: float, steps: int = 4096) -> tuple[float, float]:
    """First time at which the phase of ``weights . z(t)`` has turned by 2 pi.

    Returns (T, relative return residual ||z(T) - z0|| / ||z0||).  Intended
    for uniformly rotating solutions, where linear interpolation of the phase
    between grid points is exact up to integration error.
    """
    spec = companion_lift(spec, 1.0) if spec.order > 1 else spec
    z0 = np.asarray(z0, dtype=complex)
    w = np.asarray(weights, dtype=complex)
    traj = propagate(spec, z0, horizon, steps)
    phi = unwrap_phase(traj.z @ w).phi
    turn = np.abs(phi - phi[0])
    hits = np.nonzero(turn >= TWO_PI)[0]
    if not hits.size:
        raise FloquetError("solution did not complete a turn within the horizon")
    i = int(hits[0])
    t0, t1, f0, f1 = traj.t[i - 1], traj.t[i], turn[i - 1], turn[i]
    T = float(t0 + (TWO_PI - f0) * (t1 - t0) / (f1 - f0))
    W = fundamental_matrix(spec, T, steps)
    resid = float(np.linalg.norm(W @ z0 - z0) / np.linalg.norm(z0))
    return T, resid


def _report(wid: WitnessId, bound: float, observed: float, gap: float, details: dict) -> SharpnessReport:
    tol = TOLERANCES[wid.name]
    verdict = PASS if gap <= tol else FAIL
    return SharpnessReport(wid.name, dict(wid.params), bound, observed, gap, tol, verdict, details)


def _verify_log_equality(wid: WitnessId, spec: SystemSpec) -> SharpnessReport:
    """|ln rho_k(t)| = N(t) along the whole multiplier path, every norm."""
    paths = multiplier_paths(spec)
    t = paths[0].t
    gaps = {}
    for kind in ALL_NORMS:
        N, _ = cumulative_norm_integral(MatrixNormGain(spec.matrix, kind), t)
        gaps[kind.value] = max(float(np.max(np.abs(p.abs_log - N))) for p in paths)
    NT = float(N[-1])
    observed = max(float(p.abs_log[-1]) for p in paths)
    return _report(wid, NT, observed, max(gaps.values()), {"gap_by_norm": gaps, "T": spec.period})


def _verify_period(wid: WitnessId, spec: SystemSpec, z0, weights, r: int) -> SharpnessReport:
    target = spec.period
    bounds = {}
    for kind in ALL_NORMS:
        res = optimize_period_bound(MatrixNormGain(spec.matrix, kind), r)
        bounds[kind.value] = res.T_star
    T_obs, resid = observed_period(spec, z0, weights, 1.25 * target)
    gap = max(max(abs(b - T_obs) for b in bounds.values()), resid)
    details = {"bound_by_norm": bounds, "return_residual": resid, "closed_form": target}
    if r == 1 and wid.name == "yorke":
        details["yorke_bound"] = yorke_bound(wid.params["L"], 1)
    return _report(wid, bounds[NormKind.EUCLIDEAN.value], T_obs, gap, details)


def nonoscillatory_checks(spec: SystemSpec, s: float, steps: int = 2048) -> dict:
    """ODE residual of the exact solution, phase classification and the mean of a."""
    T = spec.period
    t = np.linspace(0.0, T, steps + 1)
    x = np.stack([2.0 + np.cos(s * t), -np.sin(s * t)], axis=1)
    dx = np.stack([-s * np.sin(s * t), -s * np.cos(s * t)], axis=1)
    ode_resid = float(np.max(np.abs(np.einsum("tij,tj->ti", spec.matrix(t), x) - dx)))
    traj = propagate(spec, [3.0, 0.0], T, 8192)
    scalar = Trajectory(traj.t, (traj.z @ np.array([1.0, 1j]))[:, None])
    verdict = classify(scalar)
    a_integral = float(-spec.matrix.A0[1, 0].real * T)  # integral of a over one period of a
    return {"ode_residual": ode_resid, "verdict": verdict.verdict, "phase_span": verdict.phase_span,
            "a_integral": a_integral, "period": T}


def verify_sharpness(wid: WitnessId | str, **params) -> SharpnessReport:
    if isinstance(wid, str):
        wid = WitnessId(wid, params)
    try:
        return _verify(wid)
    except FloquetError as exc:
        if isinstance(exc, InputError):
            raise
        return SharpnessReport(wid.name, dict(wid.params), math.nan, math.nan, math.inf,
                               TOLERANCES[wid.name], INDETERMINATE, {"error": str(exc)})


def _verify(wid: WitnessId) -> SharpnessReport:
    p, name = wid.params, wid.name
    spec = make_witness(wid)
    if name in ("scalar_spectrum", "rotation"):
        return _verify_log_equality(wid, spec)
    if name == "yorke":
        n = p["n"]
        return _verify_period(wid, spec, np.eye(n)[0], np.eye(n)[0], 1)
    if name == "order_r":
        r = p["r"]
        w = p["L"] ** (1.0 / r)
        z0 = [(1j * w) ** j for j in range(r)]
        return _verify_period(wid, spec, z0, np.eye(r)[0], r)
    if name == "real_odd_r":
        r = p["r"]
        w = p["L"] ** (1.0 / r)
        z0 = np.concatenate([w ** j * np.array([math.cos(j * math.pi / 2), math.sin(j * math.pi / 2)])
                             for j in range(r)])
        weights = np.zeros(2 * r, dtype=complex)
        weights[:2] = [1.0, 1j]
        return _verify_period(wid, spec, z0, weights, r)
    if name == "nonoscillatory":
        chk = nonoscillatory_checks(spec, p["s"])
        expected_span = math.pi / 3.0
        expected_int = TWO_PI - 4.0 * math.pi / math.sqrt(3.0)
        gap = max(abs(chk["phase_span"] - expected_span), abs(chk["a_integral"] - expected_int),
                  chk["ode_residual"])
        if chk["verdict"] != "non_oscillatory":
            gap = math.inf
        return _report(wid, expected_span, chk["phase_span"], gap, chk)
    if name == "sharp_second_order":
        Tb = math.pi / math.sqrt(p["lambda0"])
        thr = certificate_threshold(lambda T: certify_thm10(spec.with_period(T)), 0.5 * Tb, 2.0 * Tb)
        oracle = multiplier_oracle(spec.with_period(Tb))
        gap = max(abs(thr - Tb), oracle.distance_to_minus_one)
        return _report(wid, Tb, thr, gap, {"thm10_threshold": thr, "oracle_verdict": oracle.verdict,
                                           "distance_to_minus_one": oracle.distance_to_minus_one})
    raise InputError(f"unknown witness {name!r}")  # pragma: no cover
