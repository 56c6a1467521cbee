"""Norm integrals, bound checks and certificates.

The central quantity is the norm integral N(t) = integral of g over [0, t]
for a gain g (either ||A(t)|| or a user-supplied Lipschitz gain L(t)).
Everything here reduces to N:

* spectrum localization  |ln rho_k(t)| <= N(t);
* the log-solution and phase bounds;
* the lower bound T* for periods of oscillatory solutions, N(T*) = 2 pi,
  and its order-r refinement via the companion lift parameter c;
* certificates that T-periodic oscillatory solutions do not exist.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericalFailure
from .linalg import NormKind, vec_norm, vec_norms
from .ode import multiplier_paths, propagate
from .phase import unwrap_phase
from .system import Gain, LiftedGain, SystemSpec, matrix_gain

TWO_PI = 2.0 * math.pi
INTERVALS = 64
MIN_PANELS = 8
MAX_PANELS = 1 << 20
CERT_SLACK = 1e-9
CHECK_SLACK = 1e-6

PASS, FAIL, INDETERMINATE = "pass", "fail", "indeterminate"


# -- quadrature ------------------------------------------------------------------


def _simpson_weights(panels: int) -> np.ndarray:
    w = np.ones(panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w


def _simpson_batch(g: Gain, lo: np.ndarray, hi: np.ndarray, panels: int) -> np.ndarray:
    x = lo[:, None] + (hi - lo)[:, None] * np.linspace(0.0, 1.0, panels + 1)[None, :]
    y = np.asarray(g(x), dtype=float).reshape(x.shape)
    if np.any(y < 0) or not np.all(np.isfinite(y)):
        raise InputError("gain must be finite and nonnegative")
    return (hi - lo) / (3.0 * panels) * (y @ _simpson_weights(panels))


def simpson(f, a: float, b: float, panels: int) -> float:
    """Composite Simpson rule with an even number of panels."""
    if panels < 2 or panels % 2:
        raise InputError("Simpson needs an even number of panels >= 2")
    x = np.linspace(a, b, panels + 1)
    y = np.asarray(f(x), dtype=float)
    return float((b - a) / (3.0 * panels) * (y @ _simpson_weights(panels)))


@dataclass
class _Table:
    """Converged Simpson integrals of g on equal subintervals of [a, b]."""

    edges: np.ndarray
    values: np.ndarray
    panels: np.ndarray

    @property
    def total(self) -> float:
        return float(np.sum(self.values))


def _adaptive_table(g: Gain, a: float, b: float, rtol: float = 1e-10,
                    intervals: int = INTERVALS, max_panels: int = MAX_PANELS) -> _Table:
    edges = np.linspace(a, b, intervals + 1)
    lo, hi = edges[:-1], edges[1:]
    panels = np.full(intervals, MIN_PANELS)
    vals = _simpson_batch(g, lo, hi, MIN_PANELS)
    active = np.arange(intervals)
    s = MIN_PANELS
    while active.size:
        s *= 2
        # only unconverged subintervals count; kinks (e.g. in lifted gains) stay local
        if s * active.size > max_panels:
            raise NumericalFailure(f"quadrature did not converge within {max_panels} panels")
        fine = _simpson_batch(g, lo[active], hi[active], s)
        delta = np.abs(fine - vals[active])
        vals[active] = fine
        panels[active] = s
        budget = rtol * (1.0 + abs(float(np.sum(vals))))
        share = (hi[active] - lo[active]) / (b - a)
        active = active[delta >= budget * share]
    return _Table(edges, vals, panels)


class PeriodicIntegral:
    """N(t) for a periodic gain, using one converged table per period.

    N(t) = m N(P) + N(t - m P); the partial piece inside the last
    subinterval is integrated at the panel density that subinterval needed.
    """

    def __init__(self, g: Gain, rtol: float = 1e-10):
        self.g = g
        self.period = g.period
        self.table = _adaptive_table(g, 0.0, g.period, rtol)
        self.cum = np.concatenate(([0.0], np.cumsum(self.table.values)))
        self.full = float(self.cum[-1])

    def partial(self, tau: float) -> float:
        edges = self.table.edges
        j = int(np.clip(np.searchsorted(edges, tau, side="right") - 1, 0, len(edges) - 2))
        a = edges[j]
        if tau <= a:
            return float(self.cum[j])
        width = edges[j + 1] - a
        panels = int(self.table.panels[j] * max((tau - a) / width, 0.0)) + 2
        panels += panels % 2
        piece = float(_simpson_batch(self.g, np.array([a]), np.array([tau]), panels)[0])
        return float(self.cum[j]) + piece

    def __call__(self, t: float) -> float:
        if t < 0:
            raise InputError("t_end must be nonnegative")
        m = math.floor(t / self.period)
        rem = t - m * self.period
        if rem >= self.period:
            m, rem = m + 1, 0.0
        return m * self.full + self.partial(rem)

    def solve(self, target: float) -> float:
        """Smallest T with N(T) >= target, by bisection on the monotone map."""
        if self.full <= 0:
            return math.inf
        m = math.floor(target / self.full)
        if m * self.full >= target:
            m -= 1
        residual = target - m * self.full
        lo, hi = 0.0, self.period
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if self.partial(mid) < residual:
                lo = mid
            else:
                hi = mid
        return m * self.period + hi


def norm_integral(g: Gain, t_end: float, rtol: float = 1e-10) -> float:
    """N(t_end): integral of the gain over [0, t_end], the gain extended periodically.

    Composite Simpson on equal subintervals, each refined by doubling until
    the change falls below its share of rtol (1 + N).
    """
    if t_end < 0:
        raise InputError("t_end must be nonnegative")
    if t_end == 0:
        return 0.0
    return PeriodicIntegral(g, rtol)(t_end)


def cumulative_norm_integral(g: Gain, t: np.ndarray, rtol: float = 1e-10,
                             max_panels: int = 1024) -> tuple[np.ndarray, float]:
    """N(t_i) on a uniform grid starting at 0, and the quadrature error estimate.

    Each grid interval gets composite Simpson; doubling the panel count only
    evaluates the new midpoints.
    """
    t = np.asarray(t, dtype=float)
    lo, width = t[:-1], np.diff(t)
    s = 4
    y = _sample(g, lo[:, None] + width[:, None] * np.linspace(0.0, 1.0, s + 1)[None, :])
    prev = _cumulative_simpson(y, width)
    while True:
        mids = lo[:, None] + width[:, None] * ((np.arange(s) + 0.5) / s)[None, :]
        fine = np.empty((len(lo), 2 * s + 1))
        fine[:, ::2] = y
        fine[:, 1::2] = _sample(g, mids)
        y, s = fine, 2 * s
        cur = _cumulative_simpson(y, width)
        err = float(np.max(np.abs(cur - prev)))
        if err < rtol * (1.0 + cur[-1]) or s >= max_panels:
            return cur, err
        prev = cur


def _sample(g: Gain, x: np.ndarray) -> np.ndarray:
    y = np.asarray(g(x), dtype=float).reshape(x.shape)
    if np.any(y < 0) or not np.all(np.isfinite(y)):
        raise InputError("gain must be finite and nonnegative")
    return y


def _cumulative_simpson(y: np.ndarray, width: np.ndarray) -> np.ndarray:
    panels = y.shape[1] - 1
    vals = width / (3.0 * panels) * (y @ _simpson_weights(panels))
    return np.concatenate(([0.0], np.cumsum(vals)))


# -- reports ---------------------------------------------------------------------


def _verdict(margin: float, slack: float) -> str:
    if margin > slack:
        return PASS
    if margin < -slack:
        return FAIL
    return INDETERMINATE


def digest(inputs) -> str:
    blob = json.dumps(inputs, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class BoundReport:
    criterion: str
    lhs: float
    rhs: float
    margin: float
    verdict: str
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def as_dict(self) -> dict:
        return {"criterion": self.criterion, "lhs": self.lhs, "rhs": self.rhs,
                "margin": self.margin, "verdict": self.verdict, "details": self.details}


@dataclass(frozen=True)
class Certificate:
    """Outcome of a sufficient condition: pass only with margin beyond slack."""

    criterion: str
    verdict: str
    margin: float
    lhs: float
    rhs: float
    message: str
    inputs_digest: str = ""
    c_star: float | None = None
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def as_dict(self) -> dict:
        details = dict(self.details)
        details["message"] = self.message
        details["inputs_digest"] = self.inputs_digest
        if self.c_star is not None:
            details["c_star"] = self.c_star
        return {"criterion": self.criterion, "lhs": self.lhs, "rhs": self.rhs,
                "margin": self.margin, "verdict": self.verdict, "details": details}


def make_certificate(criterion: str, lhs: float, rhs: float, message: str, inputs,
                     slack: float = CERT_SLACK, c_star: float | None = None,
                     details: dict | None = None) -> Certificate:
    margin = rhs - lhs
    verdict = _verdict(margin, slack)
    if verdict == FAIL:
        message = f"condition violated ({lhs:.12g} >= {rhs:.12g}); no conclusion"
    elif verdict == INDETERMINATE:
        message = f"margin {margin:.3g} within numerical slack {slack:g}"
    return Certificate(criterion, verdict, margin, lhs, rhs, message, digest(inputs),
                       c_star, details or {})


# -- bound checks ---------------------------------------------------------------


def _first_order(spec: SystemSpec) -> SystemSpec:
    if spec.order != 1:
        raise InputError("bound checks need a first-order system; apply companion_lift first")
    return spec


def check_spectrum_bound(spec: SystemSpec, grid_steps: int = 256, substeps: int = 8,
                         t_end: float | None = None, slack: float = CHECK_SLACK) -> BoundReport:
    """|ln rho_k(t)| <= N(t) along continuously tracked multiplier paths."""
    spec = _first_order(spec)
    paths = multiplier_paths(spec, grid_steps, t_end, substeps)
    t = paths[0].t
    N, qerr = cumulative_norm_integral(matrix_gain(spec), t)
    logs = np.stack([p.log_path for p in paths], axis=1)
    margins = N[:, None] - np.abs(logs)
    arg_margins = N[:, None] - np.abs(logs.imag)
    i, k = np.unravel_index(np.argmin(margins), margins.shape)
    margin = float(margins[i, k])
    resolved = all(p.resolved for p in paths)
    verdict = (PASS if margin >= -slack else FAIL) if resolved else INDETERMINATE
    details = {
        "norm": spec.norm.value,
        "grid_steps": len(t) - 1,
        "t_worst": float(t[i]),
        "N_end": float(N[-1]),
        "max_abs_log_per_k": [float(np.max(np.abs(p.log_path))) for p in paths],
        "abs_log_end_per_k": [float(abs(p.log_path[-1])) for p in paths],
        "arg_bound_margin": float(np.min(arg_margins)),
        "resolved": resolved,
        "quadrature_error": qerr,
    }
    return BoundReport("thm1_spectrum", float(abs(logs[i, k])), float(N[i]), margin, verdict, details)


def _log_trajectory(spec: SystemSpec, z0, grid_steps: int, substeps: int, t_end):
    traj = propagate(spec, z0, t_end, grid_steps, substeps=substeps)
    comps = []
    for k in range(traj.z.shape[1]):
        path = unwrap_phase(traj.z[:, k], k=k)
        if not path.valid:
            return traj, None
        comps.append(np.log(np.abs(traj.z[:, k])) + 1j * path.phi)
    return traj, np.stack(comps, axis=1)


def _positive_initial(z0) -> np.ndarray:
    z0 = np.asarray(z0, dtype=complex).ravel()
    if np.any(z0.imag != 0) or np.any(z0.real <= 0):
        raise InputError("initial components must be positive reals (zero initial phases)")
    return z0


def check_log_solution_bound(spec: SystemSpec, z0=None, grid_steps: int = 256,
                             substeps: int = 8, t_end: float | None = None,
                             slack: float = CHECK_SLACK) -> BoundReport:
    """||ln z(t)|| against ln||z(0)|| + N(t) and against ||ln z(0)|| + N(t).

    The first form is the bound as usually stated; the second is what its
    derivation supports.  They coincide for z(0) = (1, ..., 1).  When they
    disagree the verdict is indeterminate and both margins are reported.
    The classical estimate ln||z(t)|| <= ln||z(0)|| + N(t) is reported too.
    """
    spec = _first_order(spec)
    z0 = _positive_initial(np.ones(spec.n) if z0 is None else z0)
    kind = spec.norm
    traj, lnz = _log_trajectory(spec, z0, grid_steps, substeps, t_end)
    if lnz is None:
        return BoundReport("log_solution_bound", math.nan, math.nan, math.nan, INDETERMINATE,
                           {"reason": "a solution component vanishes on the grid"})
    N, _ = cumulative_norm_integral(matrix_gain(spec), traj.t)
    lhs = vec_norms(lnz, kind)
    ln_norm0 = math.log(vec_norm(z0, kind))
    norm_ln0 = vec_norm(np.log(z0), kind)
    printed = ln_norm0 + N - lhs
    derived = norm_ln0 + N - lhs
    classical = ln_norm0 + N - np.log(vec_norms(traj.z, kind))
    i = int(np.argmin(printed))
    m_printed, m_derived = float(printed[i]), float(np.min(derived))
    ok_printed, ok_derived = m_printed >= -slack, m_derived >= -slack
    if ok_printed and ok_derived:
        verdict = PASS
    elif not ok_printed and not ok_derived:
        verdict = FAIL
    else:
        verdict = INDETERMINATE
    details = {
        "norm": kind.value,
        "stated_form_margin": m_printed,
        "derived_form_margin": m_derived,
        "classical_margin": float(np.min(classical)),
        "forms_disagree": ok_printed != ok_derived,
        "t_worst": float(traj.t[i]),
    }
    return BoundReport("log_solution_bound", float(lhs[i]), float(ln_norm0 + N[i]), m_printed,
                       verdict, details)


def check_phase_bound(spec: SystemSpec, z0=None, grid_steps: int = 256, substeps: int = 8,
                      t_end: float | None = None, slack: float = CHECK_SLACK) -> BoundReport:
    """||phi(t)|| <= N(t) for a unit-norm initial state with zero initial phases."""
    spec = _first_order(spec)
    kind = spec.norm
    if z0 is None:
        z0 = np.ones(spec.n) / vec_norm(np.ones(spec.n), kind)
    z0 = _positive_initial(z0)
    if abs(vec_norm(z0, kind) - 1.0) > 1e-12:
        raise InputError("initial state must have unit norm")
    traj, lnz = _log_trajectory(spec, z0, grid_steps, substeps, t_end)
    if lnz is None:
        return BoundReport("phase_bound", math.nan, math.nan, math.nan, INDETERMINATE,
                           {"reason": "a solution component vanishes on the grid"})
    N, _ = cumulative_norm_integral(matrix_gain(spec), traj.t)
    phi = vec_norms(lnz.imag, kind)
    margins = N - phi
    i = int(np.argmin(margins))
    margin = float(margins[i])
    verdict = PASS if margin >= -slack else FAIL
    return BoundReport("phase_bound", float(phi[i]), float(N[i]), margin, verdict,
                       {"norm": kind.value, "t_worst": float(traj.t[i])})


# -- period bounds ---------------------------------------------------------------


@dataclass(frozen=True)
class PeriodBoundResult:
    T_star: float
    c_star: float | None
    order: int
    curve: tuple = ()  # (c, T(c)) pairs from the scan
    method: str = ""

    def as_dict(self) -> dict:
        return {"T_star": self.T_star, "c_star": self.c_star, "order": self.order,
                "method": self.method, "curve": [list(p) for p in self.curve]}


def _order(r) -> int:
    if int(r) != r or r < 1:
        raise InputError(f"order must be an integer >= 1, got {r!r}")
    return int(r)


def period_lower_bound(g: Gain, r: int = 1, c: float | None = None,
                       rtol: float = 1e-10) -> PeriodBoundResult:
    """Solve N(T) = 2 pi (r = 1) or N(T, c) = 2 pi (r > 1, fixed c) for T."""
    r = _order(r)
    if r == 1:
        T = PeriodicIntegral(g, rtol).solve(TWO_PI)
        return PeriodBoundResult(T, None, 1, method="bisection on N(T) = 2 pi")
    if c is None:
        raise InputError("order > 1 needs the lift parameter c (or use optimize_period_bound)")
    T = PeriodicIntegral(LiftedGain(g, r, c), rtol).solve(TWO_PI)
    return PeriodBoundResult(T, float(c), r, method="bisection on N(T, c) = 2 pi")


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, a: float, b: float, tol: float = 1e-12, maximize: bool = False):
    """Golden-section search for an extremum of a unimodal f on [a, b].

    Returns (x, f(x)) at the best point evaluated.
    """
    sign = -1.0 if maximize else 1.0
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = sign * f(c), sign * f(d)
    best = (c, fc) if fc <= fd else (d, fd)
    while abs(b - a) > tol * (1.0 + abs(a) + abs(b)):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = sign * f(c)
            if fc < best[1]:
                best = (c, fc)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = sign * f(d)
            if fd < best[1]:
                best = (d, fd)
    return best[0], sign * best[1]


class _CachedGain(Gain):
    """Memoizes array evaluations of a gain; every c in a scan samples the same nodes."""

    MAX_ENTRIES = 256

    def __init__(self, base: Gain):
        self.base = base
        self.period = base.period
        self.source = base.source
        self._cache: dict = {}

    def __call__(self, t):
        if np.ndim(t) == 0:
            return self.base(t)
        x = np.ascontiguousarray(t, dtype=float)
        key = (x.shape, hashlib.sha1(x.tobytes()).digest())
        hit = self._cache.get(key)
        if hit is None:
            if len(self._cache) >= self.MAX_ENTRIES:
                self._cache.clear()
            hit = self._cache[key] = np.asarray(self.base(x), dtype=float)
        return hit

    def describe(self) -> dict:
        return self.base.describe()


def _c_range(g: Gain, r: int) -> tuple[float, float, float]:
    lo, hi = g.sample_range()
    return max(lo, 1e-12) ** (1.0 / r) / 10.0, hi ** (1.0 / r) * 10.0, hi


def _scan_then_golden(f, c_lo: float, c_hi: float, points: int, maximize: bool):
    cs = np.geomspace(c_lo, c_hi, points)
    vals = np.array([f(c) for c in cs])
    i = int(np.argmax(vals) if maximize else np.argmin(vals))
    a = math.log(cs[max(i - 1, 0)])
    b = math.log(cs[min(i + 1, points - 1)])
    x, v = golden_section(lambda u: f(math.exp(u)), a, b, tol=1e-13, maximize=maximize)
    if (maximize and vals[i] > v) or (not maximize and vals[i] < v):
        x, v = math.log(cs[i]), float(vals[i])
    return math.exp(x), v, tuple(zip(cs.tolist(), vals.tolist()))


def optimize_period_bound(g: Gain, r: int = 1, scan_points: int = 200,
                          rtol: float = 1e-10) -> PeriodBoundResult:
    """T* = max over c of T(c), where N(T(c), c) = 2 pi.

    Scans log-spaced c over [(min g)^(1/r)/10, (max g)^(1/r) 10], then
    refines around the best scan point by golden-section search in log c.
    """
    r = _order(r)
    if r == 1:
        return period_lower_bound(g, 1, rtol=rtol)
    c_lo, c_hi, g_max = _c_range(g, r)
    if g_max <= 0:
        return PeriodBoundResult(math.inf, None, r, method="gain vanishes identically")
    g = _CachedGain(g)

    def T_of(c: float) -> float:
        return PeriodicIntegral(LiftedGain(g, r, c), rtol).solve(TWO_PI)

    c_star, T_star, curve = _scan_then_golden(T_of, c_lo, c_hi, scan_points, maximize=True)
    return PeriodBoundResult(T_star, c_star, r, curve,
                             method=f"scan of {scan_points} log-spaced c, golden-section refinement")


def yorke_bound(L: float, r: int = 1) -> float:
    """2 pi / L^(1/r): sharp lower bound on periods of non-constant solutions
    of the autonomous equation z^(r) = f(z) with Lipschitz constant L."""
    r = _order(r)
    if not (L > 0 and math.isfinite(L)):
        raise InputError("Lipschitz constant must be positive")
    return TWO_PI / L ** (1.0 / r)


def min_lifted_integral(g: Gain, T: float, r: int, scan_points: int = 60,
                        rtol: float = 1e-10) -> tuple[float, float]:
    """min over c of N(T, c) = integral over [0, T] of max(c, c^(1-r) g); returns (c*, N)."""
    c_lo, c_hi, g_max = _c_range(g, r)
    if g_max <= 0:
        # N(T, c) = c T decreases to 0 as c -> 0
        return 0.0, 0.0
    g = _CachedGain(g)
    c, v, _ = _scan_then_golden(lambda c: norm_integral(LiftedGain(g, r, c), T, rtol),
                                c_lo, c_hi, scan_points, maximize=False)
    return c, v


def certify_no_oscillatory(g: Gain, T: float, r: int = 1, slack: float = CERT_SLACK,
                           criterion: str | None = None) -> Certificate:
    """Certificate that z^(r) = A(t) z (or its Lipschitz analogue) has no
    T-periodic oscillatory solution: N(T) < 2 pi, or min_c N(T, c) < 2 pi."""
    r = _order(r)
    if not T > 0:
        raise InputError("T must be positive")
    inputs = {"gain": g.describe(), "T": T, "r": r}
    if r == 1:
        N = norm_integral(g, T)
        return make_certificate(criterion or "no_oscillatory", N, TWO_PI,
                                f"no {T:.12g}-periodic oscillatory solutions (N(T) = {N:.12g} < 2 pi)",
                                inputs, slack)
    c, N = min_lifted_integral(g, T, r)
    return make_certificate(criterion or "no_oscillatory", N, TWO_PI,
                            f"no {T:.12g}-periodic oscillatory solutions "
                            f"(min_c N(T, c) = {N:.12g} at c = {c:.12g})",
                            inputs, slack, c_star=c)


SYMMETRY_CLASSES = {
    "odd_periodic": "z(t) = -z(-t) = z(t + T)",
    "antiperiodic": "z(t) = -z(t + T/2)",
}


def certify_uniqueness(g: Gain, T: float, r: int = 1, symmetry: str = "odd_periodic",
                       slack: float = CERT_SLACK) -> Certificate:
    """At most one solution of the given symmetry class for the forced equation
    z^(r) = f(z, t) + p(t), under the no-oscillation condition on the gain."""
    if symmetry not in SYMMETRY_CLASSES:
        raise InputError(f"symmetry must be one of {', '.join(SYMMETRY_CLASSES)}")
    base = certify_no_oscillatory(g, T, r, slack, criterion="uniqueness")
    cls = SYMMETRY_CLASSES[symmetry]
    message = (f"at most one solution of the kind {cls}" if base.passed
               else f"{base.message} for the class {cls}")
    details = dict(base.details, symmetry=symmetry, symmetry_class=cls)
    return Certificate(base.criterion, base.verdict, base.margin, base.lhs, base.rhs, message,
                       digest({"base": base.inputs_digest, "symmetry": symmetry}),
                       base.c_star, details)


def certify_autonomous_period(L: float, T: float, r: int = 1,
                              slack: float = CERT_SLACK) -> Certificate:
    """No non-constant T-periodic solution of z^(r) = f(z) when T < 2 pi / L^(1/r)."""
    bound = yorke_bound(L, r)
    return make_certificate("autonomous_period", T, bound,
                            f"no non-constant {T:.12g}-periodic solutions (T < {bound:.12g})",
                            {"L": L, "T": T, "r": r}, slack)
