"""Strong stability of periodic linear Hamiltonian systems x' = J H(t) x.

Certificates (sufficient conditions, evaluated through norm integrals):

* ``thm9``   integral over one period of ||J H(t)|| < pi;
* ``thm10``  for x'' + P(t) x = 0: min over c of the integral over two
  periods of max(c, ||P(t)||/c) < 2 pi;
* ``krein_classic``  T ||integral of |P(t)| entrywise|| < 4;
* ``thm11``  integral of a user-supplied Hessian gain L_H(t) < pi.

Independent numerical evidence comes from the monodromy: multipliers with
their Krein kinds (``multiplier_oracle``) and the smallest lambda > 0 at which
x' = lambda J H(t) x acquires a multiplier -1 (``lambda1_oracle``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import (
    CERT_SLACK,
    PASS,
    Certificate,
    PeriodicIntegral,
    make_certificate,
    min_lifted_integral,
    norm_integral,
)
from .errors import InputError, NumericalFailure
from .linalg import NormKind, eigenvalues, is_normal, mat_norm, mat_norms
from .ode import monodromy, scaled_fundamental_matrices
from .system import (
    Gain,
    HamiltonianSpec,
    MatrixNormGain,
    SecondOrderSpec,
    SystemSpec,
    TrigMatrixFunction,
)

UNIT_TOL = 1e-6
PM1_TOL = 1e-6
KREIN_TOL = 1e-8
SYMPLECTIC_TOL = 1e-8

CENTRAL = "central_region"
NONCENTRAL = "stable_noncentral"
BOUNDARY = "boundary"
UNSTABLE = "unstable"


def _hamiltonian(spec) -> HamiltonianSpec:
    if isinstance(spec, SecondOrderSpec):
        return spec.to_hamiltonian()
    if isinstance(spec, HamiltonianSpec):
        return spec
    raise InputError(f"expected a Hamiltonian or second-order system, got {type(spec).__name__}")


# -- certificates ------------------------------------------------------------------


def certify_thm9(h: HamiltonianSpec, norm: NormKind | str | None = None,
                 slack: float = CERT_SLACK) -> Certificate:
    kind = NormKind.parse(norm or h.norm)
    N = norm_integral(MatrixNormGain(h.JH(), kind), h.period)
    return make_certificate(
        "thm9", N, math.pi,
        f"strongly stable, central region (integral of ||JH|| = {N:.12g} < pi)",
        {"H": _coeff_digest(h.H), "T": h.period, "norm": kind.value}, slack,
        details={"norm": kind.value, "T": h.period})


def certify_thm10(p: SecondOrderSpec, norm: NormKind | str | None = None,
                  slack: float = CERT_SLACK) -> Certificate:
    """Order-2 lift of the boundary-value argument: the antiperiodic solution
    lives on [0, 2T], so the lifted norm integral is taken over two periods."""
    kind = NormKind.parse(norm or p.norm)
    c, N1 = min_lifted_integral(MatrixNormGain(p.P, kind), p.period, 2)
    N = 2.0 * N1
    return make_certificate(
        "thm10", N, 2.0 * math.pi,
        f"strongly stable (min_c integral over [0, 2T] of max(c, ||P||/c) = {N:.12g} < 2 pi)",
        {"P": _coeff_digest(p.P), "T": p.period, "norm": kind.value}, slack, c_star=c,
        details={"norm": kind.value, "T": p.period, "one_period_integral": N1})


class _EntryAbsGain(Gain):
    def __init__(self, P: TrigMatrixFunction, i: int, k: int):
        self.P, self.i, self.k = P, i, k
        self.period = P.period

    def __call__(self, t):
        ts = np.asarray(t, dtype=float)
        vals = np.abs(self.P(ts.ravel())[:, self.i, self.k])
        return vals.reshape(ts.shape) if ts.ndim else float(vals[0])

    def describe(self) -> dict:
        return {"source": "entry_abs", "i": self.i, "k": self.k}


def krein_classic(p: SecondOrderSpec, slack: float = CERT_SLACK) -> Certificate:
    """T R < 4 with R the spectral norm of the integral of |p_ik(t)| over a period."""
    n, T = p.n, p.period
    Pplus = np.zeros((n, n))
    for i in range(n):
        for k in range(i, n):
            Pplus[i, k] = Pplus[k, i] = PeriodicIntegral(_EntryAbsGain(p.P, i, k)).full
    R = mat_norm(Pplus, NormKind.EUCLIDEAN)
    return make_certificate(
        "krein_classic", T * R, 4.0, f"strongly stable (T R = {T * R:.12g} < 4)",
        {"P": _coeff_digest(p.P), "T": T}, slack,
        details={"R": R, "T": T, "P_plus_integral": Pplus.tolist()})


def certify_thm11(L_H: Gain, T: float | None = None, slack: float = CERT_SLACK) -> Certificate:
    """First-approximation stability of a periodic solution of a nonlinear
    Hamiltonian system from a user-supplied bound L_H(t) >= ||J H_xx(x, t)||."""
    T = L_H.period if T is None else T
    if not T > 0:
        raise InputError("T must be positive")
    N = norm_integral(L_H, T)
    return make_certificate(
        "thm11", N, math.pi,
        f"stable to the first approximation (N_H(T) = {N:.12g} < pi)",
        {"gain": L_H.describe(), "T": T}, slack, details={"T": T})


def _coeff_digest(m: TrigMatrixFunction) -> list:
    return [np.round(np.asarray(M), 15).tolist() for M in m.coefficients()] + [
        [k for k, _ in m.cos_terms], [k for k, _ in m.sin_terms]]


# -- multiplier oracle -------------------------------------------------------------


@dataclass(frozen=True)
class MultiplierReport:
    multipliers: tuple
    moduli: tuple
    krein_types: tuple  # per multiplier: first_kind / second_kind / indefinite / off_circle
    verdict: str
    symplectic_residual: float
    pairing_error: float
    distance_to_minus_one: float
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "multipliers": [[z.real, z.imag] for z in self.multipliers],
            "moduli": list(self.moduli),
            "krein_types": list(self.krein_types),
            "symplectic_residual": self.symplectic_residual,
            "pairing_error": self.pairing_error,
            "distance_to_minus_one": self.distance_to_minus_one,
            **self.details,
        }


def _krein_kinds(W: np.ndarray, J: np.ndarray, rhos: np.ndarray, on_circle: np.ndarray,
                 cluster_tol: float) -> list[str]:
    """Krein kind of each unit-circle multiplier.

    Multipliers closer than ``cluster_tol`` are grouped; the Hermitian form
    -i xi* J xi (positive for the counterclockwise-moving kind of x' = J H x
    with H > 0) is evaluated on the group's eigenspace.  A group whose
    eigenspace is deficient (Jordan block) is reported indefinite.
    """
    kinds = ["off_circle"] * len(rhos)
    todo = [i for i in range(len(rhos)) if on_circle[i]]
    scale = 1.0 + mat_norm(W, NormKind.EUCLIDEAN)
    while todo:
        i = todo[0]
        group = [j for j in todo if abs(rhos[j] - rhos[i]) < cluster_tol]
        todo = [j for j in todo if j not in group]
        rho = np.mean(rhos[group])
        _, s, vh = np.linalg.svd(W - rho * np.eye(len(W)))
        m = len(group)
        basis = vh[-m:].conj().T
        if s[-m] > 1e-6 * scale:
            kind = "indefinite"
        else:
            form = -1j * basis.conj().T @ J @ basis
            ev = np.linalg.eigvalsh(0.5 * (form + form.conj().T))
            if np.all(ev > KREIN_TOL):
                kind = "first_kind"
            elif np.all(ev < -KREIN_TOL):
                kind = "second_kind"
            else:
                kind = "indefinite"
        for j in group:
            kinds[j] = kind
    return kinds


def classify_multipliers(W: np.ndarray, J: np.ndarray, cluster_tol: float = 1e-6,
                         pm1_tol: float = PM1_TOL):
    """Multipliers, Krein kinds and the region verdict for a symplectic W."""
    rhos = eigenvalues(W)
    moduli = np.abs(rhos)
    on_circle = np.abs(moduli - 1.0) < UNIT_TOL
    kinds = _krein_kinds(W, J, rhos, on_circle, cluster_tol)
    if not np.all(on_circle):
        verdict = UNSTABLE
    elif pm1_tol > 0 and np.min(np.minimum(np.abs(rhos - 1), np.abs(rhos + 1))) < pm1_tol:
        verdict = BOUNDARY
    elif any(k == "indefinite" for k in kinds):
        verdict = BOUNDARY
    else:
        central = all((k == "first_kind" and z.imag > 0) or (k == "second_kind" and z.imag < 0)
                      for k, z in zip(kinds, rhos))
        verdict = CENTRAL if central else NONCENTRAL
    return rhos, kinds, verdict


def multiplier_oracle(spec, steps: int | None = None) -> MultiplierReport:
    h = _hamiltonian(spec)
    mono = monodromy(h.system(), steps)
    W = mono.W
    if np.max(np.abs(W.imag)) > 1e-10 * (1.0 + np.max(np.abs(W))):
        raise NumericalFailure("monodromy of a real system has an imaginary part")
    W = W.real
    J = h.J
    wn = mat_norm(W, NormKind.EUCLIDEAN)
    resid = mat_norm(W.T @ J @ W - J, NormKind.EUCLIDEAN)
    if resid > SYMPLECTIC_TOL * max(1.0, wn * wn):
        raise NumericalFailure(f"monodromy is not symplectic: ||W^T J W - J|| = {resid:.3e}")
    rhos, kinds, verdict = classify_multipliers(W, J)
    pairing = max(float(np.min(np.abs(rhos - 1.0 / np.conj(z)))) for z in rhos)
    return MultiplierReport(
        tuple(complex(z) for z in rhos), tuple(float(abs(z)) for z in rhos), tuple(kinds),
        verdict, resid, pairing, float(np.min(np.abs(rhos + 1.0))),
        {"steps": mono.steps, "error_estimate": mono.error_estimate})


# -- lambda_1 oracle ----------------------------------------------------------------


@dataclass(frozen=True)
class Lambda1Result:
    lambda1: float
    bracket: tuple
    residual: float
    found: bool
    scan: tuple = ()  # (lambda, det(W_lambda + I)) for the scanned points

    def as_dict(self) -> dict:
        return {"lambda1": self.lambda1, "bracket": list(self.bracket), "residual": self.residual,
                "found": self.found, "scan": [list(p) for p in self.scan]}


def _central_flags(system: SystemSpec, J: np.ndarray, lams: np.ndarray, gmax: float,
                   base_steps: int) -> tuple[list[bool], list[np.ndarray]]:
    T = system.period
    # keep lambda ||JH|| h below 0.02 so RK4 stays accurate at every scale
    steps = max(base_steps, int(math.ceil(float(np.max(lams)) * gmax * T / 0.02)))
    Ws = scaled_fundamental_matrices(system, T, lams, steps).real
    flags = []
    for W in Ws:
        _, _, verdict = classify_multipliers(W, J, cluster_tol=1e-10, pm1_tol=0.0)
        flags.append(verdict == CENTRAL)
    return flags, list(Ws)


def lambda1_oracle(spec, lam_range: tuple = (1e-3, 1e3), per_decade: int = 20,
                   steps: int = 1024, rtol: float = 1e-12) -> Lambda1Result:
    """Smallest lambda > 0 for which x' = lambda J H(t) x has the multiplier -1.

    For lambda in (0, lambda_1) the system stays in the central region, and
    it leaves that region at lambda_1.  The oracle scans a geometric lambda
    grid decade by decade for the first point outside the central region,
    then bisects the bracket by repeated multisection.
    """
    h = _hamiltonian(spec)
    system = h.system()
    J = h.J
    ts = np.linspace(0.0, h.period, 257)
    gmax = float(np.max(mat_norms(system.matrix(ts), NormKind.EUCLIDEAN)))
    lo_exp, hi_exp = math.log10(lam_range[0]), math.log10(lam_range[1])
    grid = np.logspace(lo_exp, hi_exp, int(round((hi_exp - lo_exp) * per_decade)) + 1)
    scan = []
    a, b = 0.0, None
    for start in range(0, len(grid), per_decade):
        lams = grid[start:start + per_decade]
        flags, Ws = _central_flags(system, J, lams, gmax, steps)
        for lam, ok, W in zip(lams, flags, Ws):
            scan.append((float(lam), float(np.linalg.det(W + np.eye(len(W))))))
            if ok:
                a = float(lam)
            else:
                b = float(lam)
                break
        if b is not None:
            break
    if b is None:
        return Lambda1Result(math.inf, (a, math.inf), math.nan, False, tuple(scan))
    while b - a > rtol * b:
        lams = np.linspace(a, b, 17)[1:-1]
        flags, _ = _central_flags(system, J, lams, gmax, steps)
        fail = [i for i, ok in enumerate(flags) if not ok]
        if fail:
            b = float(lams[fail[0]])
            a = float(lams[fail[0] - 1]) if fail[0] > 0 else a
        else:
            a = float(lams[-1])
    lam1 = 0.5 * (a + b)
    steps1 = max(steps, int(math.ceil(lam1 * gmax * h.period / 0.02)))
    W = scaled_fundamental_matrices(system, h.period, [lam1], steps1)[0].real
    residual = float(np.min(np.abs(eigenvalues(W) + 1.0)))
    return Lambda1Result(lam1, (a, b), residual, True, tuple(scan))


# -- norm recommendation ------------------------------------------------------------


def recommend_norm(spec, samples: int = 256) -> dict:
    """Pick the norm giving the smallest norm integral.

    If the relevant matrix (A(t), or J H(t) for Hamiltonian systems, or P(t)
    for second-order systems) is normal at every sample, the Euclidean norm
    is minimal pointwise and is recommended outright.  Otherwise all three
    norm integrals are reported and the smallest is suggested.
    """
    if isinstance(spec, SystemSpec):
        matrix, what = spec.matrix, "A(t)"
    elif isinstance(spec, HamiltonianSpec):
        matrix, what = spec.JH(), "JH(t)"
    elif isinstance(spec, SecondOrderSpec):
        matrix, what = spec.P, "P(t)"
    else:
        raise InputError(f"cannot recommend a norm for {type(spec).__name__}")
    ts = np.linspace(0.0, matrix.period, samples, endpoint=False)
    mats = matrix(ts)
    normal = [is_normal(M) for M in mats]
    frac_nonnormal = 1.0 - sum(normal) / len(normal)
    integrals = {k.value: norm_integral(MatrixNormGain(matrix, k), matrix.period)
                 for k in (NormKind.EUCLIDEAN, NormKind.SUP, NormKind.ONE)}
    if all(normal):
        rec, reason = "euclidean", f"{what} is normal at every sample; the Euclidean norm is minimal"
    else:
        rec = min(integrals, key=lambda k: (integrals[k], k))
        reason = f"{what} is non-normal at {frac_nonnormal:.1%} of samples; smallest norm integral"
    return {"matrix": what, "recommended": rec, "reason": reason, "all_normal": all(normal),
            "fraction_nonnormal": frac_nonnormal, "integrals": integrals}


# -- thresholds --------------------------------------------------------------------


def certificate_threshold(cert_at, lo: float, hi: float, tol: float = 1e-12) -> float:
    """Largest parameter value at which ``cert_at(value)`` still passes.

    Requires a pass at ``lo`` and a non-pass at ``hi``; bisects on the verdict.
    """
    if cert_at(lo).verdict != PASS:
        raise InputError("certificate must pass at the lower end of the bracket")
    if cert_at(hi).verdict == PASS:
        raise InputError("certificate must not pass at the upper end of the bracket")
    while hi - lo > tol * (1.0 + abs(hi)):
        mid = 0.5 * (lo + hi)
        if cert_at(mid).verdict == PASS:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
