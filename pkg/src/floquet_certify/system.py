"""Periodic systems as trigonometric matrix polynomials, gain functions and the
JSON system-file format.

A system matrix is stored as::

    A(t) = A0 + sum_k M_k cos(2 pi k t / T) + sum_k N_k sin(2 pi k t / T)

which is T-periodic by construction.  Evaluation is vectorized: passing an
array of times returns a stack of matrices.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .errors import InputError
from .linalg import NormKind, mat_norm, mat_norms

GAIN_CHECK_POINTS = 4096
POSITIVITY_CHECK_POINTS = 1024


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def _check_terms(terms, n: int, label: str) -> tuple[tuple[int, np.ndarray], ...]:
    out = []
    seen = set()
    for k, M in terms:
        if int(k) != k or k < 1:
            raise InputError(f"{label}: harmonic must be a positive integer, got {k!r}")
        k = int(k)
        if k in seen:
            raise InputError(f"{label}: harmonic {k} listed twice")
        seen.add(k)
        M = _frozen(M)
        if M.shape != (n, n):
            raise InputError(f"{label}[k={k}]: expected {n}x{n} matrix, got shape {M.shape}")
        if not np.all(np.isfinite(M)):
            raise InputError(f"{label}[k={k}]: non-finite entries")
        out.append((k, M))
    return tuple(sorted(out, key=lambda kv: kv[0]))


@dataclass(frozen=True, eq=False)
class TrigMatrixFunction:
    period: float
    A0: np.ndarray
    cos_terms: tuple[tuple[int, np.ndarray], ...] = ()
    sin_terms: tuple[tuple[int, np.ndarray], ...] = ()

    def __post_init__(self):
        if not (math.isfinite(self.period) and self.period > 0):
            raise InputError("period must be positive")
        A0 = _frozen(self.A0)
        if A0.ndim != 2 or A0.shape[0] != A0.shape[1] or A0.shape[0] < 1:
            raise InputError(f"matrix must be square, got shape {A0.shape}")
        if not np.all(np.isfinite(A0)):
            raise InputError("A0 has non-finite entries")
        object.__setattr__(self, "period", float(self.period))
        object.__setattr__(self, "A0", A0)
        n = A0.shape[0]
        object.__setattr__(self, "cos_terms", _check_terms(self.cos_terms, n, "cos"))
        object.__setattr__(self, "sin_terms", _check_terms(self.sin_terms, n, "sin"))

    @classmethod
    def constant(cls, A, period: float) -> "TrigMatrixFunction":
        return cls(period, np.atleast_2d(np.asarray(A, dtype=complex)))

    @property
    def n(self) -> int:
        return self.A0.shape[0]

    @property
    def omega(self) -> float:
        return 2.0 * math.pi / self.period

    @property
    def is_constant(self) -> bool:
        return not any(np.any(M) for _, M in self.cos_terms + self.sin_terms)

    def __call__(self, t):
        """A(t) for scalar ``t`` (n x n) or an array of times (m x n x n)."""
        scalar = np.ndim(t) == 0
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.broadcast_to(self.A0, (ts.size,) + self.A0.shape).copy()
        w = self.omega
        for k, M in self.cos_terms:
            out += np.cos(k * w * ts)[:, None, None] * M
        for k, M in self.sin_terms:
            out += np.sin(k * w * ts)[:, None, None] * M
        return out[0] if scalar else out

    def map(self, f: Callable[[np.ndarray], np.ndarray], constant=None) -> "TrigMatrixFunction":
        """Apply a linear map to every coefficient.

        ``constant`` (if given) replaces ``f(A0)`` for maps with an affine part.
        """
        A0 = f(self.A0) if constant is None else constant
        return TrigMatrixFunction(
            self.period,
            A0,
            tuple((k, f(M)) for k, M in self.cos_terms),
            tuple((k, f(M)) for k, M in self.sin_terms),
        )

    def scaled(self, s: complex) -> "TrigMatrixFunction":
        return self.map(lambda M: s * M)

    def with_period(self, period: float) -> "TrigMatrixFunction":
        return TrigMatrixFunction(period, self.A0, self.cos_terms, self.sin_terms)

    def trace_integral(self, t: float) -> complex:
        """Exact value of the integral of tr A(s) over [0, t]."""
        w = self.omega
        total = complex(np.trace(self.A0)) * t
        for k, M in self.cos_terms:
            total += complex(np.trace(M)) * math.sin(k * w * t) / (k * w)
        for k, M in self.sin_terms:
            total += complex(np.trace(M)) * (1.0 - math.cos(k * w * t)) / (k * w)
        return total

    def coefficients(self) -> Iterable[np.ndarray]:
        yield self.A0
        for _, M in self.cos_terms + self.sin_terms:
            yield M

    def is_real(self) -> bool:
        return all(not np.any(M.imag) for M in self.coefficients())

    def is_symmetric(self) -> bool:
        return all(np.array_equal(M, M.T) for M in self.coefficients())


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """The linear system z^(r) = A(t) z with a chosen norm."""

    matrix: TrigMatrixFunction
    order: int = 1
    norm: NormKind = NormKind.EUCLIDEAN

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise InputError(f"order must be an integer >= 1, got {self.order!r}")
        object.__setattr__(self, "order", int(self.order))
        object.__setattr__(self, "norm", NormKind.parse(self.norm))

    @classmethod
    def constant(cls, A, period: float, order: int = 1, norm=NormKind.EUCLIDEAN):
        return cls(TrigMatrixFunction.constant(A, period), order, norm)

    @property
    def n(self) -> int:
        return self.matrix.n

    @property
    def period(self) -> float:
        return self.matrix.period

    def with_norm(self, norm) -> "SystemSpec":
        return SystemSpec(self.matrix, self.order, NormKind.parse(norm))

    def with_period(self, period: float) -> "SystemSpec":
        return SystemSpec(self.matrix.with_period(period), self.order, self.norm)


def eval_matrix(spec: SystemSpec | TrigMatrixFunction, t):
    m = spec.matrix if isinstance(spec, SystemSpec) else spec
    return m(t)


def companion_lift(spec: SystemSpec, c: float = 1.0) -> SystemSpec:
    """First-order form of z^(r) = A(t) z with scaling parameter ``c``.

    Uses v_1 = z and v_k = z^(k-1) / c^(k-1), so that v_{k-1}' = c v_k and
    v_r' = c^(1-r) A(t) v_1.  The result has dimension n*r.
    """
    if not (c > 0 and math.isfinite(c)):
        raise InputError(f"lift parameter c must be positive, got {c!r}")
    r, n = spec.order, spec.n
    if r == 1:
        return spec
    shift = np.zeros((n * r, n * r), dtype=complex)
    for k in range(r - 1):
        shift[k * n:(k + 1) * n, (k + 1) * n:(k + 2) * n] = c * np.eye(n)
    scale = c ** (1 - r)

    def place(M: np.ndarray) -> np.ndarray:
        V = np.zeros((n * r, n * r), dtype=complex)
        V[(r - 1) * n:, :n] = scale * M
        return V

    lifted = spec.matrix.map(place, constant=shift + place(spec.matrix.A0))
    return SystemSpec(lifted, 1, spec.norm)


# -- gain functions -----------------------------------------------------------


class Gain:
    """A nonnegative periodic scalar function of time (vectorized)."""

    period: float
    source: str = "explicit"

    def __call__(self, t):  # pragma: no cover - interface
        raise NotImplementedError

    def sample_range(self, points: int = GAIN_CHECK_POINTS) -> tuple[float, float]:
        ts = np.linspace(0.0, self.period, points, endpoint=False)
        vals = np.asarray(self(ts), dtype=float)
        return float(vals.min()), float(vals.max())

    def describe(self) -> dict:  # pragma: no cover - interface
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class GainFunction(Gain):
    """Explicit gain g(t) = g0 + sum a_k cos(2 pi k t/T) + sum b_k sin(2 pi k t/T)."""

    period: float
    g0: float
    cos_terms: tuple[tuple[int, float], ...] = ()
    sin_terms: tuple[tuple[int, float], ...] = ()
    source: str = field(default="explicit", init=False)

    def __post_init__(self):
        if not (math.isfinite(self.period) and self.period > 0):
            raise InputError("period must be positive")
        object.__setattr__(self, "period", float(self.period))
        object.__setattr__(self, "g0", float(self.g0))
        for label in ("cos_terms", "sin_terms"):
            terms, seen = [], set()
            for k, a in getattr(self, label):
                if int(k) != k or k < 1 or k in seen:
                    raise InputError(f"{label}: harmonics must be distinct positive integers")
                seen.add(int(k))
                terms.append((int(k), float(a)))
            object.__setattr__(self, label, tuple(sorted(terms)))
        lo = float(np.min(self.raw(np.linspace(0.0, self.period, GAIN_CHECK_POINTS, endpoint=False))))
        scale = abs(self.g0) + sum(abs(a) for _, a in self.cos_terms + self.sin_terms)
        if lo < -1e-12 * (1.0 + scale):
            raise InputError(f"gain must be nonnegative; sampled minimum {lo:.6g}")

    @classmethod
    def constant(cls, value: float, period: float = 2 * math.pi) -> "GainFunction":
        return cls(period, value)

    def raw(self, t) -> np.ndarray:
        """The trigonometric sum itself, without clipping at zero."""
        ts = np.asarray(t, dtype=float)
        w = 2.0 * math.pi / self.period
        out = np.full(ts.shape, self.g0)
        for k, a in self.cos_terms:
            out = out + a * np.cos(k * w * ts)
        for k, b in self.sin_terms:
            out = out + b * np.sin(k * w * ts)
        return out

    def __call__(self, t):
        out = np.maximum(self.raw(t), 0.0)  # clip round-off below zero
        return float(out) if out.ndim == 0 else out

    def exact_integral(self, t: float) -> float:
        """Closed-form antiderivative evaluated at ``t`` (from 0)."""
        w = 2.0 * math.pi / self.period
        total = self.g0 * t
        for k, a in self.cos_terms:
            total += a * math.sin(k * w * t) / (k * w)
        for k, b in self.sin_terms:
            total += b * (1.0 - math.cos(k * w * t)) / (k * w)
        return total

    def scaled(self, s: float) -> "GainFunction":
        return GainFunction(
            self.period,
            s * self.g0,
            tuple((k, s * a) for k, a in self.cos_terms),
            tuple((k, s * b) for k, b in self.sin_terms),
        )

    def with_period(self, period: float) -> "GainFunction":
        return GainFunction(period, self.g0, self.cos_terms, self.sin_terms)

    def describe(self) -> dict:
        return {
            "source": "explicit",
            "period": self.period,
            "g0": self.g0,
            "cos": [[k, a] for k, a in self.cos_terms],
            "sin": [[k, b] for k, b in self.sin_terms],
        }


class MatrixNormGain(Gain):
    """g(t) = ||A(t)|| for a trig matrix function, evaluated on demand."""

    source = "matrix_norm"

    def __init__(self, matrix: TrigMatrixFunction | SystemSpec, kind: NormKind | str | None = None):
        if isinstance(matrix, SystemSpec):
            kind = matrix.norm if kind is None else kind
            matrix = matrix.matrix
        self.matrix = matrix
        self.kind = NormKind.parse(kind or NormKind.EUCLIDEAN)
        self.period = matrix.period

    def __call__(self, t):
        if np.ndim(t) == 0:
            return mat_norm(self.matrix(float(t)), self.kind)
        ts = np.asarray(t, dtype=float)
        flat = ts.ravel()
        out = np.empty(flat.size)
        chunk = 1 << 15
        for i in range(0, flat.size, chunk):
            out[i:i + chunk] = mat_norms(self.matrix(flat[i:i + chunk]), self.kind)
        return out.reshape(ts.shape)

    def describe(self) -> dict:
        return {"source": "matrix_norm", "norm": self.kind.value,
                "matrix": _matrix_function_fields(self.matrix)}


class LiftedGain(Gain):
    """t -> max(c, c^(1-r) g(t)): the norm of the order-r companion lift."""

    def __init__(self, base: Gain, order: int, c: float):
        if not (c > 0 and math.isfinite(c)):
            raise InputError(f"lift parameter c must be positive, got {c!r}")
        self.base = base
        self.order = int(order)
        self.c = float(c)
        self.period = base.period
        self.source = f"lifted({base.source})"

    def __call__(self, t):
        g = self.base(t)
        return np.maximum(self.c, self.c ** (1 - self.order) * np.asarray(g)) if np.ndim(g) \
            else max(self.c, self.c ** (1 - self.order) * g)

    def describe(self) -> dict:
        return {"source": "lifted", "order": self.order, "c": self.c, "base": self.base.describe()}


class ScaledGain(Gain):
    """s * g(t); used for scaling-law checks on arbitrary gains."""

    def __init__(self, base: Gain, s: float):
        self.base, self.s = base, float(s)
        self.period = base.period
        self.source = base.source

    def __call__(self, t):
        return self.s * self.base(t)

    def describe(self) -> dict:
        return {"source": "scaled", "s": self.s, "base": self.base.describe()}


def matrix_gain(spec: SystemSpec, kind=None) -> MatrixNormGain:
    return MatrixNormGain(spec.matrix, spec.norm if kind is None else kind)


def lifted_gain(spec: SystemSpec | Gain, c: float, order: int | None = None) -> Gain:
    """Gain of the companion lift, max(c, c^(1-r) ||A(t)||); for r = 1 just ||A(t)||."""
    if isinstance(spec, SystemSpec):
        base, r = matrix_gain(spec), spec.order if order is None else order
    else:
        base, r = spec, 1 if order is None else order
    if not (c > 0 and math.isfinite(c)):
        raise InputError(f"lift parameter c must be positive, got {c!r}")
    return base if r == 1 else LiftedGain(base, r, c)


def eval_gain(g: Gain, t: float) -> float:
    v = float(g(float(t)))
    if not math.isfinite(v) or v < 0:
        raise InputError(f"invalid gain value {v!r} at t={t!r}")
    return v


# -- Hamiltonian and second-order systems ------------------------------------


def symplectic_j(n: int) -> np.ndarray:
    """J = [[0, -I], [I, 0]] of size 2n."""
    J = np.zeros((2 * n, 2 * n))
    J[:n, n:] = -np.eye(n)
    J[n:, :n] = np.eye(n)
    return J


def _check_real_symmetric_positive(m: TrigMatrixFunction, what: str, label: str):
    if not m.is_real():
        raise InputError(f"{label} must be real")
    if not m.is_symmetric():
        raise InputError(f"{label} must be symmetric ({what})")
    ts = np.linspace(0.0, m.period, POSITIVITY_CHECK_POINTS, endpoint=False)
    low = float(np.min(np.linalg.eigvalsh(m(ts).real)))
    if not low > 0:
        raise InputError(f"{label} must be positive definite ({what}); "
                         f"smallest sampled eigenvalue {low:.6g}")


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    """x' = J H(t) x with H real symmetric positive definite, 2n x 2n."""

    H: TrigMatrixFunction
    norm: NormKind = NormKind.EUCLIDEAN

    def __post_init__(self):
        object.__setattr__(self, "norm", NormKind.parse(self.norm))
        if self.H.n % 2:
            raise InputError(f"Hamiltonian matrix must have even dimension, got {self.H.n}")
        _check_real_symmetric_positive(self.H, "H(t) = H(t)^T > 0", "H")

    @property
    def period(self) -> float:
        return self.H.period

    @property
    def n(self) -> int:
        return self.H.n // 2

    @property
    def J(self) -> np.ndarray:
        return symplectic_j(self.n)

    def JH(self) -> TrigMatrixFunction:
        J = self.J
        return self.H.map(lambda M: J @ M)

    def system(self) -> SystemSpec:
        return SystemSpec(self.JH(), 1, self.norm)

    def with_period(self, period: float) -> "HamiltonianSpec":
        return HamiltonianSpec(self.H.with_period(period), self.norm)

    def scaled(self, s: float) -> "HamiltonianSpec":
        return HamiltonianSpec(self.H.scaled(s), self.norm)


@dataclass(frozen=True, eq=False)
class SecondOrderSpec:
    """x'' + P(t) x = 0 with P real symmetric positive definite."""

    P: TrigMatrixFunction
    norm: NormKind = NormKind.EUCLIDEAN

    def __post_init__(self):
        object.__setattr__(self, "norm", NormKind.parse(self.norm))
        _check_real_symmetric_positive(self.P, "P(t) = P(t)^T > 0", "P")

    @property
    def period(self) -> float:
        return self.P.period

    @property
    def n(self) -> int:
        return self.P.n

    def to_hamiltonian(self) -> HamiltonianSpec:
        """H(t) = diag(I, P(t)) acting on the state (x', x)."""
        n = self.n

        def embed(M):
            H = np.zeros((2 * n, 2 * n), dtype=complex)
            H[n:, n:] = M
            return H

        ident = np.zeros((2 * n, 2 * n), dtype=complex)
        ident[:n, :n] = np.eye(n)
        H = self.P.map(embed, constant=ident + embed(self.P.A0))
        return HamiltonianSpec(H, self.norm)

    def with_period(self, period: float) -> "SecondOrderSpec":
        return SecondOrderSpec(self.P.with_period(period), self.norm)


# -- file format ----------------------------------------------------------------

KINDS = ("linear", "second-order", "hamiltonian", "gain")
_COMMON_KEYS = {"kind", "period", "norm", "description"}
_KIND_KEYS = {
    "linear": {"n", "order", "A0", "cos", "sin"},
    "second-order": {"P0", "cos", "sin"},
    "hamiltonian": {"H0", "cos", "sin"},
    "gain": {"g0", "cos", "sin"},
}


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InputError(f"{where}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise InputError(f"{where}: number must be finite")
    return float(value)


def _integer(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise InputError(f"{where}: expected an integer, got {value!r}")
    return value


def _parse_matrix(value, where: str) -> np.ndarray:
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        raise InputError(f"{where}: a matrix must be a nonempty array of rows")
    width = len(value[0])
    rows = []
    for i, row in enumerate(value):
        if len(row) != width:
            raise InputError(f"{where}: row {i} has {len(row)} entries, expected {width}")
        parsed = []
        for j, x in enumerate(row):
            cell = f"{where}[{i}][{j}]"
            if isinstance(x, list):
                if len(x) != 2:
                    raise InputError(f"{cell}: complex entry must be [re, im]")
                parsed.append(complex(_number(x[0], cell), _number(x[1], cell)))
            else:
                parsed.append(complex(_number(x, cell), 0.0))
        rows.append(parsed)
    M = np.array(rows, dtype=complex)
    if M.shape[0] != M.shape[1]:
        raise InputError(f"{where}: matrix must be square, got {M.shape[0]}x{M.shape[1]}")
    return M


def _parse_terms(doc: dict, key: str, coef: str, parse_coef) -> list:
    raw = doc.get(key, [])
    if not isinstance(raw, list):
        raise InputError(f"{key}: expected an array")
    out = []
    for i, item in enumerate(raw):
        where = f"{key}[{i}]"
        if not isinstance(item, dict) or set(item) != {"k", coef}:
            raise InputError(f"{where}: expected an object with fields 'k' and '{coef}'")
        k = _integer(item["k"], f"{where}.k")
        if k < 1:
            raise InputError(f"{where}.k: harmonic must be >= 1")
        out.append((k, parse_coef(item[coef], f"{where}.{coef}")))
    return out


def _matrix_function(doc: dict, key0: str, period: float, n: int | None = None) -> TrigMatrixFunction:
    if key0 not in doc:
        raise InputError(f"missing field '{key0}'")
    A0 = _parse_matrix(doc[key0], key0)
    if n is not None and A0.shape[0] != n:
        raise InputError(f"{key0}: expected {n}x{n} matrix (n = {n}), got {A0.shape[0]}x{A0.shape[0]}")
    cos = _parse_terms(doc, "cos", "M", _parse_matrix)
    sin = _parse_terms(doc, "sin", "M", _parse_matrix)
    return TrigMatrixFunction(period, A0, cos, sin)


def parse_system_file(text: bytes | str):
    """Parse a system file into SystemSpec, GainFunction, HamiltonianSpec or SecondOrderSpec."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise InputError(f"file is not valid UTF-8: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise InputError("top level must be a JSON object")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise InputError(f"kind: expected one of {', '.join(KINDS)}, got {kind!r}")
    unknown = set(doc) - _COMMON_KEYS - _KIND_KEYS[kind]
    if unknown:
        raise InputError(f"unknown field(s) for kind={kind}: {', '.join(sorted(unknown))}")
    if "period" not in doc:
        raise InputError("missing field 'period'")
    period = _number(doc["period"], "period")
    if period <= 0:
        raise InputError("period must be positive")
    norm = NormKind.parse(doc.get("norm", "euclidean"))

    if kind == "gain":
        if "g0" not in doc:
            raise InputError("missing field 'g0'")
        g0 = _number(doc["g0"], "g0")
        cos = _parse_terms(doc, "cos", "a", _number)
        sin = _parse_terms(doc, "sin", "b", _number)
        return GainFunction(period, g0, cos, sin)
    if kind == "linear":
        if "n" not in doc:
            raise InputError("missing field 'n'")
        n = _integer(doc["n"], "n")
        if n < 1:
            raise InputError("n: must be >= 1")
        order = _integer(doc.get("order", 1), "order")
        if order < 1:
            raise InputError("order: must be >= 1")
        return SystemSpec(_matrix_function(doc, "A0", period, n), order, norm)
    if kind == "second-order":
        return SecondOrderSpec(_matrix_function(doc, "P0", period), norm)
    return HamiltonianSpec(_matrix_function(doc, "H0", period), norm)


def _entry(z: complex):
    z = complex(z)
    return z.real if z.imag == 0 else [z.real, z.imag]


def _matrix_json(M: np.ndarray) -> list:
    return [[_entry(z) for z in row] for row in np.asarray(M)]


def _matrix_function_fields(m: TrigMatrixFunction, key0: str = "A0") -> dict:
    return {
        key0: _matrix_json(m.A0),
        "cos": [{"k": k, "M": _matrix_json(M)} for k, M in m.cos_terms],
        "sin": [{"k": k, "M": _matrix_json(M)} for k, M in m.sin_terms],
    }


def system_to_dict(obj) -> dict:
    if isinstance(obj, GainFunction):
        return {
            "kind": "gain",
            "period": obj.period,
            "g0": obj.g0,
            "cos": [{"k": k, "a": a} for k, a in obj.cos_terms],
            "sin": [{"k": k, "b": b} for k, b in obj.sin_terms],
        }
    if isinstance(obj, SystemSpec):
        doc = {"kind": "linear", "period": obj.period, "norm": obj.norm.value,
               "n": obj.n, "order": obj.order}
        doc.update(_matrix_function_fields(obj.matrix, "A0"))
        return doc
    if isinstance(obj, SecondOrderSpec):
        doc = {"kind": "second-order", "period": obj.period, "norm": obj.norm.value}
        doc.update(_matrix_function_fields(obj.P, "P0"))
        return doc
    if isinstance(obj, HamiltonianSpec):
        doc = {"kind": "hamiltonian", "period": obj.period, "norm": obj.norm.value}
        doc.update(_matrix_function_fields(obj.H, "H0"))
        return doc
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def serialize_system(obj) -> str:
    return json.dumps(system_to_dict(obj), indent=2) + "\n"
