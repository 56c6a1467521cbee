"""Dense complex matrix primitives.

Matrices are plain ``numpy`` complex arrays.  The eigenvalue solver and the
matrix exponential are implemented here rather than taken from LAPACK so the
numerical path used by the bounds is fully visible; the batched norm helper
(:func:`mat_norms`) is the one place that leans on ``numpy.linalg`` for
throughput.
"""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericalFailure

EPS = np.finfo(float).eps


class NormKind(str, enum.Enum):
    """Vector norm and the matrix norm it induces."""

    EUCLIDEAN = "euclidean"  # l2 / largest singular value
    SUP = "sup"  # l-inf / max absolute row sum
    ONE = "one"  # l1 / max absolute column sum

    @classmethod
    def parse(cls, value: "NormKind | str") -> "NormKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InputError(
                f"unknown norm {value!r}; expected one of "
                + ", ".join(k.value for k in cls)
            ) from None


ALL_NORMS = (NormKind.EUCLIDEAN, NormKind.SUP, NormKind.ONE)


def as_matrix(A, square: bool = True) -> np.ndarray:
    """Validate and convert ``A`` to a 2-D complex array."""
    M = np.array(A, dtype=complex)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise InputError(f"expected a 2-D matrix, got shape {M.shape}")
    if square and M.shape[0] != M.shape[1]:
        raise InputError(f"matrix must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InputError("matrix has non-finite entries")
    return M


def vec_norm(v, kind: NormKind | str = NormKind.EUCLIDEAN) -> float:
    x = np.asarray(v, dtype=complex).ravel()
    if x.size == 0:
        raise InputError("vector must be nonempty")
    if not np.all(np.isfinite(x)):
        raise InputError("vector has non-finite entries")
    kind = NormKind.parse(kind)
    a = np.abs(x)
    if kind is NormKind.EUCLIDEAN:
        return float(math.sqrt(float(np.sum(a * a))))
    if kind is NormKind.SUP:
        return float(np.max(a))
    return float(np.sum(a))


def vec_norms(V, kind: NormKind | str) -> np.ndarray:
    """Row-wise :func:`vec_norm` for a stack of vectors of shape (m, n)."""
    kind = NormKind.parse(kind)
    a = np.abs(np.asarray(V, dtype=complex))
    if kind is NormKind.EUCLIDEAN:
        return np.sqrt(np.sum(a * a, axis=-1))
    if kind is NormKind.SUP:
        return np.max(a, axis=-1)
    return np.sum(a, axis=-1)


def mat_norm(A, kind: NormKind | str = NormKind.EUCLIDEAN) -> float:
    """Operator norm of ``A`` induced by :func:`vec_norm` of the same kind."""
    M = as_matrix(A)
    kind = NormKind.parse(kind)
    if kind is NormKind.SUP:
        return float(np.max(np.sum(np.abs(M), axis=1)))
    if kind is NormKind.ONE:
        return float(np.max(np.sum(np.abs(M), axis=0)))
    gram = M.conj().T @ M
    gram = 0.5 * (gram + gram.conj().T)
    top = max(ev.real for ev in eigenvalues(gram))
    return math.sqrt(max(top, 0.0))


def mat_norms(As, kind: NormKind | str) -> np.ndarray:
    """Induced norms of a stack of matrices with shape (m, n, n)."""
    kind = NormKind.parse(kind)
    S = np.asarray(As, dtype=complex)
    if kind is NormKind.SUP:
        return np.max(np.sum(np.abs(S), axis=-1), axis=-1)
    if kind is NormKind.ONE:
        return np.max(np.sum(np.abs(S), axis=-2), axis=-1)
    return np.linalg.norm(S, ord=2, axis=(-2, -1))


# -- eigenvalues ------------------------------------------------------------


def _eig2(a: complex, b: complex, c: complex, d: complex) -> tuple[complex, complex]:
    m = 0.5 * (a + d)
    disc = cmath.sqrt((0.5 * (a - d)) ** 2 + b * c)
    l1, l2 = m + disc, m - disc
    big, small = (l1, l2) if abs(l1) >= abs(l2) else (l2, l1)
    # recover the smaller root from the determinant when m +- disc cancels
    if big != 0 and abs(small) < 0.5 * abs(big):
        small = (a * d - b * c) / big
    return big, small


def _hessenberg(h: list[list[complex]]) -> None:
    """In-place Householder reduction to upper Hessenberg form."""
    n = len(h)
    for k in range(n - 2):
        x = [h[i][k] for i in range(k + 1, n)]
        alpha = math.sqrt(sum(abs(xi) ** 2 for xi in x))
        if alpha == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = list(x)
        v[0] += phase * alpha
        vv = sum(abs(vi) ** 2 for vi in v)
        if vv == 0.0:
            continue
        f = 2.0 / vv
        for j in range(k, n):
            s = sum(v[i].conjugate() * h[k + 1 + i][j] for i in range(len(v)))
            if s != 0:
                s *= f
                for i in range(len(v)):
                    h[k + 1 + i][j] -= v[i] * s
        for r in range(n):
            row = h[r]
            s = sum(row[k + 1 + i] * v[i] for i in range(len(v)))
            if s != 0:
                s *= f
                for i in range(len(v)):
                    row[k + 1 + i] -= s * v[i].conjugate()
        for i in range(k + 2, n):
            h[i][k] = 0j


def _givens(a: complex, b: complex) -> tuple[float, complex]:
    if b == 0:
        return 1.0, 0j
    if a == 0:
        return 0.0, 1.0 + 0j
    r = math.hypot(abs(a), abs(b))
    return abs(a) / r, (a / abs(a)) * b.conjugate() / r


def _hqr(h: list[list[complex]], anorm: float) -> list[complex]:
    n = len(h)
    cap = 100 * n
    eigs: list[complex] = []
    hi = n - 1
    its = total = 0
    while hi >= 0:
        if hi == 0:
            eigs.append(h[0][0])
            break
        l = hi
        while l > 0:
            s = abs(h[l - 1][l - 1]) + abs(h[l][l])
            if s == 0.0:
                s = anorm
            if abs(h[l][l - 1]) <= EPS * s:
                h[l][l - 1] = 0j
                break
            l -= 1
        if l == hi:
            eigs.append(h[hi][hi])
            hi -= 1
            its = 0
            continue
        if l == hi - 1:
            eigs.extend(_eig2(h[l][l], h[l][hi], h[hi][l], h[hi][hi]))
            hi -= 2
            its = 0
            continue
        total += 1
        if total > cap:
            raise NumericalFailure(f"QR iteration did not converge in {cap} sweeps")
        its += 1
        if its % 10 == 0:
            mu = h[hi][hi] + abs(h[hi][hi - 1]) + abs(h[hi - 1][hi - 2])
        else:
            e1, e2 = _eig2(h[hi - 1][hi - 1], h[hi - 1][hi], h[hi][hi - 1], h[hi][hi])
            mu = e1 if abs(e1 - h[hi][hi]) <= abs(e2 - h[hi][hi]) else e2
        for i in range(l, hi + 1):
            h[i][i] -= mu
        rots = []
        for k in range(l, hi):
            c, s = _givens(h[k][k], h[k + 1][k])
            sc = s.conjugate()
            rk, rk1 = h[k], h[k + 1]
            for j in range(k, hi + 1):
                x, y = rk[j], rk1[j]
                rk[j] = c * x + s * y
                rk1[j] = -sc * x + c * y
            rots.append((c, s, sc))
        for k, (c, s, sc) in enumerate(rots, start=l):
            for i in range(l, min(k + 1, hi) + 1):
                row = h[i]
                x, y = row[k], row[k + 1]
                row[k] = c * x + sc * y
                row[k + 1] = -s * x + c * y
        for i in range(l, hi + 1):
            h[i][i] += mu
    return eigs


def eigenvalues(A) -> np.ndarray:
    """All eigenvalues of a square matrix, with algebraic multiplicity.

    Closed form for ``n <= 2``; otherwise Householder reduction to Hessenberg
    form followed by Wilkinson-shifted complex QR with deflation.  Raises
    :class:`NumericalFailure` if QR needs more than ``100 n`` sweeps.
    Eigenvalues are returned sorted by (real, imag) for reproducibility.
    """
    M = as_matrix(A)
    n = M.shape[0]
    if n == 1:
        ev = [complex(M[0, 0])]
    elif n == 2:
        ev = list(_eig2(*(complex(x) for x in M.ravel())))
    else:
        h = [[complex(x) for x in row] for row in M.tolist()]
        anorm = float(np.max(np.sum(np.abs(M), axis=1))) or 1.0
        _hessenberg(h)
        ev = _hqr(h, anorm)
    return np.array(sorted(ev, key=lambda z: (z.real, z.imag)), dtype=complex)


def spectral_radius(A) -> float:
    return float(np.max(np.abs(eigenvalues(A))))


# -- matrix exponential -----------------------------------------------------

_PADE = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0, 960960.0,
         16380.0, 182.0, 1.0),
}
# one-norm thresholds for backward error below unit roundoff (Higham 2005)
_THETA = {3: 1.495585217958292e-2, 5: 2.539398330063230e-1,
          7: 9.504178996162932e-1, 9: 2.097847961257068e0,
          13: 5.371920351148152e0}


def _pade_uv(A: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    b = _PADE[m]
    ident = np.broadcast_to(np.eye(A.shape[-1], dtype=complex), A.shape)
    A2 = A @ A
    if m == 13:
        A4 = A2 @ A2
        A6 = A4 @ A2
        U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
                 + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
        V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
             + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
        return U, V
    powers = [ident, A2]
    for _ in range(2, m // 2 + 1):
        powers.append(powers[-1] @ A2)
    U = sum(b[2 * j + 1] * powers[j] for j in range(m // 2 + 1))
    V = sum(b[2 * j] * powers[j] for j in range(m // 2 + 1))
    return A @ U, V


def expm(A) -> np.ndarray:
    """Matrix exponential by scaling and squaring with diagonal Pade approximants.

    Accepts a single square matrix or a stack of shape (m, n, n); for a stack
    the approximant degree and scaling are chosen from the largest one-norm.
    """
    M = np.array(A, dtype=complex)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise InputError(f"matrix must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InputError("matrix has non-finite entries")
    norm1 = float(np.max(np.sum(np.abs(M), axis=-2))) if M.size else 0.0
    s = 0
    for m in (3, 5, 7, 9):
        if norm1 <= _THETA[m]:
            break
    else:
        m = 13
        if norm1 > _THETA[13]:
            s = int(math.ceil(math.log2(norm1 / _THETA[13])))
            M = M / 2.0 ** s
    U, V = _pade_uv(M, m)
    X = np.linalg.solve(V - U, V + U)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(s):
            X = X @ X
    if not np.all(np.isfinite(X)):
        raise NumericalFailure("matrix exponential overflowed")
    return X


# -- normality and norm comparison ------------------------------------------


def is_normal(A, tol: float = 1e-12) -> bool:
    M = as_matrix(A)
    if tol <= 0:
        raise InputError("tol must be positive")
    comm = M @ M.conj().T - M.conj().T @ M
    scale = mat_norm(M, NormKind.EUCLIDEAN)
    return mat_norm(comm, NormKind.EUCLIDEAN) <= tol * (1.0 + scale * scale)


@dataclass(frozen=True)
class NormReport:
    euclidean: float
    sup: float
    one: float
    normal: bool
    # None unless the matrix is normal
    euclidean_minimal: bool | None

    def as_dict(self) -> dict:
        return {
            "euclidean": self.euclidean,
            "sup": self.sup,
            "one": self.one,
            "normal": self.normal,
            "euclidean_minimal": self.euclidean_minimal,
        }


def norm_comparison(A, tol: float = 1e-12) -> NormReport:
    M = as_matrix(A)
    e, s, o = (mat_norm(M, k) for k in ALL_NORMS)
    normal = is_normal(M, tol)
    minimal = None
    if normal:
        slack = tol * (1.0 + e)
        minimal = e <= s + slack and e <= o + slack
    return NormReport(e, s, o, normal, minimal)
