"""Continuous phases of trajectory components and the oscillatory/non-oscillatory
classification of periodic solutions.

A periodic solution is oscillatory when the continuously tracked argument of
some component spans at least pi over one period, i.e. that component does
not stay inside any open half-plane.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericalFailure
from .ode import Trajectory

DEFAULT_FLOOR = 1e-10
DEFAULT_TOL = 1e-6

OSCILLATORY = "oscillatory"
NON_OSCILLATORY = "non_oscillatory"
INDETERMINATE = "indeterminate"


@dataclass(frozen=True, eq=False)
class PhasePath:
    k: int
    phi: np.ndarray
    min_modulus: float
    valid: bool = True

    @property
    def span(self) -> float:
        return float(np.max(self.phi) - np.min(self.phi))


def unwrap_phase(samples, modulus_floor: float | None = None, k: int = 0) -> PhasePath:
    """Continue arg z along ``samples`` starting from its principal value.

    A sample below ``modulus_floor`` (default 1e-10 times the largest modulus)
    leaves the phase undefined there; the path is then marked invalid.  On a
    valid path a step whose principal increment reaches pi/2 raises
    :class:`NumericalFailure` so the caller can refine the grid.
    """
    z = np.asarray(samples, dtype=complex).ravel()
    if z.size == 0:
        raise InputError("samples must be nonempty")
    mod = np.abs(z)
    top = float(mod.max())
    floor = DEFAULT_FLOOR * top if modulus_floor is None else modulus_floor
    min_mod = float(mod.min())
    valid = top > 0 and min_mod >= floor
    steps = np.angle(z[1:] * np.conj(z[:-1]))
    phi = np.concatenate(([np.angle(z[0])], np.angle(z[0]) + np.cumsum(steps)))
    if valid and steps.size and np.max(np.abs(steps)) >= 0.5 * math.pi:
        raise NumericalFailure(f"component {k}: phase step of {np.max(np.abs(steps)):.3f} rad; refine the grid")
    return PhasePath(k, phi, min_mod, bool(valid))


@dataclass(frozen=True)
class OscillationVerdict:
    verdict: str
    witness_k: int | None
    phase_span: float
    spans: tuple = field(default=())  # per component; nan where undefined

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "witness_k": self.witness_k,
            "phase_span": self.phase_span,
            "spans": list(self.spans),
        }


def classify(traj: Trajectory, tol: float = DEFAULT_TOL,
             modulus_floor: float | None = None) -> OscillationVerdict:
    """Classify a trajectory covering one period.

    Components that vanish identically are ignored; a component whose
    modulus drops below the floor makes the verdict indeterminate unless some
    other component already proves oscillation.
    """
    z = np.asarray(traj.z)
    if z.ndim == 1:
        z = z[:, None]
    spans = []
    undefined = False
    for k in range(z.shape[1]):
        comp = z[:, k]
        if not np.any(comp):
            spans.append(float("nan"))
            continue
        try:
            path = unwrap_phase(comp, modulus_floor, k)
        except NumericalFailure:
            spans.append(float("nan"))
            undefined = True
            continue
        if not path.valid:
            undefined = True
            spans.append(float("nan"))
            continue
        spans.append(path.span)
    defined = [(s, k) for k, s in enumerate(spans) if not math.isnan(s)]
    best, best_k = max(defined) if defined else (float("nan"), None)
    if defined and best >= math.pi - tol:
        return OscillationVerdict(OSCILLATORY, best_k, best, tuple(spans))
    if undefined or not defined:
        return OscillationVerdict(INDETERMINATE, None, best, tuple(spans))
    return OscillationVerdict(NON_OSCILLATORY, None, best, tuple(spans))


def mean_value(traj: Trajectory) -> np.ndarray:
    """Trapezoid-rule mean of each component over the trajectory's time span."""
    z = np.asarray(traj.z)
    if z.ndim == 1:
        z = z[:, None]
    span = float(traj.t[-1] - traj.t[0])
    if span <= 0:
        raise InputError("trajectory must cover a positive time span")
    return np.trapezoid(z, traj.t, axis=0) / span


def zero_mean_components(traj: Trajectory, tol: float = 1e-8) -> list[int]:
    """Components whose mean vanishes while the component itself does not.

    Such a component cannot lie in an open half-plane, so the solution is
    oscillatory.
    """
    mean = mean_value(traj)
    z = np.asarray(traj.z).reshape(len(traj.t), -1)
    amp = np.max(np.abs(z), axis=0)
    return [k for k in range(z.shape[1]) if amp[k] > 0 and abs(mean[k]) < tol * amp[k]]
