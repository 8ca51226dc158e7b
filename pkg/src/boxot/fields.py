"""Drift and control vector fields.

A :class:`ControlAffineSystem` bundles pointwise evaluators for the dynamics

    dx/dt = g0(x, t) + sum_i u_i * g_i(x)

Evaluators are pure, vectorized over points of shape (N, d), and reentrant.
``make_scenario`` builds the library systems (single integrator, Grushin
plane, periodically forced double gyre, unicycle); user systems go through
the same dataclass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np


class DomainError(ValueError):
    """A point lies outside the system's domain on a non-periodic axis."""


@dataclass(frozen=True)
class ControlAffineSystem:
    """Control-affine dynamics given by pointwise field evaluators.

    ``drift`` is None for driftless systems; control evaluators take (N, d)
    points and return (N, d) velocities.  ``domain``/``periodic`` record the
    natural phase-space box of the scenario (used for defaults and range
    checks, not enforced by the evaluators themselves).
    """

    name: str
    dim: int
    drift: Optional[Callable[[np.ndarray, float], np.ndarray]]
    controls: tuple[Callable[[np.ndarray], np.ndarray], ...]
    labels: tuple[str, ...]
    domain: tuple[tuple[float, float], ...]
    periodic: tuple[bool, ...]
    time_varying: bool = False
    params: dict = field(default_factory=dict)

    @property
    def n_controls(self) -> int:
        return len(self.controls)

    @property
    def driftless(self) -> bool:
        return self.drift is None


@dataclass(frozen=True)
class DoubleGyreParams:
    """Amplitude, forcing strength and angular frequency of the forced gyre."""

    amplitude: float = 0.25
    beta: float = 0.25
    omega: float = 2.0 * math.pi

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega

    def forcing(self, x: np.ndarray, t: float) -> np.ndarray:
        """f(x, t) with f(0, t) = 0 and f(1, t) = 1 for all t."""
        s = self.beta * math.sin(self.omega * t)
        return s * x * x + (1.0 - 2.0 * s) * x

    def forcing_dx(self, x: np.ndarray, t: float) -> np.ndarray:
        s = self.beta * math.sin(self.omega * t)
        return 2.0 * s * x + (1.0 - 2.0 * s)


def _as_points(x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return x[None, :], True
    return x, False


def _constant_field(vec: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    vec = np.asarray(vec, dtype=float)

    def g(x: np.ndarray) -> np.ndarray:
        pts, _ = _as_points(x)
        return np.broadcast_to(vec, pts.shape).copy()

    return g


def _double_gyre_drift(p: DoubleGyreParams):
    def g0(x: np.ndarray, t: float) -> np.ndarray:
        pts, _ = _as_points(x)
        f = p.forcing(pts[:, 0], t)
        dfdx = p.forcing_dx(pts[:, 0], t)
        out = np.empty_like(pts)
        out[:, 0] = -math.pi * p.amplitude * np.sin(math.pi * f) \
            * np.cos(math.pi * pts[:, 1])
        out[:, 1] = math.pi * p.amplitude * np.cos(math.pi * f) \
            * np.sin(math.pi * pts[:, 1]) * dfdx
        return out

    return g0


def _grushin_g2(x: np.ndarray) -> np.ndarray:
    pts, _ = _as_points(x)
    out = np.zeros_like(pts)
    out[:, 1] = pts[:, 0]
    return out


def _unicycle_g2(x: np.ndarray) -> np.ndarray:
    # state ordering (theta, x, y); theta lives on S^1
    pts, _ = _as_points(x)
    out = np.zeros_like(pts)
    out[:, 1] = np.cos(pts[:, 0])
    out[:, 2] = np.sin(pts[:, 0])
    return out


def make_scenario(name: str, **params) -> ControlAffineSystem:
    """Build one of the library systems.

    Known names: ``single_integrator`` (keyword ``dim``), ``grushin``,
    ``double_gyre`` (keywords ``amplitude``, ``beta``, ``omega``) and
    ``unicycle``.
    """
    if name == "single_integrator":
        d = int(params.pop("dim", 2))
        if params:
            raise ValueError(f"unknown parameters for single_integrator: {sorted(params)}")
        if d < 1:
            raise ValueError("dimension must be >= 1")
        controls = tuple(_constant_field(np.eye(d)[i]) for i in range(d))
        return ControlAffineSystem(
            name="single_integrator", dim=d, drift=None, controls=controls,
            labels=tuple(f"u{i + 1}" for i in range(d)),
            domain=((0.0, 1.0),) * d, periodic=(False,) * d,
            params={"dim": d})

    if name == "grushin":
        if params:
            raise ValueError(f"unknown parameters for grushin: {sorted(params)}")
        return ControlAffineSystem(
            name="grushin", dim=2, drift=None,
            controls=(_constant_field([1.0, 0.0]), _grushin_g2),
            labels=("u1", "u2"),
            domain=((-1.0, 1.0), (-1.0, 1.0)), periodic=(False, False))

    if name == "double_gyre":
        p = DoubleGyreParams(
            amplitude=float(params.pop("amplitude", 0.25)),
            beta=float(params.pop("beta", 0.25)),
            omega=float(params.pop("omega", 2.0 * math.pi)))
        if params:
            raise ValueError(f"unknown parameters for double_gyre: {sorted(params)}")
        return ControlAffineSystem(
            name="double_gyre", dim=2, drift=_double_gyre_drift(p),
            controls=(_constant_field([1.0, 0.0]), _constant_field([0.0, 1.0])),
            labels=("u1", "u2"),
            domain=((0.0, 2.0), (0.0, 1.0)), periodic=(False, False),
            time_varying=True,
            params={"amplitude": p.amplitude, "beta": p.beta,
                    "omega": p.omega, "period": p.period})

    if name == "unicycle":
        if params:
            raise ValueError(f"unknown parameters for unicycle: {sorted(params)}")
        return ControlAffineSystem(
            name="unicycle", dim=3, drift=None,
            controls=(_constant_field([1.0, 0.0, 0.0]), _unicycle_g2),
            labels=("steering", "translation"),
            domain=((0.0, 2.0 * math.pi), (0.0, 1.0), (0.0, 1.0)),
            periodic=(True, False, False))

    raise ValueError(f"unknown scenario {name!r}")


def _check_domain(system: ControlAffineSystem, pts: np.ndarray) -> None:
    tol = 1e-12
    for a in range(system.dim):
        if system.periodic[a]:
            continue
        lo, hi = system.domain[a]
        slack = tol * max(1.0, abs(hi - lo))
        if np.any(pts[:, a] < lo - slack) or np.any(pts[:, a] > hi + slack):
            raise DomainError(
                f"coordinate {a} outside [{lo}, {hi}] for system {system.name}")


def _wrap_periodic(system: ControlAffineSystem, pts: np.ndarray) -> np.ndarray:
    pts = pts.copy()
    for a in range(system.dim):
        if system.periodic[a]:
            lo, hi = system.domain[a]
            pts[:, a] = lo + np.mod(pts[:, a] - lo, hi - lo)
    return pts


def evaluate_drift(system: ControlAffineSystem, x, t: float) -> np.ndarray:
    """Drift velocity g0(x, t); zero vector for driftless systems."""
    pts, single = _as_points(x)
    pts = _wrap_periodic(system, pts)
    _check_domain(system, pts)
    out = np.zeros_like(pts) if system.drift is None else system.drift(pts, t)
    if not np.all(np.isfinite(out)):
        raise ValueError(f"non-finite drift value from system {system.name}")
    return out[0] if single else out


def evaluate_control(system: ControlAffineSystem, i: int, x) -> np.ndarray:
    """Control field g_i(x) for channel i in 1..n."""
    if not 1 <= i <= system.n_controls:
        raise ValueError(f"control channel {i} out of range 1..{system.n_controls}")
    pts, single = _as_points(x)
    pts = _wrap_periodic(system, pts)
    _check_domain(system, pts)
    out = system.controls[i - 1](pts)
    if not np.all(np.isfinite(out)):
        raise ValueError(f"non-finite control value from system {system.name}")
    return out[0] if single else out


def sampled_driftless_check(system: ControlAffineSystem, n: int = 512,
                            seed: int = 0) -> bool:
    """Whether g0 evaluates to zero on a dense random sample of the domain."""
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in system.domain])
    hi = np.array([b[1] for b in system.domain])
    pts = lo + rng.random((n, system.dim)) * (hi - lo)
    for t in np.linspace(0.0, 1.0, 5):
        g = np.zeros_like(pts) if system.drift is None else system.drift(pts, t)
        if np.any(np.abs(g) > 1e-14):
            return False
    return True
