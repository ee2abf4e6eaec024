"""Fixed-step RK4 and adaptive Dormand-Prince integration with chart upkeep.

The integrators work on a flat vector ``z`` supplied by a phase-space
adapter.  After every accepted step the adapter normalizes ``z`` (rotation
blocks are re-projected onto SO(3)) and rebuilds the state, so ``pW`` is
always recomputed from the constraint and never integrated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from . import _kernels
from .chaplygin import ReducedChart, reduced_vector_field
from .geometry import ChartDomainError, CoVector
from .symmetry import gauge_momenta
from .system import (
    MState,
    NonholonomicSystem,
    constraint_residual,
    hamel_vector_field,
    hamiltonian_M,
)


class DomainExitError(RuntimeError):
    def __init__(self, time: float, message: str = ""):
        super().__init__(f"trajectory left the chart domain at t = {time:.6g}"
                         + (f": {message}" if message else ""))
        self.time = time


# ---------------------------------------------------------------------------
# phase-space adapters
# ---------------------------------------------------------------------------

class PhaseSpace:
    """Interface: flatten states, evaluate the vector field, maintain the chart."""

    def to_z(self, state) -> np.ndarray:
        raise NotImplementedError

    def from_z(self, z):
        raise NotImplementedError

    def rhs(self, z) -> np.ndarray:
        raise NotImplementedError

    def normalize(self, z) -> np.ndarray:
        return z


@dataclass(eq=False)
class ArrayPhase(PhaseSpace):
    """Plain ODE ``z' = f(z)`` on R^m (test fixtures, benchmarks)."""

    f: Callable[[np.ndarray], np.ndarray]

    def to_z(self, state):
        return np.array(state, dtype=float)

    def from_z(self, z):
        return np.array(z)

    def rhs(self, z):
        return np.asarray(self.f(z), dtype=float)


@dataclass(eq=False)
class SystemPhase(PhaseSpace):
    """Nonholonomic dynamics on the constraint phase space, states ``(q, pD)``."""

    sys: NonholonomicSystem
    field: Callable = hamel_vector_field

    def to_z(self, state: MState):
        return state.z

    def from_z(self, z):
        return self.sys.state_from_z(z)

    def rhs(self, z):
        X = self.field(self.sys, self.from_z(z))
        return np.concatenate([X.qdot, X.pDdot])

    def normalize(self, z):
        out = np.array(z, dtype=float)
        N = self.sys.N
        out[:N] = self.sys.chart.normalize(out[:N])
        return out


@dataclass(eq=False)
class ReducedPhase(PhaseSpace):
    """Partially reduced dynamics on the cotangent bundle of the first quotient."""

    sys: NonholonomicSystem
    red: ReducedChart

    def to_z(self, alpha: CoVector):
        return np.concatenate([alpha.q, alpha.p])

    def from_z(self, z):
        N = self.red.chart_tilde.dim_ambient
        return CoVector(np.array(z[:N]), np.array(z[N:]))

    def rhs(self, z):
        alpha = self.from_z(z)
        w = reduced_vector_field(self.sys, self.red, alpha)
        r = self.red.dim
        return np.concatenate([self.red.chart_tilde.frame(alpha.q) @ w[:r], w[r:]])

    def normalize(self, z):
        out = np.array(z, dtype=float)
        N = self.red.chart_tilde.dim_ambient
        out[:N] = self.red.chart_tilde.normalize(out[:N])
        return out


def as_phase(obj) -> PhaseSpace:
    if isinstance(obj, PhaseSpace):
        return obj
    if isinstance(obj, NonholonomicSystem):
        return SystemPhase(obj)
    if callable(obj):
        return ArrayPhase(obj)
    raise TypeError(f"cannot integrate {type(obj).__name__}")


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    times: np.ndarray
    states: List
    diagnostics: Dict[str, np.ndarray] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    def __len__(self):
        return len(self.states)

    def drift(self, name: str) -> float:
        """Max relative drift ``|f(t) - f(0)| / max(1, |f(0)|)`` of a diagnostic."""
        vals = self.diagnostics[name]
        return float(np.max(np.abs(vals - vals[0])) / max(1.0, abs(vals[0])))


def standard_diagnostics(sys: NonholonomicSystem, sections=None) -> Dict[str, Callable]:
    """Energy, gauge momenta and constraint residual for states of 𝓜."""
    out: Dict[str, Callable] = {
        "energy": lambda s: hamiltonian_M(sys, s),
        "constraint_residual": lambda s: constraint_residual(sys, s),
    }
    if sections is not None:
        for i in range(sections.k):
            out[f"J_{i + 1}"] = (lambda i: lambda s: float(gauge_momenta(sys, sections, s)[i]))(i)
    return out


# ---------------------------------------------------------------------------
# steppers
# ---------------------------------------------------------------------------

def _rk4_step(phase: PhaseSpace, z, dt):
    k1 = phase.rhs(z)
    k2 = phase.rhs(z + 0.5 * dt * k1)
    k3 = phase.rhs(z + 0.5 * dt * k2)
    k4 = phase.rhs(z + dt * k3)
    return _kernels.rk4_combine(z, k1, k2, k3, k4, dt)


# Dormand-Prince 5(4) tableau
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_E = _DP_B - np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                          -92097 / 339200, 187 / 2100, 1 / 40])


def _dp_step(phase: PhaseSpace, z, dt, k1=None):
    ks = [phase.rhs(z) if k1 is None else k1]
    for i in range(1, 7):
        zi = z + dt * sum(a * k for a, k in zip(_DP_A[i], ks))
        ks.append(phase.rhs(zi))
    K = np.array(ks)
    znew = z + dt * (_DP_B @ K)
    err = dt * (_DP_E @ K)
    return znew, err, ks[-1]


def _accept(phase: PhaseSpace, z, t):
    z = phase.normalize(z)
    try:
        state = phase.from_z(z)
    except ChartDomainError as exc:
        raise DomainExitError(t, str(exc)) from exc
    return z, state


def integrate(rhs, initial_state, dt: float, T: float, mode: str = "fixed",
              rtol: float = 1e-10, atol: float = 1e-12,
              diagnostics: Optional[Dict[str, Callable]] = None,
              record_every: int = 1) -> Trajectory:
    """Integrate from ``initial_state`` over ``[0, T]``.

    ``rhs`` is a :class:`PhaseSpace`, a :class:`NonholonomicSystem` or a plain
    callable ``f(z)``.  ``mode='fixed'`` takes RK4 steps of size ``dt`` (the
    last step is shortened to land on T); ``mode='adaptive'`` runs
    Dormand-Prince with initial step ``dt`` and records every accepted step.
    """
    phase = as_phase(rhs)
    if dt <= 0 or T < 0:
        raise ValueError("dt must be positive and T non-negative")
    if mode not in ("fixed", "adaptive"):
        raise ValueError(f"unknown mode {mode!r}")
    diagnostics = diagnostics or {}
    z = phase.to_z(initial_state)
    state = initial_state
    times, states = [0.0], [state]
    t = 0.0
    notes: List[str] = []
    if mode == "fixed":
        nsteps = int(math.ceil(T / dt - 1e-9)) if T > 0 else 0
        for i in range(1, nsteps + 1):
            h = min(dt, T - t) if i == nsteps else dt
            try:
                znew = _rk4_step(phase, z, h)
            except ChartDomainError as exc:
                raise DomainExitError(t, str(exc)) from exc
            t = T if i == nsteps else i * dt
            z, state = _accept(phase, znew, t)
            if i % record_every == 0 or i == nsteps:
                times.append(t)
                states.append(state)
    else:
        h = dt
        k1 = None
        rejected = 0
        while t < T - 1e-14 * max(1.0, T):
            h = min(h, T - t)
            try:
                znew, err, klast = _dp_step(phase, z, h, k1)
            except ChartDomainError as exc:
                raise DomainExitError(t, str(exc)) from exc
            scale = atol + rtol * np.maximum(np.abs(z), np.abs(znew))
            e = float(np.sqrt(np.mean((err / scale) ** 2)))
            if e <= 1.0:
                t += h
                z, state = _accept(phase, znew, t)
                k1 = None  # normalization moves z, so the FSAL stage is stale
                times.append(t)
                states.append(state)
            else:
                rejected += 1
            fac = 0.9 * (1.0 / max(e, 1e-10)) ** 0.2
            h *= min(5.0, max(0.2, fac))
            if h < 1e-14 * max(1.0, T):
                raise DomainExitError(t, "step size underflow")
        if rejected > len(times):
            notes.append(f"adaptive controller rejected {rejected} steps; problem looks stiff")
    diag = {name: np.array([float(fn(s)) for s in states]) for name, fn in diagnostics.items()}
    return Trajectory(np.array(times), states, diag, notes)


# ---------------------------------------------------------------------------
# convergence check
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HalvingReport:
    """Richardson check: ``ratio = |y_dt - y_ref| / |y_dt/2 - y_ref|`` with ``y_ref = y_dt/4``.

    A fourth-order method gives ratio 17 asymptotically; ``exact`` flags the
    case where both errors vanish (ratio reported as NaN).
    """

    ratio: float
    error_coarse: float
    error_fine: float
    exact: bool
    note: str = ""

    def __float__(self):
        return self.ratio


def step_halving_report(rhs, state, dt: float, T: Optional[float] = None) -> HalvingReport:
    """Run RK4 at dt, dt/2 and dt/4 over ``[0, T]`` (default ``10 dt``)."""
    phase = as_phase(rhs)
    T = 10.0 * dt if T is None else T
    ends = []
    for h in (dt, dt / 2, dt / 4):
        traj = integrate(phase, state, h, T)
        ends.append(phase.to_z(traj.states[-1]))
    e1 = float(np.max(np.abs(ends[0] - ends[2])))
    e2 = float(np.max(np.abs(ends[1] - ends[2])))
    if e1 == 0.0 and e2 == 0.0:
        return HalvingReport(float("nan"), 0.0, 0.0, True, "exact")
    ratio = e1 / e2 if e2 > 0 else float("inf")
    note = ""
    if not 14.0 <= ratio <= 18.0:
        note = "fourth-order convergence not observed; try mode='adaptive' or a smaller dt"
    return HalvingReport(ratio, e1, e2, False, note)
