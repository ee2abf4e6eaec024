"""Nonholonomic systems, the constraint phase space and its dynamics.

Points of the constraint phase space are stored as ``(q, pD)``: the chart
point and the momentum coefficients on the coframe dual to the D columns.
The W coefficients ``pW`` are always derived from the constraint relation.

Tangent vectors to the phase space are stored as ``n + r`` components on
the product frame ``{X_1, ..., X_n, d/dpD_1, ..., d/dpD_r}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from . import _kernels
from .geometry import (
    FrameChart,
    bracket_coefficients,
    check_domain,
    d_matrix,
    directional_derivative,
    fd_step,
    product_chart,
)


class SingularMetricError(ValueError):
    pass


class DegenerateSectionError(ValueError):
    """The 2-section on the constraint distribution is singular."""


class SingularMassMatrixError(ValueError):
    pass


@dataclass(eq=False)
class NonholonomicSystem:
    """Mechanical Lagrangian ``1/2 kappa - U`` with constraints ``v in D``.

    ``metric(q)`` returns kappa in frame components.  ``sample_q`` draws
    chart points used by the randomized checks; ``momentum_scale`` sets the
    size of random momenta.  ``hamiltonian_gradient(q, pD)``, when given,
    returns ``X_a(H)`` for the D columns and replaces the finite difference
    in the Hamel right-hand side.  ``complex_safe`` declares that the frame,
    coframe and group generators accept complex input, so configuration
    derivatives may use complex steps.
    """

    chart: FrameChart
    metric: Callable[[np.ndarray], np.ndarray]
    potential: Callable[[np.ndarray], float] = lambda q: 0.0
    action: Any = None
    name: str = ""
    sample_q: Optional[Callable[[np.random.Generator], np.ndarray]] = None
    momentum_scale: float = 1.0
    hamiltonian_gradient: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    complex_safe: bool = False
    _phase_chart: Optional[FrameChart] = field(default=None, init=False, repr=False)

    @property
    def n(self) -> int:
        return self.chart.dim_q

    @property
    def r(self) -> int:
        return self.chart.rank_D

    @property
    def N(self) -> int:
        return self.chart.dim_ambient

    @property
    def phase_chart(self) -> FrameChart:
        if self._phase_chart is None:
            self._phase_chart = product_chart(self.chart, self.r, name=f"M({self.name})")
        return self._phase_chart

    def blocks(self, q):
        K = np.asarray(self.metric(q), dtype=float)
        r = self.r
        return K, K[:r, :r], K[r:, :r]

    def state(self, q, pD) -> "MState":
        return MState.build(self, q, pD)

    def state_from_z(self, z) -> "MState":
        return MState.build(self, z[: self.N], z[self.N:])

    def structure(self, q, use_structure=True):
        return bracket_coefficients(self.chart, q, use_structure)

    def random_state(self, rng: np.random.Generator) -> "MState":
        if self.sample_q is None:
            raise ValueError(f"system {self.name!r} has no sampler")
        q = self.sample_q(rng)
        pD = self.momentum_scale * rng.normal(size=self.r)
        return self.state(q, pD)


@dataclass(frozen=True)
class MState:
    q: np.ndarray
    pD: np.ndarray
    pW: np.ndarray

    @staticmethod
    def build(sys: NonholonomicSystem, q, pD) -> "MState":
        q = np.asarray(q, dtype=float)
        pD = np.asarray(pD, dtype=float)
        check_domain(sys.chart, q)
        pW = constraint_pW(sys, q, pD)
        return MState(q, pD, pW)

    @property
    def p(self) -> np.ndarray:
        return np.concatenate([self.pD, self.pW])

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.q, self.pD])


def constraint_pW(sys: NonholonomicSystem, q, pD):
    """``pW = kappa_WD kappa_DD^-1 pD``: the momenta of a D velocity."""
    _, KDD, KWD = sys.blocks(q)
    return KWD @ _solve_metric(KDD, pD)


def constraint_residual(sys: NonholonomicSystem, s: MState) -> float:
    return float(np.max(np.abs(s.pW - constraint_pW(sys, s.q, s.pD)), initial=0.0))


def _solve_metric(KDD, b):
    try:
        return _kernels.small_solve(KDD, b)
    except np.linalg.LinAlgError as exc:
        raise SingularMetricError("metric block on D is singular") from exc


def full_momentum(sys: NonholonomicSystem, q, pD):
    return np.concatenate([pD, constraint_pW(sys, q, pD)])


def legendre_to_M(sys: NonholonomicSystem, q, v) -> MState:
    """State of 𝓜 for the D velocity with frame components ``v``."""
    _, KDD, _ = sys.blocks(np.asarray(q, dtype=float))
    return sys.state(q, KDD @ np.asarray(v, dtype=float))


def velocity(sys: NonholonomicSystem, s: MState):
    """D-frame velocity components ``kappa_DD^-1 pD``."""
    _, KDD, _ = sys.blocks(s.q)
    return _solve_metric(KDD, s.pD)


def _hamiltonian_z(sys, q, pD):
    _, KDD, _ = sys.blocks(q)
    v = _solve_metric(KDD, pD)
    return 0.5 * float(pD @ v) + float(sys.potential(q))


def hamiltonian_M(sys: NonholonomicSystem, s: MState) -> float:
    return _hamiltonian_z(sys, s.q, s.pD)


def energy(sys: NonholonomicSystem, q, v_full) -> float:
    """Lagrangian energy ``1/2 v^T kappa v + U`` of an arbitrary frame velocity."""
    K = np.asarray(sys.metric(q), dtype=float)
    return 0.5 * float(v_full @ K @ v_full) + float(sys.potential(q))


# ---------------------------------------------------------------------------
# tangent directions of 𝓜
# ---------------------------------------------------------------------------

def move_z(sys: NonholonomicSystem, z, w, t):
    """Move the phase space point ``z = (q, pD)`` along product-frame components ``w``."""
    E = sys.chart.frame(z[: sys.N])
    amb = np.concatenate([E @ w[: sys.n], w[sys.n:]])
    return sys.phase_chart.move(z, amb, t)


def derivative_along(sys: NonholonomicSystem, fn, s: MState, w, order=4):
    """Directional derivative of ``fn(state)`` along product-frame components ``w``."""
    z = s.z
    w = np.asarray(w, dtype=float)
    scale = float(np.max(np.abs(w)))
    if scale == 0.0:
        return np.zeros_like(np.asarray(fn(s), dtype=float))

    def g(t):
        zz = move_z(sys, z, w, t)
        return np.asarray(fn(sys.state_from_z(zz)), dtype=float)

    if order == 2:
        h = fd_step(z, 2) / scale
        return (g(h) - g(-h)) / (2.0 * h)
    h = fd_step(z, 4) / scale
    return (8.0 * (g(h) - g(-h)) - (g(2 * h) - g(-2 * h))) / (12.0 * h)


def c_basis(sys: NonholonomicSystem) -> np.ndarray:
    """Columns: the 2r basis vectors of 𝓒 in product-frame components."""
    n, r = sys.n, sys.r
    B = np.zeros((n + r, 2 * r))
    for a in range(r):
        B[a, a] = 1.0
        B[n + a, r + a] = 1.0
    return B


def theta_coefficients(sys: NonholonomicSystem):
    """Liouville form of 𝓜 on the product frame: ``(p_full, 0)``."""
    N, r = sys.N, sys.r

    def form(z):
        return np.concatenate([full_momentum(sys, z[:N], z[N:]), np.zeros(r)])

    return form


def omega_M_matrix(sys: NonholonomicSystem, s: MState, C=None):
    """``Omega_M = -d Theta_M`` on the full product frame at s (finite differences)."""
    pc = sys.phase_chart
    if C is None:
        Cq = bracket_coefficients(sys.chart, s.q)
        m = sys.n + sys.r
        C = np.zeros((m, m, m))
        C[: sys.n, : sys.n, : sys.n] = Cq
    return -d_matrix(pc, theta_coefficients(sys), s.z, C)


def omega_C_matrix(sys: NonholonomicSystem, s: MState):
    """``[Omega_M(e_a, e_b)]`` over the 𝓒 basis (D lifts then fiber directions)."""
    W = omega_M_matrix(sys, s)
    idx = list(range(sys.r)) + list(range(sys.n, sys.n + sys.r))
    return W[np.ix_(idx, idx)]


def dH_C(sys: NonholonomicSystem, s: MState):
    """``dH_M`` on the 𝓒 basis."""
    E = sys.chart.frame(s.q)
    out = np.empty(2 * sys.r)
    for a in range(sys.r):
        out[a] = directional_derivative(
            sys.chart, lambda q: _hamiltonian_z(sys, q, s.pD), s.q, E[:, a])
    v = velocity(sys, s)
    out[sys.r:] = v
    return out


def _tangent(sys, s, w):
    w = np.asarray(w, dtype=float)
    E = sys.chart.frame(s.q)
    return StateVelocity(w=w, qdot=E @ w[: sys.n], pDdot=w[sys.n:])


@dataclass(frozen=True)
class StateVelocity:
    """Tangent vector to 𝓜.

    ``w`` holds product-frame components (base frame part then ``pD`` part),
    ``qdot`` the ambient coordinate velocity and ``pDdot`` the momentum rate.
    """

    w: np.ndarray
    qdot: np.ndarray
    pDdot: np.ndarray

    @property
    def base(self):
        return self.w[: len(self.w) - len(self.pDdot)]


def solve_on_C(sys: NonholonomicSystem, s: MState, rhs, Om=None):
    """Solve ``i_X Omega_M|_𝓒 = rhs|_𝓒`` for X in 𝓒; returns product-frame components."""
    if Om is None:
        Om = omega_C_matrix(sys, s)
    sv = np.linalg.svd(Om, compute_uv=False)
    if sv[-1] <= 1e-10 * max(1.0, sv[0]):
        raise DegenerateSectionError(
            f"2-section singular at state (smallest singular value {sv[-1]:.3e})")
    x = np.linalg.solve(Om.T, rhs)
    w = np.zeros(sys.n + sys.r)
    w[: sys.r] = x[: sys.r]
    w[sys.n:] = x[sys.r:]
    return w


def nonholonomic_vector_field(sys: NonholonomicSystem, s: MState) -> StateVelocity:
    """X_nh from the almost symplectic solve on 𝓒 (generic finite-difference path)."""
    w = solve_on_C(sys, s, dH_C(sys, s))
    return _tangent(sys, s, w)


def hamel_vector_field(sys: NonholonomicSystem, s: MState) -> StateVelocity:
    """X_nh from the momentum form of the Hamel equations.

    Uses analytic structure coefficients when the chart has them and a
    fourth-order difference for the potential and metric derivatives.  This
    is the right-hand side used by the integrators.
    """
    q, pD = s.q, s.pD
    n, r = sys.n, sys.r
    E = sys.chart.frame(q)
    v = velocity(sys, s)
    p = s.p
    C = sys.structure(q)
    if sys.hamiltonian_gradient is not None:
        pdot = -np.asarray(sys.hamiltonian_gradient(q, pD), dtype=float)
    else:
        pdot = np.empty(r)
        Hq = lambda qq: _hamiltonian_z(sys, qq, pD)
        for a in range(r):
            pdot[a] = -_deriv4(sys.chart, Hq, q, E[:, a])
    # sum_{b,c} v_b p_c C^c_{ba}
    pdot += np.einsum("b,c,cba->a", v, p, C[:, :r, :r])
    w = np.concatenate([v, np.zeros(n - r), pdot])
    return StateVelocity(w=w, qdot=E[:, :r] @ v, pDdot=pdot)


def _deriv4(chart, fn, q, v):
    scale = float(np.max(np.abs(v)))
    if scale == 0.0:
        return 0.0
    h = fd_step(q, 4) / scale
    f = lambda t: float(fn(chart.move(q, v, t)))
    return (8.0 * (f(h) - f(-h)) - (f(2 * h) - f(-2 * h))) / (12.0 * h)


def lagrange_dalembert_oracle(sys: NonholonomicSystem, q, v):
    """Constrained Euler-Lagrange equations in multiplier form.

    Works with the full ``n``-dimensional velocity and brute-force frame
    brackets (never the analytic structure data), so it shares nothing with
    the almost symplectic solve except the metric and potential.  ``v`` gives
    the D components.  Returns the full frame acceleration (length n) and the
    W multipliers.
    """
    q = np.asarray(q, dtype=float)
    n, r = sys.n, sys.r
    vf = np.zeros(n)
    vf[:r] = v
    E = sys.chart.frame(q)
    K = np.asarray(sys.metric(q), dtype=float)
    Kdot = directional_derivative(sys.chart, sys.metric, q, E @ vf)
    L = lambda qq: 0.5 * float(vf @ sys.metric(qq) @ vf) - float(sys.potential(qq))
    XL = np.array([float(directional_derivative(sys.chart, L, q, E[:, a])) for a in range(n)])
    C = bracket_coefficients(sys.chart, q, use_structure=False)
    p = K @ vf
    rhs = -Kdot @ vf + XL + np.einsum("b,c,cba->a", vf, p, C)
    m = n - r
    A = np.zeros((n + m, n + m))
    A[:n, :n] = K
    A[r:n, n:] = -np.eye(m)
    A[n:, r:n] = np.eye(m)
    try:
        sol = np.linalg.solve(A, np.concatenate([rhs, np.zeros(m)]))
    except np.linalg.LinAlgError as exc:
        raise SingularMassMatrixError("constrained mass matrix is singular") from exc
    return sol[:n], sol[n:]


def oracle_pDdot(sys: NonholonomicSystem, s: MState):
    """``pD`` rate implied by the multiplier oracle: ``(kappa' v + kappa vdot)_D``."""
    v = velocity(sys, s)
    vdot, _ = lagrange_dalembert_oracle(sys, s.q, v)
    vf = np.zeros(sys.n)
    vf[: sys.r] = v
    E = sys.chart.frame(s.q)
    Kdot = directional_derivative(sys.chart, sys.metric, s.q, E @ vf)
    K = np.asarray(sys.metric(s.q), dtype=float)
    return (Kdot @ vf + K @ vdot)[: sys.r]


def c_differential(sys: NonholonomicSystem, f, s: MState):
    """``df`` on the 𝓒 basis for a scalar function of states."""
    B = c_basis(sys)
    return np.array([float(derivative_along(sys, f, s, B[:, j])) for j in range(2 * sys.r)])


def hamiltonian_field_of(sys: NonholonomicSystem, g, s: MState, Om=None):
    """Product-frame components of X_g with ``i_{X_g} Omega_M|_𝓒 = dg|_𝓒``."""
    return solve_on_C(sys, s, c_differential(sys, g, s), Om)


def nonholonomic_bracket(sys: NonholonomicSystem, f, g, s: MState) -> float:
    """``{f, g}_nh (s) = df(X_g)``."""
    Xg = hamiltonian_field_of(sys, g, s)
    return float(derivative_along(sys, f, s, Xg))
