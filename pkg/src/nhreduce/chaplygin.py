"""First reduction step by the subgroup generating the vertical complement W.

The reduced configuration chart carries the projected D frame, so the
momenta ``pD`` of a state of 𝓜 are also the momenta of the reduced
covector.  Tangent vectors to the reduced cotangent bundle are stored as
``2 r`` components on ``{X~_1, ..., X~_r, d/dp~_1, ..., d/dp~_r}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .geometry import (
    CoVector,
    FrameChart,
    bracket_coefficients,
    check_domain,
    d_matrix,
    d_restricted_matrix,
    directional_derivative,
    fd_step,
    frame_components,
    product_chart,
)
from .symmetry import SectionBasis, generator_frame_components
from .system import (
    MState,
    NonholonomicSystem,
    StateVelocity,
    _hamiltonian_z,
    hamel_vector_field,
    nonholonomic_vector_field,
)


class SingularGeneratorError(ValueError):
    pass


class DegenerateFormError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class QuotientData:
    """Second quotient ``Q̄ = Q~/F``: chart with frame, projection and a section."""

    chart: FrameChart
    rho: Callable[[np.ndarray], np.ndarray]
    section: Callable[[np.ndarray], np.ndarray]


@dataclass(eq=False)
class ReducedChart:
    """Chart of ``Q~ = Q/G_W`` with the data of the residual group F.

    ``f_basis(q~)`` gives the generators of a basis of the Lie algebra of F
    (ambient components, one column each).  ``eta`` holds the reduced gauge
    sections as coefficient functions on that basis.  ``f_act(h, q~)`` moves
    points along F; ``f_sample(rng)`` draws group elements.
    """

    chart_tilde: FrameChart
    project_q: Callable[[np.ndarray], np.ndarray]
    lift_q: Callable[..., np.ndarray]
    f_basis: Callable[[np.ndarray], np.ndarray]
    eta: SectionBasis
    f_act: Optional[Callable] = None
    f_sample: Optional[Callable] = None
    fiber_sample: Optional[Callable] = None
    quotient: Optional[QuotientData] = None
    _phase: Optional[FrameChart] = field(default=None, init=False, repr=False)

    @property
    def dim(self) -> int:
        return self.chart_tilde.dim_q

    @property
    def k(self) -> int:
        return self.eta.k

    @property
    def phase_chart(self) -> FrameChart:
        if self._phase is None:
            self._phase = product_chart(self.chart_tilde, self.dim, name="T*Q~")
        return self._phase

    def f_generators(self, qt):
        """Ambient components of ``(eta_i)_{Q~}``, one column per section."""
        return self.f_basis(qt) @ self.eta.matrix(qt)

    def eta_frame(self, qt):
        """Frame components of ``(eta_i)_{Q~}`` (``r x k``)."""
        return frame_components(self.chart_tilde, qt, self.f_generators(qt))

    def eta_S_block(self, qt):
        return self.eta_frame(qt)[list(self.chart_tilde.s_columns)]


# ---------------------------------------------------------------------------
# connection and curvature
# ---------------------------------------------------------------------------

def _sigma_W(sys: NonholonomicSystem, q):
    G = generator_frame_components(sys, q)[:, list(sys.action.w_indices)]
    return G[sys.r:]


def connection_AW(sys: NonholonomicSystem, q, v) -> np.ndarray:
    """``A_W(v)``: the w element whose generator equals the W part of v."""
    c = frame_components(sys.chart, q, np.asarray(v, dtype=float))
    SW = _sigma_W(sys, q)
    try:
        return np.linalg.solve(SW, c[sys.r:])
    except np.linalg.LinAlgError as exc:
        raise SingularGeneratorError("generators of w do not span W") from exc


def connection_form_coefficients(sys: NonholonomicSystem, j: int):
    """Frame coefficients ``A_W^j(X_a)`` of the j-th component of A_W."""

    def form(q):
        out = np.zeros(sys.n)
        out[sys.r:] = np.linalg.inv(_sigma_W(sys, q))[j]
        return out

    return form


def curvature_matrices(sys: NonholonomicSystem, q):
    """``K[j, a, b] = d^D A_W^j (X_a, X_b)``."""
    check_domain(sys.chart, q)
    C = bracket_coefficients(sys.chart, q)
    m = len(sys.action.w_indices)
    return np.array([d_restricted_matrix(sys.chart, connection_form_coefficients(sys, j), q, C)
                     for j in range(m)])


def curvature_KW(sys: NonholonomicSystem, q, a: int, b: int) -> np.ndarray:
    return curvature_matrices(sys, q)[:, a, b]


def JK_matrix(sys: NonholonomicSystem, s: MState, C=None) -> np.ndarray:
    """``<J, K_W>`` on the base frame: ``-sum_{c in W} p_c C^c_ab`` on D x D."""
    if C is None:
        C = bracket_coefficients(sys.chart, s.q)
    r = sys.r
    M = np.zeros((sys.n, sys.n))
    M[:r, :r] = -np.einsum("c,cab->ab", s.pW, C[r:, :r, :r])
    return M


def JK_matrix_from_curvature(sys: NonholonomicSystem, s: MState) -> np.ndarray:
    """Same pairing through ``J_{e_w} K_W^w``; used as a cross-check."""
    K = curvature_matrices(sys, s.q)
    SW = _sigma_W(sys, s.q)
    Jw = SW.T @ s.pW
    return np.einsum("j,jab->ab", Jw, K)


def JK_pairing(sys: NonholonomicSystem, s: MState, u, v) -> float:
    """``<J, K_W>(u, v)`` for tangent vectors to 𝓜 (product-frame components)."""
    n = sys.n
    return float(np.asarray(u)[:n] @ JK_matrix(sys, s) @ np.asarray(v)[:n])


# ---------------------------------------------------------------------------
# states on T*Q~
# ---------------------------------------------------------------------------

def reduce_state(sys: NonholonomicSystem, red: ReducedChart, s: MState) -> CoVector:
    return CoVector(red.project_q(s.q), s.pD.copy())


def lift_state(sys: NonholonomicSystem, red: ReducedChart, alpha: CoVector, fiber=None) -> MState:
    return sys.state(red.lift_q(alpha.q, fiber), alpha.p)


def reduced_hamiltonian(sys: NonholonomicSystem, red: ReducedChart, alpha: CoVector) -> float:
    return _hamiltonian_z(sys, red.lift_q(alpha.q), alpha.p)


def covector_z(alpha: CoVector):
    return np.concatenate([alpha.q, alpha.p])


def covector_from_z(red: ReducedChart, z) -> CoVector:
    N = red.chart_tilde.dim_ambient
    return CoVector(z[:N], z[N:])


def move_covector(red: ReducedChart, alpha: CoVector, w, t) -> CoVector:
    E = red.chart_tilde.frame(alpha.q)
    r = red.dim
    amb = np.concatenate([E @ w[:r], w[r:]])
    return covector_from_z(red, red.phase_chart.move(covector_z(alpha), amb, t))


def covector_derivative(red: ReducedChart, fn, alpha: CoVector, w, order=4):
    """Directional derivative of ``fn(covector)`` along product-frame components w."""
    w = np.asarray(w, dtype=float)
    scale = float(np.max(np.abs(w)))
    if scale == 0.0:
        return np.zeros_like(np.asarray(fn(alpha), dtype=float))
    z = covector_z(alpha)
    g = lambda t: np.asarray(fn(move_covector(red, alpha, w, t)), dtype=float)
    if order == 2:
        h = fd_step(z, 2) / scale
        return (g(h) - g(-h)) / (2.0 * h)
    h = fd_step(z, 4) / scale
    return (8.0 * (g(h) - g(-h)) - (g(2 * h) - g(-2 * h))) / (12.0 * h)


def covector_differential(red: ReducedChart, fn, alpha: CoVector, order=4):
    m = 2 * red.dim
    return np.array([float(covector_derivative(red, fn, alpha, np.eye(m)[j], order))
                     for j in range(m)])


# ---------------------------------------------------------------------------
# two-forms on T*Q~
# ---------------------------------------------------------------------------

def canonical_matrix(red: ReducedChart, alpha: CoVector) -> np.ndarray:
    """``Omega_{Q~} = -d Theta_{Q~}`` on the product frame (finite differences)."""
    r = red.dim
    pc = red.phase_chart
    theta = lambda z: np.concatenate([z[red.chart_tilde.dim_ambient:], np.zeros(r)])
    return -d_matrix(pc, theta, covector_z(alpha))


def lift_base_matrix(sys: NonholonomicSystem, M_q: np.ndarray) -> np.ndarray:
    """Embed a form on the Q frame into the T*Q~ product frame via the D identification."""
    r = sys.r
    out = np.zeros((2 * r, 2 * r))
    out[:r, :r] = M_q[:r, :r]
    return out


def B_JK_matrix(sys: NonholonomicSystem, red: ReducedChart, alpha: CoVector, fiber=None):
    """``B_<JK>`` on T*Q~, evaluated through a lift to 𝓜."""
    s = lift_state(sys, red, alpha, fiber)
    return lift_base_matrix(sys, JK_matrix(sys, s))


def omega_tilde_matrix(sys: NonholonomicSystem, red: ReducedChart, alpha: CoVector, fiber=None):
    """``Omega~ = Omega_{Q~} - B_<JK>``."""
    return canonical_matrix(red, alpha) - B_JK_matrix(sys, red, alpha, fiber)


def reduced_two_form(sys, red, alpha: CoVector, u, v, fiber=None) -> float:
    return float(np.asarray(u) @ omega_tilde_matrix(sys, red, alpha, fiber) @ np.asarray(v))


def reduced_dH(sys: NonholonomicSystem, red: ReducedChart, alpha: CoVector, order=4):
    return covector_differential(red, lambda a: reduced_hamiltonian(sys, red, a), alpha, order)


def solve_form(Om: np.ndarray, rhs: np.ndarray, error=DegenerateFormError) -> np.ndarray:
    """X with ``Om(X, e_j) = rhs_j`` for every basis vector."""
    sv = np.linalg.svd(Om, compute_uv=False)
    if sv[-1] <= 1e-10 * max(1.0, sv[0]):
        raise error(f"2-form degenerate (smallest singular value {sv[-1]:.3e})")
    return np.linalg.solve(Om.T, rhs)


def reduced_vector_field(sys: NonholonomicSystem, red: ReducedChart, alpha: CoVector) -> np.ndarray:
    """``X~_nh`` from ``i_X Omega~ = dH~``; product-frame components."""
    check_domain(red.chart_tilde, alpha.q)
    return solve_form(omega_tilde_matrix(sys, red, alpha), reduced_dH(sys, red, alpha))


def project_velocity(sys: NonholonomicSystem, red: ReducedChart, s: MState,
                     X: StateVelocity) -> np.ndarray:
    """``T rho(X)`` in T*Q~ product-frame components, by differentiating the projection."""
    qt_rate = directional_derivative(sys.chart, red.project_q, s.q, X.qdot)
    qt = red.project_q(s.q)
    base = frame_components(red.chart_tilde, qt, qt_rate)
    return np.concatenate([base, X.pDdot])


def projection_consistency(sys, red, s: MState, generic=False) -> float:
    X = nonholonomic_vector_field(sys, s) if generic else hamel_vector_field(sys, s)
    proj = project_velocity(sys, red, s, X)
    Xt = reduced_vector_field(sys, red, reduce_state(sys, red, s))
    return float(np.max(np.abs(proj - Xt)) / max(1.0, np.max(np.abs(Xt))))


def frame_identification_residual(sys, red, q) -> float:
    """``T rho`` maps the D columns onto the frame of Q~."""
    E = sys.chart.frame(q)
    qt = red.project_q(q)
    Et = red.chart_tilde.frame(qt)
    worst = 0.0
    for a in range(sys.r):
        img = directional_derivative(sys.chart, red.project_q, q, E[:, a])
        worst = max(worst, float(np.max(np.abs(img - Et[:, a]))))
    return worst
