"""Gauge 2-forms built from horizontal gauge symmetries.

On 𝓜 every form here is semi-basic, so it is stored as an ``n x n`` matrix
on the base frame (zero on W rows and columns) and padded with zeros on the
fiber directions.  On the reduced cotangent bundle the matrices are
``2r x 2r`` on the product frame.

Sign conventions: ``<J, xi> = <p, xi_Q>``; the curvature of a connection A
with horizontal space H is ``K(X, Y) = dA(X_H, Y_H) = -A([X_H, Y_H])`` on
horizontal frame fields.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .chaplygin import (
    ReducedChart,
    B_JK_matrix,
    JK_matrix,
    canonical_matrix,
    covector_differential,
    lift_base_matrix,
    lift_state,
    omega_tilde_matrix,
    reduced_dH,
    reduced_vector_field,
)
from .geometry import (
    CoVector,
    bracket_coefficients,
    check_domain,
    d_matrix,
    d_restricted_matrix,
    directional_derivative,
    frame_components,
)
from .symmetry import SectionBasis, generator_frame_components, section_S_block
from .system import MState, NonholonomicSystem, hamel_vector_field


class SingularGaugeBlockError(ValueError):
    """The gauge generators do not span S at this point."""


@dataclass(eq=False)
class GaugePack:
    """Gauge data for a system with k horizontal gauge symmetries ``zeta_i``.

    ``omit_gauge`` switches the gauge 2-form off everywhere (negative
    control); ``flags`` records results of semi-basic and basic checks.
    """

    sys: NonholonomicSystem
    sections: SectionBasis
    red: Optional[ReducedChart] = None
    omit_gauge: bool = False
    flags: Dict[str, bool] = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.sections.k


def build_gauge(sys, sections, red=None, omit_gauge=False) -> GaugePack:
    return GaugePack(sys, sections, red, omit_gauge)


def _inv(Z, what):
    try:
        return np.linalg.inv(Z)
    except np.linalg.LinAlgError as exc:
        raise SingularGaugeBlockError(f"{what} is singular") from exc


def _padded(sys: NonholonomicSystem, M):
    n, r = sys.n, sys.r
    out = np.zeros((n + r, n + r))
    out[:n, :n] = M
    return out


# ---------------------------------------------------------------------------
# forms on Q
# ---------------------------------------------------------------------------

def Y_coefficients(g: GaugePack, q) -> np.ndarray:
    """``Y[i, a] = Y^i(X_a)``: inverse of the S block on S columns, zero elsewhere."""
    sys = g.sys
    Z = section_S_block(sys, g.sections, q)
    Y = np.zeros((g.k, sys.n))
    Y[:, list(sys.chart.s_columns)] = _inv(Z, "S block of the gauge generators")
    return Y


def Y_form(g: GaugePack, i: int):
    return lambda q: Y_coefficients(g, q)[i]


def dY_matrices(g: GaugePack, q, C=None) -> np.ndarray:
    """``d^D Y^i`` on the base frame, one ``n x n`` matrix per i."""
    sys = g.sys
    if C is None:
        C = bracket_coefficients(sys.chart, q)
    return np.array([d_restricted_matrix(sys.chart, Y_form(g, i), q, C) for i in range(g.k)])


def gauge_J(g: GaugePack, s: MState) -> np.ndarray:
    """``J_i = <p, (zeta_i)_Q>``."""
    comps = generator_frame_components(g.sys, s.q) @ g.sections.matrix(s.q)
    return comps.T @ s.p


# ---------------------------------------------------------------------------
# B1, calB and B on 𝓜
# ---------------------------------------------------------------------------

def B1_matrix(g: GaugePack, s: MState, C=None) -> np.ndarray:
    """``B_1 = <J, K_W> + J_i d^D Y^i`` on the base frame."""
    sys = g.sys
    if C is None:
        C = bracket_coefficients(sys.chart, s.q)
    M = JK_matrix(sys, s, C)
    M += np.einsum("i,iab->ab", gauge_J(g, s), dY_matrices(g, s.q, C))
    return M


def JK_V_matrix(sys: NonholonomicSystem, s: MState, C=None) -> np.ndarray:
    """``<J, K_V>`` on Hor x Hor: ``-sum_{c in S u W} p_c C^c_ab``.

    Same sign rule as :func:`JK_matrix`; it enters calB with a minus sign.
    """
    if C is None:
        C = bracket_coefficients(sys.chart, s.q)
    hor = list(sys.chart.hor_columns)
    vert = list(sys.chart.s_columns) + list(sys.chart.w_columns)
    M = np.zeros((sys.n, sys.n))
    M[np.ix_(hor, hor)] = -np.einsum("c,cab->ab", s.p[vert], C[np.ix_(vert, hor, hor)])
    return M


def _beta_matrix(g: GaugePack, s: MState, vS, C, dY):
    """Columns ``beta(X_b)_Q`` in frame components, for b in Hor.

    ``beta(Z) = i_{v_S} [K_W + d^D Y^i (x) zeta_i] (Z)`` with v_S the S part
    of the base velocity of X_nh.
    """
    sys = g.sys
    n, r = sys.n, sys.r
    out = np.zeros((n, n))
    Zblk = section_S_block(sys, g.sections, s.q)
    sc = list(sys.chart.s_columns)
    for b in sys.chart.hor_columns:
        col = np.zeros(n)
        # K_W(v_S, X_b) as a vector field: W components -C^W(v_S, X_b)
        col[r:] = -C[r:, :, b] @ vS
        # d^D Y^i(v_S, X_b) (zeta_i)_Q: S components
        col[sc] = Zblk @ (dY[:, :, b] @ vS)
        out[:, b] = col
    return out


def calB_matrix(g: GaugePack, s: MState, X=None, C=None) -> np.ndarray:
    """``calB = -<J, K_V> - 1/2 (kappa_g ^ i_{P_V X_nh}[K_W + d^D Y^i zeta_i])|_Hor``.

    With ``<J, K_V>`` signed like ``<J, K_W>`` in B_1 this is the combination
    for which ``i_{X_nh} B = 0``; it only matters when Hor has rank >= 2.
    """
    sys = g.sys
    if C is None:
        C = bracket_coefficients(sys.chart, s.q)
    hor = list(sys.chart.hor_columns)
    M = JK_V_matrix(sys, s, C)
    if len(hor) < 2:
        return np.zeros((sys.n, sys.n))
    if X is None:
        X = hamel_vector_field(sys, s)
    vS = np.zeros(sys.n)
    sc = list(sys.chart.s_columns)
    vS[sc] = X.base[sc]
    dY = dY_matrices(g, s.q, C)
    beta = _beta_matrix(g, s, vS, C, dY)
    K = np.asarray(sys.metric(s.q), dtype=float)
    # P[a, b] = kappa(X_a, beta(X_b)_Q)
    P = K @ beta
    wedge = np.zeros((sys.n, sys.n))
    wedge[np.ix_(hor, hor)] = (P - P.T)[np.ix_(hor, hor)]
    return -M - 0.5 * wedge


def B_matrix(g: GaugePack, s: MState, X=None) -> np.ndarray:
    if g.omit_gauge:
        return np.zeros((g.sys.n, g.sys.n))
    C = bracket_coefficients(g.sys.chart, s.q)
    return B1_matrix(g, s, C) + calB_matrix(g, s, X, C)


def _pair(sys, M, u, v):
    n = sys.n
    return float(np.asarray(u)[:n] @ M @ np.asarray(v)[:n])


def form_B1(g: GaugePack, s: MState, u, v) -> float:
    return _pair(g.sys, B1_matrix(g, s), u, v)


def form_calB(g: GaugePack, s: MState, u, v) -> float:
    return _pair(g.sys, calB_matrix(g, s), u, v)


def form_B_total(g: GaugePack, s: MState, u, v) -> float:
    return _pair(g.sys, B_matrix(g, s), u, v)


def dynamical_condition_residual(g: GaugePack, s: MState) -> float:
    """``max_e |B(X_nh, e)|`` over the product frame of 𝓜."""
    X = hamel_vector_field(g.sys, s)
    Bm = _padded(g.sys, B_matrix(g, s, X))
    return float(np.max(np.abs(X.w @ Bm)))


# ---------------------------------------------------------------------------
# forms on the reduced cotangent bundle
# ---------------------------------------------------------------------------

def Ytilde_coefficients(g: GaugePack, qt) -> np.ndarray:
    red = g.red
    Zt = red.eta_S_block(qt)
    Y = np.zeros((g.k, red.dim))
    Y[:, list(red.chart_tilde.s_columns)] = _inv(Zt, "S block of the reduced gauge generators")
    return Y


def dYtilde_matrices(g: GaugePack, qt) -> np.ndarray:
    red = g.red
    C = bracket_coefficients(red.chart_tilde, qt)
    return np.array([d_matrix(red.chart_tilde, lambda x, i=i: Ytilde_coefficients(g, x)[i], qt, C)
                     for i in range(g.k)])


def reduced_J(g: GaugePack, alpha: CoVector) -> np.ndarray:
    """``J~_i = <p~, (eta_i)_{Q~}>``."""
    return g.red.eta_frame(alpha.q).T @ alpha.p


def _embed_base(red: ReducedChart, M):
    r = red.dim
    out = np.zeros((2 * r, 2 * r))
    out[:r, :r] = M
    return out


def JdY_tilde_matrix(g: GaugePack, alpha: CoVector) -> np.ndarray:
    return _embed_base(g.red, np.einsum("i,iab->ab", reduced_J(g, alpha), dYtilde_matrices(g, alpha.q)))


def calB_tilde_matrix(g: GaugePack, alpha: CoVector, fiber=None) -> np.ndarray:
    """Descent of calB, evaluated on the lift with zero W components."""
    s = lift_state(g.sys, g.red, alpha, fiber)
    return lift_base_matrix(g.sys, calB_matrix(g, s))


def B1_tilde_matrix(g: GaugePack, alpha: CoVector, fiber=None) -> np.ndarray:
    """``B~_1 = B_<JK> + J~_i dY~^i``."""
    return B_JK_matrix(g.sys, g.red, alpha, fiber) + JdY_tilde_matrix(g, alpha)


def B1_tilde_lifted(g: GaugePack, alpha: CoVector, fiber=None) -> np.ndarray:
    """B_1 on 𝓜 evaluated on lifts, independent of the closed form above."""
    s = lift_state(g.sys, g.red, alpha, fiber)
    return lift_base_matrix(g.sys, B1_matrix(g, s))


def B_tilde_matrix(g: GaugePack, alpha: CoVector, fiber=None) -> np.ndarray:
    r = g.red.dim
    if g.omit_gauge:
        return np.zeros((2 * r, 2 * r))
    return B1_tilde_matrix(g, alpha, fiber) + calB_tilde_matrix(g, alpha, fiber)


def omega_B_tilde_matrix(g: GaugePack, alpha: CoVector, cancel: bool = True, fiber=None):
    """``Omega~_B = Omega~ + B~``.

    With ``cancel`` the ``B_<JK>`` terms are removed analytically, giving
    ``Omega_{Q~} + J~_i dY~^i + calB~``.  Without it the sum is assembled
    term by term from the lifted forms (cross-check).
    """
    check_domain(g.red.chart_tilde, alpha.q)
    if g.omit_gauge:
        return omega_tilde_matrix(g.sys, g.red, alpha, fiber)
    if cancel:
        return (canonical_matrix(g.red, alpha) + JdY_tilde_matrix(g, alpha)
                + calB_tilde_matrix(g, alpha, fiber))
    return (omega_tilde_matrix(g.sys, g.red, alpha, fiber) + B1_tilde_lifted(g, alpha, fiber)
            + calB_tilde_matrix(g, alpha, fiber))


def omega_B_tilde(g: GaugePack, alpha: CoVector, u, v) -> float:
    return float(np.asarray(u) @ omega_B_tilde_matrix(g, alpha) @ np.asarray(v))


def reduced_dynamical_condition_residual(g: GaugePack, alpha: CoVector) -> float:
    Xt = reduced_vector_field(g.sys, g.red, alpha)
    return float(np.max(np.abs(Xt @ B_tilde_matrix(g, alpha))))


def gauged_dynamics_residual(g: GaugePack, alpha: CoVector) -> float:
    """``max |i_{X~_nh} Omega~_B - dH~|``."""
    Xt = reduced_vector_field(g.sys, g.red, alpha)
    lhs = Xt @ omega_B_tilde_matrix(g, alpha)
    return float(np.max(np.abs(lhs - reduced_dH(g.sys, g.red, alpha))))


# ---------------------------------------------------------------------------
# lifted generators and the momentum relation
# ---------------------------------------------------------------------------

def eta_lift(g: GaugePack, alpha: CoVector, i: int) -> np.ndarray:
    """``(eta_i)_{T*Q~}`` for frames invariant under F: momentum part vanishes."""
    r = g.red.dim
    out = np.zeros(2 * r)
    out[:r] = g.red.eta_frame(alpha.q)[:, i]
    return out


def eta_lift_fd(g: GaugePack, alpha: CoVector, i: int, h: float = 1e-6) -> np.ndarray:
    """Same vector from the lifted flow of the frozen element ``eta_i(q~)``.

    The base part differences the F action with step h (exponential
    coordinates, F abelian).  The momentum part is
    ``d/dt p~(X_a) = p~([xi_{Q~}, X_a])`` with the bracket taken by central
    differences of the frame and of the generator.
    """
    red = g.red
    ct = red.chart_tilde
    qt = alpha.q
    xi = np.asarray(red.eta.matrix(qt)[:, i], dtype=float)
    base_amb = (red.f_act(h * xi, qt) - red.f_act(-h * xi, qt)) / (2.0 * h)
    base = frame_components(ct, qt, base_amb)
    gen = lambda x: red.f_basis(x) @ xi
    E = ct.frame(qt)
    dE = directional_derivative(ct, ct.frame, qt, gen(qt))
    fiber = np.empty(red.dim)
    for a in range(red.dim):
        dgen = directional_derivative(ct, gen, qt, E[:, a])
        bracket = dE[:, a] - dgen
        fiber[a] = alpha.p @ frame_components(ct, qt, bracket)
    return np.concatenate([base, fiber])


def momentum_relation_residual(g: GaugePack, alpha: CoVector) -> float:
    """``max_{i, e} |Omega~_B((eta_i)_{T*Q~}, e) - dJ~_i(e)|``."""
    Om = omega_B_tilde_matrix(g, alpha)
    worst = 0.0
    for i in range(g.k):
        lhs = eta_lift(g, alpha, i) @ Om
        dJ = covector_differential(g.red, lambda a, i=i: float(reduced_J(g, a)[i]), alpha)
        worst = max(worst, float(np.max(np.abs(lhs - dJ))))
    return worst


def verify_momentum_relation(g: GaugePack, samples) -> float:
    return max(momentum_relation_residual(g, a) for a in samples)


def calB_tilde_basic_residual(g: GaugePack, alpha: CoVector, rng=None) -> float:
    """``i_{eta} calB~ = 0`` and F invariance of calB~ (frames are F-invariant)."""
    Bt = calB_tilde_matrix(g, alpha)
    worst = max(float(np.max(np.abs(eta_lift(g, alpha, i) @ Bt))) for i in range(g.k))
    red = g.red
    if rng is not None and red.f_act is not None and red.f_sample is not None:
        moved = CoVector(red.chart_tilde.normalize(red.f_act(red.f_sample(rng), alpha.q)), alpha.p)
        worst = max(worst, float(np.max(np.abs(calB_tilde_matrix(g, moved) - Bt))))
    return worst


def fiber_independence_residual(g: GaugePack, alpha: CoVector, rng) -> float:
    """G_W-basicness: forms on lifts do not depend on the fiber coordinates."""
    red = g.red
    f1, f2 = red.fiber_sample(rng), red.fiber_sample(rng)
    A = B1_tilde_lifted(g, alpha, f1) + calB_tilde_matrix(g, alpha, f1)
    B = B1_tilde_lifted(g, alpha, f2) + calB_tilde_matrix(g, alpha, f2)
    return float(np.max(np.abs(A - B)))
