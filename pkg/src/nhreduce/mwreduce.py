"""Momentum level sets of the reduced gauge momenta and their quotients.

A leaf of ``J~^{-1}(mu)/F`` is charted by the coordinates of the second
quotient ``Q̄ = Q~/F`` together with the momenta on the horizontal columns of
the reduced frame.  The section of a leaf point uses the adapted splitting
``alpha = p_a X~^a + c_i Y~^i``, so every level set is a coordinate slice.

Leaf tangent vectors are coordinate vectors ``(dq̄, dp_hor)``; covectors on
``Q̄`` are stored by their momenta on the frame of the quotient chart.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .chaplygin import (
    ReducedChart,
    canonical_matrix,
    covector_differential,
    lift_state,
    reduced_hamiltonian,
    reduced_vector_field,
    solve_form,
)
from .gauge import (
    GaugePack,
    Ytilde_coefficients,
    calB_tilde_matrix,
    dYtilde_matrices,
    eta_lift,
    omega_B_tilde_matrix,
    reduced_J,
)
from .geometry import (
    CoVector,
    EPS_FIFTH,
    d_matrix,
    directional_derivative,
    frame_components,
    product_chart,
)


class DegenerateLeafFormError(ValueError):
    pass


class LevelSetViolationError(ValueError):
    pass


@dataclass(frozen=True)
class MomentumLevel:
    """``mu = c_i mu^i`` in the basis dual to the gauge symmetries."""

    c: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        if not np.all(np.isfinite(c)):
            raise ValueError("momentum level must be finite")
        object.__setattr__(self, "c", c)


def _level(c) -> np.ndarray:
    return c.c if isinstance(c, MomentumLevel) else np.atleast_1d(np.asarray(c, dtype=float))


def _deriv4(fn, x, v, h):
    f = lambda t: np.asarray(fn(x + t * v), dtype=float)
    return (8.0 * (f(h) - f(-h)) - (f(2 * h) - f(-2 * h))) / (12.0 * h)


# ---------------------------------------------------------------------------
# leaf chart
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class LeafChart:
    """Chart on ``J~^{-1}(mu)/F``: coordinates ``(q̄, p_hor)``."""

    gauge: GaugePack
    sampler: Optional[Callable[[np.random.Generator], np.ndarray]] = None

    def __post_init__(self):
        red = self.gauge.red
        if red is None or red.quotient is None:
            raise ValueError("leaf charts need a reduced chart with quotient data")

    @property
    def red(self) -> ReducedChart:
        return self.gauge.red

    @property
    def m(self) -> int:
        """Dimension of Q̄."""
        return self.red.quotient.chart.dim_q

    @property
    def dim(self) -> int:
        return 2 * self.m

    @property
    def hor(self):
        return list(self.red.chart_tilde.hor_columns)

    def base_point(self, xb) -> np.ndarray:
        return self.red.chart_tilde.normalize(np.asarray(self.red.quotient.section(xb[: self.m]), dtype=float))

    def section(self, xb, c) -> CoVector:
        """Point of ``J~^{-1}(mu)`` with momenta ``p_hor`` and ``J~ = c``."""
        xb = np.asarray(xb, dtype=float)
        red = self.red
        qt = self.base_point(xb)
        p = np.zeros(red.dim)
        p[self.hor] = xb[self.m:]
        sc = list(red.chart_tilde.s_columns)
        p[sc] = np.linalg.solve(red.eta_S_block(qt).T, _level(c))
        return CoVector(qt, p)

    def coordinates(self, alpha: CoVector) -> np.ndarray:
        return np.concatenate([self.red.quotient.rho(alpha.q), alpha.p[self.hor]])

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        if self.sampler is not None:
            return np.asarray(self.sampler(rng), dtype=float)
        sys = self.gauge.sys
        qt = self.red.project_q(sys.sample_q(rng))
        qb = self.red.quotient.rho(qt)
        return np.concatenate([qb, sys.momentum_scale * rng.normal(size=self.m)])

    def step(self, xb, j: int) -> float:
        return max(1.0, abs(float(xb[j]))) * EPS_FIFTH

    def section_tangents(self, xb, c, moved=None) -> np.ndarray:
        """Columns: product-frame components on T*Q~ of ``d section / d x̄_j``.

        ``moved`` is an optional F element applied after the section.
        """
        red = self.red
        ct = red.chart_tilde
        xb = np.asarray(xb, dtype=float)

        def point(x):
            a = self.section(x, c)
            q = a.q if moved is None else ct.normalize(red.f_act(moved, a.q))
            return np.concatenate([q, a.p])

        N = ct.dim_ambient
        z0 = point(xb)
        cols = []
        for j in range(self.dim):
            dz = _deriv4(point, xb, np.eye(self.dim)[j], self.step(xb, j))
            cols.append(np.concatenate([frame_components(ct, z0[:N], dz[:N]), dz[N:]]))
        return np.column_stack(cols)


def build_leaf(gauge: GaugePack, sampler=None) -> LeafChart:
    return LeafChart(gauge, sampler)


def _point_on(leaf: LeafChart, xb, c, moved=None) -> CoVector:
    a = leaf.section(xb, c)
    if moved is None:
        return a
    red = leaf.red
    return CoVector(red.chart_tilde.normalize(red.f_act(moved, a.q)), a.p)


# ---------------------------------------------------------------------------
# level sets and the reduced forms
# ---------------------------------------------------------------------------

def level_set_membership(gauge: GaugePack, alpha: CoVector, c) -> np.ndarray:
    """``(J~_i(alpha) - c_i)_i``."""
    return reduced_J(gauge, alpha) - _level(c)


def omega_mu_matrix(leaf: LeafChart, c, xb, moved=None, gauge: Optional[GaugePack] = None):
    """``omega_mu^B`` on the coordinate basis of the leaf chart at x̄."""
    g = leaf.gauge if gauge is None else gauge
    T = leaf.section_tangents(xb, c, moved)
    return T.T @ omega_B_tilde_matrix(g, _point_on(leaf, xb, c, moved)) @ T


def reduced_omega_mu(leaf: LeafChart, c, xb, u, v) -> float:
    W = omega_mu_matrix(leaf, c, xb)
    sv = np.linalg.svd(W, compute_uv=False)
    if sv[-1] <= 1e-10 * max(1.0, sv[0]):
        raise DegenerateLeafFormError(f"leaf form degenerate (smallest singular value {sv[-1]:.3e})")
    return float(np.asarray(u) @ W @ np.asarray(v))


def level_tangent_frame(gauge: GaugePack, alpha: CoVector) -> np.ndarray:
    """Basis (columns) of the kernel of ``dJ~`` at alpha."""
    dJ = np.array([covector_differential(gauge.red, lambda a, i=i: float(reduced_J(gauge, a)[i]), alpha)
                   for i in range(gauge.k)])
    _, _, Vt = np.linalg.svd(dJ)
    return Vt[gauge.k:].T


def basic_residuals(leaf: LeafChart, c, xb, rng: Optional[np.random.Generator] = None,
                    gauge: Optional[GaugePack] = None):
    """``(a, b)``: contraction of ``iota^* Omega~_B`` with ``eta_i`` over the level
    set, and the change of omega_mu under an F-move of the section."""
    g = leaf.gauge if gauge is None else gauge
    alpha = leaf.section(xb, c)
    Om = omega_B_tilde_matrix(g, alpha)
    T = level_tangent_frame(g, alpha)
    a = max(float(np.max(np.abs(eta_lift(g, alpha, i) @ Om @ T))) for i in range(g.k))
    b = 0.0
    red = leaf.red
    if rng is not None and red.f_sample is not None:
        moved = red.f_sample(rng)
        b = float(np.max(np.abs(omega_mu_matrix(leaf, c, xb, moved, g) - omega_mu_matrix(leaf, c, xb, None, g))))
    return a, b


def verify_basic(leaf: LeafChart, c, samples, rng=None, gauge: Optional[GaugePack] = None) -> float:
    rng = np.random.default_rng(0) if rng is None else rng
    return max(max(basic_residuals(leaf, c, xb, rng, gauge)) for xb in samples)


# ---------------------------------------------------------------------------
# shift map and the identification with T*Q̄
# ---------------------------------------------------------------------------

def shift_map(gauge: GaugePack, alpha: CoVector, c) -> CoVector:
    """``alpha - c_i Y~^i``."""
    Y = Ytilde_coefficients(gauge, alpha.q)
    return CoVector(alpha.q.copy(), alpha.p - Y.T @ _level(c))


def shift_pullback_residual(gauge: GaugePack, alpha: CoVector, c) -> float:
    """``Shift^* Omega_{Q~} - (Omega_{Q~} + tau^* c_i dY~^i)``, max entry."""
    red = gauge.red
    r = red.dim
    c = _level(c)
    beta = shift_map(gauge, alpha, c)
    # tangent map: base unchanged, momenta shifted by -d(Y~^T c)
    dYc = np.zeros((r, 2 * r))
    dYc[:, :r] = np.array([covector_derivative_row(gauge, alpha, c, a) for a in range(r)]).T
    Tm = np.eye(2 * r)
    Tm[r:, :] -= dYc
    lhs = Tm.T @ canonical_matrix(red, beta) @ Tm
    rhs = canonical_matrix(red, alpha)
    rhs[:r, :r] += np.einsum("i,iab->ab", c, dYtilde_matrices(gauge, alpha.q))
    return float(np.max(np.abs(lhs - rhs)))


def covector_derivative_row(gauge: GaugePack, alpha: CoVector, c, a: int) -> np.ndarray:
    """Derivative of ``Y~^T c`` (frame momenta) along ``X~_a``."""
    ct = gauge.red.chart_tilde
    E = ct.frame(alpha.q)
    return directional_derivative(ct, lambda q: Ytilde_coefficients(gauge, q).T @ c, alpha.q, E[:, a])


def _hor_projection(leaf: LeafChart, qt) -> np.ndarray:
    """``R[j, h]``: quotient-frame components of ``T rho_Q̄ (X~_h)``."""
    red = leaf.red
    ct, quo = red.chart_tilde, red.quotient
    E = ct.frame(qt)
    qb = quo.rho(qt)
    cols = [frame_components(quo.chart, qb, directional_derivative(ct, quo.rho, qt, E[:, h]))
            for h in leaf.hor]
    return np.column_stack(cols)


def phi_zero(leaf: LeafChart, alpha: CoVector, tol: float = 1e-10) -> CoVector:
    """``<phi_0(alpha), T rho v> = <alpha, v>`` on ``J~^{-1}(0)``."""
    res = level_set_membership(leaf.gauge, alpha, np.zeros(leaf.gauge.k))
    if np.max(np.abs(res)) > tol * max(1.0, float(np.max(np.abs(alpha.p)))):
        raise LevelSetViolationError(f"covector is off the zero level (residual {np.max(np.abs(res)):.3e})")
    R = _hor_projection(leaf, alpha.q)
    return CoVector(leaf.red.quotient.rho(alpha.q), np.linalg.solve(R.T, alpha.p[leaf.hor]))


def phi_zero_inverse(leaf: LeafChart, beta: CoVector) -> CoVector:
    """Covector on the section over ``beta.q`` at level 0 pairing like beta."""
    qt = leaf.base_point(beta.q)
    R = _hor_projection(leaf, qt)
    xb = np.concatenate([beta.q, R.T @ beta.p])
    return leaf.section(xb, np.zeros(leaf.gauge.k))


def phi_mu(leaf: LeafChart, c, xb) -> np.ndarray:
    """``phi_0 o Shift`` on a leaf point, as ``(q̄, p̄)``."""
    b = phi_zero(leaf, shift_map(leaf.gauge, leaf.section(xb, c), c))
    return np.concatenate([b.q, b.p])


def phi_mu_inverse(leaf: LeafChart, c, zb) -> np.ndarray:
    """Leaf point with ``phi_mu = (q̄, p̄)``; the pairing system is linear in p̄."""
    m = leaf.m
    alpha = phi_zero_inverse(leaf, CoVector(np.asarray(zb[:m], float), np.asarray(zb[m:], float)))
    return leaf.coordinates(alpha)


def _qbar_phase(leaf: LeafChart):
    return product_chart(leaf.red.quotient.chart, leaf.m, name="T*Qbar")


def canonical_qbar_matrix(leaf: LeafChart, zb) -> np.ndarray:
    """``Omega_Q̄`` on the product frame of T*Q̄ at ``(q̄, p̄)``."""
    m = leaf.m
    theta = lambda z: np.concatenate([z[m:], np.zeros(m)])
    return -d_matrix(_qbar_phase(leaf), theta, np.asarray(zb, dtype=float))


def phi_mu_jacobian(leaf: LeafChart, c, xb) -> np.ndarray:
    """Product-frame components on T*Q̄ of ``d phi_mu / d x̄_j``."""
    xb = np.asarray(xb, dtype=float)
    m = leaf.m
    zb = phi_mu(leaf, c, xb)
    cols = []
    for j in range(leaf.dim):
        dz = _deriv4(lambda x: phi_mu(leaf, c, x), xb, np.eye(leaf.dim)[j], leaf.step(xb, j))
        base = frame_components(leaf.red.quotient.chart, zb[:m], dz[:m])
        cols.append(np.concatenate([base, dz[m:]]))
    return np.column_stack(cols)


def phi_mu_pullback_matrix(leaf: LeafChart, c, xb) -> np.ndarray:
    Jm = phi_mu_jacobian(leaf, c, xb)
    return Jm.T @ canonical_qbar_matrix(leaf, phi_mu(leaf, c, xb)) @ Jm


def calB_bar_matrix(leaf: LeafChart, c, xb) -> np.ndarray:
    """``calB̄_mu``: calB~ pulled back along the leaf section."""
    T = leaf.section_tangents(xb, c)
    return T.T @ calB_tilde_matrix(leaf.gauge, leaf.section(xb, c)) @ T


def identification_residual(leaf: LeafChart, c, xb) -> float:
    """``|phi_mu^* Omega_Q̄ - (omega_mu^B - calB̄_mu)|`` on the leaf basis."""
    lhs = phi_mu_pullback_matrix(leaf, c, xb)
    rhs = omega_mu_matrix(leaf, c, xb) - calB_bar_matrix(leaf, c, xb)
    return float(np.max(np.abs(lhs - rhs)))


def verify_identification(leaf: LeafChart, c, samples) -> float:
    return max(identification_residual(leaf, c, xb) for xb in samples)


def magnetic_term(leaf: LeafChart, c, zb, u, v) -> float:
    """``B̂_mu = (phi_mu^{-1})^* calB̄_mu`` at ``(q̄, p̄)`` on T*Q̄ product-frame vectors."""
    xb = phi_mu_inverse(leaf, c, zb)
    Jm = phi_mu_jacobian(leaf, c, xb)
    Jinv = np.linalg.inv(Jm)
    return float(np.asarray(u) @ Jinv.T @ calB_bar_matrix(leaf, c, xb) @ Jinv @ np.asarray(v))


# ---------------------------------------------------------------------------
# Casimirs and leaf dynamics
# ---------------------------------------------------------------------------

def invariant_coordinates(leaf: LeafChart, alpha: CoVector) -> np.ndarray:
    """F-invariant coordinates on T*Q~: ``rho_Q̄(q~)`` and the frame momenta."""
    return np.concatenate([leaf.red.quotient.rho(alpha.q), alpha.p])


def random_invariant_function(leaf: LeafChart, rng: np.random.Generator):
    """Degree <= 2 polynomial in the invariant coordinates."""
    d = leaf.m + leaf.red.dim
    a0, a1 = rng.normal(), rng.normal(size=d)
    A2 = rng.normal(size=(d, d))
    A2 = 0.5 * (A2 + A2.T)

    def f(alpha):
        x = invariant_coordinates(leaf, alpha)
        return float(a0 + a1 @ x + x @ A2 @ x)

    return f


def hamiltonian_field(gauge: GaugePack, f, alpha: CoVector) -> np.ndarray:
    """``X_f`` with ``i_{X_f} Omega~_B = df``."""
    return solve_form(omega_B_tilde_matrix(gauge, alpha), covector_differential(gauge.red, f, alpha))


def casimir_residual(leaf: LeafChart, f, alpha: CoVector) -> float:
    g = leaf.gauge
    X = hamiltonian_field(g, f, alpha)
    worst = 0.0
    for i in range(g.k):
        dJ = covector_differential(g.red, lambda a, i=i: float(reduced_J(g, a)[i]), alpha)
        worst = max(worst, abs(float(dJ @ X)))
    return worst


def casimir_check(leaf: LeafChart, samples, n_functions: int = 20, seed: int = 7) -> float:
    rng = np.random.default_rng(seed)
    fs = [random_invariant_function(leaf, rng) for _ in range(n_functions)]
    return max(casimir_residual(leaf, f, a) for a in samples for f in fs)


def leaf_hamiltonian(leaf: LeafChart, c, xb) -> float:
    g = leaf.gauge
    return reduced_hamiltonian(g.sys, g.red, leaf.section(xb, c))


def leaf_hamiltonian_field(leaf: LeafChart, c, xb) -> np.ndarray:
    """``X`` with ``i_X omega_mu^B = dH_mu`` in leaf coordinates."""
    xb = np.asarray(xb, dtype=float)
    W = omega_mu_matrix(leaf, c, xb)
    dH = np.array([float(_deriv4(lambda x: leaf_hamiltonian(leaf, c, x), xb, np.eye(leaf.dim)[j],
                                 leaf.step(xb, j)))
                   for j in range(leaf.dim)])
    return solve_form(W, dH, error=DegenerateLeafFormError)


def project_to_leaf(leaf: LeafChart, alpha: CoVector, w) -> np.ndarray:
    """Leaf-coordinate image of a T*Q~ tangent vector (product-frame comps w)."""
    red = leaf.red
    ct = red.chart_tilde
    r = red.dim
    amb = ct.frame(alpha.q) @ w[:r]
    qb_rate = directional_derivative(ct, red.quotient.rho, alpha.q, amb)
    return np.concatenate([qb_rate, np.asarray(w)[r:][leaf.hor]])


def leaf_dynamics_residual(leaf: LeafChart, c, xb) -> float:
    """Leaf field against the projection of ``X~_nh`` through ``rho_mu``."""
    g = leaf.gauge
    alpha = leaf.section(xb, c)
    proj = project_to_leaf(leaf, alpha, reduced_vector_field(g.sys, g.red, alpha))
    X = leaf_hamiltonian_field(leaf, c, xb)
    return float(np.max(np.abs(X - proj)) / max(1.0, float(np.max(np.abs(proj)))))


def lifted_state(leaf: LeafChart, c, xb):
    """State of the constraint phase space over a leaf point (zero fiber)."""
    g = leaf.gauge
    return lift_state(g.sys, g.red, leaf.section(xb, c))
