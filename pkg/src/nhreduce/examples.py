"""Builtin systems: nonholonomic particle, snakeboard, Chaplygin ball and a
solid of revolution (spheroid) rolling on a plane.

Every builder returns an :class:`ExampleSpec` bundling the system, its first
quotient, the gauge sections and closed-form reference values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Dict, Optional

import numpy as np
from scipy.integrate import quad

from .chaplygin import QuotientData, ReducedChart
from .geometry import (
    FrameChart,
    complex_step,
    expm_so3,
    hat,
    left_frame,
    levi_civita,
    random_rotation,
    rotation_chart_coframe,
    rotation_chart_move,
    rotation_chart_normalize,
    rotation_with_third_row,
)
from .symmetry import GroupData, SectionBasis, assemble_momentum_ode, solve_momentum_ode
from .system import NonholonomicSystem, legendre_to_M

NAMES = ("particle", "snakeboard", "chaplygin_ball", "solid_of_revolution")

DEFAULTS: Dict[str, Dict[str, float]] = {
    "particle": {"m": 1.0},
    "snakeboard": {"m": 1.0, "r": 1.0, "J": 0.5, "J0": 0.2},
    "chaplygin_ball": {"m": 1.0, "r": 1.0, "I1": 1.0, "I2": 2.0, "I3": 3.0},
    "solid_of_revolution": {"m": 1.0, "a": 1.0, "c": 0.6, "gravity": 9.81},
}


class ParameterError(ValueError):
    pass


@dataclass(eq=False)
class MomentumODESetup:
    xi_basis: SectionBasis
    shape: Callable[[np.ndarray], float]
    probe_point: Callable[[float], np.ndarray]
    gamma_range: tuple
    gamma0: float


@dataclass(eq=False)
class ExampleSpec:
    name: str
    params: Dict[str, float]
    system: NonholonomicSystem
    reduced: ReducedChart
    sections: SectionBasis
    oracles: Dict[str, Any]
    trajectory_state: Callable[[], Any]
    momentum_ode: Optional[MomentumODESetup] = None
    extras: Dict[str, Any] = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.sections.k


def _params(name, params):
    if name not in DEFAULTS:
        raise ParameterError(f"unknown example {name!r}; choose from {', '.join(NAMES)}")
    out = dict(DEFAULTS[name])
    for key, val in (params or {}).items():
        if key not in out:
            raise ParameterError(f"unknown parameter {key!r} for {name}")
        out[key] = float(val)
    for key, val in out.items():
        if key in ("r",) and name == "chaplygin_ball":
            if val < 0:
                raise ParameterError("radius must be non-negative")
        elif key == "gravity":
            if val < 0:
                raise ParameterError("gravity must be non-negative")
        elif not val > 0:
            raise ParameterError(f"parameter {key} must be positive")
    return out


def build_example(name: str, params: Optional[dict] = None) -> ExampleSpec:
    p = _params(name, params)
    key = tuple(sorted(p.items()))
    return _BUILDERS[name](key)


def _cross(u, v):
    # np.cross is slow for single 3-vectors
    return np.array([u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]])


def _rot2(t):
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s], [s, c]])


def _rot3z(t):
    out = np.eye(3)
    out[:2, :2] = _rot2(t)
    return out


# ---------------------------------------------------------------------------
# nonholonomic particle
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _particle(key) -> ExampleSpec:
    p = dict(key)
    m = p["m"]

    def frame(q):
        E = np.eye(3, dtype=q.dtype)
        E[2, 0] = q[1]
        return E

    def coframe(q):
        return np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-q[1], 0.0, 1.0]])

    def structure(q):
        C = np.zeros((3, 3, 3))
        C[2, 0, 1], C[2, 1, 0] = -1.0, 1.0
        return C

    chart = FrameChart(
        dim_q=3, coordinate_names=["x", "y", "z"], domain_predicate=lambda q: True,
        frame=frame, rank_D=2, rank_S=1, structure_coefficients=structure,
        coframe=coframe, s_columns=(0,), hor_columns=(1,), name="particle",
    )

    def metric(q):
        E = frame(q)
        return m * E.T @ E

    def generators(q):
        return np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]])

    group = GroupData(
        dim_g=2, generators=generators, structure_constants=np.zeros((2, 2, 2)),
        w_indices=(1,),
        act=lambda g, q: q + np.array([g[0], 0.0, g[1]]),
        inverse=lambda g: -np.asarray(g),
        group_sample=lambda rng: rng.uniform(-3, 3, size=2),
    )
    sys = NonholonomicSystem(
        chart=chart, metric=metric, action=group, name="particle",
        sample_q=lambda rng: rng.uniform(-2.0, 2.0, size=3),
        hamiltonian_gradient=complex_step_gradient(chart, metric, lambda q: 0.0),
    )
    zeta = SectionBasis([lambda q: np.array([1.0, q[1]]) / math.sqrt(1.0 + q[1] ** 2)])

    chart_t = FrameChart(
        dim_q=2, coordinate_names=["x", "y"], domain_predicate=lambda q: True,
        frame=lambda q: np.eye(2), rank_D=2, rank_S=1,
        structure_coefficients=lambda q: np.zeros((2, 2, 2)),
        s_columns=(0,), hor_columns=(1,), name="particle~",
    )
    quotient = QuotientData(
        chart=FrameChart(dim_q=1, coordinate_names=["y"], domain_predicate=lambda q: True,
                         frame=lambda q: np.eye(1), rank_D=1, rank_S=0, name="R"),
        rho=lambda qt: np.array([qt[1]]),
        section=lambda qb: np.array([0.0, qb[0]]),
    )
    red = ReducedChart(
        chart_tilde=chart_t,
        project_q=lambda q: np.array(q[:2]),
        lift_q=lambda qt, fiber=None: np.array([qt[0], qt[1], 0.0 if fiber is None else fiber[0]]),
        f_basis=lambda qt: np.array([[1.0], [0.0]]),
        eta=SectionBasis([lambda qt: np.array([1.0 / math.sqrt(1.0 + qt[1] ** 2)])], reduced=True),
        f_act=lambda h, qt: qt + np.array([float(np.atleast_1d(h)[0]), 0.0]),
        f_sample=lambda rng: rng.uniform(-3, 3, size=1),
        fiber_sample=lambda rng: rng.uniform(-3, 3, size=1),
        quotient=quotient,
    )
    oracles = {
        "J": lambda q, pD: pD[0] / math.sqrt(1.0 + q[1] ** 2),
        # Omega~ = dx^dpx + dy^dpy - y/(1+y^2) px dx^dy on (x, y, px, py)
        "omega_tilde": lambda qt, pt: _particle_omega_tilde(qt, pt),
        "omega_mu": lambda xb, pb: np.array([[0.0, 1.0], [-1.0, 0.0]]),
        "level_px": lambda y, c: c * math.sqrt(1.0 + y * y),
        "momentum_A": lambda y: -y / (1.0 + y * y),
        "momentum_F": lambda y, y0: math.sqrt((1.0 + y0 * y0) / (1.0 + y * y)),
        "B_zero": True,
    }
    setup = MomentumODESetup(
        xi_basis=SectionBasis([lambda q: np.array([1.0, q[1]])]),
        shape=lambda q: q[1],
        probe_point=lambda y: np.array([0.0, y, 0.0]),
        gamma_range=(-2.0, 2.0), gamma0=0.0,
    )
    return ExampleSpec(
        name="particle", params=p, system=sys, reduced=red, sections=zeta,
        oracles=oracles,
        trajectory_state=lambda: sys.state(np.array([0.0, 0.3, 0.0]), np.array([1.0, 0.5])),
        momentum_ode=setup,
    )


def _particle_omega_tilde(qt, pt):
    y, px = qt[1], pt[0]
    W = np.zeros((4, 4))
    W[0, 2], W[1, 3] = 1.0, 1.0
    W[0, 1] = -y / (1.0 + y * y) * px
    return W - W.T


# ---------------------------------------------------------------------------
# snakeboard
# ---------------------------------------------------------------------------

def snakeboard_F(phi, m, r, J):
    return m * r * math.sin(phi) * math.cos(phi) / (m * r * r - J * math.sin(phi) ** 2)


def snakeboard_E_closed(phi, m, r, J):
    """Closed form of ``exp(r int F / sin^2)`` normalized to 1 at pi/2."""
    s = math.sin(phi)
    return s * math.sqrt(m * r * r - J) / math.sqrt(m * r * r - J * s * s)


@lru_cache(maxsize=None)
def _snakeboard(key) -> ExampleSpec:
    p = dict(key)
    m, r, J, J0 = p["m"], p["r"], p["J"], p["J0"]
    if m * r * r <= J:
        raise ParameterError("snakeboard needs m r^2 > J")
    F = lambda phi: snakeboard_F(phi, m, r, J)

    def E_of(phi):
        val, _ = quad(lambda t: r * F(t) / math.sin(t) ** 2, math.pi / 2, phi,
                      epsabs=1e-14, epsrel=1e-13)
        return math.exp(val)

    # coordinates (theta, x, y, psi, phi); frame (Y_theta, d_psi, d_phi, d_x, d_y)
    def frame(q):
        th, ph = q[0], q[4]
        cot = np.cos(ph) / np.sin(ph)
        E = np.zeros((5, 5), dtype=q.dtype)
        E[:, 0] = [1.0, -r * np.cos(th) * cot, -r * np.sin(th) * cot, 0.0, 0.0]
        E[3, 1] = 1.0
        E[4, 2] = 1.0
        E[1, 3] = 1.0
        E[2, 4] = 1.0
        return E

    def coframe(q):
        th, ph = q[0], q[4]
        cot = math.cos(ph) / math.sin(ph)
        P = np.zeros((5, 5))
        P[0, 0] = 1.0
        P[1, 3] = 1.0
        P[2, 4] = 1.0
        P[3, :] = [r * math.cos(th) * cot, 1.0, 0.0, 0.0, 0.0]
        P[4, :] = [r * math.sin(th) * cot, 0.0, 1.0, 0.0, 0.0]
        return P

    def structure(q):
        th, ph = q[0], q[4]
        s2 = math.sin(ph) ** 2
        C = np.zeros((5, 5, 5))
        C[3, 0, 2] = -r * math.cos(th) / s2
        C[4, 0, 2] = -r * math.sin(th) / s2
        C[:, 2, 0] = -C[:, 0, 2]
        return C

    domain = lambda q: math.sin(q[4]) > 1e-3
    chart = FrameChart(
        dim_q=5, coordinate_names=["theta", "x", "y", "psi", "phi"],
        domain_predicate=domain, frame=frame, rank_D=3, rank_S=2,
        structure_coefficients=structure, coframe=coframe,
        s_columns=(0, 1), hor_columns=(2,), name="snakeboard",
    )
    Gc = np.zeros((5, 5))
    Gc[0, 0] = m * r * r
    Gc[1, 1] = Gc[2, 2] = m
    Gc[3, 3] = J
    Gc[0, 3] = Gc[3, 0] = J
    Gc[4, 4] = 2.0 * J0

    def metric(q):
        E = frame(q)
        return E.T @ Gc @ E

    def generators(q):
        x, y = q[1], q[2]
        S = np.zeros((5, 4), dtype=np.result_type(q, float))
        S[:, 0] = [1.0, -y, x, 0.0, 0.0]
        S[1, 1] = 1.0
        S[2, 2] = 1.0
        S[3, 3] = 1.0
        return S

    sc = np.zeros((4, 4, 4))
    sc[2, 0, 1], sc[2, 1, 0] = 1.0, -1.0
    sc[1, 0, 2], sc[1, 2, 0] = -1.0, 1.0

    def act(g, q):
        al, a, b, be = g
        xy = _rot2(al) @ q[1:3] + np.array([a, b])
        return np.array([q[0] + al, xy[0], xy[1], q[3] + be, q[4]])

    def inverse(g):
        al, a, b, be = g
        ab = -_rot2(-al) @ np.array([a, b])
        return np.array([-al, ab[0], ab[1], -be])

    group = GroupData(
        dim_g=4, generators=generators, structure_constants=sc, w_indices=(1, 2),
        act=act, inverse=inverse,
        group_sample=lambda rng: np.array([rng.uniform(-np.pi, np.pi), *rng.uniform(-2, 2, 2),
                                           rng.uniform(-np.pi, np.pi)]),
    )

    def sample_q(rng):
        return np.array([rng.uniform(-np.pi, np.pi), *rng.uniform(-2, 2, 2),
                         rng.uniform(-np.pi, np.pi), rng.uniform(0.4, np.pi - 0.4)])

    sys = NonholonomicSystem(chart=chart, metric=metric, action=group, name="snakeboard",
                             sample_q=sample_q,
                             hamiltonian_gradient=complex_step_gradient(chart, metric, lambda q: 0.0))

    def xi_theta(q):
        th, x, y, ph = q[0], q[1], q[2], q[4]
        cot = math.cos(ph) / math.sin(ph)
        return np.array([1.0, y - r * math.cos(th) * cot, -x - r * math.sin(th) * cot, 0.0])

    e_beta = np.array([0.0, 0.0, 0.0, 1.0])
    zeta = SectionBasis([lambda q: E_of(q[4]) * (xi_theta(q) - e_beta), lambda q: e_beta.copy()])

    chart_t = FrameChart(
        dim_q=3, coordinate_names=["theta", "psi", "phi"],
        domain_predicate=lambda qt: math.sin(qt[2]) > 1e-3, frame=lambda qt: np.eye(3),
        rank_D=3, rank_S=2, structure_coefficients=lambda qt: np.zeros((3, 3, 3)),
        s_columns=(0, 1), hor_columns=(2,), name="snakeboard~",
    )
    quotient = QuotientData(
        chart=FrameChart(dim_q=1, coordinate_names=["phi"],
                         domain_predicate=lambda qb: math.sin(qb[0]) > 1e-3,
                         frame=lambda qb: np.eye(1), rank_D=1, rank_S=0, name="S1"),
        rho=lambda qt: np.array([qt[2]]),
        section=lambda qb: np.array([0.0, 0.0, qb[0]]),
    )
    red = ReducedChart(
        chart_tilde=chart_t,
        project_q=lambda q: np.array([q[0], q[3], q[4]]),
        lift_q=lambda qt, fiber=None: np.array(
            [qt[0], *(np.zeros(2) if fiber is None else fiber), qt[1], qt[2]]),
        f_basis=lambda qt: np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]),
        eta=SectionBasis([lambda qt: E_of(qt[2]) * np.array([1.0, -1.0]),
                          lambda qt: np.array([0.0, 1.0])], reduced=True),
        f_act=lambda h, qt: qt + np.array([h[0], h[1], 0.0]),
        f_sample=lambda rng: rng.uniform(-np.pi, np.pi, size=2),
        fiber_sample=lambda rng: rng.uniform(-2, 2, size=2),
        quotient=quotient,
    )

    def H_matrix(q, pD):
        # kinetic energy from the coordinate Lagrangian, restricted to D
        E = frame(q)[:, :3]
        K = E.T @ Gc @ E
        return 0.5 * pD @ np.linalg.solve(K, pD)

    oracles = {
        "F": F,
        "E": lambda phi: snakeboard_E_closed(phi, m, r, J),
        "J1": lambda q, pD: snakeboard_E_closed(q[4], m, r, J) * (pD[0] - pD[1]),
        "J2": lambda q, pD: pD[1],
        "hamiltonian": H_matrix,
        "omega_tilde_extra": lambda phi, pth, pps: r * F(phi) / math.sin(phi) ** 2 * (pth - pps),
        "level_ptheta": lambda phi, c1, c2: c1 / snakeboard_E_closed(phi, m, r, J) + c2,
        "momentum_A": lambda phi: r * F(phi) / math.sin(phi) ** 2,
        "omega_mu": lambda xb, pb: np.array([[0.0, 1.0], [-1.0, 0.0]]),
        "B_zero": True,
    }
    setup = MomentumODESetup(
        xi_basis=SectionBasis([lambda q: xi_theta(q) - e_beta]),
        shape=lambda q: q[4],
        probe_point=lambda phi: np.array([0.0, 0.0, 0.0, 0.0, phi]),
        gamma_range=(0.5, np.pi - 0.5), gamma0=np.pi / 2,
    )
    traj = lambda: sys.state(np.array([0.2, 0.1, -0.3, 0.0, np.pi / 2 - 0.2]),
                             np.array([0.6, 0.3, 0.02]))
    return ExampleSpec(
        name="snakeboard", params=p, system=sys, reduced=red, sections=zeta,
        oracles=oracles, trajectory_state=traj, momentum_ode=setup,
        extras={"E_quadrature": E_of, "xi_theta": xi_theta},
    )


# ---------------------------------------------------------------------------
# rotation charts
# ---------------------------------------------------------------------------

_EPS3 = levi_civita()


def rotation_frame_chart(name, body_frame, n_extra, domain, rank_D, rank_S,
                         hor_columns=None, s_columns=None, names_extra=()):
    """Chart on ``SO(3) x R^n_extra`` with a frame given in body components.

    ``body_frame(q)`` returns T with the frame columns written on the basis
    ``{X_1^L, X_2^L, X_3^L, d/dx_1, ...}``; it must accept complex input.
    Structure coefficients use the so(3) constants for the left-invariant
    part and complex-step derivatives of T along the frame.
    """
    n = 3 + n_extra
    move = rotation_chart_move(n_extra)

    def frame(q):
        L = np.zeros((9 + n_extra, n), dtype=np.result_type(q, float))
        L[:9, :3] = left_frame(q[:9].reshape(3, 3))
        L[9:, 3:] = np.eye(n_extra)
        return L @ body_frame(q)

    def structure(q):
        T = body_frame(q)
        E = frame(q)
        DT = np.array([complex_step(body_frame, q, E[:, a]) for a in range(n)])
        # c[:, a, b] = X_a(T)[:, b] - X_b(T)[:, a] + so(3) part
        c = DT.transpose(1, 0, 2) - DT.transpose(1, 2, 0)
        c[:3] += np.einsum("ia,jb,ijk->kab", T[:3], T[:3], _EPS3)
        return np.linalg.solve(T, c.reshape(n, n * n)).reshape(n, n, n)

    names = [f"g{i}{j}" for i in range(3) for j in range(3)] + list(names_extra)
    return FrameChart(
        dim_q=n, coordinate_names=names, domain_predicate=domain, frame=frame,
        rank_D=rank_D, rank_S=rank_S, structure_coefficients=structure, move=move,
        normalize=rotation_chart_normalize,
        coframe=rotation_chart_coframe(n_extra, body_frame),
        hor_columns=hor_columns, s_columns=s_columns, name=name,
    )


def complex_step_gradient(chart: FrameChart, metric, potential):
    """``X_a(H)`` on the D columns for complex-analytic metric and potential."""
    r = chart.rank_D

    def gradient(q, pD):
        E = chart.frame(q)
        K = metric(q)
        v = np.linalg.solve(K[:r, :r], pD)
        out = np.empty(r)
        for a in range(r):
            dK = complex_step(metric, q, E[:, a])[:r, :r]
            out[a] = -0.5 * v @ dK @ v + complex_step(potential, q, E[:, a])
        return out

    return gradient


def _rows(q):
    g = q[:9].reshape(3, 3)
    return g, g[0], g[1], g[2]


def _sphere_quotient():
    """``Q̄ = S^2`` in the chart ``(gamma_1, gamma_2)`` with ``gamma_3 > 0``."""

    def g3(qb):
        return math.sqrt(max(0.0, 1.0 - qb[0] ** 2 - qb[1] ** 2))

    def frame(qb):
        c = g3(qb)
        return np.array([[0.0, -c], [c, 0.0]])

    chart = FrameChart(
        dim_q=2, coordinate_names=["gamma1", "gamma2"],
        domain_predicate=lambda qb: qb[0] ** 2 + qb[1] ** 2 < 1.0 - 0.05 ** 2,
        frame=frame, rank_D=2, rank_S=0, name="S2",
    )

    def section(qb):
        gam = np.array([qb[0], qb[1], g3(qb)])
        return rotation_with_third_row(gam).ravel()

    return QuotientData(chart=chart, rho=lambda qt: np.array([qt[6], qt[7]]), section=section)


def sphere_area_form(gamma, u, v):
    """``Phi_{S^2}(u, v) = <gamma, u x v>`` for vectors tangent at gamma."""
    return float(np.dot(gamma, _cross(u, v)))


def leaf_area_matrix(xb):
    """``Phi_{S^2}`` on the coordinate basis of a ball leaf ``(g1, g2, p1, p2)``.

    The upper hemisphere is graphed over ``(g1, g2)``; momentum directions
    do not move gamma.
    """
    g1, g2 = float(xb[0]), float(xb[1])
    g3 = math.sqrt(1.0 - g1 * g1 - g2 * g2)
    gam = np.array([g1, g2, g3])
    V = np.zeros((4, 3))
    V[0] = [1.0, 0.0, -g1 / g3]
    V[1] = [0.0, 1.0, -g2 / g3]
    return np.array([[sphere_area_form(gam, V[i], V[j]) for j in range(4)] for i in range(4)])


# ---------------------------------------------------------------------------
# Chaplygin ball
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _ball(key) -> ExampleSpec:
    p = dict(key)
    m, rad = p["m"], p["r"]
    II = np.diag([p["I1"], p["I2"], p["I3"]])
    Gb = np.zeros((5, 5))
    Gb[:3, :3] = II
    Gb[3, 3] = Gb[4, 4] = m

    def adapted(gam):
        A = np.zeros((3, 3), dtype=gam.dtype)
        A[:, 0] = -gam[0] * gam
        A[:, 1] = -gam[1] * gam
        A[0, 0] += 1.0
        A[1, 1] += 1.0
        A[:, 2] = gam
        return A

    def body_frame(q):
        _, al, be, gam = _rows(q)
        T = np.zeros((5, 5), dtype=q.dtype)
        T[:3, :3] = adapted(gam)
        T[3, :3] = rad * be @ T[:3, :3]
        T[4, :3] = -rad * al @ T[:3, :3]
        T[3, 3] = T[4, 4] = 1.0
        return T

    domain = lambda q: q[8].real > 0.05
    chart = rotation_frame_chart("chaplygin_ball", body_frame, 2, domain, 3, 1,
                                 names_extra=("x", "y"))

    def metric(q):
        T = body_frame(q)
        return T.T @ Gb @ T

    def generators(q):
        g, _, _, gam = _rows(q)
        S = np.zeros((11, 3), dtype=np.result_type(q, float))
        S[:9, 0] = left_frame(g) @ gam
        S[9:, 0] = [-q[10], q[9]]
        S[10, 1] = 1.0
        S[9, 2] = 1.0
        return S

    sc = np.zeros((3, 3, 3))
    sc[2, 0, 1], sc[2, 1, 0] = -1.0, 1.0
    sc[1, 0, 2], sc[1, 2, 0] = 1.0, -1.0

    def act(h, q):
        th, a, b = h
        g = _rot3z(th) @ q[:9].reshape(3, 3)
        xy = _rot2(th) @ q[9:11] + np.array([a, b])
        return np.concatenate([g.ravel(), xy])

    def inverse(h):
        th, a, b = h
        ab = -_rot2(-th) @ np.array([a, b])
        return np.array([-th, ab[0], ab[1]])

    group = GroupData(
        dim_g=3, generators=generators, structure_constants=sc, w_indices=(1, 2),
        act=act, inverse=inverse,
        group_sample=lambda rng: np.array([rng.uniform(-np.pi, np.pi), *rng.uniform(-2, 2, 2)]),
    )

    def sample_rotation(rng, lo=0.3):
        while True:
            g = random_rotation(rng)
            if g[2, 2] >= lo:
                return g

    def sample_q(rng):
        return np.concatenate([sample_rotation(rng).ravel(), rng.uniform(-2, 2, 2)])

    sys = NonholonomicSystem(chart=chart, metric=metric, action=group, name="chaplygin_ball",
                             sample_q=sample_q,
                             hamiltonian_gradient=complex_step_gradient(chart, metric, lambda q: 0.0),
                             complex_safe=True)
    zeta = SectionBasis([lambda q: np.array([1.0, -q[9], q[10]])])

    def body_frame_t(qt):
        return adapted(qt[6:9])

    chart_t = rotation_frame_chart("chaplygin_ball~", body_frame_t, 0,
                                   lambda qt: qt[8].real > 0.05, 3, 1)
    red = ReducedChart(
        chart_tilde=chart_t,
        project_q=lambda q: np.array(q[:9]),
        lift_q=lambda qt, fiber=None: np.concatenate([qt, np.zeros(2) if fiber is None else fiber]),
        f_basis=lambda qt: (left_frame(qt.reshape(3, 3)) @ qt[6:9]).reshape(9, 1),
        eta=SectionBasis([lambda qt: np.array([1.0])], reduced=True),
        f_act=lambda h, qt: (_rot3z(float(np.atleast_1d(h)[0])) @ qt.reshape(3, 3)).ravel(),
        f_sample=lambda rng: rng.uniform(-np.pi, np.pi, size=1),
        fiber_sample=lambda rng: rng.uniform(-2, 2, size=2),
        quotient=_sphere_quotient(),
    )

    def omega_body(q, pD):
        """Angular velocity in body coordinates for a state."""
        K = metric(q)[:3, :3]
        v = np.linalg.solve(K, pD)
        return adapted(q[6:9]) @ v

    def M_of(q, pD):
        """Momenta on the frame ``X_1, X_2, X_3``."""
        return np.linalg.solve(adapted(q[6:9]).T, pD)

    oracles = {
        "M_from_omega": lambda gam, Om: II @ Om + m * rad ** 2 * (Om - np.dot(gam, Om) * gam),
        "M": M_of,
        "omega": omega_body,
        "J": lambda q, pD: float(np.dot(q[6:9], M_of(q, pD))),
        "B_coefficient": m * rad ** 2,
        # mr^2 <Omega, dlambda>(u, v) on body angular velocities of u, v
        "B_total": lambda Om, wu, wv: -m * rad ** 2 * float(np.dot(Om, _cross(wu, wv))),
        # calB on Hor pairs is mr^2<gamma,Omega><gamma,dlambda> - J Phi; on a leaf of
        # level c this gives calB_bar = -(c + mr^2 <gamma,Omega>) Phi
        "calB_bar_coefficient": lambda c, gam, Om: -(c + m * rad ** 2 * float(np.dot(gam, Om))),
        "area_form": sphere_area_form,
        "inertia": II,
        "mr2": m * rad ** 2,
        "B_zero": False,
    }
    g0 = expm_so3(np.array([0.05, -0.03, 0.0]))
    q0 = np.concatenate([g0.ravel(), [0.0, 0.0]])

    def traj():
        Om = np.array([0.08, -0.05, 1.0])
        v = np.linalg.solve(adapted(g0[2]), Om)
        return legendre_to_M(sys, q0, v)

    return ExampleSpec(
        name="chaplygin_ball", params=p, system=sys, reduced=red, sections=zeta,
        oracles=oracles, trajectory_state=traj,
        extras={"adapted": adapted, "sample_rotation": sample_rotation},
    )


# ---------------------------------------------------------------------------
# solid of revolution (spheroid)
# ---------------------------------------------------------------------------

def spheroid_profile(a, c):
    """``rho(g3)``, ``zeta(g3)`` of the contact point for semi-axes (a, a, c).

    The contact point is where the outward normal is ``-gamma``:
    ``s = -A gamma / sqrt(gamma^T A gamma)`` with ``A = diag(a^2, a^2, c^2)``.
    """

    def root(g3):
        return np.sqrt(a * a * (1.0 - g3 * g3) + c * c * g3 * g3)

    return (lambda g3: -a * a / root(g3)), (lambda g3: -c * c * g3 / root(g3))


def _solid_model(p):
    m, a, c, grav = p["m"], p["a"], p["c"], p["gravity"]
    rho, zet = spheroid_profile(a, c)
    I1 = m * (a * a + c * c) / 5.0
    I3 = 2.0 * m * a * a / 5.0
    II = np.diag([I1, I1, I3])

    def contact(gam):
        r3 = rho(gam[2])
        return np.array([r3 * gam[0], r3 * gam[1], zet(gam[2])])

    def adapted(gam):
        A = np.zeros((3, 3), dtype=gam.dtype)
        A[0, 0], A[1, 0] = -gam[1], gam[0]
        A[2, 1] = 1.0
        A[:, 2] = gam
        return A

    def body_frame(q):
        _, al, be, gam = _rows(q)
        s = contact(gam)
        T = np.zeros((5, 5), dtype=q.dtype)
        T[:3, :3] = adapted(gam)
        T[3, :3] = _cross(al, s) @ T[:3, :3]
        T[4, :3] = _cross(be, s) @ T[:3, :3]
        T[3, 3] = T[4, 4] = 1.0
        return T

    def metric(q):
        gam = q[6:9]
        w = _cross(gam, contact(gam))
        Gb = np.zeros((5, 5), dtype=q.dtype)
        Gb[:3, :3] = II + m * np.outer(w, w)
        Gb[3, 3] = Gb[4, 4] = m
        T = body_frame(q)
        return T.T @ Gb @ T

    def potential(q):
        gam = q[6:9]
        return -m * grav * (gam @ contact(gam))

    return dict(m=m, rho=rho, zet=zet, II=II, contact=contact, adapted=adapted,
                body_frame=body_frame, metric=metric, potential=potential)


@lru_cache(maxsize=None)
def _solid(key) -> ExampleSpec:
    p = dict(key)
    md = _solid_model(p)
    rho, zet, adapted = md["rho"], md["zet"], md["adapted"]
    domain = lambda q: abs(q[8].real) < 0.999
    chart = rotation_frame_chart("solid_of_revolution", md["body_frame"], 2, domain, 3, 2,
                                 hor_columns=(0,), s_columns=(1, 2), names_extra=("x", "y"))

    def generators(q):
        g, _, _, gam = _rows(q)
        Lf = left_frame(g)
        x, y = q[9], q[10]
        S = np.zeros((11, 4), dtype=np.result_type(q, float))
        S[:9, 0] = -Lf[:, 2]
        S[9:, 0] = [-y, x]
        S[:9, 1] = Lf @ gam
        S[9:, 1] = [-y, x]
        S[9, 2] = 1.0
        S[10, 3] = 1.0
        return S

    sc = np.zeros((4, 4, 4))
    for th in (0, 1):
        sc[3, th, 2], sc[3, 2, th] = 1.0, -1.0
        sc[2, th, 3], sc[2, 3, th] = -1.0, 1.0

    def act(h, q):
        t1, t2, a, b = h
        g = _rot3z(t2) @ q[:9].reshape(3, 3) @ _rot3z(t1).T
        xy = _rot2(t1 + t2) @ q[9:11] + np.array([a, b])
        return np.concatenate([g.ravel(), xy])

    def inverse(h):
        t1, t2, a, b = h
        ab = -_rot2(-t1 - t2) @ np.array([a, b])
        return np.array([-t1, -t2, ab[0], ab[1]])

    group = GroupData(
        dim_g=4, generators=generators, structure_constants=sc, w_indices=(2, 3),
        act=act, inverse=inverse,
        group_sample=lambda rng: np.array([*rng.uniform(-np.pi, np.pi, 2), *rng.uniform(-2, 2, 2)]),
    )

    def sample_q(rng):
        while True:
            g = random_rotation(rng)
            if abs(g[2, 2]) <= 0.85:
                return np.concatenate([g.ravel(), rng.uniform(-2, 2, 2)])

    sys = NonholonomicSystem(
        chart=chart, metric=md["metric"], potential=md["potential"], action=group,
        name="solid_of_revolution", sample_q=sample_q,
        hamiltonian_gradient=complex_step_gradient(chart, md["metric"], md["potential"]),
        complex_safe=True)

    def L_of(g3):
        return rho(g3) * g3 - zet(g3)

    def xi1(q):
        _, al, be, gam = _rows(q)
        return np.array([1.0, 0.0, q[10] + rho(gam[2]) * be[2], -q[9] - rho(gam[2]) * al[2]])

    def xi2(q):
        _, al, be, gam = _rows(q)
        L = L_of(gam[2])
        return np.array([0.0, 1.0, q[10] - L * be[2], -q[9] + L * al[2]])

    xi_basis = SectionBasis([xi1, xi2])

    def probe_point(g3):
        gam = np.array([math.sqrt(1.0 - g3 * g3), 0.0, g3])
        return np.concatenate([rotation_with_third_row(gam).ravel(), [0.0, 0.0]])

    setup = MomentumODESetup(xi_basis=xi_basis, shape=lambda q: q[8], probe_point=probe_point,
                             gamma_range=(-0.95, 0.95), gamma0=0.0)
    A = assemble_momentum_ode(sys, xi_basis, setup.shape, probe_point)
    Fsol = solve_momentum_ode(A, setup.gamma_range, gamma0=setup.gamma0, nodes=16001,
                              rtol=2.5e-14, atol=1e-15, surrogate_points=96)

    def zeta_i(i):
        def section(q):
            f = Fsol(q[8])[:, i]
            return f[0] * xi1(q) + f[1] * xi2(q)
        return section

    zeta = SectionBasis([zeta_i(0), zeta_i(1)])

    chart_t = rotation_frame_chart("solid_of_revolution~", lambda qt: adapted(qt[6:9]), 0,
                                   lambda qt: abs(qt[8].real) < 0.999, 3, 2,
                                   hor_columns=(0,), s_columns=(1, 2))

    def f_basis(qt):
        Lf = left_frame(qt.reshape(3, 3))
        return np.column_stack([-Lf[:, 2], Lf @ qt[6:9]])

    quotient = QuotientData(
        chart=FrameChart(dim_q=1, coordinate_names=["gamma3"],
                         domain_predicate=lambda qb: abs(qb[0]) < 0.999,
                         frame=lambda qb: np.array([[1.0 - qb[0] ** 2]]), rank_D=1, rank_S=0,
                         name="S2/S1"),
        rho=lambda qt: np.array([qt[8]]),
        section=lambda qb: probe_point(qb[0])[:9],
    )

    def f_act(h, qt):
        return (_rot3z(h[1]) @ qt.reshape(3, 3) @ _rot3z(h[0]).T).ravel()

    red = ReducedChart(
        chart_tilde=chart_t,
        project_q=lambda q: np.array(q[:9]),
        lift_q=lambda qt, fiber=None: np.concatenate([qt, np.zeros(2) if fiber is None else fiber]),
        f_basis=f_basis,
        eta=SectionBasis([lambda qt: Fsol(qt[8])[:, 0], lambda qt: Fsol(qt[8])[:, 1]], reduced=True),
        f_act=f_act,
        f_sample=lambda rng: rng.uniform(-np.pi, np.pi, size=2),
        fiber_sample=lambda rng: rng.uniform(-2, 2, size=2),
        quotient=quotient,
    )
    oracles = {
        "omega_mu": lambda xb, pb: np.array([[0.0, 1.0], [-1.0, 0.0]]) / (1.0 - xb[0] ** 2),
        "fundamental": Fsol,
        "momentum_A": A,
        "inertia": md["II"],
        "contact": md["contact"],
        "B_zero": False,
    }

    def traj():
        gam = np.array([math.sqrt(1.0 - 0.15 ** 2), 0.0, 0.15])
        q0 = np.concatenate([rotation_with_third_row(gam).ravel(), [0.0, 0.0]])
        Om = np.array([0.0, 0.0, 6.0])
        v = np.linalg.solve(adapted(gam), Om)
        return legendre_to_M(sys, q0, v)

    return ExampleSpec(
        name="solid_of_revolution", params=p, system=sys, reduced=red, sections=zeta,
        oracles=oracles, trajectory_state=traj, momentum_ode=setup,
        extras={"adapted": adapted, "xi": xi_basis, "L": L_of, "rho": rho, "zeta": zet},
    )


_BUILDERS = {
    "particle": _particle,
    "snakeboard": _snakeboard,
    "chaplygin_ball": _ball,
    "solid_of_revolution": _solid,
}
