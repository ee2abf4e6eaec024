"""Group actions, the nonholonomic momentum map and horizontal gauge momenta."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import BarycentricInterpolator, CubicHermiteSpline

from .geometry import complex_step, fd_step, frame_components
from .system import (
    MState,
    NonholonomicSystem,
    StateVelocity,
    hamel_vector_field,
)


class MissingGroupSampleError(ValueError):
    pass


class IllPosedMomentumODEError(ValueError):
    """The gauge coefficients cannot depend on the shape variable alone."""


class ODEStepFailure(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class GroupData:
    """Lie group acting on the configuration chart.

    ``generators(q)`` returns the ``N x l`` matrix of infinitesimal generators
    in ambient components.  ``act(g, q)``, ``inverse(g)`` and
    ``group_sample(rng)`` are optional and only needed for finite-element
    invariance checks.
    """

    dim_g: int
    generators: Callable[[np.ndarray], np.ndarray]
    structure_constants: np.ndarray
    w_indices: Sequence[int]
    act: Optional[Callable] = None
    inverse: Optional[Callable] = None
    group_sample: Optional[Callable[[np.random.Generator], object]] = None

    def is_ideal(self) -> bool:
        """True when ``[g, w]`` lies in ``w`` exactly."""
        c = np.asarray(self.structure_constants)
        others = [j for j in range(self.dim_g) if j not in self.w_indices]
        return bool(np.all(c[np.ix_(others, range(self.dim_g), self.w_indices)] == 0.0))


@dataclass(frozen=True, eq=False)
class SectionBasis:
    """``k`` Lie-algebra valued functions ``q -> l-vector``.

    ``reduced`` marks sections of the quotient algebra (functions on the
    reduced configuration chart).
    """

    sections: Sequence[Callable[[np.ndarray], np.ndarray]]
    reduced: bool = False

    @property
    def k(self) -> int:
        return len(self.sections)

    def matrix(self, q) -> np.ndarray:
        return np.column_stack([np.asarray(s(q), dtype=float) for s in self.sections])


# ---------------------------------------------------------------------------
# vertical space checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DimensionReport:
    holds: bool
    rank_S: int
    rank_sum: int


def _rank(M, tol=1e-9):
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0:
        return 0
    return int(np.sum(s > tol * max(1.0, s[0])))


def verify_dimension_assumption(sys: NonholonomicSystem, q) -> DimensionReport:
    """Check ``TQ = D + V`` and report ``rank(D ∩ V)``."""
    E = sys.chart.frame(q)
    sig = sys.action.generators(q)
    D = E[:, : sys.r]
    rank_sum = _rank(np.hstack([D, sig]))
    rank_S = _rank(D) + _rank(sig) - rank_sum
    holds = rank_sum == sys.n and rank_S == sys.chart.rank_S
    return DimensionReport(holds, rank_S, rank_sum)


def generator_frame_components(sys: NonholonomicSystem, q):
    """Frame components of all generators: ``n x l``."""
    return frame_components(sys.chart, q, sys.action.generators(q))


def vertical_symmetry_residual(sys: NonholonomicSystem, q) -> float:
    """Size of the non-W part of the generators of ``w``."""
    G = generator_frame_components(sys, q)[:, list(sys.action.w_indices)]
    return float(np.max(np.abs(G[: sys.r]), initial=0.0))


def section_S_residual(sys: NonholonomicSystem, section: SectionBasis, q) -> float:
    """Hor and W components of the generators of the sections (should vanish)."""
    Z = generator_frame_components(sys, q) @ section.matrix(q)
    mask = np.ones(sys.n, dtype=bool)
    mask[list(sys.chart.s_columns)] = False
    return float(np.max(np.abs(Z[mask]), initial=0.0))


def section_S_block(sys: NonholonomicSystem, section: SectionBasis, q):
    """``Z``: S-rows of the frame components of ``(zeta_i)_Q``; ``k x k``."""
    Z = generator_frame_components(sys, q) @ section.matrix(q)
    return Z[list(sys.chart.s_columns)]


# ---------------------------------------------------------------------------
# momentum map
# ---------------------------------------------------------------------------

def nh_momentum(sys: NonholonomicSystem, s: MState, section) -> float:
    """``J_xi(s) = <p, (xi(q))_Q>`` for an l-vector valued function ``section``."""
    xi = np.asarray(section(s.q), dtype=float)
    if not np.any(xi):
        return 0.0
    v = frame_components(sys.chart, s.q, sys.action.generators(s.q) @ xi)
    return float(s.p @ v)


def gauge_momenta(sys: NonholonomicSystem, basis: SectionBasis, s: MState):
    return np.array([nh_momentum(sys, s, z) for z in basis.sections])


def adjoint_by_pushforward(sys: NonholonomicSystem, g, q_src, eta, h=1e-6):
    """``Ad_g eta`` from ``(Ad_g eta)_Q (g q) = T Psi_g (eta_Q(q))``."""
    act = sys.action.act
    v = sys.action.generators(q_src) @ eta
    qp = sys.chart.move(q_src, v, h)
    qm = sys.chart.move(q_src, v, -h)
    push = (act(g, qp) - act(g, qm)) / (2.0 * h)
    sig = sys.action.generators(act(g, q_src))
    return np.linalg.lstsq(sig, push, rcond=None)[0]


def check_Ad_invariance(sys: NonholonomicSystem, section, samples) -> float:
    """Max of ``|Ad_g xi(Psi_{g^-1} q) - xi(q)|`` over ``(g, q)`` samples."""
    grp = sys.action
    if grp is None or grp.act is None or grp.inverse is None:
        raise MissingGroupSampleError("group action samples are not available")
    worst = 0.0
    for g, q in samples:
        q_src = grp.act(grp.inverse(g), q)
        xi_src = np.asarray(section(q_src), dtype=float)
        moved = adjoint_by_pushforward(sys, g, q_src, xi_src)
        worst = max(worst, float(np.max(np.abs(moved - section(q)))))
    return worst


def group_samples(sys: NonholonomicSystem, rng: np.random.Generator, count: int):
    grp = sys.action
    if grp is None or grp.group_sample is None:
        raise MissingGroupSampleError("system has no group sampler")
    return [(grp.group_sample(rng), sys.sample_q(rng)) for _ in range(count)]


@dataclass(frozen=True)
class Drift:
    max_abs_drift: float
    max_rel_drift: float


def conservation_drift(states, quantity) -> Drift:
    """Drift of ``quantity(state)`` relative to its initial value."""
    states = list(states)
    if not states:
        raise ValueError("empty trajectory")
    vals = np.array([float(quantity(s)) for s in states])
    d = float(np.max(np.abs(vals - vals[0])))
    return Drift(d, d / max(1.0, abs(vals[0])))


# ---------------------------------------------------------------------------
# gauge-momentum ODE
# ---------------------------------------------------------------------------

@dataclass
class MomentumODE:
    """Callable ``A(gamma)`` with the last probe-consistency residual."""

    sys: NonholonomicSystem
    xi_sections: Sequence[Callable]
    shape: Callable[[np.ndarray], float]
    probe_point: Callable[[float], np.ndarray]
    n_probes: int
    tol: float = 1e-6
    seed: int = 20240611
    last_residual: float = 0.0

    def probes(self, gamma):
        rng = np.random.default_rng(self.seed)
        q = self.probe_point(gamma)
        out = []
        for _ in range(self.n_probes):
            p = rng.normal(size=self.sys.r)
            out.append(self.sys.state(q, p / np.linalg.norm(p)))
        return out

    def system_rows(self, gamma):
        rows, rhs = [], []
        for s in self.probes(gamma):
            X = hamel_vector_field(self.sys, s)
            J = np.array([nh_momentum(self.sys, s, xi) for xi in self.xi_sections])
            dJ = np.array([_rate(self.sys, s, X, xi) for xi in self.xi_sections])
            rate = _shape_rate(self.sys, self.shape, s, X)
            rows.append(rate * J)
            rhs.append(-dJ)
        return np.array(rows), np.array(rhs)

    def __call__(self, gamma) -> np.ndarray:
        Phi, R = self.system_rows(float(gamma))
        A, *_ = np.linalg.lstsq(Phi, R, rcond=None)
        scale = max(np.linalg.norm(R), np.finfo(float).tiny)
        self.last_residual = float(np.linalg.norm(Phi @ A - R) / scale)
        if self.last_residual > self.tol:
            raise IllPosedMomentumODEError(
                f"probe residual {self.last_residual:.3e} at shape value {gamma}")
        return A


def _deriv4_q(sys, fn, q, qdot):
    if sys.complex_safe:
        return complex_step(fn, q, qdot)
    scale = float(np.max(np.abs(qdot)))
    if scale == 0.0:
        return np.zeros_like(np.asarray(fn(q), dtype=float))
    h = fd_step(q, 4) / scale
    f = lambda t: np.asarray(fn(sys.chart.move(q, qdot, t)), dtype=float)
    return (8.0 * (f(h) - f(-h)) - (f(2 * h) - f(-2 * h))) / (12.0 * h)


def _rate(sys, s, X: StateVelocity, xi) -> float:
    """Time derivative of ``J_xi = p . v_xi(q)`` along X by the product rule.

    Only the base factor ``v_xi`` is differenced; ``pW`` is differenced
    through the phase space only when ``xi_Q`` has W components.
    """
    from .system import derivative_along

    comps = lambda q: frame_components(sys.chart, q, sys.action.generators(q) @ xi(q))
    v = comps(s.q)
    out = float(X.pDdot @ v[: sys.r]) + float(s.p @ _deriv4_q(sys, comps, s.q, X.qdot))
    vW = v[sys.r:]
    if np.any(np.abs(vW) > 1e-14 * max(1.0, float(np.max(np.abs(v))))):
        dpW = derivative_along(sys, lambda st: st.pW, s, X.w, order=4)
        out += float(dpW @ vW)
    return out


def _shape_rate(sys, shape, s, X: StateVelocity) -> float:
    return float(_deriv4_q(sys, shape, s.q, X.qdot))


def assemble_momentum_ode(sys: NonholonomicSystem, xi_basis: SectionBasis, shape,
                          probe_point, tol=1e-6) -> MomentumODE:
    """Build ``A(gamma)`` with ``f' = A f`` making ``f^j J_{xi_j}`` conserved.

    ``probe_point(gamma)`` returns a configuration with ``shape == gamma``.
    ``2k + 2`` probe momenta are drawn from a fixed seeded unit sphere.
    """
    return MomentumODE(sys, list(xi_basis.sections), shape, probe_point,
                       n_probes=2 * xi_basis.k + 2, tol=tol)


@dataclass
class FundamentalSolution:
    """Interpolated solution ``F(gamma)`` of ``F' = A F``."""

    spline: CubicHermiteSpline
    k: int
    gamma0: float
    min_abs_det: float
    surrogate_error: Optional[float] = None

    def __call__(self, gamma) -> np.ndarray:
        return self.spline(gamma).reshape(self.k, self.k)

    def derivative(self, gamma) -> np.ndarray:
        return self.spline.derivative()(gamma).reshape(self.k, self.k)


def chebyshev_surrogate(A, gamma_range, points=96, checks=12, seed=0):
    """Barycentric interpolant of ``A`` through Chebyshev points of the range.

    Returns ``(surrogate, error)`` with ``error`` the largest deviation from
    direct evaluations at ``checks`` random points.
    """
    lo, hi = map(float, gamma_range)
    x = 0.5 * (lo + hi) + 0.5 * (hi - lo) * np.cos(np.pi * np.arange(points) / (points - 1))
    vals = np.array([np.asarray(A(v), dtype=float) for v in x])
    shape = vals.shape[1:]
    bary = BarycentricInterpolator(x, vals.reshape(points, -1), axis=0)
    surrogate = lambda g: bary(float(g)).reshape(shape)
    probes = np.random.default_rng(seed).uniform(lo, hi, checks)
    err = max((float(np.max(np.abs(surrogate(g) - np.asarray(A(g))))) for g in probes), default=0.0)
    return surrogate, err


def solve_momentum_ode(A, gamma_range, init=None, gamma0=None, nodes=601,
                       rtol=1e-12, atol=1e-13, surrogate_points=0) -> FundamentalSolution:
    """Integrate ``F' = A(gamma) F`` over ``gamma_range`` from ``gamma0``.

    Dense output is a cubic Hermite spline through ``nodes`` points using the
    exact derivatives ``A F``.  With ``surrogate_points > 0`` the matrix A is
    first replaced by a Chebyshev interpolant, which makes dense grids cheap
    when A itself is costly.
    """
    lo, hi = map(float, gamma_range)
    surrogate_error = None
    if surrogate_points:
        A, surrogate_error = chebyshev_surrogate(A, gamma_range, surrogate_points)
    A0 = np.asarray(A(0.5 * (lo + hi)))
    k = A0.shape[0]
    init = np.eye(k) if init is None else np.asarray(init, dtype=float)
    if abs(np.linalg.det(init)) < 1e-12:
        raise ValueError("initial fundamental matrix must be invertible")
    g0 = 0.5 * (lo + hi) if gamma0 is None else float(gamma0)
    grid = np.linspace(lo, hi, nodes)
    grid = np.union1d(grid, [g0])

    def rhs(g, y):
        return (np.asarray(A(g)) @ y.reshape(k, k)).ravel()

    values = np.empty((grid.size, k * k))
    i0 = int(np.searchsorted(grid, g0))
    values[i0] = init.ravel()
    for seg in (grid[i0:], grid[i0::-1]):
        if seg.size < 2:
            continue
        sol = solve_ivp(rhs, (seg[0], seg[-1]), init.ravel(), method="DOP853",
                        t_eval=seg, rtol=rtol, atol=atol)
        if not sol.success:
            raise ODEStepFailure(sol.message)
        idx = np.searchsorted(grid, seg)
        values[idx] = sol.y.T
    dets = np.array([np.linalg.det(v.reshape(k, k)) for v in values])
    min_det = float(np.min(np.abs(dets)))
    if min_det < 1e-10:
        raise ODEStepFailure("fundamental matrix became singular")
    derivs = np.array([rhs(g, v) for g, v in zip(grid, values)])
    spline = CubicHermiteSpline(grid, values, derivs, axis=0)
    return FundamentalSolution(spline, k, g0, min_det, surrogate_error)
