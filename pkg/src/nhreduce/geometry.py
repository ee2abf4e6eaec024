"""Charts with moving frames and finite-difference exterior calculus.

A chart stores points in ambient coordinates (``q`` of length ``N``) and a
frame of ``n`` tangent vector fields given by their ambient components.  For
Euclidean charts ``N == n``.  Charts containing a rotation factor store the
nine matrix entries and move along rotation curves, so ``N > n``.

Maurer-Cartan convention used everywhere in the package: the left-invariant
fields satisfy ``[X_i, X_j] = eps_ijk X_k`` and their dual forms satisfy
``d lambda_k (X_i, X_j) = -eps_ijk``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels

EPS_CBRT = np.finfo(float).eps ** (1.0 / 3.0)
# fourth-order stencils: a quarter of eps^(1/5) balances truncation and rounding
EPS_FIFTH = 0.25 * np.finfo(float).eps ** 0.2
FRAME_COND_LIMIT = 1e10


class ChartDomainError(ValueError):
    """Raised when a point lies outside the chart domain."""


class SingularFrameError(ValueError):
    """Raised when the frame matrix is not invertible at a point."""


def _euclidean_move(q, v, t):
    return q + t * v


def _identity(q):
    return q


@dataclass(frozen=True, eq=False)
class FrameChart:
    """Chart of a manifold together with an adapted moving frame.

    ``frame(q)`` returns an ``N x n`` matrix whose column ``a`` is the frame
    field ``X_a`` in ambient components.  The first ``rank_D`` columns span
    the constraint distribution D, the remaining ones span W.  Inside D the
    columns of the horizontal space and of S default to the positional split
    (Hor first, then S); ``hor_columns`` and ``s_columns`` override it.
    """

    dim_q: int
    coordinate_names: Sequence[str]
    domain_predicate: Callable[[np.ndarray], bool]
    frame: Callable[[np.ndarray], np.ndarray]
    rank_D: int
    rank_S: int
    structure_functions: Optional[Callable] = None
    structure_coefficients: Optional[Callable] = None
    move: Callable = _euclidean_move
    normalize: Callable = _identity
    coframe: Optional[Callable] = None
    hor_columns: Optional[Sequence[int]] = None
    s_columns: Optional[Sequence[int]] = None
    name: str = ""

    def __post_init__(self):
        n, r, k = self.dim_q, self.rank_D, self.rank_S
        if not (0 <= k <= r <= n):
            raise ValueError(f"need 0 <= rank_S <= rank_D <= dim_q, got {k}, {r}, {n}")
        if self.s_columns is None:
            object.__setattr__(self, "s_columns", tuple(range(r - k, r)))
        if self.hor_columns is None:
            hor = [a for a in range(r) if a not in self.s_columns]
            object.__setattr__(self, "hor_columns", tuple(hor))
        if len(self.s_columns) != k or len(self.hor_columns) != r - k:
            raise ValueError("column roles do not match rank_S / rank_D")

    @property
    def dim_ambient(self) -> int:
        return len(self.coordinate_names)

    @property
    def rank_W(self) -> int:
        return self.dim_q - self.rank_D

    @property
    def d_columns(self) -> tuple:
        return tuple(range(self.rank_D))

    @property
    def w_columns(self) -> tuple:
        return tuple(range(self.rank_D, self.dim_q))


@dataclass(frozen=True)
class CoVector:
    """Point of a cotangent bundle: base point and coefficients on the coframe."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))


def check_domain(chart: FrameChart, q) -> None:
    if not chart.domain_predicate(q):
        raise ChartDomainError(f"point outside the domain of chart {chart.name!r}")


def check_frame(chart: FrameChart, q) -> float:
    """Return the condition number of the frame at q, raising if singular."""
    E = chart.frame(q)
    s = np.linalg.svd(E, compute_uv=False)
    cond = s[0] / s[-1] if s[-1] > 0 else np.inf
    if not np.isfinite(cond) or cond > FRAME_COND_LIMIT:
        raise SingularFrameError(f"frame condition number {cond:.3e} at q")
    return float(cond)


def fd_step(q, order=2) -> float:
    """Finite-difference step ``max(1, |q|) * eps^(1/(order+1))``."""
    base = EPS_CBRT if order == 2 else EPS_FIFTH
    return max(1.0, float(np.max(np.abs(q)))) * base


def directional_derivative(chart: FrameChart, fn, q, v, h=None, order=4):
    """Central difference of ``fn`` along the curve ``chart.move(q, v, t)``.

    ``order`` selects the 2- or 4-point stencil (second or fourth order).
    """
    v = np.asarray(v, dtype=float)
    scale = float(np.max(np.abs(v)))
    if scale == 0.0:
        return np.zeros_like(np.asarray(fn(q), dtype=float))
    t = (fd_step(q, order) if h is None else h) / scale
    f = lambda tt: np.asarray(fn(chart.move(q, v, tt)), dtype=float)
    if order == 2:
        return (f(t) - f(-t)) / (2.0 * t)
    return (8.0 * (f(t) - f(-t)) - (f(2 * t) - f(-2 * t))) / (12.0 * t)


def complex_step(fn, q, v, h=1e-30):
    """Exact first derivative of an analytic ``fn`` along the straight line ``q + t v``.

    ``fn`` must accept complex input.  For rotation charts the line leaves
    the group, which is harmless when fn is defined on all 3x3 matrices: the
    first derivative only sees the tangent direction.
    """
    qc = np.asarray(q, dtype=complex) + 1j * h * np.asarray(v, dtype=float)
    return np.imag(np.asarray(fn(qc))) / h


def frame_components(chart: FrameChart, q, v):
    """Coefficients of the ambient tangent vector(s) ``v`` on the frame at q."""
    if chart.coframe is not None:
        return chart.coframe(q) @ v
    E = chart.frame(q)
    if E.shape[0] == E.shape[1]:
        return np.linalg.solve(E, v)
    return np.linalg.lstsq(E, v, rcond=None)[0]


def frame_derivatives(chart: FrameChart, q, h=None, columns=None):
    """Array ``D[a]`` = derivative of the whole frame along ``X_a``."""
    E = chart.frame(q)
    cols = range(chart.dim_q) if columns is None else columns
    return {a: directional_derivative(chart, chart.frame, q, E[:, a], h) for a in cols}


def bracket_coefficients(chart: FrameChart, q, use_structure=True, h=None):
    """Tensor ``C[c, a, b]`` with ``[X_a, X_b] = C[c, a, b] X_c``.

    Analytic structure data are used when present and ``use_structure`` is
    true; otherwise the brackets come from central differences of the frame.
    """
    n = chart.dim_q
    if use_structure and chart.structure_coefficients is not None:
        return np.asarray(chart.structure_coefficients(q), dtype=float)
    C = np.zeros((n, n, n))
    if use_structure and chart.structure_functions is not None:
        for a in range(n):
            for b in range(a + 1, n):
                C[:, a, b] = frame_components(chart, q, chart.structure_functions(q, a, b))
                C[:, b, a] = -C[:, a, b]
        return C
    D = frame_derivatives(chart, q, h)
    amb = np.zeros((chart.dim_ambient, n, n))
    for a in range(n):
        for b in range(a + 1, n):
            amb[:, a, b] = D[a][:, b] - D[b][:, a]
    flat = frame_components(chart, q, amb.reshape(chart.dim_ambient, n * n))
    C = flat.reshape(n, n, n)
    return C - np.transpose(C, (0, 2, 1))


def frame_bracket(chart: FrameChart, a: int, b: int, q, use_structure=True):
    """Ambient components of ``[X_a, X_b](q)`` (0-based indices)."""
    check_domain(chart, q)
    check_frame(chart, q)
    if a == b:
        return np.zeros(chart.dim_ambient)
    if a > b:
        return -frame_bracket(chart, b, a, q, use_structure)
    if use_structure and chart.structure_functions is not None:
        return np.asarray(chart.structure_functions(q, a, b), dtype=float)
    if use_structure and chart.structure_coefficients is not None:
        return chart.frame(q) @ chart.structure_coefficients(q)[:, a, b]
    E = chart.frame(q)
    Da = directional_derivative(chart, chart.frame, q, E[:, a])
    Db = directional_derivative(chart, chart.frame, q, E[:, b])
    return Da[:, b] - Db[:, a]


def d_matrix(chart: FrameChart, form, q, C=None, h=None):
    """Matrix ``dalpha(X_a, X_b)`` for a 1-form given by its frame coefficients.

    ``form(q)`` returns the ``n`` coefficients ``alpha(X_a)``.  Uses
    ``dalpha(X,Y) = X(alpha(Y)) - Y(alpha(X)) - alpha([X,Y])``.
    """
    E = chart.frame(q)
    alpha = np.asarray(form(q), dtype=float)
    n = chart.dim_q
    Dalpha = np.empty((n, n))
    for a in range(n):
        Dalpha[a] = directional_derivative(chart, form, q, E[:, a], h)
    if C is None:
        C = bracket_coefficients(chart, q)
    return _kernels.exterior_assemble(Dalpha, alpha, C)


def exterior_derivative(form, chart: FrameChart, q, a: int, b: int) -> float:
    """Value of ``dalpha(X_a, X_b)`` at q (0-based indices)."""
    check_domain(chart, q)
    return float(d_matrix(chart, form, q)[a, b])


def d_restricted_matrix(chart: FrameChart, form, q, C=None):
    """``d^D alpha`` on the frame: zero whenever an argument is a W column."""
    M = d_matrix(chart, form, q, C)
    r = chart.rank_D
    M[r:, :] = 0.0
    M[:, r:] = 0.0
    return M


def d_restricted(form, chart: FrameChart, q, a: int, b: int) -> float:
    check_domain(chart, q)
    return float(d_restricted_matrix(chart, form, q)[a, b])


def differential(chart: FrameChart, fn, q, h=None):
    """Frame components ``df(X_a)`` of a scalar function."""
    E = chart.frame(q)
    return np.array([float(directional_derivative(chart, fn, q, E[:, a], h))
                     for a in range(chart.dim_q)])


def product_chart(base: FrameChart, fiber_dim: int, name="") -> FrameChart:
    """Chart on ``base x R^fiber_dim`` with frame ``diag(E(q), I)``.

    Used for cotangent bundles and for the constraint phase space, whose
    points are (q, momenta).  Frame vectors of the base move q with the
    momenta held fixed; fiber vectors move the momenta.
    """
    N, n = base.dim_ambient, base.dim_q

    def frame(z):
        E = base.frame(z[:N])
        out = np.zeros((N + fiber_dim, n + fiber_dim))
        out[:N, :n] = E
        out[N:, n:] = np.eye(fiber_dim)
        return out

    def move(z, v, t):
        out = np.empty_like(z)
        out[:N] = base.move(z[:N], v[:N], t)
        out[N:] = z[N:] + t * v[N:]
        return out

    def structure(z):
        C = np.zeros((n + fiber_dim,) * 3)
        C[:n, :n, :n] = bracket_coefficients(base, z[:N])
        return C

    coframe = None
    if base.coframe is not None:
        def coframe(z):
            P = np.zeros((n + fiber_dim, N + fiber_dim))
            P[:n, :N] = base.coframe(z[:N])
            P[n:, N:] = np.eye(fiber_dim)
            return P

    names = list(base.coordinate_names) + [f"p{i}" for i in range(fiber_dim)]
    return FrameChart(
        dim_q=n + fiber_dim,
        coordinate_names=names,
        domain_predicate=lambda z: base.domain_predicate(z[:N]),
        frame=frame,
        rank_D=n + fiber_dim,
        rank_S=0,
        structure_coefficients=structure,
        move=move,
        normalize=lambda z: np.concatenate([base.normalize(z[:N]), z[N:]]),
        coframe=coframe,
        name=name or f"{base.name}*",
    )


# ---------------------------------------------------------------------------
# rotation helpers
# ---------------------------------------------------------------------------

def hat(w):
    return np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])


def vee(A):
    return np.array([A[2, 1], A[0, 2], A[1, 0]])


def expm_so3(w):
    """Rotation matrix ``exp(hat(w))`` by the Rodrigues formula."""
    return _kernels.expm_so3(np.asarray(w, dtype=float))


def project_so3(R):
    """Nearest rotation matrix to R."""
    return _kernels.polar_so3(np.asarray(R, dtype=float))


def random_rotation(rng: np.random.Generator):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def rotation_with_third_row(gamma):
    """A rotation matrix whose third row is the unit vector ``gamma``.

    Smooth away from ``gamma = -e3``: the minimal rotation carrying e3 to
    gamma, transposed.
    """
    gamma = np.asarray(gamma, dtype=float)
    e3 = np.array([0.0, 0.0, 1.0])
    axis = np.cross(e3, gamma)
    c = float(gamma[2])
    K = hat(axis)
    R = np.eye(3) + K + K @ K / (1.0 + c)
    return R.T


def so3_move(g, v, t):
    """Move a rotation along ``g exp(t w)`` where ``v = g hat(w)``."""
    w = vee(g.T @ v)
    return g @ expm_so3(t * w)


def left_frame(g):
    """Ambient (9 x 3) components of the left-invariant fields ``g hat(e_i)``."""
    out = np.empty((9, 3), dtype=np.result_type(g, float))
    for i in range(3):
        e = np.zeros(3)
        e[i] = 1.0
        out[:, i] = (g @ hat(e)).ravel()
    return out


def levi_civita():
    eps = np.zeros((3, 3, 3))
    eps[0, 1, 2] = eps[1, 2, 0] = eps[2, 0, 1] = 1.0
    eps[0, 2, 1] = eps[2, 1, 0] = eps[1, 0, 2] = -1.0
    return eps


def rotation_chart_move(n_extra: int):
    """Move function for ambient coordinates ``(g.ravel(), extra...)``."""

    def move(q, v, t):
        out = np.empty_like(q)
        g = q[:9].reshape(3, 3)
        out[:9] = so3_move(g, v[:9].reshape(3, 3), t).ravel()
        out[9:] = q[9:] + t * v[9:]
        return out

    return move


def rotation_chart_normalize(q):
    out = np.array(q, dtype=float)
    out[:9] = project_so3(q[:9].reshape(3, 3)).ravel()
    return out


def rotation_chart_coframe(n_extra: int, frame_in_body: Callable):
    """Left inverse of a frame given by body components.

    ``frame_in_body(q)`` returns the ``n x n`` matrix T expressing the frame
    columns in the basis ``{X_1^L, X_2^L, X_3^L, d/dx_1, ...}``.  The left
    inverse maps ambient vectors to body components and solves with T.
    """

    eps = levi_civita()

    def coframe(q):
        g = q[:9].reshape(3, 3)
        n = 3 + n_extra
        P = np.zeros((n, 9 + n_extra), dtype=np.result_type(q, float))
        # body components of V = g hat(w): w_k = -1/2 eps_kaj (g^T V)_aj
        P[:3, :9] = -0.5 * np.einsum("kaj,ia->kij", eps, g).reshape(3, 9)
        P[3:, 9:] = np.eye(n_extra)
        return np.linalg.solve(frame_in_body(q), P)

    return coframe
