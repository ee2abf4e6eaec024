"""Pure numpy versions of the small dense kernels."""
import numpy as np


def exterior_assemble(Dalpha, alpha, C):
    """``Dalpha - Dalpha^T - alpha_c C[c]``; C must be antisymmetric in its last two slots."""
    return Dalpha - Dalpha.T - np.einsum("c,cab->ab", alpha, C)


def expm_so3(w):
    th = float(np.sqrt(w @ w))
    K = np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])
    if th < 1e-8:
        a, b = 1.0 - th * th / 6.0, 0.5 - th * th / 24.0
    else:
        a, b = np.sin(th) / th, (1.0 - np.cos(th)) / (th * th)
    return np.eye(3) + a * K + b * (K @ K)


def polar_so3(R):
    U, _, Vt = np.linalg.svd(R)
    Q = U @ Vt
    if np.linalg.det(Q) < 0:
        U[:, -1] = -U[:, -1]
        Q = U @ Vt
    return Q


def small_solve(A, b):
    return np.linalg.solve(A, b)


def rk4_combine(y, k1, k2, k3, k4, dt):
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
