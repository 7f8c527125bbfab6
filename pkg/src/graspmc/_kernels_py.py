"""Pure numpy implementation of the sampler hot kernels.

Mirrors ``_kernels_c.pyx`` function for function; the active backend is
chosen in :mod:`graspmc.kernel`.  All pose arguments are ambient 7-vectors
``[qw, qx, qy, qz, tx, ty, tz]`` and ``Z`` is an ``(n, 7)`` array.
"""

import math

import numpy as np

BOUNDARY_W = 1e-9
LOG_2PI = math.log(2.0 * math.pi)


def gradient_matrix(y, Z, eta, sigma, ell, c):
    """``7 x n`` matrix of ``2*eta*grad_y k(y, z_i)``; zero columns where the
    relative rotation sits on the canonicalisation boundary."""
    y = np.asarray(y, dtype=float)
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    qn = math.sqrt(float(y[:4] @ y[:4]))
    q = y[:4] / qn
    dots = Z[:, :4] @ q
    dt = Z[:, 4:] - y[4:]
    d2 = 2.0 - 2.0 * np.minimum(np.abs(dots), 1.0) + c * np.einsum("ij,ij->i", dt, dt)
    k = sigma * sigma * np.exp(-d2 / (2.0 * ell * ell))
    coef = 2.0 * eta * k / (ell * ell)
    coef = np.where(np.abs(dots) > BOUNDARY_W, coef, 0.0)
    s = np.sign(dots)
    rot = (coef * s / qn)[:, None] * (Z[:, :4] - dots[:, None] * q)
    tra = (coef * c)[:, None] * dt
    return np.hstack([rot, tra]).T


def proposal_covariance(M, gamma, nu):
    M = np.asarray(M, dtype=float)
    Mc = M - M.mean(axis=1, keepdims=True)
    C = (nu * nu) * (Mc @ Mc.T)
    C = 0.5 * (C + C.T)
    C[np.diag_indices_from(C)] += gamma * gamma
    return C


def proposal_covariance_at(y, Z, eta, sigma, ell, c, gamma, nu):
    return proposal_covariance(gradient_matrix(y, Z, eta, sigma, ell, c), gamma, nu)


def cholesky(C):
    return np.linalg.cholesky(C)


def mvn_logpdf(x, mean, C):
    L = np.linalg.cholesky(C)
    r = np.linalg.solve(L, np.asarray(x, dtype=float) - mean)
    d = len(r)
    return float(-0.5 * (r @ r) - np.log(np.diag(L)).sum() - 0.5 * d * LOG_2PI)
