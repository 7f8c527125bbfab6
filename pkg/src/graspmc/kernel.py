"""Gaussian kernel on poses, its ambient gradient, and the Kameleon proposal
covariance ``gamma^2 I + nu^2 M H M^T``.

The heavy lifting lives in a compiled extension (``_kernels_c``) when it is
built, with a numpy fallback (``_kernels_py``) otherwise.  Set
``GRASPMC_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from graspmc import _kernels_py
from graspmc.geometry import Pose, d_mag_linearized, embed

if os.environ.get("GRASPMC_PURE_PYTHON"):
    backend = _kernels_py
else:
    try:
        from graspmc import _kernels_c as backend
    except ImportError:  # extension not built
        backend = _kernels_py

BACKEND = "cython" if backend is not _kernels_py else "python"
BOUNDARY_W = _kernels_py.BOUNDARY_W


class CanonicalBoundaryError(ValueError):
    """Relative rotation has ``|w| <= 1e-9``; the linearized distance is not
    differentiable there."""


@dataclass(frozen=True)
class KernelParams:
    sigma: float = 1.0
    ell: float = 1.0
    c: float = 0.0

    def __post_init__(self):
        if not self.sigma > 0 or not self.ell > 0:
            raise ValueError("kernel sigma and ell must be > 0")
        if self.c < 0:
            raise ValueError("kernel translation weight c must be >= 0")


def _as_ambient(p) -> np.ndarray:
    return embed(p) if isinstance(p, Pose) else np.asarray(p, dtype=float)


def _as_rows(zs) -> np.ndarray:
    if isinstance(zs, np.ndarray):
        return np.atleast_2d(zs)
    return np.array([embed(z) for z in zs])


def kernel_eval(a: Pose, b: Pose, params: KernelParams) -> float:
    d = d_mag_linearized(a, b, params.c)
    return params.sigma ** 2 * math.exp(-d * d / (2.0 * params.ell ** 2))


def kernel_grad(y, z, params: KernelParams) -> np.ndarray:
    """Gradient of ``kernel_eval(project(x), z)`` w.r.t. the 7 ambient
    coordinates of ``x``, evaluated at ``x = y``."""
    yv, zv = _as_ambient(y), _as_ambient(z)
    w = float(yv[:4] @ zv[:4]) / math.sqrt(float(yv[:4] @ yv[:4]))
    if abs(w) <= BOUNDARY_W:
        raise CanonicalBoundaryError(f"relative rotation w={w:.3g} on canonicalisation boundary")
    return 0.5 * backend.gradient_matrix(yv, zv[None, :], 1.0, params.sigma,
                                         params.ell, params.c)[:, 0]


def gradient_matrix(z, y, eta: float, params: KernelParams) -> np.ndarray:
    """``7 x n`` matrix whose column ``i`` is ``2*eta*grad k(y, z_i)``.

    Columns for ``z_i`` on the canonicalisation boundary are zero-filled.
    """
    Z = _as_rows(z)
    if len(Z) == 0:
        raise ValueError("subsample z must be non-empty")
    return backend.gradient_matrix(_as_ambient(y), Z, eta, params.sigma, params.ell, params.c)


def proposal_covariance(M: np.ndarray, gamma: float, nu: float) -> np.ndarray:
    return backend.proposal_covariance(M, gamma, nu)


def proposal_covariance_at(y, z, eta: float, params: KernelParams,
                           gamma: float, nu: float) -> np.ndarray:
    """Fused ``proposal_covariance(gradient_matrix(z, y, eta, params), gamma, nu)``."""
    return backend.proposal_covariance_at(_as_ambient(y), _as_rows(z), eta, params.sigma,
                                          params.ell, params.c, gamma, nu)
