"""von Mises-Fisher sampling on the unit sphere S^{p-1}.

Wood's (1994) rejection scheme: the component along the mean direction is
drawn from a beta envelope and accepted against the exact marginal, the
orthogonal part is a uniform tangent direction.
"""

import math

import numpy as np


def sample_mean_cosine(kappa: float, p: int, rng: np.random.Generator) -> float:
    """Draw ``w = <x, mean>`` for ``x ~ vMF(mean, kappa)`` on S^{p-1}.

    Draw order per attempt: one beta variate, then one uniform.
    """
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    dim = p - 1
    if kappa == 0.0:
        return 2.0 * rng.beta(dim / 2.0, dim / 2.0) - 1.0
    b = dim / (math.sqrt(4.0 * kappa * kappa + dim * dim) + 2.0 * kappa)
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + dim * math.log(1.0 - x0 * x0)
    while True:
        z = rng.beta(dim / 2.0, dim / 2.0)
        w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        u = rng.random()
        if kappa * w + dim * math.log(1.0 - x0 * w) - c >= math.log(u):
            return w


def vmf_sample(mean, kappa: float, rng: np.random.Generator) -> np.ndarray:
    """One draw from vMF(mean, kappa); ``kappa = 0`` is uniform on the sphere."""
    mean = np.asarray(mean, dtype=float)
    p = len(mean)
    w = sample_mean_cosine(kappa, p, rng)
    v = rng.standard_normal(p)
    v -= (v @ mean) * mean
    v /= np.linalg.norm(v)
    x = w * mean + math.sqrt(max(0.0, 1.0 - w * w)) * v
    return x / np.linalg.norm(x)


def mean_resultant_length(kappa: float, p: int = 4) -> float:
    """Expected ``<x, mean>``: the Bessel ratio ``I_{p/2}(k) / I_{p/2-1}(k)``."""
    from scipy.special import ive

    if kappa == 0:
        return 0.0
    return float(ive(p / 2.0, kappa) / ive(p / 2.0 - 1.0, kappa))
