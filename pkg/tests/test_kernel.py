import math

import numpy as np
import pytest

from graspmc import _kernels_py
from graspmc.geometry import Pose, axis_angle, embed, pose_compose, project, random_pose
from graspmc.kernel import (CanonicalBoundaryError, KernelParams, gradient_matrix, kernel_eval,
                            kernel_grad, proposal_covariance, proposal_covariance_at)


def offset_pair(rng, lo=0.05, hi=1.0):
    a = random_pose(rng, 0.3)
    axis = rng.standard_normal(3)
    d = Pose(axis_angle(axis, rng.uniform(lo, hi)), 0.2 * rng.standard_normal(3))
    return a, pose_compose(a, d)


def fd_grad(y, z, params, h=1e-6):
    x0 = embed(y)
    g = np.empty(7)
    for i in range(7):
        e = np.zeros(7)
        e[i] = h
        g[i] = (kernel_eval(project(x0 + e), z, params) - kernel_eval(project(x0 - e), z, params)) / (2 * h)
    return g


def test_kernel_value_and_symmetry():
    rng = np.random.default_rng(0)
    params = KernelParams(sigma=0.7, ell=0.4, c=2.0)
    p = random_pose(rng)
    assert kernel_eval(p, p, params) == pytest.approx(0.49)
    for _ in range(1000):
        a, b = random_pose(rng), random_pose(rng)
        k = kernel_eval(a, b, params)
        assert k == kernel_eval(b, a, params) or abs(k - kernel_eval(b, a, params)) < 1e-15
        assert 0 < k <= 0.49 + 1e-15


def test_kernel_decreases_along_translation_ray():
    params = KernelParams(1.0, 0.5, 1.0)
    a = Pose.identity()
    vals = [kernel_eval(a, Pose.from_translation(s, 0.5 * s, 0), params) for s in np.linspace(0, 3, 50)]
    assert all(x > y for x, y in zip(vals, vals[1:]))


def test_kernel_sign_invariant():
    rng = np.random.default_rng(4)
    params = KernelParams(1.0, 0.8, 0.3)
    for _ in range(50):
        a, b = random_pose(rng), random_pose(rng)
        assert kernel_eval(Pose(-a.rot, a.tra), b, params) == pytest.approx(kernel_eval(a, b, params), abs=1e-14)


@pytest.mark.parametrize("c", [0.0, 0.08, 1.0])
def test_gradient_matches_finite_differences(c):
    rng = np.random.default_rng(42)
    params = KernelParams(sigma=1.2, ell=0.6, c=c)
    worst = 0.0
    for _ in range(100):
        y, z = offset_pair(rng)
        g = kernel_grad(y, z, params)
        fd = fd_grad(y, z, params)
        worst = max(worst, np.max(np.abs(g - fd)) / np.max(np.abs(fd)))
    assert worst < 1e-5


def test_gradient_special_cases():
    rng = np.random.default_rng(1)
    p = random_pose(rng)
    assert np.allclose(kernel_grad(p, p, KernelParams()), 0.0, atol=1e-15)
    y, z = offset_pair(rng)
    assert np.all(kernel_grad(y, z, KernelParams(1, 1, 0.0))[4:] == 0.0)
    # relative rotation of pi about x puts w at zero
    flipped = Pose(np.array([0.0, 1.0, 0.0, 0.0]), np.zeros(3))
    with pytest.raises(CanonicalBoundaryError):
        kernel_grad(Pose.identity(), flipped, KernelParams())


def test_gradient_matrix_shape_linearity_and_zero_fill():
    rng = np.random.default_rng(2)
    params = KernelParams(1.0, 0.5, 0.1)
    y = random_pose(rng)
    zs = [random_pose(rng) for _ in range(100)]
    M1 = gradient_matrix(zs, y, 1.0, params)
    assert M1.shape == (7, 100)
    assert np.allclose(gradient_matrix(zs, y, 2.0, params), 2 * M1)
    assert np.allclose(M1[:, 3], 2 * kernel_grad(y, zs[3], params))
    assert np.allclose(gradient_matrix([y], y, 1.0, params), 0.0)
    boundary = Pose(np.array([-y.rot[1], y.rot[0], -y.rot[3], y.rot[2]]), y.tra)
    M = gradient_matrix([boundary, zs[0]], y, 1.0, params)
    assert np.all(M[:, 0] == 0.0) and np.any(M[:, 1] != 0.0)
    with pytest.raises(ValueError):
        gradient_matrix([], y, 1.0, params)


def test_gradient_columns_are_tangent():
    rng = np.random.default_rng(3)
    y = random_pose(rng)
    M = gradient_matrix([random_pose(rng) for _ in range(20)], y, 1.0, KernelParams(1, 0.7, 0.2))
    assert np.allclose(y.rot @ M[:4], 0.0, atol=1e-14)


def test_proposal_covariance_properties():
    rng = np.random.default_rng(5)
    g = 1e-3
    assert np.array_equal(proposal_covariance(np.zeros((7, 10)), g, 1.0), g * g * np.eye(7))
    M = rng.standard_normal((7, 30))
    assert np.allclose(proposal_covariance(M, g, 0.0), g * g * np.eye(7))
    for _ in range(100):
        M = rng.standard_normal((7, 50)) * rng.uniform(0.01, 10)
        C = proposal_covariance(M, g, 0.97)
        assert np.array_equal(C, C.T)
        np.linalg.cholesky(C)
        assert np.linalg.eigvalsh(C).min() >= g * g * (1 - 1e-10) - 1e-12 * np.abs(C).max()
    n = 40
    H = np.eye(n) - np.ones((n, n)) / n
    M = rng.standard_normal((7, n))
    assert np.allclose(proposal_covariance(M, g, 0.5), g * g * np.eye(7) + 0.25 * M @ H @ M.T)


def test_only_eta_times_nu_matters():
    rng = np.random.default_rng(6)
    y = random_pose(rng)
    zs = [random_pose(rng) for _ in range(30)]
    params = KernelParams(1.0, 0.5, 0.3)
    a = proposal_covariance_at(y, zs, 1.0, params, 1e-5, 3.0)
    b = proposal_covariance_at(y, zs, 3.0, params, 1e-5, 1.0)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-18)


def test_fallback_mvn_logpdf_matches_scipy():
    from scipy.stats import multivariate_normal

    rng = np.random.default_rng(7)
    A = rng.standard_normal((7, 7))
    C = A @ A.T + 0.1 * np.eye(7)
    x, m = rng.standard_normal(7), rng.standard_normal(7)
    assert _kernels_py.mvn_logpdf(x, m, C) == pytest.approx(multivariate_normal(m, C).logpdf(x), rel=1e-12)
