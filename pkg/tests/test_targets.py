import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graspmc.geometry import Pose, axis_angle, d_mag_linearized, pose_compose, qmul, qrotate, random_pose
from graspmc.targets import (SHIPPED, TARGETS, CylinderRingTarget, DemoGenerationError, Mode,
                             MixtureTarget, TrackedTarget, generate_demo_grasps, is_success,
                             log_density, make_target)


def ring_pose(rho, phi, z, misalign=0.0, roll=0.0):
    """Pose on the cylinder frame whose local x-axis points at the axis,
    tilted by ``misalign`` about the local z-axis."""
    pos = np.array([rho * math.cos(phi), rho * math.sin(phi), z])
    face = axis_angle([0, 0, 1], phi + math.pi + misalign)
    return Pose(qmul(face, axis_angle([1, 0, 0], roll)), pos)


def test_single_mode_log_density_at_center():
    t = make_target("single_mode")
    center = t.modes[0].center
    assert log_density(t, center) == pytest.approx(math.log(1.0), abs=1e-12)
    far = Pose.from_translation(10, 10, 10)
    assert log_density(t, far) == -math.inf or log_density(t, far) <= math.log(t.tau)
    assert not is_success(t, far)


def test_mixture_quality_at_modes_equals_weight():
    t = make_target("tri_mode")
    centers = [m.center for m in t.modes]
    smax = max(m.scale for m in t.modes)
    for i, a in enumerate(centers):
        for b in centers[i + 1:]:
            assert d_mag_linearized(a, b, t.c) >= 10 * smax
    for m in t.modes:
        assert t.quality(m.center) == pytest.approx(m.weight, abs=1e-6)
    assert t.tau == pytest.approx(0.05 * 0.6)


def test_mixture_validation():
    with pytest.raises(ValueError):
        MixtureTarget([])
    with pytest.raises(ValueError):
        MixtureTarget([Mode(Pose.identity(), weight=0.0)])
    with pytest.raises(ValueError):
        MixtureTarget([Mode(Pose.identity())], c=-1)


def test_ring_outside_shell_is_zero():
    t = CylinderRingTarget()
    assert log_density(t, ring_pose(0.02, 0.3, 0.0)) == -math.inf
    assert log_density(t, ring_pose(0.2, 0.3, 0.0)) == -math.inf
    assert log_density(t, ring_pose(0.075, 0.3, 0.1)) == -math.inf
    assert log_density(t, ring_pose(0.075, 0.3, 0.0, misalign=0.3)) == -math.inf
    assert not is_success(t, Pose.from_translation(10, 0, 0))
    good = ring_pose(0.075, 1.0, 0.01)
    assert t.quality(good) == pytest.approx(1.0)
    assert is_success(t, good)


def test_ring_quality_formula():
    t = CylinderRingTarget()
    rho, mis = 0.07, 0.1
    u = (rho - t.radius - t.gap_min) / (t.gap_max - t.gap_min)
    want = 4 * u * (1 - u) * (math.cos(mis) - math.cos(t.theta_tol)) / (1 - math.cos(t.theta_tol))
    assert t.quality(ring_pose(rho, 2.0, 0.0, misalign=mis, roll=0.7)) == pytest.approx(want, rel=1e-12)


def test_ring_success_fraction_matches_shell_fraction():
    # Aligned poses on a position grid: success iff inside the open shell.
    t = CylinderRingTarget()
    r0, r1 = t.radius + t.gap_min, t.radius + t.gap_max
    half = t.height / 2
    box = 0.1
    g = np.linspace(-box, box, 81)[:-1] + box / 80
    zs = np.linspace(-0.08, 0.08, 33)[:-1] + 0.0025
    hits = total = 0
    for x in g:
        for y in g:
            rho = math.hypot(x, y)
            phi = math.atan2(y, x)
            for z in zs:
                total += 1
                hits += t.is_success(ring_pose(rho, phi, z))
    analytic = math.pi * (r1 ** 2 - r0 ** 2) * 2 * half / ((2 * box) ** 2 * 0.16)
    assert abs(hits / total - analytic) <= 0.02


def test_ring_rotation_about_axis_preserves_success():
    t = CylinderRingTarget()
    rng = np.random.default_rng(0)
    for _ in range(200):
        p = ring_pose(rng.uniform(0.061, 0.089), rng.uniform(0, 2 * math.pi),
                      rng.uniform(-0.05, 0.05), rng.uniform(-0.2, 0.2), rng.uniform(0, 6))
        assert t.is_success(p)
        spin = Pose(axis_angle([0, 0, 1], rng.uniform(0, 2 * math.pi)), np.zeros(3))
        assert t.is_success(pose_compose(spin, p))
        assert t.quality(pose_compose(spin, p)) == pytest.approx(t.quality(p), abs=1e-9)


@pytest.mark.parametrize("name", list(TARGETS))
def test_quality_nonnegative_and_pure(name):
    t = make_target(name)
    rng = np.random.default_rng(1)
    for _ in range(2000):
        p = random_pose(rng, 0.1)
        q = t.quality(p)
        assert q >= 0.0 and q == t.quality(p)
        assert t.is_success(p) == (t.log_density(p) > (math.log(t.tau) if t.tau > 0 else -math.inf))


def test_unknown_target_lists_available():
    with pytest.raises(KeyError, match="available: .*tri_mode"):
        make_target("teapot")


@pytest.mark.parametrize("name", SHIPPED)
def test_demos_succeed(name):
    t = make_target(name)
    demos = generate_demo_grasps(t, TARGETS[name].seed_positions, 5, np.random.default_rng(2))
    assert len(demos) == 5
    assert all(t.is_success(d) for d in demos)
    qs = [t.quality(d) for d in demos]
    assert qs == sorted(qs, reverse=True)
    for d in demos:  # position held fixed
        assert any(np.allclose(d.tra, s) for s in TARGETS[name].seed_positions)


def test_demo_from_optimal_start_not_worse():
    t = make_target("single_mode")
    c = t.modes[0].center
    demos = generate_demo_grasps(t, [c.tra], 1, np.random.default_rng(3), initial_orientations=[c.rot])
    assert t.quality(demos[0]) >= t.quality(c) - 1e-15


def test_demo_errors():
    t = make_target("tri_mode")
    seeds = TARGETS["tri_mode"].seed_positions
    with pytest.raises(ValueError):
        generate_demo_grasps(t, seeds, 6, np.random.default_rng(0))
    with pytest.raises(DemoGenerationError):
        generate_demo_grasps(t, [[5.0, 5.0, 5.0]], 1, np.random.default_rng(0), budget=20)


def test_tracked_target_counts():
    inner = make_target("tri_mode")
    t = TrackedTarget(inner)
    p = inner.modes[0].center
    t.quality(p)
    t.log_density(p)
    assert t.evaluations == 2
    assert t.quality_sum == pytest.approx(2 * inner.quality(p))
    assert t.tau == inner.tau and t.modes is inner.modes


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(0.0, 0.12), st.floats(-0.1, 0.1))
def test_log_density_never_nan(phi, rho, z):
    for t in (make_target("ring"), make_target("tri_mode")):
        v = t.log_density(ring_pose(max(rho, 1e-6), phi, z))
        assert not math.isnan(v)
