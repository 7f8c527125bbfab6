import math

import numpy as np
import pytest

from graspmc.gdmc import (DartingParams, JumpRegion, build_regions, combined_step, contains,
                          count_containing, dart, dart_accept, dart_ambient, make_region,
                          region_volume, select_region)
from graspmc.geometry import Pose, axis_angle, embed, random_pose
from graspmc.kameleon import ChainState, KameleonParams, kameleon_step
from graspmc.kernel import KernelParams
from graspmc.targets import make_target


def rand_region(rng, d=7, omega=0.7):
    A = rng.standard_normal((d, d))
    center = rng.standard_normal(d)
    if d == 7:
        center[:4] /= np.linalg.norm(center[:4])
    return make_region(center, 0.01 * (A @ A.T) + 1e-3 * np.eye(d), omega)


def ball(d, lam=1.0, omega=1.0, center=None):
    c = np.zeros(d) if center is None else np.asarray(center, float)
    return JumpRegion(c, np.eye(d), np.full(d, lam), omega)


class VecMixture:
    """Unnormalised Gaussian mixture on R^d (unit variance)."""

    tau = 0.0

    def __init__(self, centers, weights):
        self.centers = np.asarray(centers, float)
        self.weights = np.asarray(weights, float)

    def log_density(self, x):
        d2 = np.sum((self.centers - x) ** 2, axis=1)
        return float(np.log(self.weights @ np.exp(-0.5 * d2)))


def test_volume_closed_forms():
    assert region_volume(ball(3)) == pytest.approx(4 * math.pi / 3, abs=1e-12)
    assert region_volume(ball(7)) == pytest.approx(math.pi ** 3.5 / math.gamma(4.5), abs=1e-12)
    assert round(region_volume(ball(7)), 4) == 4.7248
    for d in (3, 7):
        assert region_volume(ball(d, omega=1.4)) == pytest.approx(2 ** d * region_volume(ball(d, omega=0.7)))
    # semi-axes sqrt(lambda): lambda = 4 doubles every axis
    assert region_volume(ball(3, lam=4.0)) == pytest.approx(8 * 4 * math.pi / 3)
    literal = JumpRegion(np.zeros(3), np.eye(3), np.full(3, 4.0), 1.0, literal_volume=True)
    assert region_volume(literal) == pytest.approx(64 * 4 * math.pi / 3)


def test_volume_monotone():
    lam = np.array([0.1, 0.2, 0.3])
    base = region_volume(JumpRegion(np.zeros(3), np.eye(3), lam, 0.7))
    for i in range(3):
        bigger = lam.copy()
        bigger[i] *= 1.5
        assert region_volume(JumpRegion(np.zeros(3), np.eye(3), bigger, 0.7)) > base
    assert region_volume(JumpRegion(np.zeros(3), np.eye(3), lam, 0.8)) > base


def test_monte_carlo_membership_volume():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((3, 3))
    reg = make_region(np.array([0.3, -0.2, 1.0]), A @ A.T + 0.2 * np.eye(3), 0.7)
    half = reg.omega * np.sqrt(reg.eigvals.max()) * 1.05
    pts = reg.center + rng.uniform(-half, half, size=(200_000, 3))
    inside = np.linalg.norm((pts - reg.center) @ reg.basis / np.sqrt(reg.eigvals), axis=1) <= reg.omega
    assert all(contains(reg, p) == bool(f) for p, f in zip(pts[:500], inside[:500]))
    mc = inside.mean() * (2 * half) ** 3
    assert abs(mc - region_volume(reg)) <= 0.05 * region_volume(reg)


def test_contains_boundary_and_center():
    rng = np.random.default_rng(1)
    reg = rand_region(rng)
    assert contains(reg, reg.center)
    assert contains(reg, reg.center_pose)
    direction = reg.basis[:, 2] * math.sqrt(reg.eigvals[2])
    assert not contains(reg, reg.center + 1.0001 * reg.omega * direction)
    assert contains(reg, reg.center + 0.9999 * reg.omega * direction)


def test_contains_is_sign_invariant():
    rng = np.random.default_rng(2)
    reg = rand_region(rng)
    p = Pose(reg.center[:4], reg.center[4:])
    assert contains(reg, Pose(-p.rot, p.tra))


def test_dart_involution_and_center():
    rng = np.random.default_rng(3)
    for _ in range(100):
        a, b = rand_region(rng), rand_region(rng)
        x = a.center + a.basis @ (np.sqrt(a.eigvals) * rng.uniform(-0.2, 0.2, 7))
        y = dart_ambient(x, a, b)
        assert np.allclose(dart_ambient(y, b, a), x, atol=1e-9)
        assert a.radius(x) == pytest.approx(b.radius(y), abs=1e-9)
    a, b = rand_region(rng), rand_region(rng)
    assert np.allclose(dart_ambient(a.center, a, b), b.center)
    assert dart(a.center_pose, a, b).same_as(b.center_pose)
    x = a.center + 0.01 * rng.standard_normal(7)
    assert np.allclose(dart_ambient(x, a, a), 2 * a.center - x)


def test_select_region_frequencies():
    rng = np.random.default_rng(4)
    eq = [ball(3, center=[i, 0, 0]) for i in range(3)]
    n = 10_000
    counts = np.bincount([select_region(eq, rng) for _ in range(n)], minlength=3)
    sd = math.sqrt(n * (1 / 3) * (2 / 3))
    assert np.all(np.abs(counts - n / 3) <= 3 * sd)
    # volumes 2V and V: doubling the volume in 3-d means lambda * 2^(2/3)
    two = [ball(3, lam=2 ** (2 / 3)), ball(3)]
    assert region_volume(two[0]) == pytest.approx(2 * region_volume(two[1]))
    hits = sum(select_region(two, rng) == 0 for _ in range(n))
    assert abs(hits - 2 * n / 3) <= 3 * math.sqrt(n * 2 / 9)
    assert all(select_region([ball(3)], rng) == 0 for _ in range(20))


def test_build_regions_fallbacks_and_isotropy():
    rng = np.random.default_rng(5)
    center = random_pose(rng)
    (reg,) = build_regions([center], np.empty((0, 7)), 0.7)
    assert np.allclose(reg.eigvals, 1e-4)
    mu = embed(center)
    hist = mu + 0.05 * rng.standard_normal((4000, 7))
    regs = build_regions([center, Pose(-center.rot, center.tra + 5.0)], hist, 0.7)
    lam = regs[0].eigvals
    assert lam.max() / lam.min() < 3
    for r in regs:
        assert np.linalg.norm(r.basis.T @ r.basis - np.eye(7)) < 1e-9
    # second mode owns nothing: it borrows the global covariance
    assert np.allclose(regs[1].eigvals, regs[0].eigvals)


def test_dart_accept_rules():
    rng = np.random.default_rng(6)
    t = make_target("single_mode")
    c = t.modes[0].center
    reg = make_region(embed(c), 0.01 * np.eye(7), 0.7)
    near = Pose(c.rot, c.tra + 0.001)
    # uphill with n = 1 on both sides: always accepted
    assert all(dart_accept(near, c, [reg], t, "standard", rng) for _ in range(50))
    zero = make_target("ring")
    far = Pose.from_translation(3, 0, 0)
    assert not dart_accept(c, far, [reg], zero, "standard", rng)
    # downhill: accepted with the density ratio
    lo = Pose(c.rot, c.tra + 0.02)
    r = math.exp(t.log_density(lo) - t.log_density(c))
    hits = np.mean([dart_accept(c, lo, [reg], t, "standard", rng) for _ in range(10_000)])
    assert abs(hits - r) <= 3 * math.sqrt(r * (1 - r) / 10_000)
    with pytest.raises(ValueError):
        dart_accept(c, lo, [reg], t, "bogus", rng)


def test_paper_literal_rule_is_printed_inequality():
    class Fixed:
        tau = 0.0

        def __init__(self, vals):
            self.vals = vals

        def log_density(self, x):
            return self.vals[round(float(x[0]))]

    regs = [ball(1, center=[0]), ball(1, center=[5])]
    t = Fixed({0: math.log(1.0), 5: math.log(4.0)})
    rng = np.random.default_rng(7)
    # ratio n(x) pi(x) / (n(x') pi(x')) = 1/4 -> accept iff u > 1/4
    lit = np.mean([dart_accept(np.array([0.0]), np.array([5.0]), regs, t, "paper_literal", rng)
                   for _ in range(20_000)])
    std = np.mean([dart_accept(np.array([0.0]), np.array([5.0]), regs, t, "standard", rng)
                   for _ in range(200)])
    assert lit == pytest.approx(0.75, abs=0.015)
    assert std == 1.0


def run_vector_chain(target, regions, steps, rng, p_check=0.5, step=0.5):
    x = target.centers[0].copy()
    lp = target.log_density(x)
    occ = np.zeros(len(regions), int)
    for _ in range(steps):
        if rng.random() < p_check:
            y = x + step * rng.standard_normal(len(x))
            ly = target.log_density(y)
            if math.log(rng.random()) < ly - lp:
                x, lp = y, ly
        else:
            inside = [r for r in regions if contains(r, x)]
            if inside:
                src = inside[min(int(rng.random() * len(inside)), len(inside) - 1)]
                dst = regions[select_region(regions, rng)]
                y = dart_ambient(x, src, dst)
                ly = target.log_density(y)
                if count_containing(regions, y) and dart_accept(x, y, regions, target, "standard", rng, lp, ly):
                    x, lp = y, ly
        occ[int(np.argmin(np.sum((target.centers - x) ** 2, axis=1)))] += 1
    return occ / steps


@pytest.mark.parametrize("weights,expect", [((1.0, 1.0), 0.5), ((2.0, 1.0), 2 / 3)])
def test_darting_preserves_mode_masses(weights, expect):
    centers = [[-6.0, 0.0, 0.0], [6.0, 0.0, 0.0]]
    target = VecMixture(centers, weights)
    regions = [make_region(np.array(c), np.diag([1.0, 2.0, 0.5]), 1.5) for c in centers]
    occ = run_vector_chain(target, regions, 100_000, np.random.default_rng(8))
    assert abs(occ[0] - expect) <= 0.03


def small_state(target, rng, hist_scale=0.05):
    c = target.modes[0].center
    hist = embed(c) + hist_scale * rng.standard_normal((200, 7))
    return ChainState.start(target, c, hist, burn_in=0)


def test_p_check_one_is_pure_kameleon():
    t = make_target("tri_mode")
    kp = KameleonParams(kernel=KernelParams(0.16, 0.5, 0.08), burn_in=0)
    a = small_state(t, np.random.default_rng(9))
    b = small_state(t, np.random.default_rng(9))
    regions = build_regions([m.center for m in t.modes], a.history.array, 0.7)
    ra, rb = np.random.default_rng(10), np.random.default_rng(10)
    a.freeze(100, ra)
    b.freeze(100, rb)
    for _ in range(200):
        combined_step(a, t, regions, kp, DartingParams(p_check=1.0), ra)
        kameleon_step(b, t, kp, rb)
        assert np.array_equal(embed(a.current), embed(b.current))


def test_p_check_zero_outside_regions_holds():
    t = make_target("tri_mode")
    kp = KameleonParams(burn_in=0)
    rng = np.random.default_rng(11)
    start = Pose(axis_angle([1, 0, 0], 2.0), [1.0, 1.0, 1.0])
    state = ChainState.start(t, start, [embed(start)], burn_in=0)
    regions = [make_region(embed(m.center), 1e-4 * np.eye(7), 0.7) for m in t.modes]
    for _ in range(100):
        combined_step(state, t, regions, kp, DartingParams(p_check=0.0), rng)
    assert state.current is start and state.holds == 100
    assert len(state.history) == 101


def test_combined_visits_more_basins_than_kameleon():
    t = make_target("tri_mode")
    from graspmc.harness.config import ExperimentConfig
    from graspmc.harness.runner import run_single

    comb = ExperimentConfig.from_mapping({})
    pure = comb.replace(darting__p_check=1.0)
    multi_c = sum(run_single(comb, "weak", 0.08, s).metrics.basins_visited >= 2 for s in range(20))
    multi_k = sum(run_single(pure, "weak", 0.08, s).metrics.basins_visited >= 2 for s in range(20))
    assert multi_c >= 16 and multi_k <= 4


def test_darting_params_validation():
    with pytest.raises(ValueError):
        DartingParams(p_check=1.5)
    with pytest.raises(ValueError):
        DartingParams(omega=0)
    with pytest.raises(ValueError):
        DartingParams(acceptance_mode="loose")
