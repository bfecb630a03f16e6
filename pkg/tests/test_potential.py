import math

import numpy as np
import pytest
from scipy import stats

from relcap.geometry import (
    CartesianMask,
    Disk,
    Domain,
    Region,
    Segment,
    contains_many,
)
from relcap.potential import (
    Estimate,
    WalkDomain,
    WalkStepLimitError,
    expected_im_exit,
    grid_green_regular_part,
    inner_radius,
    sample_exits,
    wos_exit_sample,
)

DISK = WalkDomain(Domain.UNIT_DISK, Region(()))
HALF = WalkDomain(Domain.HALF_PLANE, Region(()))


def disk_minus(*specs) -> WalkDomain:
    return WalkDomain(Domain.UNIT_DISK, Region(tuple(Disk(c, r) for c, r in specs)))


# ----------------------------------------------------------------------
# exit sampling
# ----------------------------------------------------------------------

def test_exit_sample_lands_on_circle():
    rng = np.random.default_rng(0)
    s = wos_exit_sample(DISK, 0j, 1e-4, rng)
    assert abs(abs(s.position) - 1.0) < 1e-12
    assert s.terminated_on == "base-boundary"
    assert s.steps >= 1


def test_exit_sample_immediate_when_next_to_obstacle():
    dom = disk_minus((0.5 + 0j, 0.25))
    rng = np.random.default_rng(0)
    s = wos_exit_sample(dom, 0.25005 + 0j, 1e-4, rng)
    assert s.steps == 0
    assert s.terminated_on == "obstacle"
    assert abs(s.position - (0.25 + 0j)) < 1e-9


def test_exit_sample_step_limit():
    rng = np.random.default_rng(0)
    with pytest.raises(WalkStepLimitError):
        wos_exit_sample(DISK, 0j, 1e-9, rng, max_steps=1)


def test_disk_center_exits_are_uniform_on_circle():
    # harmonic measure of U from the center is uniform: chi-square p > 0.001
    pos, hit = sample_exits(DISK, 0j, 100_000, seed=42)
    assert not hit.any()
    angles = np.angle(pos)
    counts, _ = np.histogram(angles, bins=64, range=(-math.pi, math.pi))
    p = stats.chisquare(counts).pvalue
    assert p > 0.001


def test_half_plane_exits_are_cauchy():
    # harmonic measure of H from i is standard Cauchy: KS distance < 0.01
    pos, hit = sample_exits(HALF, 1j, 100_000, seed=43)
    assert not hit.any()
    assert np.all(pos.imag == 0.0)
    ks = stats.kstest(pos.real, stats.cauchy.cdf).statistic
    assert ks < 0.01


def test_sample_exits_deterministic():
    a, _ = sample_exits(DISK, 0.3 + 0.1j, 5000, seed=7)
    b, _ = sample_exits(DISK, 0.3 + 0.1j, 5000, seed=7)
    assert np.array_equal(a, b)


# ----------------------------------------------------------------------
# expected imaginary exit position
# ----------------------------------------------------------------------

def test_expected_im_exit_empty_is_exactly_zero():
    est = expected_im_exit(HALF, 3j, 2000, seed=1)
    assert est.mean == 0.0
    assert est.stderr == 0.0


def test_expected_im_exit_requires_half_plane():
    with pytest.raises(ValueError):
        expected_im_exit(DISK, 0j, 100, seed=1)


def test_expected_im_exit_slit():
    # oracle: sqrt(z^2+1) maps H minus the slit [0,i] onto H, so the exact
    # mean height from 4i is 4 - sqrt(15) = 0.127017; the leading term of
    # the capacity expansion gives 0.125
    dom = WalkDomain(Domain.HALF_PLANE, Region((Segment(0j, 1j),)))
    est = expected_im_exit(dom, 4j, 20_000, seed=5)
    exact = 4.0 - math.sqrt(15.0)
    assert abs(est.mean - exact) < 3 * est.stderr
    assert abs(est.mean - 0.125) < max(3 * est.stderr, 2.5e-3)


def test_expected_im_exit_half_disk():
    # oracle: z + 1/z maps H minus the unit half-disk onto H; from 5i the
    # exact mean height is exactly 1/5
    dom = WalkDomain(Domain.HALF_PLANE, Region((Disk(0j, 1.0),)))
    est = expected_im_exit(dom, 5j, 20_000, seed=6)
    assert abs(est.mean - 0.2) < 3 * est.stderr


def test_expected_im_exit_deterministic():
    dom = WalkDomain(Domain.HALF_PLANE, Region((Disk(0j, 1.0),)))
    a = expected_im_exit(dom, 5j, 4000, seed=11)
    b = expected_im_exit(dom, 5j, 4000, seed=11)
    assert a == b


def test_fast_exit_deterministic_and_close_for_small_obstacles():
    # the shortcut is an approximation; for a small obstacle the missed
    # hit probability is tiny, so it should track the plain estimator
    dom = WalkDomain(Domain.HALF_PLANE, Region((Disk(0.2j, 0.1),)))
    plain = expected_im_exit(dom, 5j, 40_000, seed=12)
    quick = expected_im_exit(dom, 5j, 40_000, seed=12, fast_exit=True)
    again = expected_im_exit(dom, 5j, 40_000, seed=12, fast_exit=True)
    assert quick == again
    tol = 3 * math.hypot(plain.stderr, quick.stderr)
    assert abs(plain.mean - quick.mean) < max(tol, 0.15 * abs(plain.mean))


# ----------------------------------------------------------------------
# inner radius
# ----------------------------------------------------------------------

def test_inner_radius_disk_center():
    est = inner_radius(DISK, 0j, 500, seed=2)
    assert est.mean == 0.0
    assert est.exp_mean == 1.0


def test_inner_radius_disk_off_center():
    # conformal radius of U at x is 1 - x^2 (disk automorphism)
    est = inner_radius(DISK, 0.5 + 0j, 500, seed=2)
    assert abs(est.exp_mean - 0.75) < 3 * est.exp_stderr + 1e-12


def test_inner_radius_half_plane():
    # r(H, i*eta) = 2*eta
    est = inner_radius(HALF, 0.7j, 500, seed=2)
    assert abs(est.exp_mean - 1.4) < 3 * est.exp_stderr + 1e-12


def test_inner_radius_without_control_variate():
    est = inner_radius(DISK, 0.5 + 0j, 60_000, seed=3, base_control=False)
    assert est.stderr > 0
    assert abs(est.exp_mean - 0.75) < 3 * est.exp_stderr


def test_inner_radius_control_variate_consistency():
    # near the boundary point the obstacle-hit probability is small, the
    # regime the control variate exists for: estimates must agree and the
    # variance reduction must be substantial
    dom = disk_minus((-0.4 + 0.0j, 0.25))
    z = 0.9 + 0j
    plain = inner_radius(dom, z, 150_000, seed=4, base_control=False)
    ctrl = inner_radius(dom, z, 150_000, seed=5)
    tol = 3 * math.hypot(plain.stderr, ctrl.stderr)
    assert abs(plain.mean - ctrl.mean) < tol
    assert ctrl.stderr < 0.25 * plain.stderr


def test_inner_radius_domain_monotonicity():
    # bigger obstacle, smaller inner radius; common random numbers couple
    # the two estimates through a shared seed
    small = disk_minus((-0.5 + 0.0j, 0.15))
    large = disk_minus((-0.5 + 0.0j, 0.35))
    z = 0.25 + 0j
    a = inner_radius(small, z, 40_000, seed=9)
    b = inner_radius(large, z, 40_000, seed=9)
    slack = 3 * math.hypot(a.stderr, b.stderr)
    assert a.mean >= b.mean - slack


def test_inner_radius_scaling_covariance():
    # r(lambda*G, lambda*z) = lambda * r(G, z) in the half-plane
    base = WalkDomain(Domain.HALF_PLANE, Region((Disk(0.5 + 0.5j, 0.25),)))
    z = 2j
    a = inner_radius(base, z, 40_000, seed=10)
    for lam in (0.5, 2.0):
        scaled = WalkDomain(Domain.HALF_PLANE, Region((Disk(lam * (0.5 + 0.5j), lam * 0.25),)))
        b = inner_radius(scaled, lam * z, 40_000, seed=10)
        slack = 3 * math.hypot(a.stderr, b.stderr)
        assert abs(b.mean - (a.mean + math.log(lam))) < slack + 1e-9


def test_inner_radius_log_clamp_flag():
    dom = disk_minus((0.5 + 3e-13 + 0j, 0.5))
    est = inner_radius(dom, 0j, 200, seed=1, eps=1e-13, base_control=False)
    assert "clamped-log-samples" in est.flags


def test_estimate_validation():
    with pytest.raises(ValueError):
        Estimate(mean=0.0, stderr=-1.0, n_samples=10, seed=0)
    with pytest.raises(ValueError):
        Estimate(mean=0.0, stderr=0.0, n_samples=0, seed=0)


# ----------------------------------------------------------------------
# grid Dirichlet oracle
# ----------------------------------------------------------------------

def unit_disk_mask(n, obstacle: Region | None = None) -> CartesianMask:
    mask = CartesianMask((-1, 1, -1, 1), n, n, np.zeros((n, n), dtype=bool))
    pts = mask.midpoints().ravel()
    inside = np.abs(pts) < 1.0
    if obstacle is not None and not obstacle.is_empty:
        inside &= ~contains_many(obstacle, pts)
    return mask.with_cells(inside.reshape(n, n))


def test_grid_oracle_disk_center():
    h = grid_green_regular_part(unit_disk_mask(512), 0j)
    assert abs(h) < 5e-3


def test_grid_oracle_disk_half():
    h = grid_green_regular_part(unit_disk_mask(512), 0.5 + 0j)
    assert abs(h - math.log(0.75)) < 1e-2


def test_grid_oracle_agrees_with_walks():
    obstacle = Region((Disk(-0.45 + 0.2j, 0.25),))
    z = 0.35 - 0.1j
    h = grid_green_regular_part(unit_disk_mask(400, obstacle), z)
    est = inner_radius(WalkDomain(Domain.UNIT_DISK, obstacle), z, 150_000, seed=21)
    assert abs(math.exp(h) - est.exp_mean) < 3 * est.exp_stderr + 1e-2


def test_grid_oracle_rejects_exterior_point():
    with pytest.raises(ValueError):
        grid_green_regular_part(unit_disk_mask(64), 2 + 0j)
