"""The two capacities and their transport rules.

``hcap_estimate`` reads the half-plane capacity off the decay of the mean
exit height: from a start ``iY`` the mean imaginary exit position behaves
like ``hcap/Y`` plus higher-order corrections, fitted by weighted least
squares over several heights.

``relcap_estimate`` reads the relative capacity of an obstacle in the
unit disk at the boundary point 1 from the inner-radius quotient
``q(x) = r(U \\ E, x) / (1 - x^2)`` along the real radius:
``q = 1 - 2 c (1-x)^2 + o((1-x)^2)``, with Richardson extrapolation over
a geometrically shrinking ladder of offsets ``1 - x``.  The denominator
is always the closed form ``1 - x^2``; the numerator comes from
``potential.inner_radius`` driven with common random numbers across the
ladder so rung differences stay coupled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .geometry import (
    Disk,
    Domain,
    Polygon,
    Region,
    Segment,
    Sigma,
    BoundaryPoint,
    distance_to_region,
    inner_distance_positive,
    region_bounding_radius,
    region_sup_imag,
)
from .potential import (
    DEFAULT_EPS_FACTOR,
    DEFAULT_SHARD_SIZE,
    Estimate,
    WalkDomain,
    _base_log_radius,
    _inner_radius_shards,
    expected_im_exit,
)

__all__ = [
    "CapacityEstimate",
    "ApproachPath",
    "PathKind",
    "EstimatorError",
    "FitError",
    "hcap_estimate",
    "relcap_estimate",
    "mobius_transport",
    "disk_to_halfplane_image",
    "mobius_T",
    "mobius_T_derivative",
]

DISK_APEX = BoundaryPoint(location=1.0 + 0.0j, tangent_direction=1j)


class EstimatorError(RuntimeError):
    """The capacity estimator hit an invalid intermediate state."""


class FitError(RuntimeError):
    """Not enough data for the requested fit."""


class PathKind(str, Enum):
    DISK_REAL_AXIS = "real-axis-into-disk-toward-1"
    HALF_PLANE_IMAGINARY_AXIS = "imaginary-axis-in-H-toward-infinity"


@dataclass(frozen=True)
class ApproachPath:
    """Perpendicular approach to the boundary point, as offset ladder.

    For the disk the offset is ``1 - x`` along the real radius toward 1;
    for the half-plane it is ``1/Y`` along the imaginary axis.
    """

    kind: PathKind
    offsets: tuple

    def __post_init__(self) -> None:
        offs = tuple(float(d) for d in self.offsets)
        object.__setattr__(self, "offsets", offs)
        if len(offs) == 0:
            raise ValueError("need at least one offset")
        if any(not 0 < d < 1 for d in offs):
            raise ValueError("offsets must lie in (0, 1)")
        if any(b >= a for a, b in zip(offs, offs[1:])):
            raise ValueError("offsets must be strictly decreasing")

    @classmethod
    def geometric(
        cls,
        delta0: float,
        ratio: float = 0.5,
        count: int = 5,
        kind: PathKind = PathKind.DISK_REAL_AXIS,
    ) -> "ApproachPath":
        if not 0 < ratio < 1:
            raise ValueError("ratio must be in (0, 1)")
        return cls(kind, tuple(delta0 * ratio**k for k in range(count)))


@dataclass(frozen=True)
class CapacityEstimate:
    """A capacity value with uncertainty and extrapolation diagnostics."""

    value: float
    stderr: float
    fit_residual: float
    offsets_used: tuple
    method: str  # "wos" | "grid" | "analytic"
    n_samples: int = 0
    seed: int = 0
    flags: tuple = ()

    def __post_init__(self) -> None:
        offs = tuple(self.offsets_used)
        object.__setattr__(self, "offsets_used", offs)
        if any(b >= a for a, b in zip(offs, offs[1:])):
            raise ValueError("offsets_used must be strictly decreasing")
        if self.value < 0 and "negative-within-noise" not in self.flags:
            object.__setattr__(self, "flags", self.flags + ("negative-within-noise",))


# ----------------------------------------------------------------------
# half-plane capacity
# ----------------------------------------------------------------------

def hcap_estimate(
    obstacle: Region,
    heights,
    n_per_height: int,
    seed: int,
    *,
    eps: float | None = None,
    shard_size: int = DEFAULT_SHARD_SIZE,
    fast_exit: bool = False,
    include_quadratic: bool | None = None,
) -> CapacityEstimate:
    """Estimate the half-plane capacity of a bounded obstacle in H.

    ``m(Y) = E[Im exit from iY]`` is fitted against ``1/Y`` (slope =
    capacity) with an optional ``1/Y^2`` nuisance term absorbing the next
    correction (enabled automatically once three heights are supplied).
    """
    heights = [float(y) for y in heights]
    if len(heights) < 2:
        raise FitError("degenerate fit: need at least 2 heights")
    if len(set(heights)) != len(heights):
        raise ValueError("heights must be distinct")
    top = region_sup_imag(obstacle)
    if not obstacle.is_empty:
        if math.isinf(region_bounding_radius(obstacle)):
            raise ValueError("obstacle must be bounded")
        if min(heights) <= 2.0 * top:
            raise ValueError(
                f"heights must exceed twice the obstacle height {top:.3g}"
            )
    domain = WalkDomain(Domain.HALF_PLANE, obstacle)
    ests = [
        expected_im_exit(
            domain, 1j * y, n_per_height, seed,
            eps=eps, shard_size=shard_size, fast_exit=fast_exit,
        )
        for y in heights
    ]
    m = np.array([e.mean for e in ests])
    sig = np.array([e.stderr for e in ests])
    ys = np.array(heights)

    if include_quadratic is None:
        include_quadratic = len(heights) >= 3
    cols = [1.0 / ys]
    if include_quadratic:
        cols.append(1.0 / ys**2)
    X = np.column_stack(cols)

    if (sig == 0).all() and (m == 0).all():
        value, err, resid = 0.0, 0.0, 0.0
    else:
        w = 1.0 / np.maximum(sig, max(sig.max() * 1e-9, 1e-300)) ** 2
        XtW = X.T * w
        cov = np.linalg.inv(XtW @ X)
        beta = cov @ (XtW @ m)
        value = float(beta[0])
        err = float(math.sqrt(max(cov[0, 0], 0.0)))
        r = m - X @ beta
        resid = float(math.sqrt((w * r**2).sum() / w.sum()))

    offsets = tuple(sorted((1.0 / y for y in heights), reverse=True))
    flags = tuple(sorted(set().union(*(e.flags for e in ests))))
    return CapacityEstimate(
        value=value,
        stderr=err,
        fit_residual=resid,
        offsets_used=offsets,
        method="wos",
        n_samples=n_per_height * len(heights),
        seed=seed,
        flags=flags,
    )


# ----------------------------------------------------------------------
# relative capacity in the disk at z0 = 1
# ----------------------------------------------------------------------

def relcap_estimate(
    obstacle: Region,
    path: ApproachPath | None = None,
    n_per_offset: int = 200_000,
    *,
    eps: float = DEFAULT_EPS_FACTOR,
    seed: int = 0,
    shard_size: int = DEFAULT_SHARD_SIZE,
    domain: Domain = Domain.UNIT_DISK,
    extrapolation_depth: int = 2,
) -> CapacityEstimate:
    """Estimate the relative capacity of ``obstacle`` in U at z0 = 1.

    The approach is the exact perpendicular (the real radius); oblique
    approach paths are unsupported.  Richardson extrapolation runs on the
    trailing rungs of the offset ladder; the standard error comes from
    per-shard extrapolated values, which keeps the common-random-number
    coupling across rungs inside the error estimate.
    """
    if domain is not Domain.UNIT_DISK:
        raise ValueError("relative capacity is implemented for the unit disk at z0 = 1")
    if path is None:
        if obstacle.is_empty:
            delta0 = 0.1
        else:
            delta0 = min(0.1, 0.5 * distance_to_region(obstacle, 1.0 + 0.0j))
            if delta0 <= 0:
                raise EstimatorError("obstacle touches the boundary point 1")
        path = ApproachPath.geometric(delta0, 0.5, 5)
    if path.kind is not PathKind.DISK_REAL_AXIS:
        raise ValueError("disk relative capacity needs the real-axis approach path")
    deltas = np.array(path.offsets)
    if not inner_distance_positive(obstacle, Domain.UNIT_DISK, DISK_APEX, float(deltas[0])):
        raise EstimatorError("approach path intersects the obstacle")

    walk = WalkDomain(Domain.UNIT_DISK, obstacle)
    shard_means = []
    shard_sizes = None
    flags: set = set()
    c_full = np.empty(len(deltas))
    for k, d in enumerate(deltas):
        x = 1.0 - d
        est, (sizes, means) = _inner_radius_shards(
            walk, x + 0.0j, n_per_offset,
            eps=min(eps, 0.02 * d), seed=seed, shard_size=shard_size,
        )
        flags.update(est.flags)
        log_r0 = _base_log_radius(Domain.UNIT_DISK, x + 0.0j)
        q_full = math.exp(est.mean - log_r0)
        if q_full <= 0:
            raise EstimatorError(f"nonpositive inner-radius quotient at offset {d}")
        c_full[k] = (1.0 - q_full) / (2.0 * d * d)
        shard_means.append((np.exp(means - log_r0) * -1.0 + 1.0) / (2.0 * d * d))
        shard_sizes = sizes
    c_shards = np.vstack(shard_means)  # (rungs, shards)

    depth = max(0, min(extrapolation_depth, len(deltas) - 1))
    weights = _richardson_weights(deltas, depth)
    value = float(weights @ c_full)
    prev = _richardson_weights(deltas, depth - 1) @ c_full if depth > 0 else value
    fit_residual = float(abs(value - prev))

    r_shards = weights @ c_shards
    stderr = _shard_stderr(r_shards, shard_sizes)

    if len(deltas) >= 3:
        steps = np.diff(c_full)
        if (np.abs(steps[-1]) > np.abs(steps[-2])) and np.abs(steps[-1]) > 3.0 * max(
            stderr, 1e-300
        ):
            flags.add("extrapolation-divergence")
    if value < 0:
        flags.add("negative-within-noise")

    return CapacityEstimate(
        value=value,
        stderr=stderr,
        fit_residual=fit_residual,
        offsets_used=tuple(float(d) for d in deltas),
        method="wos",
        n_samples=n_per_offset * len(deltas),
        seed=seed,
        flags=tuple(sorted(flags)),
    )


def _richardson_weights(deltas: np.ndarray, depth: int) -> np.ndarray:
    """Linear weights extrapolating c(delta) to delta -> 0.

    Uses the polynomial through the ``depth + 1`` finest rungs evaluated
    at zero (classic Richardson on an arbitrary ladder); ``depth = 0``
    just picks the finest rung.
    """
    depth = max(0, min(depth, len(deltas) - 1))
    pts = deltas[len(deltas) - depth - 1 :]
    w = np.zeros(len(deltas))
    for i, di in enumerate(pts):
        li = 1.0
        for j, dj in enumerate(pts):
            if j != i:
                li *= dj / (dj - di)
        w[len(deltas) - depth - 1 + i] = li
    return w


def _shard_stderr(r_shards: np.ndarray, sizes: np.ndarray) -> float:
    """Standard error of the size-weighted mean of per-shard values."""
    n_total = int(sizes.sum())
    if len(r_shards) < 2:
        return 0.0
    mean = float((sizes * r_shards).sum() / n_total)
    var_per_sample = float((sizes * (r_shards - mean) ** 2).sum() / (len(r_shards) - 1))
    return math.sqrt(max(var_per_sample, 0.0) / n_total)


# ----------------------------------------------------------------------
# Moebius transport
# ----------------------------------------------------------------------

def mobius_transport(
    estimate: CapacityEstimate,
    rule: str,
    factor: complex,
) -> CapacityEstimate:
    """Rescale a capacity under a conformal change of variables.

    ``rule = "infinity-scaling"``: the map looks like ``a z`` at the
    boundary point at infinity and the capacity scales by ``|a|^2``.
    ``rule = "finite-derivative"``: finite boundary points on both sides
    with derivative ``f'(z0)``; the capacity divides by ``|f'(z0)|^2``.
    """
    scale = abs(complex(factor))
    if scale == 0:
        raise ValueError("transport factor must be nonzero")
    if rule == "infinity-scaling":
        mult = scale**2
    elif rule == "finite-derivative":
        mult = 1.0 / scale**2
    else:
        raise ValueError(f"unknown transport rule {rule!r}")
    return replace(
        estimate,
        value=estimate.value * mult,
        stderr=estimate.stderr * mult,
        fit_residual=estimate.fit_residual * mult,
    )


# ----------------------------------------------------------------------
# disk -> half-plane bridge
# ----------------------------------------------------------------------

def mobius_T(z: complex) -> complex:
    """T(z) = i(1+z)/(1-z): maps U onto H, sending 1 to infinity."""
    return 1j * (1 + z) / (1 - z)


def mobius_T_derivative(z: complex) -> complex:
    return 2j / (1 - z) ** 2


def disk_to_halfplane_image(region: Region, *, chords: int = 64) -> tuple[Region, float]:
    """Image of a region in U under T(z) = i(1+z)/(1-z).

    Disks map to exact disks; polygon edges and segments are subdivided
    into ``chords`` straight pieces since their true images are circular
    arcs.  Returns the image region and an estimate of the Hausdorff
    distance between it and the exact image.
    """
    if region.is_empty:
        return region, 0.0
    if distance_to_region(region, 1.0 + 0.0j) <= 0.0:
        raise ValueError("region touches z = 1; its image is unbounded")
    prims = []
    err = 0.0
    for p in region.primitives:
        if isinstance(p, Disk):
            prims.append(_map_disk(p))
        elif isinstance(p, Polygon):
            verts = []
            for a, b in zip(p.vertices, p.vertices[1:] + p.vertices[:1]):
                pts, e = _map_chords(a, b, chords)
                verts.extend(pts[:-1])
                err = max(err, e)
            prims.append(Polygon(tuple(verts)))
        elif isinstance(p, Segment):
            pts, e = _map_chords(complex(p.a), complex(p.b), chords)
            err = max(err, e)
            prims.extend(Segment(a, b) for a, b in zip(pts, pts[1:]))
        elif isinstance(p, Sigma):
            raise ValueError("the exterior set is not a subset of U")
    return Region(tuple(prims)), err


def _map_disk(d: Disk) -> Disk:
    c, r = d.center, d.radius
    pts = [mobius_T(c + r), mobius_T(c - r), mobius_T(c + 1j * r)]
    center, radius = _circumcircle(*pts)
    img_c = mobius_T(c)
    if abs(img_c - center) > radius:
        raise ValueError("disk image is unbounded (disk too close to z = 1)")
    return Disk(center, radius)


def _circumcircle(a: complex, b: complex, c: complex) -> tuple[complex, float]:
    # perpendicular bisector intersection, solved as a 2x2 real system
    ax, ay, bx, by, cx, cy = a.real, a.imag, b.real, b.imag, c.real, c.imag
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if d == 0.0:
        raise ValueError("degenerate circumcircle")
    ux = ((ax**2 + ay**2) * (by - cy) + (bx**2 + by**2) * (cy - ay) + (cx**2 + cy**2) * (ay - by)) / d
    uy = ((ax**2 + ay**2) * (cx - bx) + (bx**2 + by**2) * (ax - cx) + (cx**2 + cy**2) * (bx - ax)) / d
    center = complex(ux, uy)
    return center, abs(a - center)


def _map_chords(a: complex, b: complex, chords: int) -> tuple[list, float]:
    ts = np.linspace(0.0, 1.0, chords + 1)
    pre = a + (b - a) * ts
    img = [mobius_T(z) for z in pre]
    err = 0.0
    for k in range(chords):
        true_mid = mobius_T(a + (b - a) * (ts[k] + ts[k + 1]) / 2.0)
        chord_mid = (img[k] + img[k + 1]) / 2.0
        err = max(err, abs(true_mid - chord_mid))
    return img, err
