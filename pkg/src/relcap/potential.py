"""Harmonic-measure machinery on disk/half-plane domains with obstacles.

Brownian exit positions are sampled by walk-on-spheres: repeated jumps to
a uniform point of the largest circle centered at the walker that stays
inside the walk domain, stopping within ``eps`` of the boundary.  On top
of the sampler sit two estimators:

* ``expected_im_exit`` -- mean imaginary part of the exit position from
  the upper half-plane minus an obstacle (exits on the real axis count
  exactly zero);
* ``inner_radius`` -- the logarithm of the conformal (inner) radius,
  obtained as the harmonic extension of the boundary data
  ``log |zeta - z|`` evaluated at ``z``.

An independent finite-difference Dirichlet solver
(``grid_green_regular_part``) provides the cross-validation oracle.

Sampling is sharded: ``n`` samples split into fixed-size shards, each
driven by a sub-seed derived deterministically from the master seed, and
shard results merge by weighted mean in shard order.  Results therefore
depend only on ``(inputs, seed, shard_size)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    Domain,
    Region,
    compile_region,
    region_bounding_radius,
    region_sup_imag,
)

__all__ = [
    "WalkDomain",
    "ExitSample",
    "Estimate",
    "WalkStepLimitError",
    "DEFAULT_SHARD_SIZE",
    "DEFAULT_EPS_FACTOR",
    "wos_scale",
    "wos_exit_sample",
    "sample_exits",
    "expected_im_exit",
    "inner_radius",
    "grid_green_regular_part",
    "GridSolveError",
]

DEFAULT_SHARD_SIZE = 8192
DEFAULT_EPS_FACTOR = 1e-4
DEFAULT_MAX_STEPS = 10**6
R_CAP_FACTOR = 64.0
LOG_CLAMP = 1e-12


class WalkStepLimitError(RuntimeError):
    """A walk exceeded the step budget; the domain is degenerate."""


class GridSolveError(RuntimeError):
    """The grid Dirichlet solve failed to reach the residual target."""


@dataclass(frozen=True)
class WalkDomain:
    """``base`` domain minus the ``obstacle`` region."""

    base: Domain
    obstacle: Region

    def base_distance(self, pts: np.ndarray) -> np.ndarray:
        if self.base is Domain.UNIT_DISK:
            return 1.0 - np.abs(pts)
        return pts.imag.copy()

    def project_to_base(self, pts: np.ndarray) -> np.ndarray:
        if self.base is Domain.UNIT_DISK:
            mod = np.abs(pts)
            safe = np.where(mod == 0.0, 1.0, mod)
            return np.where(mod == 0.0, 1.0 + 0.0j, pts / safe)
        return pts.real + 0.0j


@dataclass(frozen=True)
class ExitSample:
    """Terminal state of one walk."""

    position: complex
    steps: int
    terminated_on: str  # "base-boundary" | "obstacle"


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo estimate with its standard error.

    Reproducible: identical inputs, seed and shard size give an
    identical estimate bit for bit.
    """

    mean: float
    stderr: float
    n_samples: int
    seed: int
    flags: tuple = ()

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if not self.stderr >= 0:
            raise ValueError("stderr must be >= 0")

    @property
    def exp_mean(self) -> float:
        """exp of the mean, for estimates carried in log scale."""
        return math.exp(self.mean)

    @property
    def exp_stderr(self) -> float:
        return math.exp(self.mean) * self.stderr


def wos_scale(domain: WalkDomain, start: complex) -> float:
    """Reference length used to make ``eps`` dimensionless.

    Tied to the obstacle extent (not the start point): the stopping band
    must resolve the obstacle geometry however far the walk begins.
    """
    if domain.base is Domain.UNIT_DISK:
        return 1.0
    bound = region_bounding_radius(domain.obstacle) if not domain.obstacle.is_empty else 0.0
    if math.isinf(bound):
        raise ValueError("half-plane walks need a bounded obstacle")
    return max(1.0, bound)


# Half-plane steps are left uncapped.  A fixed cap turns far excursions
# into an undamped arithmetic random walk whose return time has no finite
# mean (observed as multi-million-sweep hangs); without a cap the height
# at most doubles per jump while its log drifts down by log 2 per step,
# so walks terminate in O(log(height/eps)) sweeps and stay far inside
# float64 range.
def _r_cap(domain: WalkDomain, start: complex) -> float | None:
    return None




def _walk_batch(
    domain: WalkDomain,
    starts: np.ndarray,
    eps: float,
    rng: np.random.Generator,
    *,
    r_cap: float | None = None,
    max_steps: int = DEFAULT_MAX_STEPS,
    fast_exit: bool = False,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run one batch of walks to termination.

    Returns ``(positions, steps, hit_obstacle)``.  Random draws are made
    for the full batch every sweep so that runs sharing a seed stay
    coupled across different obstacle geometries.
    """
    n = len(starts)
    pos = np.array(starts, dtype=np.complex128)
    steps = np.zeros(n, dtype=np.int64)
    hit_obstacle = np.zeros(n, dtype=bool)
    active = np.arange(n)
    has_obstacle = not domain.obstacle.is_empty
    compiled = compile_region(domain.obstacle) if has_obstacle else None
    if fast_exit:
        sh_top = region_sup_imag(domain.obstacle) if has_obstacle else 0.0
        if domain.base is not Domain.HALF_PLANE or not sh_top > 0.0:
            fast_exit = False

    for _sweep in range(max_steps):
        if len(active) == 0:
            break
        u = rng.random(n)
        u2 = rng.random(n) if fast_exit else None
        p = pos[active]
        d_base = domain.base_distance(p)
        if has_obstacle:
            d_obst = compiled.distance(p)
        else:
            d_obst = np.full(len(p), np.inf)
        d = np.minimum(d_base, d_obst)

        finish = d <= eps
        if finish.any():
            idx = active[finish]
            on_obstacle = d_obst[finish] <= d_base[finish]
            target = pos[idx]
            if on_obstacle.any():
                target[on_obstacle] = compiled.nearest(target[on_obstacle])
            if (~on_obstacle).any():
                target[~on_obstacle] = domain.project_to_base(target[~on_obstacle])
            pos[idx] = target
            hit_obstacle[idx] = on_obstacle

        survivors = active[~finish]
        r = d[~finish]
        movers = survivors
        if fast_exit and len(survivors):
            # walkers high above the obstacle jump in one exact move to
            # their first passage of the line Im = sup Im(obstacle): the
            # horizontal displacement is Cauchy with scale equal to the
            # height gap, which is distributionally exact because every
            # path must cross that line before reaching any boundary
            quick = pos[survivors].imag > 2.0 * sh_top
            if quick.any():
                qi = survivors[quick]
                gap = pos[qi].imag - sh_top
                x = pos[qi].real + gap * np.tan(np.pi * (u2[qi] - 0.5))
                pos[qi] = x + 1j * sh_top
                steps[qi] += 1
                movers = survivors[~quick]
                r = r[~quick]
        if len(movers):
            if r_cap is not None:
                r = np.minimum(r, r_cap)
            pos[movers] += r * np.exp(2j * np.pi * u[movers])
            steps[movers] += 1
        active = survivors
    else:
        if len(active):
            raise WalkStepLimitError(
                f"{len(active)} walks not terminated after {max_steps} sweeps"
            )
    return pos, steps, hit_obstacle


def wos_exit_sample(
    domain: WalkDomain,
    start: complex,
    eps: float,
    rng: np.random.Generator,
    *,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> ExitSample:
    """Sample one Brownian exit position from ``domain`` started at ``start``."""
    starts = np.array([start], dtype=np.complex128)
    pos, steps, hit = _walk_batch(
        domain, starts, eps, rng, r_cap=_r_cap(domain, start), max_steps=max_steps
    )
    return ExitSample(
        position=complex(pos[0]),
        steps=int(steps[0]),
        terminated_on="obstacle" if hit[0] else "base-boundary",
    )


def sample_exits(
    domain: WalkDomain,
    start: complex,
    n: int,
    seed: int,
    *,
    eps: float | None = None,
    shard_size: int = DEFAULT_SHARD_SIZE,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample ``n`` exit positions; returns ``(positions, hit_obstacle)``."""
    if eps is None:
        eps = DEFAULT_EPS_FACTOR * wos_scale(domain, start)
    sizes = _shard_layout(n, shard_size)
    rngs = _shard_rngs(seed, len(sizes))
    r_cap = _r_cap(domain, start)
    pos_parts = []
    hit_parts = []
    for size, rng in zip(sizes, rngs):
        starts = np.full(size, complex(start), dtype=np.complex128)
        pos, _, hit = _walk_batch(domain, starts, eps, rng, r_cap=r_cap, max_steps=max_steps)
        pos_parts.append(pos)
        hit_parts.append(hit)
    return np.concatenate(pos_parts), np.concatenate(hit_parts)


def _shard_layout(n: int, shard_size: int) -> list[int]:
    sizes = [shard_size] * (n // shard_size)
    if n % shard_size:
        sizes.append(n % shard_size)
    return sizes


def _shard_rngs(seed: int, n_shards: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(n_shards)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def _run_shards(
    domain: WalkDomain,
    start: complex,
    n: int,
    eps: float,
    seed: int,
    value_fn,
    *,
    shard_size: int = DEFAULT_SHARD_SIZE,
    max_steps: int = DEFAULT_MAX_STEPS,
    fast_exit: bool = False,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, tuple]:
    """Walk ``n`` samples in shards; reduce each shard with ``value_fn``.

    ``value_fn(positions, hit_obstacle) -> (values, flags)`` maps exits to
    per-sample scalars.  Returns per-shard sizes, means, within-shard sums
    of squared deviations, and merged flags.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    sizes = _shard_layout(n, shard_size)
    rngs = _shard_rngs(seed, len(sizes))
    r_cap = _r_cap(domain, start)
    means = np.empty(len(sizes))
    m2s = np.empty(len(sizes))
    flags: set = set()
    for k, (size, rng) in enumerate(zip(sizes, rngs)):
        starts = np.full(size, complex(start), dtype=np.complex128)
        pos, _, hit = _walk_batch(
            domain, starts, eps, rng, r_cap=r_cap, max_steps=max_steps, fast_exit=fast_exit
        )
        vals, fl = value_fn(pos, hit)
        flags.update(fl)
        means[k] = vals.mean()
        m2s[k] = ((vals - means[k]) ** 2).sum()
    return np.asarray(sizes, dtype=np.int64), means, m2s, tuple(sorted(flags))


def _pool_estimate(sizes, means, m2s, seed, flags) -> Estimate:
    """Merge shard moments (Chan parallel update) into one Estimate."""
    n_tot = 0
    mean = 0.0
    m2 = 0.0
    for n_k, mean_k, m2_k in zip(sizes, means, m2s):
        delta = mean_k - mean
        new_n = n_tot + int(n_k)
        m2 = m2 + m2_k + delta * delta * n_tot * int(n_k) / new_n
        mean = mean + delta * int(n_k) / new_n
        n_tot = new_n
    var = m2 / (n_tot - 1) if n_tot > 1 else 0.0
    stderr = math.sqrt(max(var, 0.0) / n_tot)
    return Estimate(mean=mean, stderr=stderr, n_samples=n_tot, seed=seed, flags=flags)


def expected_im_exit(
    domain: WalkDomain,
    start: complex,
    n: int,
    seed: int,
    *,
    eps: float | None = None,
    shard_size: int = DEFAULT_SHARD_SIZE,
    max_steps: int = DEFAULT_MAX_STEPS,
    fast_exit: bool = False,
) -> Estimate:
    """Estimate the mean imaginary part of the exit position from ``domain``.

    The base must be the upper half-plane; exits through the real axis
    contribute exactly zero.  ``fast_exit`` replaces the sphere steps of
    walkers high above the obstacle by one exact Cauchy first-passage
    jump to the horizontal line at the obstacle's top; the jump law is
    distributionally exact, and the flag stays off by default to keep
    the baseline estimator auditable.
    """
    if domain.base is not Domain.HALF_PLANE:
        raise ValueError("expected_im_exit requires the half-plane base")
    if eps is None:
        eps = DEFAULT_EPS_FACTOR * wos_scale(domain, start)

    def im_of_exit(pos, hit):
        vals = np.where(hit, pos.imag, 0.0)
        return vals, ()

    sizes, means, m2s, flags = _run_shards(
        domain, start, n, eps, seed, im_of_exit,
        shard_size=shard_size, max_steps=max_steps, fast_exit=fast_exit,
    )
    return _pool_estimate(sizes, means, m2s, seed, flags)


def _base_green(base: Domain, pts: np.ndarray, z: complex) -> np.ndarray:
    """Green's function of the bare base domain with pole at ``z``."""
    if base is Domain.UNIT_DISK:
        num = np.abs(1.0 - np.conj(z) * pts)
    else:
        num = np.abs(pts - np.conj(z))
    den = np.abs(pts - z)
    return np.log(num) - np.log(den)


def _base_log_radius(base: Domain, z: complex) -> float:
    if base is Domain.UNIT_DISK:
        return math.log(1.0 - abs(z) ** 2)
    return math.log(2.0 * z.imag)


def inner_radius(
    domain: WalkDomain,
    z: complex,
    n: int,
    *,
    eps: float | None = None,
    seed: int = 0,
    shard_size: int = DEFAULT_SHARD_SIZE,
    max_steps: int = DEFAULT_MAX_STEPS,
    base_control: bool = True,
) -> Estimate:
    """Estimate ``log r(domain, z)`` from Brownian exit positions.

    The estimand is the harmonic extension of ``log |zeta - z|``
    evaluated at ``z``.  With ``base_control`` (default) each sample uses
    the identity ``log|B - z| = log|B - z*| - g(B, z)`` against the bare
    base domain, whose harmonic extension is known in closed form; only
    walks that hit the obstacle then carry variance, and obstacle-free
    estimates are exact.  ``Estimate.exp_mean`` exposes the radius itself.
    """
    est, _shards = _inner_radius_shards(
        domain, z, n, eps=eps, seed=seed, shard_size=shard_size,
        max_steps=max_steps, base_control=base_control,
    )
    return est


def _inner_radius_shards(
    domain: WalkDomain,
    z: complex,
    n: int,
    *,
    eps: float | None = None,
    seed: int = 0,
    shard_size: int = DEFAULT_SHARD_SIZE,
    max_steps: int = DEFAULT_MAX_STEPS,
    base_control: bool = True,
) -> tuple[Estimate, tuple[np.ndarray, np.ndarray]]:
    """`inner_radius` plus the per-shard (sizes, means) used to build it."""
    if eps is None:
        eps = DEFAULT_EPS_FACTOR * wos_scale(domain, z)
    zc = complex(z)
    base = domain.base

    # With the control variate the per-sample values are residuals around
    # an exact constant; the constant is added once per shard mean so an
    # obstacle-free run yields the closed-form value bit for bit.
    offset = _base_log_radius(base, zc) if base_control else 0.0

    def log_dist(pos, hit):
        flags: tuple = ()
        if base_control:
            vals = np.zeros(len(pos))
            if hit.any():
                gap = np.abs(pos[hit] - zc)
                if (gap < LOG_CLAMP).any():
                    gap = np.maximum(gap, LOG_CLAMP)
                    flags = ("clamped-log-samples",)
                num = (
                    np.abs(1.0 - np.conj(zc) * pos[hit])
                    if base is Domain.UNIT_DISK
                    else np.abs(pos[hit] - np.conj(zc))
                )
                vals[hit] = np.log(gap) - np.log(num)
        else:
            gap = np.abs(pos - zc)
            if (gap < LOG_CLAMP).any():
                gap = np.maximum(gap, LOG_CLAMP)
                flags = ("clamped-log-samples",)
            vals = np.log(gap)
        return vals, flags

    sizes, means, m2s, flags = _run_shards(
        domain, zc, n, eps, seed, log_dist,
        shard_size=shard_size, max_steps=max_steps,
    )
    means = means + offset
    pooled = _pool_estimate(sizes, means, m2s, seed, flags)
    return pooled, (sizes, means)


# ----------------------------------------------------------------------
# finite-difference Dirichlet oracle
# ----------------------------------------------------------------------

def grid_green_regular_part(
    mask,
    z: complex,
    *,
    tol: float = 1e-10,
    max_cycles: int = 200,
) -> float:
    """Independent oracle for ``inner_radius`` on a Cartesian mask.

    Solves the 5-point discrete Laplace equation on the domain nodes of
    ``mask`` (cell midpoints) with Dirichlet data ``log |node - z|`` on
    all non-domain and ghost nodes, iteratively to relative residual
    below ``tol``, and returns the solution interpolated at ``z``.
    """
    import scipy.sparse as sp

    cells = mask.cells
    nx, ny = mask.nx, mask.ny
    dx, dy = mask.dx, mask.dy
    xs = mask.x_mid()
    ys = mask.y_mid()
    zc = complex(z)

    xmin, xmax, ymin, ymax = mask.bbox
    if not (xmin < zc.real < xmax and ymin < zc.imag < ymax):
        raise ValueError("z lies outside the mask bounding box")
    ix = int(np.argmin(np.abs(xs - zc.real)))
    iy = int(np.argmin(np.abs(ys - zc.imag)))
    if not cells[ix, iy]:
        raise ValueError("z is not an interior node of the domain mask")

    index = -np.ones((nx, ny), dtype=np.int64)
    order = np.flatnonzero(cells.ravel())
    index.ravel()[order] = np.arange(len(order))
    n_unk = len(order)
    if n_unk == 0:
        raise ValueError("mask has no domain nodes")

    wx, wy = 1.0 / dx**2, 1.0 / dy**2
    diag = np.full(n_unk, 2.0 * (wx + wy))
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    b = np.zeros(n_unk)

    ii, jj = np.nonzero(cells)
    me = index[ii, jj]
    for di, dj, w in ((1, 0, wx), (-1, 0, wx), (0, 1, wy), (0, -1, wy)):
        ni, nj = ii + di, jj + dj
        in_grid = (ni >= 0) & (ni < nx) & (nj >= 0) & (nj < ny)
        neigh = np.where(in_grid, index[np.clip(ni, 0, nx - 1), np.clip(nj, 0, ny - 1)], -1)
        linked = in_grid & (neigh >= 0)
        rows.append(me[linked])
        cols.append(neigh[linked])
        vals.append(np.full(linked.sum(), -w))
        # Dirichlet data at non-domain and ghost node positions
        data_side = ~linked
        node_x = xs[np.clip(ni[data_side], 0, nx - 1)]
        node_y = ys[np.clip(nj[data_side], 0, ny - 1)]
        ghost_x = xs[ii[data_side]] + di * dx
        ghost_y = ys[jj[data_side]] + dj * dy
        px = np.where(in_grid[data_side], node_x, ghost_x)
        py = np.where(in_grid[data_side], node_y, ghost_y)
        g = 0.5 * np.log((px - zc.real) ** 2 + (py - zc.imag) ** 2)
        np.add.at(b, me[data_side], w * g)

    A = sp.csr_matrix(
        (
            np.concatenate([diag] + vals),
            (
                np.concatenate([np.arange(n_unk)] + rows),
                np.concatenate([np.arange(n_unk)] + cols),
            ),
        ),
        shape=(n_unk, n_unk),
    )

    x = _solve_spd(A, b, tol=tol, max_cycles=max_cycles)

    field = np.empty((nx, ny))
    px, py = np.meshgrid(xs, ys, indexing="ij")
    field[:] = 0.5 * np.log((px - zc.real) ** 2 + (py - zc.imag) ** 2)
    field[cells] = x

    return _bilinear_at(field, cells, xs, ys, zc)


def _solve_spd(A, b, *, tol: float, max_cycles: int) -> np.ndarray:
    import pyamg

    norm_b = float(np.linalg.norm(b)) or 1.0
    ml = pyamg.ruge_stuben_solver(A.tocsr())
    x = ml.solve(b, tol=tol * 1e-2, maxiter=max_cycles, accel="cg")
    resid = float(np.linalg.norm(b - A @ x)) / norm_b
    if resid >= tol:
        raise GridSolveError(f"residual {resid:.3e} above target {tol:.1e}")
    return x


def _bilinear_at(field, cells, xs, ys, zc: complex) -> float:
    nx, ny = field.shape
    ix = int(np.argmin(np.abs(xs - zc.real)))
    iy = int(np.argmin(np.abs(ys - zc.imag)))
    if abs(xs[ix] - zc.real) < 1e-12 and abs(ys[iy] - zc.imag) < 1e-12:
        return float(field[ix, iy])
    i0 = min(max(int(np.searchsorted(xs, zc.real)) - 1, 0), nx - 2)
    j0 = min(max(int(np.searchsorted(ys, zc.imag)) - 1, 0), ny - 2)
    if not cells[i0 : i0 + 2, j0 : j0 + 2].all():
        raise ValueError("z is not surrounded by interior nodes")
    tx = (zc.real - xs[i0]) / (xs[i0 + 1] - xs[i0])
    ty = (zc.imag - ys[j0]) / (ys[j0 + 1] - ys[j0])
    f = field
    return float(
        f[i0, j0] * (1 - tx) * (1 - ty)
        + f[i0 + 1, j0] * tx * (1 - ty)
        + f[i0, j0 + 1] * (1 - tx) * ty
        + f[i0 + 1, j0 + 1] * tx * ty
    )
