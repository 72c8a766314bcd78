"""Multipath impulse-response simulation for a rectangular diffuse room.

The response is split by bounce order:

  order 0   analytic line-of-sight term (delta at d/c),
  order 1   deterministic sum over a patch discretization of all six surfaces,
  order >=2 Monte Carlo ray tracing with next-event estimation: rays leave the
            source with a cos^m-weighted direction, bounce diffusely, and at
            every bounce the energy scattered directly into the photodiode is
            gathered analytically.

All surfaces are ideal Lambertian reflectors.  Rays are traced to exactly
`max_bounces` reflections (no Russian roulette), and every ray batch draws
from an RNG stream derived from (seed, batch index), so the result is
bit-identical however batches are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    SPEED_OF_LIGHT,
    Luminaire,
    ReceiverSpec,
    RoomModel,
    channel_dc_gain_los,
    los_geometry,
)

# Rays per RNG batch.  Fixed (not configurable) because changing it would
# change the random streams and break run-to-run reproducibility.
_BATCH_SIZE = 8192

# Surface table for the box [0,L]x[0,W]x[0,H]:
# index 0: x=0, 1: x=L, 2: y=0, 3: y=W, 4: z=0 (floor), 5: z=H (ceiling)
_NORMALS = np.array([
    [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0], [0.0, -1.0, 0.0],
    [0.0, 0.0, 1.0], [0.0, 0.0, -1.0],
])
_TANGENTS_U = np.array([
    [0.0, 1.0, 0.0], [0.0, 1.0, 0.0],
    [1.0, 0.0, 0.0], [1.0, 0.0, 0.0],
    [1.0, 0.0, 0.0], [1.0, 0.0, 0.0],
])
_TANGENTS_V = np.array([
    [0.0, 0.0, 1.0], [0.0, 0.0, 1.0],
    [0.0, 0.0, 1.0], [0.0, 0.0, 1.0],
    [0.0, 1.0, 0.0], [0.0, 1.0, 0.0],
])


@dataclass
class RayTraceParams:
    max_bounces: int = 3
    patch_side: float = 0.1        # m, first-bounce surface discretization
    rays_per_source: int = 100_000  # Monte Carlo rays for bounces >= 2
    rng_seed: int = 0
    bin_width: float = 0.2e-9      # s

    def __post_init__(self):
        if self.max_bounces < 0:
            raise ValueError("max_bounces must be >= 0")
        if self.patch_side <= 0:
            raise ValueError("patch_side must be positive")
        if self.rays_per_source <= 0:
            raise ValueError("rays_per_source must be positive")
        if self.bin_width <= 0:
            raise ValueError("bin_width must be positive")


@dataclass
class ImpulseResponse:
    """Time-binned optical power gains, one histogram per bounce order.

    Bin i spans [t0 + i*bin_width, t0 + (i+1)*bin_width); t0 is always 0 here.
    `mc_stderr_by_order` holds the estimated standard error of the Monte Carlo
    order totals (None for deterministic orders).
    """

    bin_width: float
    t0: float
    bins_by_order: list[np.ndarray]
    mc_stderr_by_order: dict[int, float] = field(default_factory=dict)

    def total_by_order(self) -> np.ndarray:
        return np.array([float(b.sum()) for b in self.bins_by_order])

    def merged_bins(self) -> np.ndarray:
        """All orders summed into a single histogram."""
        n = max((len(b) for b in self.bins_by_order), default=0)
        out = np.zeros(n)
        for b in self.bins_by_order:
            out[: len(b)] += b
        return out

    def csv_rows(self):
        """(order, delay_s, gain) for every nonzero bin."""
        for order, bins in enumerate(self.bins_by_order):
            idx = np.nonzero(bins)[0]
            for i in idx:
                yield order, self.t0 + i * self.bin_width, float(bins[i])


def dc_gain(ir: ImpulseResponse) -> float:
    """Channel DC gain: the sum of all bins over all bounce orders."""
    return float(sum(b.sum() for b in ir.bins_by_order))


def rms_delay_spread(ir: ImpulseResponse) -> float:
    """Gain-weighted RMS spread of the multipath delays."""
    g = ir.merged_bins()
    total = g.sum()
    if total <= 0.0:
        raise ValueError("rms_delay_spread undefined for a zero-gain response")
    tau = ir.t0 + np.arange(len(g)) * ir.bin_width
    mean = float((g * tau).sum() / total)
    var = float((g * (tau - mean) ** 2).sum() / total)
    return math.sqrt(max(var, 0.0))


def worst_case_cp_samples(irs: list[ImpulseResponse], sample_rate: float) -> int:
    """Cyclic-prefix length covering 3x the worst RMS delay spread."""
    if not irs:
        raise ValueError("need at least one impulse response")
    worst = max(rms_delay_spread(ir) for ir in irs)
    # relative backoff so float round-off cannot push an exact multiple up
    return math.ceil(3.0 * worst * sample_rate * (1.0 - 1e-12))


def _bounds(room: RoomModel) -> np.ndarray:
    return np.array([room.length, room.width, room.height])


def _surface_rhos(room: RoomModel) -> np.ndarray:
    return np.array([room.rho_wall] * 4 + [room.rho_floor, room.rho_ceiling])


def _receiver_kernel_consts(rcv: ReceiverSpec):
    """Effective aperture (area * T_s * CPC gain) and the FOV cosine gate."""
    a_eff = rcv.area * rcv.optical_filter_gain * rcv.concentrator_gain()
    cos_fov = math.cos(math.radians(rcv.fov_deg))
    return a_eff, cos_fov


def _gather_to_receiver(points, normals, weights, rcv_pos, a_eff, cos_fov, r_min):
    """Next-event estimation: power fraction scattered from diffuse surface
    points directly into the photodiode, plus the extra path length."""
    v = rcv_pos[None, :] - points
    d = np.linalg.norm(v, axis=1)
    d_safe = np.maximum(d, r_min)  # near-field clamp at the patch scale
    u = v / np.maximum(d, 1e-300)[:, None]
    cos_out = np.einsum("ij,ij->i", u, normals)
    cos_psi = -u[:, 2]  # receiver looks straight up
    visible = (cos_out > 0.0) & (cos_psi >= cos_fov)
    contrib = np.where(
        visible,
        weights * (cos_out / math.pi) * cos_psi * a_eff / (d_safe * d_safe),
        0.0,
    )
    return contrib, d


def _first_bounce_deterministic(room, src, rcv, params):
    """Sum source -> patch -> receiver transfers over a uniform patch grid.

    Each patch acts as an m=1 diffuse re-emitter of its own area, weighted by
    the surface reflectivity.
    """
    bounds = _bounds(room)
    rhos = _surface_rhos(room)
    a_eff, cos_fov = _receiver_kernel_consts(rcv)
    src_pos = np.array(src.position.as_tuple())
    rcv_pos = np.array(rcv.position.as_tuple())
    m = src.lambertian_mode

    delays = []
    gains = []
    for s in range(6):
        axis = s // 2
        coord = bounds[axis] if s % 2 else 0.0
        ua, va = (axis + 1) % 3, (axis + 2) % 3
        nu = max(1, round(bounds[ua] / params.patch_side))
        nv = max(1, round(bounds[va] / params.patch_side))
        du, dv = bounds[ua] / nu, bounds[va] / nv
        uu = (np.arange(nu) + 0.5) * du
        vv = (np.arange(nv) + 0.5) * dv
        grid_u, grid_v = np.meshgrid(uu, vv, indexing="ij")
        pts = np.empty((nu * nv, 3))
        pts[:, axis] = coord
        pts[:, ua] = grid_u.ravel()
        pts[:, va] = grid_v.ravel()

        n_hat = _NORMALS[s]
        v1 = pts - src_pos[None, :]
        d1 = np.linalg.norm(v1, axis=1)
        d1 = np.maximum(d1, 1e-12)
        u1 = v1 / d1[:, None]
        cos_phi = -u1[:, 2]                       # source axis is -z
        cos_in = -(u1 @ n_hat)
        lit = (cos_phi > 0.0) & (cos_in > 0.0)
        if not lit.any():
            continue
        incident = ((m + 1.0) / (2.0 * math.pi * d1 ** 2)
                    * np.where(lit, cos_phi, 0.0) ** m
                    * np.where(lit, cos_in, 0.0)
                    * (du * dv))
        contrib, d2 = _gather_to_receiver(
            pts, np.broadcast_to(n_hat, pts.shape), incident * rhos[s],
            rcv_pos, a_eff, cos_fov, params.patch_side)
        nz = contrib > 0.0
        if nz.any():
            gains.append(contrib[nz])
            delays.append((d1[nz] + d2[nz]) / SPEED_OF_LIGHT)

    if not gains:
        return np.zeros(0)
    g = np.concatenate(gains)
    t = np.concatenate(delays)
    idx = np.floor(t / params.bin_width).astype(np.int64)
    return np.bincount(idx, weights=g)


def _sample_lambertian_down(rng, n, m):
    """Directions from a downward-facing cos^m emitter; pdf cancels the
    emission kernel so each ray carries unit power weight."""
    u1 = rng.random(n)
    u2 = rng.random(n)
    cos_t = u1 ** (1.0 / (m + 1.0))
    sin_t = np.sqrt(np.maximum(0.0, 1.0 - cos_t * cos_t))
    phi = 2.0 * math.pi * u2
    d = np.empty((n, 3))
    d[:, 0] = sin_t * np.cos(phi)
    d[:, 1] = sin_t * np.sin(phi)
    d[:, 2] = -cos_t
    return d


def _sample_cosine_about(rng, surf_idx):
    """Cosine-weighted hemisphere directions about each surface normal."""
    n = len(surf_idx)
    u1 = rng.random(n)
    u2 = rng.random(n)
    cos_t = np.sqrt(u1)
    sin_t = np.sqrt(np.maximum(0.0, 1.0 - u1))
    phi = 2.0 * math.pi * u2
    tu = _TANGENTS_U[surf_idx]
    tv = _TANGENTS_V[surf_idx]
    nrm = _NORMALS[surf_idx]
    return (tu * (sin_t * np.cos(phi))[:, None]
            + tv * (sin_t * np.sin(phi))[:, None]
            + nrm * cos_t[:, None])


def _intersect_box(pos, dirs, bounds):
    """First wall hit for each ray.  Positions are snapped onto the hit plane
    so the next trace step cannot re-intersect the same surface."""
    n = len(pos)
    target = np.where(dirs > 0.0, bounds[None, :], 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (target - pos) / dirs
    t[dirs == 0.0] = np.inf
    axis = np.argmin(t, axis=1)
    rows = np.arange(n)
    t_hit = t[rows, axis]
    surf = 2 * axis + (dirs[rows, axis] > 0.0)
    hit = pos + t_hit[:, None] * dirs
    hit[rows, axis] = target[rows, axis]
    return hit, surf, t_hit


def _mc_bounce_orders(room, src, rcv, params, first_gather_order):
    """Monte Carlo contribution histograms for bounce orders
    first_gather_order..max_bounces, plus per-order standard errors."""
    bounds = _bounds(room)
    rhos = _surface_rhos(room)
    a_eff, cos_fov = _receiver_kernel_consts(rcv)
    src_pos = np.array(src.position.as_tuple())
    rcv_pos = np.array(rcv.position.as_tuple())
    orders = list(range(first_gather_order, params.max_bounces + 1))
    hists = {k: np.zeros(0) for k in orders}
    batch_means = {k: [] for k in orders}

    n_left = params.rays_per_source
    batch_index = 0
    while n_left > 0:
        n = min(_BATCH_SIZE, n_left)
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([params.rng_seed, batch_index])))
        dirs = _sample_lambertian_down(rng, n, src.lambertian_mode)
        pos = np.broadcast_to(src_pos, (n, 3)).copy()
        weights = np.ones(n)
        path = np.zeros(n)
        for bounce in range(1, params.max_bounces + 1):
            pos, surf, t_hit = _intersect_box(pos, dirs, bounds)
            path = path + t_hit
            weights = weights * rhos[surf]
            if bounce >= first_gather_order:
                contrib, d2 = _gather_to_receiver(
                    pos, _NORMALS[surf], weights, rcv_pos,
                    a_eff, cos_fov, params.patch_side)
                contrib = contrib / params.rays_per_source
                delays = (path + d2) / SPEED_OF_LIGHT
                idx = np.floor(delays / params.bin_width).astype(np.int64)
                h = np.bincount(idx, weights=contrib)
                cur = hists[bounce]
                if len(h) > len(cur):
                    cur = np.concatenate([cur, np.zeros(len(h) - len(cur))])
                cur[: len(h)] += h
                hists[bounce] = cur
                batch_means[bounce].append(float(contrib.sum()) / n * params.rays_per_source)
            if bounce < params.max_bounces:
                dirs = _sample_cosine_about(rng, surf)
        n_left -= n
        batch_index += 1

    stderr = {}
    for k in orders:
        means = np.asarray(batch_means[k])
        if len(means) > 1:
            stderr[k] = float(means.std(ddof=1) / math.sqrt(len(means)))
        else:
            stderr[k] = float("nan")
    return hists, stderr


def simulate_impulse_response(room: RoomModel, src: Luminaire, rcv: ReceiverSpec,
                              params: RayTraceParams) -> ImpulseResponse:
    """Simulate the link impulse response up to `max_bounces` reflections.

    Deterministic for a fixed (seed, params) pair.  A zero-gain response is
    a legal result (e.g. the receiver FOV excludes everything).
    """
    bins_by_order: list[np.ndarray] = []

    los_gain = channel_dc_gain_los(src, rcv)
    if los_gain > 0.0:
        delay = los_geometry(src, rcv).d / SPEED_OF_LIGHT
        idx = int(delay // params.bin_width)
        order0 = np.zeros(idx + 1)
        order0[idx] = los_gain
    else:
        order0 = np.zeros(0)
    bins_by_order.append(order0)

    if params.max_bounces >= 1:
        bins_by_order.append(_first_bounce_deterministic(room, src, rcv, params))

    stderr: dict[int, float] = {}
    if params.max_bounces >= 2:
        hists, stderr = _mc_bounce_orders(room, src, rcv, params, first_gather_order=2)
        for k in range(2, params.max_bounces + 1):
            bins_by_order.append(hists[k])

    return ImpulseResponse(bin_width=params.bin_width, t0=0.0,
                           bins_by_order=bins_by_order,
                           mc_stderr_by_order=stderr)


def mc_first_bounce_gain(room: RoomModel, src: Luminaire, rcv: ReceiverSpec,
                         params: RayTraceParams) -> tuple[float, float]:
    """Diagnostic: estimate the first-bounce gain by the Monte Carlo path.

    Returns (gain, stderr).  Used to cross-check the deterministic patch sum;
    the two estimate the same integral.
    """
    p = RayTraceParams(max_bounces=1, patch_side=params.patch_side,
                       rays_per_source=params.rays_per_source,
                       rng_seed=params.rng_seed, bin_width=params.bin_width)
    hists, stderr = _mc_bounce_orders(room, src, rcv, p, first_gather_order=1)
    return float(hists[1].sum()), stderr[1]
