"""Range inversion and lateration.

The estimated optical DC gain of each luminaire link is inverted to a slant
distance through the Lambertian link law (valid because emission and
incidence angles coincide for the down/up geometry and the concentrator gain
is constant inside the FOV), projected to a horizontal range, and the four
ranges are solved by linearized least squares: subtracting one circle
equation from the others leaves a linear system A X = B in the receiver
coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Anchor:
    x: float
    y: float
    id_code: int


@dataclass
class PositionResult:
    x_hat: float
    y_hat: float
    ranges: list[float]
    residual_norm: float
    error: float | None = None  # vs ground truth, when known

    def __post_init__(self):
        if self.error is not None and self.error < 0:
            raise ValueError("error must be >= 0")


def estimate_distance(optical_gain: float, m: float, area: float, t_s: float,
                      g: float, tx_height: float, rx_height: float) -> float:
    """Invert the LOS link law for the slant distance:

        d = [ (m+1) A T_s g (H-h)^(m+1) / (2 pi H~) ]^(1/(m+3))
    """
    if optical_gain <= 0.0:
        raise ValueError("optical gain must be positive")
    dz = tx_height - rx_height
    if dz <= 0 or area <= 0 or t_s <= 0 or g <= 0:
        raise ValueError("geometry constants must be positive")
    num = (m + 1.0) * area * t_s * g * dz ** (m + 1.0)
    return (num / (2.0 * math.pi * optical_gain)) ** (1.0 / (m + 3.0))


def horizontal_range(d: float, tx_height: float, rx_height: float) -> tuple[float, bool]:
    """Project the slant distance onto the receiver plane.

    Noise can push the estimated d below the geometric minimum H-h; that case
    clamps the range to 0 and flags it rather than failing.
    """
    if tx_height <= rx_height:
        raise ValueError("transmitter must be above the receiver")
    dz = tx_height - rx_height
    if d < dz:
        return 0.0, True
    return math.sqrt(d * d - dz * dz), False


def laterate(anchors: list[Anchor], ranges: list[float],
             reference: int = 0) -> tuple[float, float, float]:
    """Linearized least-squares position fix.

    Subtracts the `reference` anchor's circle equation from the others and
    solves the resulting linear system via the normal equations.  Returns
    (x_hat, y_hat, residual_norm).
    """
    if len(anchors) != len(ranges):
        raise ValueError("anchors/ranges length mismatch")
    if len(anchors) < 3:
        raise ValueError("need at least 3 anchors")
    if not 0 <= reference < len(anchors):
        raise ValueError("reference index out of bounds")

    a0 = anchors[reference]
    r0 = ranges[reference]
    rows = []
    rhs = []
    for j, (a, r) in enumerate(zip(anchors, ranges)):
        if j == reference:
            continue
        rows.append([a.x - a0.x, a.y - a0.y])
        rhs.append(0.5 * ((r0 * r0 - r * r) + (a.x * a.x + a.y * a.y)
                          - (a0.x * a0.x + a0.y * a0.y)))
    a_mat = np.array(rows)
    b_vec = np.array(rhs)
    ata = a_mat.T @ a_mat
    if abs(np.linalg.det(ata)) < 1e-12:
        raise np.linalg.LinAlgError("collinear anchors: normal equations singular")
    x = np.linalg.solve(ata, a_mat.T @ b_vec)
    residual = float(np.linalg.norm(a_mat @ x - b_vec))
    return float(x[0]), float(x[1]), residual


def position_error(est: tuple[float, float], truth: tuple[float, float]) -> float:
    """2-D Euclidean distance between estimate and ground truth."""
    return math.hypot(est[0] - truth[0], est[1] - truth[1])


def solve_position(anchors: list[Anchor], ranges: list[float],
                   truth: tuple[float, float] | None = None) -> PositionResult:
    x_hat, y_hat, residual = laterate(anchors, ranges)
    err = position_error((x_hat, y_hat), truth) if truth is not None else None
    return PositionResult(x_hat=x_hat, y_hat=y_hat, ranges=list(ranges),
                          residual_norm=residual, error=err)
