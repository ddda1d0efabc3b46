"""Two-level rotatable array geometry and LoS channel synthesis.

The transmit ULA sits on a rotatable platform (one global rotation angle)
and every transmit element can additionally steer its own boresight inside
the platform plane.  All angles are radians; degrees only exist at the
CLI/config boundary.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

SPEED_OF_LIGHT = 299792458.0


def element_offsets(n: int) -> np.ndarray:
    """Normalized element position indices, symmetric about the array center."""
    return np.arange(n, dtype=float) - (n - 1) / 2.0


def boresight_gain(p: float) -> float:
    """Peak directional gain of the cos^(2p) element pattern."""
    return 2.0 * (2.0 * p + 1.0)


@dataclass(frozen=True)
class ArrayConfig:
    """Transmit/receive array geometry, rotation limits and element directivity."""

    n_tx: int
    n_rx: int
    wavelength: float
    spacing: float | None = None  # defaults to half a wavelength
    directivity_p: float = 1.0
    phi_arr_max: float = np.deg2rad(15.0)
    varphi_max: float = np.deg2rad(15.0)

    def __post_init__(self):
        if self.n_tx < 1 or self.n_rx < 1:
            raise ValueError("array sizes must be positive")
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")
        if self.spacing is None:
            object.__setattr__(self, "spacing", self.wavelength / 2.0)
        elif self.spacing <= 0:
            raise ValueError("element spacing must be positive")
        if self.directivity_p < 0:
            raise ValueError("directivity factor must be nonnegative")
        if self.phi_arr_max < 0 or self.varphi_max < 0 or self.varphi_max > np.pi / 2:
            raise ValueError("rotation limits out of range")


@dataclass(frozen=True)
class PolarPosition:
    """Polar position in the service plane: range in meters, azimuth from +y axis."""

    range_m: float
    azimuth: float

    def __post_init__(self):
        if self.range_m <= 0:
            raise ValueError("range must be positive")
        if not (-np.pi / 2 < self.azimuth < np.pi / 2):
            raise ValueError("azimuth must lie strictly inside (-pi/2, pi/2)")

    def cartesian(self) -> np.ndarray:
        return np.array([self.range_m * np.sin(self.azimuth),
                         self.range_m * np.cos(self.azimuth)])


@dataclass(frozen=True)
class RotationState:
    """Array-level rotation angle plus per-element boresight angles."""

    phi_arr: float
    varphi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "varphi", np.asarray(self.varphi, dtype=float))

    @classmethod
    def zeros(cls, n_tx: int) -> "RotationState":
        return cls(0.0, np.zeros(n_tx))

    def check_feasible(self, cfg: ArrayConfig, atol: float = 1e-12) -> None:
        if abs(self.phi_arr) > cfg.phi_arr_max + atol:
            raise ValueError(
                f"array rotation {self.phi_arr:.6g} exceeds bound {cfg.phi_arr_max:.6g}")
        if self.varphi.shape != (cfg.n_tx,):
            raise ValueError("element orientation vector has wrong length")
        if np.any(np.abs(self.varphi) > cfg.varphi_max + atol):
            raise ValueError("element orientation exceeds bound")


def rotation_matrix(phi_arr: float) -> np.ndarray:
    """Planar rotation applied to element positions and boresights."""
    c, s = np.cos(phi_arr), np.sin(phi_arr)
    return np.array([[c, s], [-s, c]])


def rotation_matrix_deriv(phi_arr: float) -> np.ndarray:
    """Derivative of :func:`rotation_matrix` with respect to the angle."""
    c, s = np.cos(phi_arr), np.sin(phi_arr)
    return np.array([[-s, c], [-c, -s]])


def element_positions(cfg: ArrayConfig, phi_arr: float) -> np.ndarray:
    """Global (x, y) positions of the transmit elements, shape (n_tx, 2)."""
    base = np.zeros((cfg.n_tx, 2))
    base[:, 0] = element_offsets(cfg.n_tx) * cfg.spacing
    return base @ rotation_matrix(phi_arr).T


def transmit_steering(relative_angle: float, n_tx: int) -> np.ndarray:
    """Unit-norm steering vector of the transmit ULA for an angle measured
    relative to the rotated array broadside."""
    m = element_offsets(n_tx)
    return np.exp(1j * np.pi * m * np.sin(relative_angle)) / np.sqrt(n_tx)


def receive_steering(angle: float, n_rx: int) -> np.ndarray:
    """Unit-norm steering vector of the fixed receive ULA (global angle)."""
    m = element_offsets(n_rx)
    return np.exp(1j * np.pi * m * np.sin(angle)) / np.sqrt(n_rx)


def element_gain(boresight: np.ndarray, direction: np.ndarray,
                 p: float, g0: float) -> float:
    """Directional gain g0 * [boresight . direction]_+^(2p) of one element.

    Both arguments must be unit vectors.  The projection is clipped at zero,
    so anything behind the element's front half-space gets exactly zero gain
    (including p == 0, where the pattern is flat over the front half-space).
    """
    proj = float(np.dot(boresight, direction))
    if proj <= 0.0:
        return 0.0
    if p == 0:
        return float(g0)
    return float(g0 * proj ** (2.0 * p))


class GeometryParts(NamedTuple):
    """Shared geometry between channel values and their rotation derivatives.

    Component arrays instead of stacked vectors: u = (ux, uy) is the exact
    unit direction from each element to each target (Q, N), ``proj`` its
    projection onto the global element boresights (bx, by), ``a`` the
    relative-angle steering rows (Q, N) and ``beta`` the complex path gains.
    """

    ux: np.ndarray
    uy: np.ndarray
    bx: np.ndarray
    by: np.ndarray
    dist: np.ndarray
    proj: np.ndarray
    a: np.ndarray
    beta: np.ndarray


def _geometry_parts(cfg: ArrayConfig, rot: RotationState,
                    ranges: np.ndarray, azimuths: np.ndarray) -> GeometryParts:
    cphi, sphi = np.cos(rot.phi_arr), np.sin(rot.phi_arr)
    m = element_offsets(cfg.n_tx)
    px = m * cfg.spacing * cphi
    py = -m * cfg.spacing * sphi
    sv, cv = np.sin(rot.varphi), np.cos(rot.varphi)
    bx = cphi * sv + sphi * cv          # rotation matrix applied to [sv, cv]
    by = -sphi * sv + cphi * cv

    dx = (ranges * np.sin(azimuths))[:, None] - px[None, :]
    dy = (ranges * np.cos(azimuths))[:, None] - py[None, :]
    dist = np.sqrt(dx * dx + dy * dy)
    ux = dx / dist
    uy = dy / dist
    proj = ux * bx[None, :] + uy * by[None, :]

    rel = azimuths - rot.phi_arr
    a = np.exp(1j * np.pi * np.sin(rel)[:, None] * m[None, :]) / np.sqrt(cfg.n_tx)
    beta = (cfg.wavelength / (4.0 * np.pi * ranges)
            * np.exp(2j * np.pi * ranges / cfg.wavelength))
    return GeometryParts(ux, uy, bx, by, dist, proj, a, beta)


def _gain_amplitude(proj: np.ndarray, p: float) -> np.ndarray:
    """sqrt of the directional gain, i.e. sqrt(g0) * [proj]_+^p, zero behind."""
    g0 = boresight_gain(p)
    if p == 0:
        return np.sqrt(g0) * (proj > 0.0)
    return np.sqrt(g0) * np.maximum(proj, 0.0) ** p


def channel_matrix(cfg: ArrayConfig, rot: RotationState,
                   ranges: np.ndarray, azimuths: np.ndarray) -> np.ndarray:
    """LoS channel vectors toward several polar targets, shape (Q, n_tx).

    Row q holds the channel from the transmit array to the target at
    (ranges[q], azimuths[q]): complex path gain times the element amplitude
    sqrt(G) evaluated along the exact element-to-target direction, times the
    far-field steering phase relative to the rotated array.
    """
    ranges = np.atleast_1d(np.asarray(ranges, dtype=float))
    azimuths = np.atleast_1d(np.asarray(azimuths, dtype=float))
    if np.any(ranges <= 0):
        raise ValueError("target range must be positive")
    parts = _geometry_parts(cfg, rot, ranges, azimuths)
    return parts.beta[:, None] * _gain_amplitude(parts.proj, cfg.directivity_p) * parts.a


def channel_vector(cfg: ArrayConfig, rot: RotationState,
                   target: PolarPosition) -> np.ndarray:
    """LoS channel vector toward a single polar target, shape (n_tx,)."""
    return channel_matrix(cfg, rot,
                          np.array([target.range_m]),
                          np.array([target.azimuth]))[0]


def channel_and_rotation_grads(cfg: ArrayConfig, rot: RotationState,
                               ranges: np.ndarray, azimuths: np.ndarray):
    """Channel matrix plus its derivatives in the rotation variables.

    Returns (H, dH_arr, dH_elem), each (Q, n_tx) complex:

    * ``dH_arr[q, n]``  = d H[q, n] / d phi_arr, combining the steering-phase
      shift of the relative angle with the boresight-projection change from
      rotating both the element positions and the boresight directions.
    * ``dH_elem[q, n]`` = d H[q, n] / d varphi[n]  (only the element's own
      orientation moves its gain; steering phase and path gain are untouched).

    Entries whose projection is clipped (<= 0) carry zero derivative, matching
    the convention that the positive-part gain is differentiated only in the
    active main-lobe region.
    """
    ranges = np.atleast_1d(np.asarray(ranges, dtype=float))
    azimuths = np.atleast_1d(np.asarray(azimuths, dtype=float))
    parts = _geometry_parts(cfg, rot, ranges, azimuths)
    p = cfg.directivity_p
    g0 = boresight_gain(p)
    m = element_offsets(cfg.n_tx)
    rel = azimuths - rot.phi_arr
    cphi, sphi = np.cos(rot.phi_arr), np.sin(rot.phi_arr)
    sv, cv = np.sin(rot.varphi), np.cos(rot.varphi)
    active = parts.proj > 0.0
    proj_pos = np.maximum(parts.proj, 0.0)

    H = parts.beta[:, None] * _gain_amplitude(parts.proj, p) * parts.a

    # d(projection)/d(phi_arr): boresight sweep minus apparent direction change
    # caused by the element position moving on the rotating platform.
    fdx = -sphi * sv + cphi * cv            # Rdot applied to [sv, cv]
    fdy = -cphi * sv - sphi * cv
    term1 = parts.ux * fdx[None, :] + parts.uy * fdy[None, :]
    cdx = -sphi * m * cfg.spacing           # Rdot applied to the rest positions
    cdy = -cphi * m * cfg.spacing
    u_dot_cdot = parts.ux * cdx[None, :] + parts.uy * cdy[None, :]
    perpx = cdx[None, :] - parts.ux * u_dot_cdot
    perpy = cdy[None, :] - parts.uy * u_dot_cdot
    term2 = (perpx * parts.bx[None, :] + perpy * parts.by[None, :]) / parts.dist
    zeta = term1 - term2

    if p == 0:
        proj_pow = active.astype(float)          # [x]_+^0 over the active side
        gain_term_arr = np.zeros_like(parts.proj)
    else:
        proj_pow = proj_pos ** p
        with np.errstate(divide="ignore", invalid="ignore"):
            gain_term_arr = np.where(active, p * proj_pos ** (p - 1.0) * zeta, 0.0)
    phase_term = -1j * np.pi * m[None, :] * np.cos(rel)[:, None] * proj_pow
    dH_arr = parts.beta[:, None] * np.sqrt(g0) * parts.a * (phase_term + gain_term_arr)

    # Per-element orientation derivative: only the gain amplitude moves.
    gx = cphi * cv - sphi * sv              # rotation applied to [cv, -sv]
    gy = -sphi * cv - cphi * sv
    dproj = parts.ux * gx[None, :] + parts.uy * gy[None, :]
    if p == 0:
        gain_term_elem = np.zeros_like(parts.proj)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            gain_term_elem = np.where(active, p * proj_pos ** (p - 1.0) * dproj, 0.0)
    dH_elem = parts.beta[:, None] * np.sqrt(g0) * parts.a * gain_term_elem

    return H, dH_arr, dH_elem


def beam_gain(cfg: ArrayConfig, rot: RotationState, w: np.ndarray,
              eval_angle: float, eval_range: float,
              floor_db: float = -200.0) -> float:
    """Transmit beam gain 10*log10(|h(angle, range)^H w|^2) at a probe point.

    Fully clipped probe directions (zero channel) are floored at ``floor_db``
    so exported patterns stay finite.
    """
    h = channel_vector(cfg, rot, PolarPosition(eval_range, eval_angle))
    val = abs(np.vdot(h, w)) ** 2
    if val <= 0.0:
        return floor_db
    return max(10.0 * np.log10(val), floor_db)
