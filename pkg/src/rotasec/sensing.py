"""Beam-sweep sensing of the eavesdropper direction.

The base station probes the sector with a DFT beam codebook, estimates the
echo direction by maximum likelihood, scores the estimate with the
closed-form angular error bound, and discretizes the resulting three-sigma
interval into Gaussian-weighted sample directions for robust design.

Sensing always happens in the reference configuration (zero array rotation,
all element boresights at broadside), so every element sees the same
directional gain toward a given angle.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import (ArrayConfig, boresight_gain, element_offsets,
                       receive_steering, transmit_steering)


def default_search_grid(n_points: int = 2048) -> np.ndarray:
    """Uniform-in-sine angle grid strictly inside (-pi/2, pi/2)."""
    u = -1.0 + 2.0 * (np.arange(n_points) + 0.5) / n_points
    return np.arcsin(u)


@dataclass(frozen=True)
class SensingConfig:
    """Beam-sweep parameters: codebook size, powers, target RCS, search grid."""

    n_beams: int
    sensing_power: float          # watts
    noise_power: float            # watts per receive sample
    rcs: float                    # square meters
    search_grid: np.ndarray = field(default_factory=default_search_grid)
    refine: bool = True

    def __post_init__(self):
        if self.n_beams < 1:
            raise ValueError("need at least one sensing beam")
        if self.sensing_power <= 0 or self.noise_power <= 0 or self.rcs <= 0:
            raise ValueError("powers and RCS must be positive")
        grid = np.asarray(self.search_grid, dtype=float)
        if grid.ndim != 1 or grid.size == 0:
            raise ValueError("search grid must be a nonempty 1-D array")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("search grid must be strictly increasing")
        if grid[0] <= -np.pi / 2 or grid[-1] >= np.pi / 2:
            raise ValueError("search grid must stay inside (-pi/2, pi/2)")
        object.__setattr__(self, "search_grid", grid)


@dataclass(frozen=True)
class SensingOutcome:
    """Direction estimate, its variance bound and the sampled uncertainty region."""

    theta_hat: float
    crb: float                    # radians^2
    xi_lo: float
    xi_hi: float
    sampled_angles: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "sampled_angles",
                           np.asarray(self.sampled_angles, dtype=float))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))

    @property
    def n_samples(self) -> int:
        return self.sampled_angles.size


def as_generator(seed) -> np.random.Generator:
    """Counter-based generator from a seed, sequence or existing generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def dft_codebook(n_beams: int, n_tx: int) -> np.ndarray:
    """DFT sweep beams as rows, beam l steering toward arcsin(-1 + (2l-1)/L).

    Requires n_beams >= n_tx: only then does the stacked probing matrix have
    a white covariance, which the estimator and the error bound both rely on.
    """
    if n_beams < n_tx:
        raise ValueError(
            f"codebook size {n_beams} < {n_tx} transmit elements; the sweep "
            "covariance is only white (P_s/N_t * I) for n_beams >= n_tx")
    ell = np.arange(1, n_beams + 1)
    angles = np.arcsin(-1.0 + (2.0 * ell - 1.0) / n_beams)
    m = element_offsets(n_tx)
    return np.exp(1j * np.pi * np.sin(angles)[:, None] * m[None, :]) / np.sqrt(n_tx)


def probing_matrix(scfg: SensingConfig, n_tx: int) -> np.ndarray:
    """Stacked probing matrix X_s (n_tx, L) with unit-power symbols."""
    return np.sqrt(scfg.sensing_power) * dft_codebook(scfg.n_beams, n_tx).T


def sensing_response(theta, cfg: ArrayConfig) -> np.ndarray:
    """Effective transmit response b(theta) in the sensing reference config.

    With all boresights at broadside the per-element gain collapses to the
    common pattern g0*[cos(theta)]_+^(2p), so b is a scaled steering vector.
    Accepts a scalar angle (returns (n_tx,)) or a 1-D array (returns (T, n_tx)).
    """
    theta_arr = np.atleast_1d(np.asarray(theta, dtype=float))
    p = cfg.directivity_p
    c = np.cos(theta_arr)
    if p == 0:
        amp = np.sqrt(boresight_gain(p)) * (c > 0.0)
    else:
        amp = np.sqrt(boresight_gain(p)) * np.maximum(c, 0.0) ** p
    m = element_offsets(cfg.n_tx)
    a = np.exp(1j * np.pi * np.sin(theta_arr)[:, None] * m[None, :]) / np.sqrt(cfg.n_tx)
    b = amp[:, None] * a
    return b[0] if np.isscalar(theta) or np.ndim(theta) == 0 else b


def roundtrip_gain(wavelength: float, rcs: float, range_m: float) -> complex:
    """Complex two-way sensing channel coefficient for a point target."""
    mag = np.sqrt(wavelength ** 2 * rcs / (64.0 * np.pi ** 3 * range_m ** 4))
    return mag * np.exp(4j * np.pi * range_m / wavelength)


def simulate_echoes(true_theta: float, true_range: float,
                    scfg: SensingConfig, acfg: ArrayConfig,
                    rng_seed) -> tuple[np.ndarray, np.ndarray]:
    """One beam sweep: returns the echo matrix Y_s (n_rx, L) and X_s (n_tx, L).

    Deterministic given ``rng_seed``; the noise is i.i.d. circularly-symmetric
    complex Gaussian with per-entry variance ``scfg.noise_power``.
    """
    rng = as_generator(rng_seed)
    xs = probing_matrix(scfg, acfg.n_tx)
    b = sensing_response(true_theta, acfg)
    ar = receive_steering(true_theta, acfg.n_rx)
    beta_s = roundtrip_gain(acfg.wavelength, scfg.rcs, true_range)
    clean = beta_s * np.outer(ar, b.conj()) @ xs
    sigma = np.sqrt(scfg.noise_power / 2.0)
    noise = sigma * (rng.standard_normal(clean.shape)
                     + 1j * rng.standard_normal(clean.shape))
    return clean + noise, xs


def _mle_statistic(thetas: np.ndarray, zmat: np.ndarray, dmat: np.ndarray,
                   acfg: ArrayConfig) -> np.ndarray:
    """Matched-filter statistic |a_r^H Z b|^2 / (b^H D b) on an angle grid.

    ``zmat = Y_s X_s^H`` and ``dmat = X_s X_s^H`` are precomputed once per
    sweep.  Grid points where the transmit response vanishes (no illumination)
    are returned as -inf so they never win the argmax.
    """
    thetas = np.atleast_1d(thetas)
    b = sensing_response(thetas, acfg)
    if b.ndim == 1:
        b = b[None, :]
    mr = element_offsets(acfg.n_rx)
    ar = np.exp(1j * np.pi * np.sin(thetas)[:, None] * mr[None, :]) / np.sqrt(acfg.n_rx)
    num = np.abs(np.einsum("tr,rn,tn->t", ar.conj(), zmat, b)) ** 2
    den = np.einsum("tn,nm,tm->t", b.conj(), dmat, b).real
    out = np.full(thetas.shape, -np.inf)
    ok = den > den.max() * 1e-15 if den.size and den.max() > 0 else den > 0
    out[ok] = num[ok] / den[ok]
    return out


def _golden_max(fun, lo: float, hi: float, tol: float = 1e-10) -> float:
    """Golden-section maximizer of a unimodal scalar function on [lo, hi]."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = fun(x1), fun(x2)
    while b - a > tol:
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = fun(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = fun(x2)
    return 0.5 * (a + b)


def mle_estimate(y_s: np.ndarray, x_s: np.ndarray,
                 scfg: SensingConfig, acfg: ArrayConfig) -> float:
    """Maximum-likelihood direction estimate from one beam sweep.

    Maximizes the matched-filter statistic over the configured grid (ties
    break toward the smaller angle) and, when ``scfg.refine`` is set, polishes
    the winner with a golden-section pass over its bracketing grid cell.
    """
    grid = scfg.search_grid
    zmat = y_s @ x_s.conj().T
    dmat = x_s @ x_s.conj().T
    stat = _mle_statistic(grid, zmat, dmat, acfg)
    idx = int(np.argmax(stat))          # argmax returns the first (smallest θ)
    if not np.isfinite(stat[idx]):
        raise ValueError("matched-filter statistic degenerate on entire grid")
    if not scfg.refine or grid.size < 2:
        return float(grid[idx])
    lo = grid[max(idx - 1, 0)]
    hi = grid[min(idx + 1, grid.size - 1)]

    def fun(theta):
        return _mle_statistic(np.array([theta]), zmat, dmat, acfg)[0]

    return float(_golden_max(fun, lo, hi))


def _response_derivatives(theta: float, acfg: ArrayConfig):
    """b(theta), db/dtheta, a_r(theta), da_r/dtheta at one angle."""
    p = acfg.directivity_p
    g0 = boresight_gain(p)
    c, s = np.cos(theta), np.sin(theta)
    mt = element_offsets(acfg.n_tx)
    at = np.exp(1j * np.pi * mt * s) / np.sqrt(acfg.n_tx)
    if c <= 0.0:
        amp, damp = 0.0, 0.0
    elif p == 0:
        amp, damp = np.sqrt(g0), 0.0
    else:
        amp = np.sqrt(g0) * c ** p
        damp = -np.sqrt(g0) * p * c ** (p - 1.0) * s
    b = amp * at
    bdot = (damp + amp * 1j * np.pi * mt * c) * at
    ar = receive_steering(theta, acfg.n_rx)
    mr = element_offsets(acfg.n_rx)
    ardot = ar * (1j * np.pi * mr * c)
    return b, bdot, ar, ardot


def crb(theta: float, range_m: float, scfg: SensingConfig,
        acfg: ArrayConfig) -> float:
    """Closed-form lower bound on the direction-estimate variance (radians^2).

    Evaluates the Fisher information of the echo model after eliminating the
    unknown complex reflection coefficient, using analytic derivatives of the
    receive steering vector and of the gain-weighted transmit response.
    Returns inf when the transmit response vanishes (no illumination, hence
    no angular information).
    """
    if scfg.n_beams < acfg.n_tx:
        raise ValueError("closed form requires n_beams >= n_tx (white sweep covariance)")
    b, bdot, ar, ardot = _response_derivatives(theta, acfg)
    nb2 = float(np.vdot(b, b).real)
    if nb2 <= 0.0:
        return float("inf")
    beta2 = abs(roundtrip_gain(acfg.wavelength, scfg.rcs, range_m)) ** 2
    ara = np.vdot(ar, ardot)            # a_r^H a_r_dot
    bbd = np.vdot(b, bdot)              # b^H b_dot
    nad2 = float(np.vdot(ardot, ardot).real)
    nbd2 = float(np.vdot(bdot, bdot).real)
    core = (nad2 * nb2 + nbd2 + 2.0 * (ara * bbd).real
            - abs(ara * nb2 + np.vdot(bdot, b)) ** 2 / nb2)
    scale = 2.0 * scfg.n_beams * scfg.sensing_power * beta2 / acfg.n_tx
    return float(scfg.noise_power / (scale * core))


def uncertainty_region(theta_hat: float, crb_value: float, m: int) -> SensingOutcome:
    """Sampled three-sigma angular uncertainty region around the estimate.

    ``m`` uniformly spaced directions over [theta_hat - 3*sqrt(crb),
    theta_hat + 3*sqrt(crb)], weighted by a normalized Gaussian centered on
    the estimate with variance ``crb_value``.
    """
    if m < 2:
        raise ValueError("need at least two sampled directions")
    if crb_value <= 0:
        raise ValueError("variance bound must be positive")
    sigma = np.sqrt(crb_value)
    xi_lo = theta_hat - 3.0 * sigma
    xi_hi = theta_hat + 3.0 * sigma
    angles = xi_lo + (xi_hi - xi_lo) * np.arange(m) / (m - 1)
    logw = -((angles - theta_hat) ** 2) / (2.0 * crb_value)
    logw -= logw.max()
    w = np.exp(logw)
    w /= w.sum()
    return SensingOutcome(theta_hat, crb_value, xi_lo, xi_hi, angles, w)


def point_mass_outcome(theta_hat: float, crb_value: float) -> SensingOutcome:
    """Degenerate single-direction outcome (design ignores the uncertainty)."""
    sigma = np.sqrt(max(crb_value, 0.0))
    return SensingOutcome(theta_hat, crb_value,
                          theta_hat - 3.0 * sigma, theta_hat + 3.0 * sigma,
                          np.array([theta_hat]), np.array([1.0]))
