"""Rate quantities for the secure multicast design.

Everything the optimizer touches lives here: per-user rates, the weighted
eavesdropper leakage over the sampled uncertainty directions, its Jensen
upper-bound surrogate, the smoothed worst-user surrogate objective, and the
reported true secrecy rate (minimum user rate minus the leakage toward the
actual eavesdropper, clipped at zero).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import ArrayConfig, PolarPosition, RotationState, channel_matrix, channel_vector

LOG2 = np.log(2.0)


@dataclass(frozen=True)
class LinkBudget:
    """Transmit power and noise floor of the communication link (watts)."""

    tx_power: float
    noise_power: float
    gamma: float = field(init=False)

    def __post_init__(self):
        if self.tx_power <= 0 or self.noise_power <= 0:
            raise ValueError("powers must be positive")
        object.__setattr__(self, "gamma", self.tx_power / self.noise_power)


@dataclass(frozen=True)
class ObjectiveContext:
    """Frozen channel snapshot for one rotation state.

    Holds the legitimate user channels, the sampled eavesdropper channels with
    their Gaussian weights, the weighted leakage covariance built from them,
    and the current smoothing factor.  Rebuild whenever the rotation variables
    change; the beamformer subproblem reuses one context unchanged.
    """

    user_channels: np.ndarray        # (K, n_tx)
    eav_channels: np.ndarray         # (M, n_tx)
    weights: np.ndarray              # (M,)
    leakage_covariance: np.ndarray   # (n_tx, n_tx)
    beta_sm: float

    @property
    def n_tx(self) -> int:
        return self.user_channels.shape[1]


def leakage_covariance(eav_channels: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted covariance sum_m mu_m h_m h_m^H of the sampled channels."""
    scaled = eav_channels * weights[:, None]
    return scaled.T @ eav_channels.conj()


def build_context(cfg: ArrayConfig, rot: RotationState,
                  user_ranges: np.ndarray, user_azimuths: np.ndarray,
                  eav_range: float, sample_angles: np.ndarray,
                  sample_weights: np.ndarray, beta_sm: float) -> ObjectiveContext:
    """Synthesize all channels for one rotation state and bundle them."""
    hu = channel_matrix(cfg, rot, user_ranges, user_azimuths)
    sample_angles = np.asarray(sample_angles, dtype=float)
    he = channel_matrix(cfg, rot, np.full(sample_angles.shape, eav_range), sample_angles)
    w = np.asarray(sample_weights, dtype=float)
    return ObjectiveContext(hu, he, w, leakage_covariance(he, w), beta_sm)


def user_rate(w: np.ndarray, h: np.ndarray, lb: LinkBudget) -> float:
    """Achievable rate log2(1 + gamma |h^H w|^2) of one user, bits/s/Hz."""
    return float(np.log2(1.0 + lb.gamma * abs(np.vdot(h, w)) ** 2))


def weighted_eav_rate(w: np.ndarray, ctx: ObjectiveContext, lb: LinkBudget) -> float:
    """Leakage rate averaged over the sampled directions with their weights."""
    s2 = np.abs(ctx.eav_channels.conj() @ w) ** 2
    return float(ctx.weights @ np.log2(1.0 + lb.gamma * s2))


def surrogate_eav_rate(w: np.ndarray, ctx: ObjectiveContext, lb: LinkBudget) -> float:
    """Concavity upper bound log2(1 + gamma w^H S w) on the weighted leakage."""
    q = np.vdot(w, ctx.leakage_covariance @ w)
    assert abs(q.imag) < 1e-12 * max(1.0, abs(q.real)), "covariance quadratic form not real"
    return float(np.log2(1.0 + lb.gamma * q.real))


def softmin(values: np.ndarray, beta: float) -> float:
    """Smooth minimum -(1/beta) log sum exp(-beta * c_k), max-shift stabilized."""
    values = np.asarray(values, dtype=float)
    lo = values.min()
    return float(lo - np.log(np.exp(-beta * (values - lo)).sum()) / beta)


def softmin_weights(values: np.ndarray, beta: float) -> np.ndarray:
    """Normalized exponential weights concentrating on the smallest entries."""
    values = np.asarray(values, dtype=float)
    e = np.exp(-beta * (values - values.min()))
    return e / e.sum()


def surrogate_secrecy_values(w: np.ndarray, ctx: ObjectiveContext,
                             lb: LinkBudget) -> np.ndarray:
    """Per-user surrogate secrecy rates R_k - log2(1 + gamma w^H S w)."""
    su2 = np.abs(ctx.user_channels.conj() @ w) ** 2
    se2 = np.abs(ctx.eav_channels.conj() @ w) ** 2
    leak = np.log2(1.0 + lb.gamma * float(ctx.weights @ se2))
    return np.log2(1.0 + lb.gamma * su2) - leak


def softmin_objective(w: np.ndarray, ctx: ObjectiveContext, lb: LinkBudget) -> float:
    """Smoothed worst-user surrogate secrecy rate at the context's beta."""
    return softmin(surrogate_secrecy_values(w, ctx, lb), ctx.beta_sm)


def evaluate_true_secrecy(cfg: ArrayConfig, rot: RotationState, w: np.ndarray,
                          user_ranges: np.ndarray, user_azimuths: np.ndarray,
                          true_eav: PolarPosition, lb: LinkBudget) -> float:
    """Achieved minimum secrecy rate against the actual eavesdropper channel.

    Reported with the positive clip restored; the clip is never applied inside
    the optimization loops.
    """
    hu = channel_matrix(cfg, rot, user_ranges, user_azimuths)
    rates = np.log2(1.0 + lb.gamma * np.abs(hu.conj() @ w) ** 2)
    he = channel_vector(cfg, rot, true_eav)
    r_e = np.log2(1.0 + lb.gamma * abs(np.vdot(he, w)) ** 2)
    return float(max(rates.min() - r_e, 0.0))
