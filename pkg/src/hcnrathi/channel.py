"""Uplink channel estimation statistics and temporal correlation.

Lengths use one consistent unit throughout the library (the command line
front end works in kilometres); densities are points per squared unit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigError, DomainError
from .mathkit import bessel_j0

__all__ = [
    "NetworkConfig",
    "ImpairmentProfile",
    "ChannelStats",
    "jakes_delta",
    "training_interference_variance",
    "estimate_variances",
]


@dataclass(frozen=True)
class NetworkConfig:
    """Deployment parameters shared by every cell.

    Attributes
    ----------
    lambda_b : float
        Base-station density.
    alpha : float
        Path-loss exponent, must exceed 2.
    m_antennas, k_users : int
        Antennas per BS and users served per BS, ``1 <= K <= M``.
    p_down, rho_up : float
        Downlink power and uplink per-symbol pilot power (linear).
    tau : int or None
        Training length in symbols; defaults to ``k_users``.
    x_train : float
        Distance between the user and its BS during training.
    """

    lambda_b: float = 0.01
    alpha: float = 3.0
    m_antennas: int = 5
    k_users: int = 3
    p_down: float = 10 ** 1.5
    rho_up: float = 10 ** 0.5
    tau: int | None = None
    x_train: float = 0.015

    def __post_init__(self):
        if self.tau is None:
            object.__setattr__(self, "tau", self.k_users)
        if not self.alpha > 2:
            raise ConfigError("alpha must exceed 2")
        if int(self.m_antennas) != self.m_antennas or self.m_antennas < 1:
            raise ConfigError("m_antennas must be a positive integer")
        if int(self.k_users) != self.k_users or self.k_users < 1:
            raise ConfigError("k_users must be a positive integer")
        if self.k_users > self.m_antennas:
            raise ConfigError("K ≤ M required (k_users must not exceed m_antennas)")
        if not self.lambda_b > 0:
            raise ConfigError("lambda_b must be positive")
        if not self.x_train > 0:
            raise ConfigError("x_train must be positive")
        if self.tau < self.k_users:
            raise ConfigError("tau must be at least k_users")
        if not (self.p_down > 0 and self.rho_up > 0):
            raise ConfigError("p_down and rho_up must be positive")

    @property
    def delta_cap(self) -> int:
        return self.m_antennas - self.k_users + 1

    @property
    def p_train(self) -> float:
        return self.tau * self.rho_up


def jakes_delta(fd_ts: float) -> float:
    """Lag-one Jakes autocorrelation ``J0(2 pi fd_ts)``."""
    if not (math.isfinite(fd_ts) and fd_ts >= 0):
        raise DomainError(f"fd_ts must be finite and nonnegative, got {fd_ts}")
    return bessel_j0(2.0 * math.pi * fd_ts)


@dataclass(frozen=True)
class ImpairmentProfile:
    """Residual additive impairment variances (kappa squared) and aging.

    ``delta`` is derived from ``fd_ts`` unless given explicitly.
    """

    kt_ue: float = 0.0
    kr_bs: float = 0.0
    kt_bs: float = 0.0
    kr_ue: float = 0.0
    fd_ts: float = 0.0
    delta: float | None = field(default=None)

    def __post_init__(self):
        for name in ("kt_ue", "kr_bs", "kt_bs", "kr_ue"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"{name} must be nonnegative")
        if not (math.isfinite(self.fd_ts) and self.fd_ts >= 0):
            raise ConfigError("fd_ts must be finite and nonnegative")
        if self.delta is None:
            object.__setattr__(self, "delta", jakes_delta(self.fd_ts))
        elif not abs(self.delta) <= 1:
            raise ConfigError("delta must lie in [-1, 1]")

    @classmethod
    def from_kappas(cls, kt_ue=0.0, kr_ue=0.0, kt_bs=0.0, kr_bs=0.0, **aging):
        """Build from amplitudes (EVM-like kappa values), squaring each."""
        return cls(
            kt_ue=kt_ue**2, kr_bs=kr_bs**2, kt_bs=kt_bs**2, kr_ue=kr_ue**2, **aging
        )

    @property
    def is_ideal(self) -> bool:
        return self.kt_ue == self.kr_bs == self.kt_bs == self.kr_ue == 0.0


@dataclass(frozen=True)
class ChannelStats:
    sigma2_hat: float
    sigma2_err: float
    sigma2_aged: float
    delta_cap: int


def training_interference_variance(cfg: NetworkConfig) -> float:
    """Pilot-contamination interference variance seen during training."""
    if not cfg.alpha > 2:
        raise DomainError("alpha must exceed 2")
    return (
        2.0
        * cfg.m_antennas
        * math.pi
        * cfg.lambda_b
        * cfg.x_train ** (2.0 - cfg.alpha)
        / (cfg.alpha - 2.0)
    )


def _denominator_terms(cfg, imp, rederived):
    a2 = cfg.alpha - 2.0
    contamination = 2.0 * cfg.m_antennas * math.pi * cfg.lambda_b * cfg.x_train**2
    pathloss = cfg.x_train**cfg.alpha
    if rederived:
        pathloss *= a2 / cfg.p_train
    uplink = (imp.kr_bs + imp.kt_ue) * a2
    return a2, uplink, contamination, pathloss


def estimate_variances(
    cfg: NetworkConfig, imp: ImpairmentProfile, *, rederived: bool = False
) -> ChannelStats:
    """MMSE estimate and error variances under contamination and aging.

    By default the variances follow the printed closed forms. With
    ``rederived=True`` the path-loss term of the denominator carries the
    ``(alpha - 2) / p_train`` factor obtained when the MMSE filter is
    derived directly from the training observation.
    """
    if not cfg.alpha > 2:
        raise DomainError("alpha must exceed 2")
    a2, uplink, contamination, pathloss = _denominator_terms(cfg, imp, rederived)
    denom = uplink + a2 + contamination + pathloss
    sigma2_hat = a2 / denom
    sigma2_err = (uplink + contamination) / denom
    sigma2_aged = 1.0 - imp.delta**2 * sigma2_hat
    return ChannelStats(
        sigma2_hat=sigma2_hat,
        sigma2_err=sigma2_err,
        sigma2_aged=sigma2_aged,
        delta_cap=cfg.delta_cap,
    )
