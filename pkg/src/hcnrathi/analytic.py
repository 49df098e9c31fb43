"""Closed-form coverage bound and average rate.

The coverage bound sums, over every BS of the PPP, the probability that
the SIR from that BS exceeds the target. For a BS at distance ``l`` the
desired power is Gamma(Delta, sigma2_hat), so

    P[SIR > T | l] = E[exp(-a X - s I) sum_{i<Delta} (a X + s I)^i / i!]

with ``a = T / sigma2_hat``, ``s = a l^alpha``, ``X`` the sum of the
estimation-error and distortion powers and ``I`` the interference. The
binomial and multinomial expansions of ``(a X + s I)^i`` turn the
expectation into derivatives of the Laplace transforms of ``X``'s three
parts (all evaluated at ``a``, independent of ``l``) and of ``I``
(evaluated at ``s``). Derivatives come from Taylor jets.

After ``v = l**2`` and the linear rescale ``w = C a**(2/alpha) v`` the
interference transform is ``exp(-w)`` and the radial integral runs over
``w`` in ``(0, W_max)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .channel import ChannelStats, ImpairmentProfile, NetworkConfig, estimate_variances
from .errors import DomainError
from .mathkit import (
    TaylorJet,
    binomial,
    enumerate_compositions,
    gamma_laplace_rel,
    jet_of_gamma_laplace,
    jet_of_stretched_exp,
    ln_beta,
    stretched_exp_rel,
)

__all__ = [
    "SirDecomposition",
    "CoveragePoint",
    "decompose",
    "interference_coefficient",
    "laplace_interference",
    "laplace_tx_distortion",
    "laplace_rx_distortion",
    "laplace_estimation_error",
    "coverage_upper_bound",
    "coverage_sdma",
    "average_rate",
]

COVERAGE_ABS_TOL = 1e-6
RATE_ABS_TOL = 1e-4
RATE_CUTOFF = 1e-9


@dataclass(frozen=True)
class SirDecomposition:
    """Gamma laws of the SIR terms for the typical link.

    ``scale_*`` are Gamma scales, ``shape_*`` Gamma shapes. The desired
    power and the transmit distortion have shape ``Delta = M - K + 1``, the
    receive distortion shape ``M`` and the interference marks shape ``K``.
    """

    scale_signal: float
    scale_error: float
    scale_tx: float
    scale_rx: float
    shape_signal: int
    shape_error: int
    shape_tx: int
    shape_rx: int
    interf_shape: int

    def __post_init__(self):
        if not self.scale_signal > 0:
            raise DomainError("scale_signal must be positive")
        for name in ("scale_error", "scale_tx", "scale_rx"):
            if not getattr(self, name) >= 0:
                raise DomainError(f"{name} must be nonnegative")


def decompose(
    cfg: NetworkConfig,
    imp: ImpairmentProfile,
    stats: ChannelStats | None = None,
    *,
    error_shape: str = "k",
    error_variance: str = "aged",
    rederived: bool = False,
) -> SirDecomposition:
    """Gamma decomposition of the SIR terms.

    ``error_shape`` selects the estimation-error shape (``"k"`` for K,
    ``"delta"`` for M - K + 1); ``error_variance`` selects the aged error
    variance (``"aged"``) or the contamination-only one
    (``"contamination"``).
    """
    if imp.delta == 0:
        raise DomainError("delta = 0 is outside the aged-CSI model (delta must be nonzero)")
    if stats is None:
        stats = estimate_variances(cfg, imp, rederived=rederived)
    if error_variance == "aged":
        err = stats.sigma2_aged
    elif error_variance == "contamination":
        err = stats.sigma2_err
    else:
        raise ValueError(f"unknown error_variance {error_variance!r}")
    if error_shape == "k":
        shape_error = cfg.k_users
    elif error_shape == "delta":
        shape_error = cfg.delta_cap
    else:
        raise ValueError(f"unknown error_shape {error_shape!r}")
    return SirDecomposition(
        scale_signal=stats.sigma2_hat,
        scale_error=(1.0 + imp.kt_bs) * err / imp.delta**2,
        scale_tx=imp.kt_bs,
        scale_rx=imp.kr_ue,
        shape_signal=cfg.delta_cap,
        shape_error=shape_error,
        shape_tx=cfg.delta_cap,
        shape_rx=cfg.m_antennas,
        interf_shape=cfg.k_users,
    )


@dataclass(frozen=True)
class CoveragePoint:
    t_target: float
    bound_raw: float
    bound: float
    abs_tol: float
    status: str = "ok"


# ---------------------------------------------------------------------------
# Laplace transforms
# ---------------------------------------------------------------------------
def interference_coefficient(alpha: float, k_users: int, lambda_b: float) -> float:
    """``C(alpha, K)`` in ``L_I(s) = exp(-C s^(2/alpha))``.

    The sum starts at m = 1; the m = 0 Beta term has a negative argument.
    """
    if not alpha > 2:
        raise DomainError("alpha must exceed 2")
    b = 2.0 / alpha
    total = sum(
        binomial(k_users, m) * math.exp(ln_beta(k_users - m + b, m - b))
        for m in range(1, k_users + 1)
    )
    return 2.0 * math.pi * lambda_b / alpha * total


def laplace_interference(
    s: float, jet_order: int, coef: float, alpha: float
) -> TaylorJet:
    """Jet of ``exp(-coef * s^(2/alpha))`` at ``s > 0``."""
    if not s > 0:
        raise DomainError(f"interference transform needs s > 0, got {s}")
    return jet_of_stretched_exp(coef, 2.0 / alpha, s, jet_order)


def laplace_tx_distortion(s: float, jet_order: int, dec: SirDecomposition) -> TaylorJet:
    return jet_of_gamma_laplace(dec.scale_tx, dec.shape_tx, s, jet_order)


def laplace_rx_distortion(s: float, jet_order: int, dec: SirDecomposition) -> TaylorJet:
    return jet_of_gamma_laplace(dec.scale_rx, dec.shape_rx, s, jet_order)


def laplace_estimation_error(
    s: float, jet_order: int, dec: SirDecomposition
) -> TaylorJet:
    return jet_of_gamma_laplace(dec.scale_error, dec.shape_error, s, jet_order)


# ---------------------------------------------------------------------------
# Coverage
# ---------------------------------------------------------------------------
def _radial_cutoff(order: int) -> float:
    # e^{-w} w^k / k! is below ~1e-22 past 2k + 60 for every k <= 32.
    return 2.0 * order + 60.0


def _distortion_sums(a: float, dec: SirDecomposition, order: int) -> np.ndarray:
    """``a^n d^n/ds^n [L_E L_t L_r](a)`` for n = 0..order via the
    multinomial expansion over ``u1 + u2 + u3 = n``."""
    fact = np.array([math.factorial(j) for j in range(order + 1)], dtype=float)
    # relative coefficients times j! are a^j times the j-th derivative
    de = gamma_laplace_rel(dec.scale_error, dec.shape_error, a, order) * fact
    dt = gamma_laplace_rel(dec.scale_tx, dec.shape_tx, a, order) * fact
    dr = gamma_laplace_rel(dec.scale_rx, dec.shape_rx, a, order) * fact
    out = np.empty(order + 1)
    for n in range(order + 1):
        out[n] = sum(
            c.weight * de[c.u1] * dt[c.u2] * dr[c.u3]
            for c in enumerate_compositions(n)
        )
    return out


def _sum_weights(order: int) -> np.ndarray:
    """``binom(i, k) (-1)^i / i!`` as an (i, k) table."""
    w = np.zeros((order + 1, order + 1))
    for i in range(order + 1):
        for k in range(i + 1):
            w[i, k] = binomial(i, k) * (-1) ** i / math.factorial(i)
    return w


def _check_threshold(t_target):
    if not (t_target > 0 and math.isfinite(t_target)):
        raise DomainError(f"SIR target must be positive and finite, got {t_target}")


def coverage_upper_bound(
    t_target: float,
    cfg: NetworkConfig,
    imp: ImpairmentProfile,
    *,
    error_shape: str = "k",
    error_variance: str = "aged",
    rederived: bool = False,
    dec: SirDecomposition | None = None,
) -> CoveragePoint:
    """Union (Boole) upper bound on the coverage probability at SIR target
    ``t_target`` (linear)."""
    _check_threshold(t_target)
    if dec is None:
        dec = decompose(
            cfg, imp, error_shape=error_shape, error_variance=error_variance,
            rederived=rederived,
        )
    order = dec.shape_signal - 1
    beta = 2.0 / cfg.alpha
    a = t_target / dec.scale_signal
    coef = interference_coefficient(cfg.alpha, dec.interf_shape, cfg.lambda_b)

    xsum = _distortion_sums(a, dec, order)
    weights = _sum_weights(order)
    fact = np.array([math.factorial(j) for j in range(order + 1)], dtype=float)
    # table[i, k] = binom(i,k) (-1)^i / i! * a^(i-k) d^(i-k) L_X(a)
    table = np.zeros_like(weights)
    for i in range(order + 1):
        for k in range(i + 1):
            table[i, k] = weights[i, k] * xsum[i - k]
    kernel = table.sum(axis=0)

    def integrand(w):
        # s^k d^k L_I(s) at the node where C s^(2/alpha) = w
        dl = stretched_exp_rel(w, beta, order) * fact
        return float(kernel @ dl)

    prefactor = math.pi * cfg.lambda_b / (coef * a**beta)
    w_max = _radial_cutoff(order)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, err = integrate.quad(
            integrand, 0.0, w_max, epsabs=1e-13, epsrel=1e-11, limit=200
        )
    raw = prefactor * value
    abs_tol = prefactor * err
    status = "ok"
    if abs_tol > COVERAGE_ABS_TOL or not math.isfinite(raw):
        status = "quadrature-warning"
        warnings.warn(
            f"coverage quadrature at T={t_target:g} reached only {abs_tol:.2e}",
            RuntimeWarning,
            stacklevel=2,
        )
    return CoveragePoint(
        t_target=t_target,
        bound_raw=raw,
        bound=min(max(raw, 0.0), 1.0),
        abs_tol=abs_tol,
        status=status,
    )


def coverage_sdma(
    t_target: float,
    cfg: NetworkConfig,
    imp: ImpairmentProfile,
    *,
    error_shape: str = "k",
    error_variance: str = "aged",
    rederived: bool = False,
) -> CoveragePoint:
    """Full-SDMA (M = K) bound: the plain product of the four transforms."""
    if cfg.m_antennas != cfg.k_users:
        raise ValueError("coverage_sdma requires m_antennas == k_users")
    _check_threshold(t_target)
    dec = decompose(
        cfg, imp, error_shape=error_shape, error_variance=error_variance,
        rederived=rederived,
    )
    a = t_target / dec.scale_signal
    coef = interference_coefficient(cfg.alpha, dec.interf_shape, cfg.lambda_b)
    distortion = (
        laplace_estimation_error(a, 0, dec).value
        * laplace_tx_distortion(a, 0, dec).value
        * laplace_rx_distortion(a, 0, dec).value
    )
    rate = coef * a ** (2.0 / cfg.alpha)  # L_I(a v^(alpha/2)) = exp(-rate v)
    v_max = _radial_cutoff(0) / rate
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, err = integrate.quad(
            lambda v: math.exp(-rate * v), 0.0, v_max,
            epsabs=1e-13 / rate, epsrel=1e-12,
        )
    scale = math.pi * cfg.lambda_b * distortion
    raw = scale * value
    abs_tol = scale * err
    status = "ok" if abs_tol <= COVERAGE_ABS_TOL else "quadrature-warning"
    return CoveragePoint(t_target, raw, min(max(raw, 0.0), 1.0), abs_tol, status)


# ---------------------------------------------------------------------------
# Rate
# ---------------------------------------------------------------------------
def average_rate(
    cfg: NetworkConfig,
    imp: ImpairmentProfile,
    *,
    error_shape: str = "k",
    error_variance: str = "aged",
    rederived: bool = False,
) -> float:
    """Upper bound on the average rate in nats per channel use.

    Integrates ``min(1, bound(e^t - 1))`` over ``t > 0``: the layer-cake
    form ``E[ln(1 + SIR)] = int P[SIR > e^t - 1] dt``.
    """
    dec = decompose(
        cfg, imp, error_shape=error_shape, error_variance=error_variance,
        rederived=rederived,
    )

    def raw(t):
        return coverage_upper_bound(math.expm1(t), cfg, imp, dec=dec).bound_raw

    t_max = 1.0
    while raw(t_max) >= RATE_CUTOFF:
        t_max *= 2.0
        if t_max > 1e3:
            break
    # below t_star the clamp is active
    t_lo = 1e-12
    if raw(t_lo) <= 1.0:
        t_star = 0.0
    elif raw(t_max) >= 1.0:
        t_star = t_max
    else:
        t_star = optimize.brentq(lambda t: raw(t) - 1.0, t_lo, t_max, xtol=1e-12)
    if t_star >= t_max:
        return t_max
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        tail, _ = integrate.quad(
            raw, t_star, t_max, epsabs=RATE_ABS_TOL / 10, epsrel=1e-8, limit=200
        )
    return t_star + tail
