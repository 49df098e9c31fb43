"""Monte Carlo ground truth over Poisson-distributed base stations.

Two fidelities share the drop loop:

* ``full``: explicit channel matrices, ZF precoders built from aged,
  contaminated estimates, and interferer marks ``|g^H W_l|^2`` from
  isotropic orthonormal precoders.
* ``marks``: the same SIR assembled from Gamma draws of every term.

Every BS inside the simulation disk is a serving candidate for the typical
user at the origin. Each drop has its own random stream derived from the
master seed and the drop index, so results do not depend on how drops are
spread over workers.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analytic import SirDecomposition, decompose
from .channel import ChannelStats, ImpairmentProfile, NetworkConfig, estimate_variances
from .errors import DomainError, SingularChannelError
from .mathkit import sample_gamma

__all__ = [
    "PppDrop",
    "MimoDrop",
    "CoverageEstimate",
    "RateEstimate",
    "default_window",
    "sample_ppp",
    "zf_precoder",
    "isotropic_frames",
    "sample_mimo",
    "assemble_sir_terms",
    "sir_from_terms",
    "mark_level_drop",
    "full_mimo_drop",
    "simulate_drops",
    "estimate_coverage",
    "estimate_rate",
]

GRAM_COND_LIMIT = 1e12
EMPTY_WARN_FRACTION = 0.01
ASSOCIATIONS = ("union", "nearest", "max_sir")


@dataclass
class PppDrop:
    """One realization of the BS process around the typical user.

    ``serving_terms`` columns are ``(Z, E, I_tx, I_rx)`` for each BS when it
    serves the typical user; ``marks`` is each BS's interference mark.
    """

    bs_positions: np.ndarray
    marks: np.ndarray | None = None
    serving_terms: np.ndarray | None = None

    @property
    def n_bs(self) -> int:
        return len(self.bs_positions)

    @property
    def distances(self) -> np.ndarray:
        return np.hypot(self.bs_positions[:, 0], self.bs_positions[:, 1])


@dataclass
class MimoDrop:
    """Per-BS channel matrices, batched along the first axis.

    ``h_hat`` holds the (stale) estimates of all K users of a BS; column 0
    belongs to the typical user. ``h`` is the typical user's current channel
    ``delta * h_hat[:, :, 0] + e_aged``. ``g`` and ``interferer_precoders``
    describe each BS's link to the typical user when it interferes.
    """

    h_hat: np.ndarray
    e_aged: np.ndarray
    h: np.ndarray
    precoders: np.ndarray
    g: np.ndarray
    interferer_precoders: np.ndarray


@dataclass
class CoverageEstimate:
    t_targets: np.ndarray
    mean: np.ndarray
    se: np.ndarray
    count_mean: np.ndarray
    count_se: np.ndarray
    empty_fraction: float
    n_drops: int


@dataclass
class RateEstimate:
    mean: float
    se: float
    empty_fraction: float
    n_drops: int


def default_window(lambda_b: float) -> float:
    """Disk radius holding about 450 BSs on average."""
    return 12.0 / math.sqrt(lambda_b)


def tail_interference(cfg: NetworkConfig, r_sim: float) -> float:
    """Mean interference from BSs outside the disk (Campbell)."""
    return (
        cfg.k_users * 2.0 * math.pi * cfg.lambda_b
        * r_sim ** (2.0 - cfg.alpha) / (cfg.alpha - 2.0)
    )


# ---------------------------------------------------------------------------
# Sampling primitives
# ---------------------------------------------------------------------------
def sample_ppp(lambda_b: float, r_sim: float, rng: np.random.Generator) -> PppDrop:
    """Homogeneous PPP of intensity ``lambda_b`` on a disk of radius ``r_sim``."""
    if not r_sim > 0:
        raise DomainError("r_sim must be positive")
    n = rng.poisson(lambda_b * math.pi * r_sim**2) if lambda_b > 0 else 0
    r = r_sim * np.sqrt(rng.random(n))
    theta = 2.0 * math.pi * rng.random(n)
    return PppDrop(np.column_stack((r * np.cos(theta), r * np.sin(theta))))


def _cn(rng, shape, var=1.0):
    return np.sqrt(var / 2.0) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def zf_precoder(h_hat: np.ndarray) -> np.ndarray:
    """Column-normalized ZF precoder ``H (H^H H)^-1``.

    Accepts one ``M x K`` matrix or a batch ``(..., M, K)``. Raises
    :class:`SingularChannelError` if any Gram matrix has condition number
    above ``GRAM_COND_LIMIT``.
    """
    h_hat = np.asarray(h_hat)
    gram = np.conj(np.swapaxes(h_hat, -1, -2)) @ h_hat
    if np.any(np.linalg.cond(gram) > GRAM_COND_LIMIT):
        raise SingularChannelError("channel estimate is rank deficient")
    w = h_hat @ np.linalg.inv(gram)
    return w / np.linalg.norm(w, axis=-2, keepdims=True)


def isotropic_frames(n: int, m: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` Haar-distributed ``m x k`` matrices with orthonormal columns."""
    q, r = np.linalg.qr(_cn(rng, (n, m, k)))
    d = np.diagonal(r, axis1=-2, axis2=-1)
    phase = d / np.where(np.abs(d) > 0, np.abs(d), 1.0)
    return q * phase[:, None, :]


def sample_mimo(
    n_bs: int,
    cfg: NetworkConfig,
    stats: ChannelStats,
    imp: ImpairmentProfile,
    rng: np.random.Generator,
) -> MimoDrop:
    m, k = cfg.m_antennas, cfg.k_users
    h_hat = _cn(rng, (n_bs, m, k), stats.sigma2_hat)
    while True:
        gram = np.conj(np.swapaxes(h_hat, -1, -2)) @ h_hat
        bad = np.linalg.cond(gram) > GRAM_COND_LIMIT if n_bs else np.zeros(0, bool)
        if not bad.any():
            break
        # probability-zero event; redraw the offending estimates
        h_hat[bad] = _cn(rng, (int(bad.sum()), m, k), stats.sigma2_hat)
    precoders = zf_precoder(h_hat) if n_bs else np.zeros((0, m, k), complex)
    e_aged = _cn(rng, (n_bs, m), stats.sigma2_aged)
    h = imp.delta * h_hat[:, :, 0] + e_aged
    g = _cn(rng, (n_bs, m))
    frames = isotropic_frames(n_bs, m, k, rng)
    return MimoDrop(h_hat, e_aged, h, precoders, g, frames)


def assemble_sir_terms(
    mimo: MimoDrop,
    stats: ChannelStats,
    imp: ImpairmentProfile,
    *,
    etx_mode: str = "correlated",
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """SIR terms from explicit channel products.

    Returns ``terms`` of shape (N, 4) holding ``(Z, E, I_tx, I_rx)`` and the
    interference marks ``g_l`` of shape (N,).
    """
    if imp.delta == 0:
        raise DomainError("delta must be nonzero")
    h0 = mimo.h_hat[:, :, 0]
    w0 = mimo.precoders[:, :, 0]
    z = np.abs(np.einsum("nm,nm->n", h0.conj(), w0)) ** 2
    err = np.sum(np.abs(np.einsum("nm,nmk->nk", mimo.e_aged.conj(), mimo.precoders)) ** 2, axis=1)
    e = (1.0 + imp.kt_bs) * err / imp.delta**2
    if etx_mode == "correlated":
        itx = imp.kt_bs * z
    elif etx_mode == "independent":
        if rng is None:
            raise ValueError("independent transmit distortion needs an rng")
        itx = _tx_independent(imp, stats.sigma2_hat, stats.delta_cap, len(z), rng)
    else:
        raise ValueError(f"unknown etx_mode {etx_mode!r}")
    irx = imp.kr_ue * np.sum(np.abs(mimo.h) ** 2, axis=1)
    marks = np.sum(
        np.abs(np.einsum("nm,nmk->nk", mimo.g.conj(), mimo.interferer_precoders)) ** 2,
        axis=1,
    )
    return np.column_stack((z, e, itx, irx)), marks


def _tx_independent(imp, sigma2_hat, shape, n, rng):
    if imp.kt_bs == 0:
        return np.zeros(n)
    return sample_gamma(shape, imp.kt_bs * sigma2_hat, rng, size=n)


def sir_from_terms(
    distances: np.ndarray,
    terms: np.ndarray,
    marks: np.ndarray,
    alpha: float,
    tail: float = 0.0,
) -> np.ndarray:
    """SIR of each BS as the server; all other BSs interfere.

    ``SIR = Z r^-a / ((E + I_tx + I_rx) r^-a + I)``, rewritten as
    ``Z / (E + I_tx + I_rx + I r^a)``.
    """
    if len(distances) == 0:
        return np.zeros(0)
    gain = distances ** (-alpha)
    contrib = marks * gain
    total = contrib.sum()
    others = total - contrib
    top = int(np.argmax(contrib))
    others[top] = np.delete(contrib, top).sum()  # avoid cancellation
    others = np.maximum(others, 0.0) + tail
    distortion = terms[:, 1] + terms[:, 2] + terms[:, 3]
    return terms[:, 0] / (distortion + others / gain)


def mark_level_drop(
    stats: ChannelStats,
    imp: ImpairmentProfile,
    dec: SirDecomposition,
    ppp: PppDrop,
    rng: np.random.Generator,
    *,
    alpha: float,
    tail: float = 0.0,
    etx_mode: str = "correlated",
) -> np.ndarray:
    """Per-BS SIR values from Gamma draws of every term (no matrix algebra)."""
    n = ppp.n_bs
    z = sample_gamma(dec.shape_signal, dec.scale_signal, rng, size=n)
    if dec.scale_error > 0:
        e = sample_gamma(dec.shape_error, dec.scale_error, rng, size=n)
    else:
        e = np.zeros(n)
    if etx_mode == "correlated":
        itx = imp.kt_bs * z
    elif etx_mode == "independent":
        itx = _tx_independent(imp, stats.sigma2_hat, dec.shape_tx, n, rng)
    else:
        raise ValueError(f"unknown etx_mode {etx_mode!r}")
    irx = imp.kr_ue * sample_gamma(dec.shape_rx, 1.0, rng, size=n)
    marks = sample_gamma(dec.interf_shape, 1.0, rng, size=n)
    ppp.marks = marks
    ppp.serving_terms = np.column_stack((z, e, itx, irx))
    return sir_from_terms(ppp.distances, ppp.serving_terms, marks, alpha, tail)


def full_mimo_drop(
    cfg: NetworkConfig,
    stats: ChannelStats,
    imp: ImpairmentProfile,
    ppp: PppDrop,
    rng: np.random.Generator,
    *,
    tail: float = 0.0,
    etx_mode: str = "correlated",
) -> np.ndarray:
    mimo = sample_mimo(ppp.n_bs, cfg, stats, imp, rng)
    terms, marks = assemble_sir_terms(mimo, stats, imp, etx_mode=etx_mode, rng=rng)
    ppp.marks = marks
    ppp.serving_terms = terms
    return sir_from_terms(ppp.distances, terms, marks, cfg.alpha, tail)


# ---------------------------------------------------------------------------
# Drop loop
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class _Job:
    cfg: NetworkConfig
    imp: ImpairmentProfile
    stats: ChannelStats
    dec: SirDecomposition
    t_targets: tuple
    seed: int
    fidelity: str
    etx_mode: str
    r_sim: float
    tail: float


def drop_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for drop ``index`` under master ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def _run_block(job: _Job, start: int, stop: int):
    t = np.asarray(job.t_targets, dtype=float)
    n = stop - start
    best = np.zeros(n)
    nearest = np.zeros(n)
    counts = np.zeros((n, t.size), dtype=np.int64)
    empty = np.zeros(n, dtype=bool)
    for j, i in enumerate(range(start, stop)):
        rng = drop_rng(job.seed, i)
        ppp = sample_ppp(job.cfg.lambda_b, job.r_sim, rng)
        if ppp.n_bs == 0:
            empty[j] = True
            continue
        if job.fidelity == "full":
            sir = full_mimo_drop(
                job.cfg, job.stats, job.imp, ppp, rng, tail=job.tail, etx_mode=job.etx_mode
            )
        else:
            sir = mark_level_drop(
                job.stats, job.imp, job.dec, ppp, rng,
                alpha=job.cfg.alpha, tail=job.tail, etx_mode=job.etx_mode,
            )
        best[j] = sir.max()
        nearest[j] = sir[np.argmin(ppp.distances)]
        counts[j] = (sir[:, None] > t[None, :]).sum(axis=0)
    return best, nearest, counts, empty


@dataclass
class DropRecord:
    """Per-drop summaries: best and nearest-BS SIR, covering-BS counts."""

    best_sir: np.ndarray
    nearest_sir: np.ndarray
    counts: np.ndarray
    empty: np.ndarray
    t_targets: np.ndarray = field(default_factory=lambda: np.zeros(0))


def simulate_drops(
    cfg: NetworkConfig,
    imp: ImpairmentProfile,
    n_drops: int,
    *,
    seed: int = 0,
    t_targets=(),
    fidelity: str = "marks",
    etx_mode: str = "correlated",
    error_shape: str = "k",
    error_variance: str = "aged",
    rederived: bool = False,
    r_sim: float | None = None,
    tail_correction: bool = True,
    workers: int = 1,
    block: int = 1000,
) -> DropRecord:
    if n_drops < 1:
        raise ValueError("n_drops must be positive")
    if fidelity not in ("full", "marks"):
        raise ValueError(f"unknown fidelity {fidelity!r}")
    stats = estimate_variances(cfg, imp, rederived=rederived)
    dec = decompose(cfg, imp, stats, error_shape=error_shape, error_variance=error_variance)
    r_sim = default_window(cfg.lambda_b) if r_sim is None else float(r_sim)
    tail = tail_interference(cfg, r_sim) if tail_correction else 0.0
    job = _Job(
        cfg, imp, stats, dec, tuple(float(x) for x in t_targets), int(seed),
        fidelity, etx_mode, r_sim, tail,
    )
    bounds = [(s, min(s + block, n_drops)) for s in range(0, n_drops, block)]
    if workers > 1 and len(bounds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_block, [job] * len(bounds), *zip(*bounds)))
    else:
        parts = [_run_block(job, a, b) for a, b in bounds]
    best, nearest, counts, empty = (np.concatenate(x) for x in zip(*parts))
    frac = float(empty.mean())
    if frac > EMPTY_WARN_FRACTION:
        warnings.warn(
            f"{frac:.1%} of drops had no BS in the window; r_sim is too small",
            RuntimeWarning,
            stacklevel=2,
        )
    return DropRecord(best, nearest, counts, empty, np.asarray(job.t_targets))


def _mean_se(x: np.ndarray, axis=0):
    n = x.shape[axis]
    mean = x.mean(axis=axis)
    se = x.std(axis=axis, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
    return mean, se


def estimate_coverage(
    cfg: NetworkConfig,
    imp: ImpairmentProfile,
    t_targets,
    n_drops: int,
    *,
    seed: int = 0,
    association: str = "union",
    **kwargs,
) -> CoverageEstimate:
    """Monte Carlo coverage per SIR target with standard errors.

    ``union`` (and the equivalent ``max_sir``) counts a drop as covered if
    any BS clears the target; ``nearest`` uses only the closest BS.
    ``count_mean`` estimates the mean number of BSs clearing the target,
    which is exactly what the union bound integrates.
    """
    if n_drops < 100:
        raise ValueError("n_drops must be at least 100")
    association = association.replace("-", "_")
    if association not in ASSOCIATIONS:
        raise ValueError(f"unknown association {association!r}")
    t = np.asarray(t_targets, dtype=float)
    rec = simulate_drops(cfg, imp, n_drops, seed=seed, t_targets=t, **kwargs)
    sir = rec.nearest_sir if association == "nearest" else rec.best_sir
    covered = (sir[:, None] > t[None, :]) & ~rec.empty[:, None]
    mean, se = _mean_se(covered.astype(float))
    cmean, cse = _mean_se(rec.counts.astype(float))
    return CoverageEstimate(t, mean, se, cmean, cse, float(rec.empty.mean()), n_drops)


def estimate_rate(
    cfg: NetworkConfig,
    imp: ImpairmentProfile,
    n_drops: int,
    *,
    seed: int = 0,
    association: str = "max_sir",
    **kwargs,
) -> RateEstimate:
    """Monte Carlo mean of ``ln(1 + SIR)`` in nats per channel use."""
    if n_drops < 100:
        raise ValueError("n_drops must be at least 100")
    association = association.replace("-", "_")
    if association not in ASSOCIATIONS:
        raise ValueError(f"unknown association {association!r}")
    rec = simulate_drops(cfg, imp, n_drops, seed=seed, **kwargs)
    sir = rec.nearest_sir if association == "nearest" else rec.best_sir
    mean, se = _mean_se(np.log1p(sir))
    return RateEstimate(float(mean), float(se), float(rec.empty.mean()), n_drops)
