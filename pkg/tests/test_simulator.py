import math

import mpmath as mp
import numpy as np
import pytest
from scipy import stats

from hcnrathi.analytic import coverage_upper_bound, decompose
from hcnrathi.channel import ChannelStats, ImpairmentProfile, NetworkConfig, estimate_variances
from hcnrathi.errors import SingularChannelError
from hcnrathi.simulator import (
    PppDrop,
    assemble_sir_terms,
    drop_rng,
    estimate_coverage,
    estimate_rate,
    isotropic_frames,
    mark_level_drop,
    sample_mimo,
    sample_ppp,
    simulate_drops,
    sir_from_terms,
    tail_interference,
    zf_precoder,
)

from oracles import expected_log_ratio

BASELINE = dict(kt_ue=0.08, kr_ue=0.08, kt_bs=0.08, kr_bs=0.08, fd_ts=0.1)


def cn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)


# -- point process ---------------------------------------------------------------
def test_ppp_mean_count():
    rng = np.random.default_rng(0)
    counts = [sample_ppp(0.01, 100.0, rng).n_bs for _ in range(10**4)]
    assert np.mean(counts) == pytest.approx(100 * math.pi, rel=0.01)


def test_ppp_contact_distance():
    rng = np.random.default_rng(1)
    nearest = np.array([sample_ppp(0.01, 40.0, rng).distances.min() for _ in range(5000)])
    cdf = lambda r: 1 - np.exp(-0.01 * math.pi * r**2)
    assert stats.kstest(nearest, cdf).pvalue > 1e-3


def test_ppp_empty_without_density():
    assert sample_ppp(0.0, 10.0, np.random.default_rng(0)).n_bs == 0


def test_tail_interference_campbell():
    cfg = NetworkConfig(alpha=3.5, k_users=2)
    val = mp.quad(lambda r: r ** (1 - mp.mpf(cfg.alpha)), [30, mp.inf])
    ref = cfg.k_users * cfg.lambda_b * 2 * math.pi * float(val)
    assert tail_interference(cfg, 30.0) == pytest.approx(ref, rel=1e-9)


# -- precoding --------------------------------------------------------------------
def test_zf_single_user_is_matched_filter():
    h = cn(np.random.default_rng(2), (6, 1))
    w = zf_precoder(h)
    np.testing.assert_allclose(w, h / np.linalg.norm(h), atol=1e-14)


def test_zf_square_uses_inverse_columns():
    h = cn(np.random.default_rng(3), (4, 4))
    inv = np.linalg.inv(h.conj().T)
    w = zf_precoder(h)
    np.testing.assert_allclose(w, inv / np.linalg.norm(inv, axis=0), atol=1e-12)


def test_zf_nulls_other_users():
    h = cn(np.random.default_rng(4), (200, 5, 3))
    w = zf_precoder(h)
    cross = np.abs(np.conj(np.swapaxes(h, -1, -2)) @ w)
    off = cross * (1 - np.eye(3))
    assert np.all(off < 1e-10 * np.linalg.norm(h, axis=-2)[:, :, None])
    np.testing.assert_allclose(np.linalg.norm(w, axis=-2), 1.0, rtol=1e-13)


def test_zf_rejects_rank_deficient():
    h = np.ones((4, 2), dtype=complex)
    with pytest.raises(SingularChannelError):
        zf_precoder(h)


def test_isotropic_frames_orthonormal():
    q = isotropic_frames(50, 5, 3, np.random.default_rng(5))
    gram = np.conj(np.swapaxes(q, -1, -2)) @ q
    np.testing.assert_allclose(gram, np.broadcast_to(np.eye(3), gram.shape), atol=1e-13)


def test_precoder_direction_is_isotropic():
    cfg = NetworkConfig()
    stats_ = estimate_variances(cfg, ImpairmentProfile())
    mimo = sample_mimo(20000, cfg, stats_, ImpairmentProfile(), np.random.default_rng(6))
    b = np.zeros(cfg.m_antennas)
    b[0] = 1.0
    proj = np.abs(mimo.precoders[:, 0, 1]) ** 2  # |b^H w| for column 1
    assert stats.kstest(proj, "beta", args=(1, cfg.m_antennas - 1)).pvalue > 1e-3


# -- SIR terms ----------------------------------------------------------------------
def _mimo(n, cfg=None, imp=None, seed=7, stats_=None):
    cfg = cfg or NetworkConfig()
    imp = imp or ImpairmentProfile.from_kappas(**BASELINE)
    stats_ = stats_ or estimate_variances(cfg, imp)
    return cfg, imp, stats_, sample_mimo(n, cfg, stats_, imp, np.random.default_rng(seed))


def test_correlated_transmit_distortion_is_scaled_signal():
    cfg, imp, st, mimo = _mimo(500)
    terms, _ = assemble_sir_terms(mimo, st, imp)
    np.testing.assert_array_equal(terms[:, 2], imp.kt_bs * terms[:, 0])


def test_independent_transmit_distortion_law():
    cfg, imp, st, mimo = _mimo(20000)
    terms, _ = assemble_sir_terms(mimo, st, imp, etx_mode="independent", rng=np.random.default_rng(9))
    ref = (cfg.delta_cap, 0, imp.kt_bs * st.sigma2_hat)
    assert stats.kstest(terms[:, 2], "gamma", args=ref).pvalue > 1e-3


def test_ideal_reduction():
    cfg = NetworkConfig()
    st = ChannelStats(sigma2_hat=1.0, sigma2_err=0.0, sigma2_aged=0.0, delta_cap=cfg.delta_cap)
    imp = ImpairmentProfile(delta=1.0)
    _, _, _, mimo = _mimo(100, cfg, imp, stats_=st)
    terms, marks = assemble_sir_terms(mimo, st, imp)
    np.testing.assert_array_equal(terms[:, 1:], 0.0)
    r = np.linspace(1.0, 5.0, 100)
    sir = sir_from_terms(r, terms, marks, cfg.alpha)
    gain = r ** -cfg.alpha
    others = (marks * gain).sum() - marks * gain
    np.testing.assert_allclose(sir, terms[:, 0] * gain / others, rtol=1e-10)


def test_signal_and_marks_follow_gamma_laws():
    cfg, imp, st, mimo = _mimo(20000)
    terms, marks = assemble_sir_terms(mimo, st, imp)
    assert stats.kstest(terms[:, 0], "gamma", args=(cfg.delta_cap, 0, st.sigma2_hat)).pvalue > 1e-3
    assert stats.kstest(marks, "gamma", args=(cfg.k_users, 0, 1.0)).pvalue > 1e-3


def test_receive_distortion_law():
    cfg, imp, st, mimo = _mimo(20000)
    terms, _ = assemble_sir_terms(mimo, st, imp)
    # |h|^2 of the aged channel has unit-variance entries: Gamma(M, 1)
    assert stats.kstest(terms[:, 3] / imp.kr_ue, "gamma", args=(cfg.m_antennas, 0, 1.0)).pvalue > 1e-3


def test_signal_uncorrelated_with_marks():
    cfg, imp, st, mimo = _mimo(100000)
    terms, marks = assemble_sir_terms(mimo, st, imp)
    assert abs(np.corrcoef(terms[:, 0], marks)[0, 1]) < 0.01


def test_cancellation_guard_for_dominant_interferer():
    # total - dominant would round to zero; the guard sums the others directly
    terms = np.array([[1.0, 0, 0, 0], [1.0, 0, 0, 0]])
    sir = sir_from_terms(np.array([1e-3, 1.0]), terms, np.array([1.0, 1e-12]), 3.0)
    assert sir[0] == pytest.approx(1e9 / 1e-12, rel=1e-9)
    assert sir[1] == pytest.approx(1e-12 / 1e9 / 1e-12, rel=1e-9)


# -- zero-interference rate sanity ---------------------------------------------------
def test_single_bs_rate_matches_quadrature():
    cfg, imp = NetworkConfig(), ImpairmentProfile.from_kappas(**BASELINE)
    st = estimate_variances(cfg, imp)
    dec = decompose(cfg, imp, st)
    ppp = PppDrop(np.column_stack((np.arange(1.0, 100001.0), np.zeros(100000))))
    mark_level_drop(st, imp, dec, ppp, np.random.default_rng(10), alpha=cfg.alpha)
    z, e, itx, irx = ppp.serving_terms.T
    mc = np.log1p(z / (e + itx + irx)).mean()
    ref = expected_log_ratio(
        dec.shape_signal, dec.scale_signal, imp.kt_bs,
        [(dec.shape_error, dec.scale_error), (dec.shape_rx, dec.scale_rx)],
    )
    assert mc == pytest.approx(ref, rel=0.01)


# -- drop loop ----------------------------------------------------------------------
def test_drop_streams_are_counter_based():
    a = drop_rng(5, 17).random(4)
    assert np.array_equal(a, drop_rng(5, 17).random(4))
    assert not np.array_equal(a, drop_rng(5, 18).random(4))


def test_determinism_same_seed():
    cfg, imp = NetworkConfig(), ImpairmentProfile.from_kappas(**BASELINE)
    one = simulate_drops(cfg, imp, 300, seed=42, t_targets=[1.0])
    two = simulate_drops(cfg, imp, 300, seed=42, t_targets=[1.0])
    assert np.array_equal(one.best_sir, two.best_sir) and np.array_equal(one.counts, two.counts)


def test_determinism_across_workers():
    cfg, imp = NetworkConfig(), ImpairmentProfile.from_kappas(**BASELINE)
    one = simulate_drops(cfg, imp, 400, seed=3, t_targets=[1.0], block=100, workers=1)
    two = simulate_drops(cfg, imp, 400, seed=3, t_targets=[1.0], block=100, workers=2)
    assert np.array_equal(one.best_sir, two.best_sir)
    assert np.array_equal(one.nearest_sir, two.nearest_sir)


def test_determinism_full_fidelity():
    cfg, imp = NetworkConfig(), ImpairmentProfile.from_kappas(**BASELINE)
    one = simulate_drops(cfg, imp, 50, seed=8, fidelity="full")
    two = simulate_drops(cfg, imp, 50, seed=8, fidelity="full", block=20)
    assert np.array_equal(one.best_sir, two.best_sir)


def test_mean_covering_count_equals_bound():
    # the union bound is exactly the mean number of BSs clearing the target
    cfg, imp = NetworkConfig(), ImpairmentProfile.from_kappas(kt_ue=0.08, kr_ue=0.08, kr_bs=0.08, fd_ts=0.1)
    t_db = np.array([-10.0, -5.0, 0.0, 5.0])
    t = 10 ** (t_db / 10)
    est = estimate_coverage(cfg, imp, t, 20000, seed=11)
    for i, ti in enumerate(t):
        bound = coverage_upper_bound(ti, cfg, imp).bound_raw
        assert abs(est.count_mean[i] - bound) < 3.5 * est.count_se[i] + 1e-3


def test_union_dominates_nearest_and_vanishes():
    cfg, imp = NetworkConfig(), ImpairmentProfile.from_kappas(**BASELINE)
    t = [0.1, 1.0, 10.0, 1e9]
    union = estimate_coverage(cfg, imp, t, 2000, seed=4)
    nearest = estimate_coverage(cfg, imp, t, 2000, seed=4, association="nearest")
    assert np.all(union.mean >= nearest.mean)
    assert union.mean[-1] == 0.0


def test_transmit_impairment_lowers_coverage():
    cfg = NetworkConfig()
    t = 10 ** (np.arange(-10, 21, 5) / 10)
    ideal = estimate_coverage(cfg, ImpairmentProfile(), t, 5000, seed=12)
    hurt = estimate_coverage(cfg, ImpairmentProfile.from_kappas(kt_bs=0.15), t, 5000, seed=12)
    assert np.all(ideal.mean - hurt.mean >= -1.96 * np.hypot(ideal.se, hurt.se))


def test_rate_falls_with_doppler_and_transmit_impairment():
    cfg = NetworkConfig()
    base = estimate_rate(cfg, ImpairmentProfile(fd_ts=0.0), 3000, seed=13)
    aged = estimate_rate(cfg, ImpairmentProfile(fd_ts=0.2), 3000, seed=13)
    hurt = estimate_rate(cfg, ImpairmentProfile.from_kappas(kt_bs=0.15), 3000, seed=13)
    assert aged.mean < base.mean and hurt.mean < base.mean


def test_estimators_require_enough_drops():
    with pytest.raises(ValueError):
        estimate_coverage(NetworkConfig(), ImpairmentProfile(), [1.0], 50)
    with pytest.raises(ValueError):
        estimate_rate(NetworkConfig(), ImpairmentProfile(), 10)


def test_small_window_warns_about_empty_drops():
    with pytest.warns(RuntimeWarning, match="no BS"):
        simulate_drops(NetworkConfig(), ImpairmentProfile(), 200, r_sim=2.0)
