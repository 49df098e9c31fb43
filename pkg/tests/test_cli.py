import csv
import io
import json
import math
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hcnrathi import cli
from hcnrathi.analytic import CoveragePoint
from hcnrathi.config import PRESETS, ExperimentSpec, dump_config, load_config, parse_config
from hcnrathi.errors import ConfigError

GOLDEN = Path(__file__).parent / "golden"


# -- config loading -----------------------------------------------------------------
def test_empty_file_gives_baseline(tmp_path):
    path = tmp_path / "empty.ini"
    path.write_text("")
    spec = load_config(path)
    assert spec == ExperimentSpec()
    cfg = spec.network_config()
    assert (cfg.m_antennas, cfg.k_users, cfg.alpha, cfg.lambda_b) == (5, 3, 3.0, 0.01)
    assert cfg.x_train == pytest.approx(0.015)
    assert cfg.p_down == pytest.approx(10**1.5) and cfg.rho_up == pytest.approx(10**0.5)
    assert len(spec.experiment.values) == 31


@pytest.mark.parametrize(
    "text,message",
    [
        ("[network]\nalpha = 2\n", "alpha must exceed 2"),
        ("[network]\nk_users = 6\nm_antennas = 5\n", "K ≤ M required"),
        ("[network]\nbogus = 1\n", "network.bogus: unknown key"),
        ("[extras]\n", "extras: unknown section"),
        ("[experiment]\nvalues = 1, 0\n", "strictly increasing"),
        ("[experiment]\nmode = rate\n", "rate mode cannot sweep t_db"),
        ("[mc]\nn_drops = 5\n", "n_drops"),
        ("[mc]\nfidelity = exact\n", "mc.fidelity"),
        ("[network]\nalpha = three\n", "network.alpha: invalid value"),
        ("[impairments]\nkt_bs = -0.1\n", "impairments.kt_bs"),
    ],
)
def test_invalid_configs_name_the_key(text, message):
    with pytest.raises(ConfigError, match=message):
        parse_config(text)


def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.ini")


def test_range_syntax_for_values():
    spec = parse_config("[experiment]\nvalues = -10:20:1.5\n")
    assert spec.experiment.values[0] == -10.0 and spec.experiment.values[-1] == 20.0
    assert len(spec.experiment.values) == 21


def test_scheme_presets():
    spec = ExperimentSpec()
    siso = spec.network_config("siso")
    sdma = spec.network_config("sdma")
    su_bf = spec.network_config("su_bf")
    assert (siso.m_antennas, siso.k_users) == (1, 1)
    assert (sdma.m_antennas, sdma.k_users) == (5, 5)
    assert (su_bf.m_antennas, su_bf.k_users) == (5, 1)


def test_kappa_sweep_sets_every_impairment():
    imp = ExperimentSpec().impairment_profile(kappa=0.1)
    assert imp.kt_ue == imp.kr_ue == imp.kt_bs == imp.kr_bs == pytest.approx(0.01)


def test_delta_override():
    spec = parse_config(PRESETS["fig6-compare"])
    assert spec.impairment_profile().delta == 0.1


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_round_trip(name):
    spec = parse_config(PRESETS[name])
    assert parse_config(dump_config(spec)) == spec


finite = st.floats(0.0, 0.3, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(
    kt=finite, kr=finite, fd=st.floats(0.0, 0.45), lam=st.floats(1e-4, 1.0),
    alpha=st.floats(2.05, 6.0), m=st.integers(1, 8), seed=st.integers(0, 2**64 - 1),
    values=st.lists(st.floats(-30, 30, allow_nan=False), min_size=1, max_size=6, unique=True),
)
def test_round_trip_property(kt, kr, fd, lam, alpha, m, seed, values):
    text = (
        f"[network]\nlambda_b = {lam!r}\nalpha = {alpha!r}\nm_antennas = {m}\nk_users = 1\n"
        f"[impairments]\nkt_bs = {kt!r}\nkr_ue = {kr!r}\nfd_ts = {fd!r}\n"
        f"[mc]\nseed = {seed}\n"
        f"[experiment]\nvalues = {', '.join(repr(v) for v in sorted(values))}\n"
    )
    spec = parse_config(text)
    assert parse_config(dump_config(spec)) == spec


# -- experiments ----------------------------------------------------------------------
def test_default_run_has_31_rows():
    result = cli.run_experiment(ExperimentSpec().with_overrides("mc", n_drops=0))
    assert len(result.rows) == 31 and result.columns == cli.COLUMNS
    assert result.exit_code == 0
    assert all(r["analytic_clamped"] == min(1.0, r["analytic_raw"]) for r in result.rows)


def test_csv_matches_golden_schema_and_values():
    spec = ExperimentSpec().with_overrides("mc", n_drops=0)
    text = cli.format_rows(cli.run_experiment(spec), spec, "csv")
    got = list(csv.DictReader(io.StringIO(text)))
    with open(GOLDEN / "coverage_baseline_analytic.csv", newline="") as fh:
        want = list(csv.DictReader(fh))
    assert text.splitlines()[0] == ",".join(cli.COLUMNS)
    assert len(got) == len(want)
    for g, w in zip(got, want):
        assert g["status"] == w["status"]
        for key in ("sweep_value", "analytic_raw", "analytic_clamped"):
            assert float(g[key]) == pytest.approx(float(w[key]), rel=1e-12)
        assert g["mc_mean"] == "nan"


def test_compare_emits_three_curves():
    spec = parse_config(PRESETS["fig6-compare"]).with_overrides("mc", n_drops=0)
    result = cli.run_experiment(spec)
    assert result.columns[0] == "scheme"
    assert [r["scheme"] for r in result.rows[::31]] == ["siso", "sdma", "su_bf"]
    assert len(result.rows) == 93


def test_rate_mode_rows():
    spec = parse_config(PRESETS["fig4-rate-doppler"]).with_overrides("mc", n_drops=0)
    rows = cli.run_experiment(spec).rows
    rates = [r["analytic_raw"] for r in rows]
    assert len(rows) == 6 and rates[0] > rates[2]


def test_validate_flags_violations():
    rows = [dict(mc_mean=0.5, mc_se=0.01, analytic_raw=0.4, status="ok")]
    assert cli._flag_violations(rows) == 1 and rows[0]["status"] == "bound-violated"
    result = cli.RunResult(cli.COLUMNS, rows, dict(violations=1, warnings=0))
    assert result.exit_code == cli.EXIT_VALIDATION


def test_json_output_embeds_spec():
    spec = ExperimentSpec().with_overrides("mc", n_drops=0)
    payload = json.loads(cli.format_rows(cli.run_experiment(spec), spec, "json"))
    assert payload["spec"]["network"]["m_antennas"] == 5
    assert payload["rows"][0]["mc_mean"] is None
    assert payload["summary"]["rows"] == 31


# -- command line ---------------------------------------------------------------------
def test_main_writes_csv(tmp_path, capsys):
    out = tmp_path / "cov.csv"
    code = cli.main(["coverage", "--drops", "0", "--out", str(out)])
    assert code == 0
    assert out.read_text().splitlines()[0] == ",".join(cli.COLUMNS)


def test_main_config_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[network]\nalpha = 2\n")
    assert cli.main(["coverage", "--config", str(cfg)]) == cli.EXIT_CONFIG
    assert "alpha must exceed 2" in capsys.readouterr().err


def test_main_validate_passes_on_marks(tmp_path):
    out = tmp_path / "v.csv"
    code = cli.main(["validate", "--drops", "2000", "--seed", "5", "--out", str(out)])
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert all(r["status"] == "ok" for r in rows)
    assert all(math.isfinite(float(r["mc_mean"])) for r in rows)


def test_numerical_warning_exit_code(monkeypatch, tmp_path):
    def noisy(t, cfg, imp, **kw):
        return CoveragePoint(t, 0.5, 0.5, 1e-3, status="quadrature-warning")

    monkeypatch.setattr(cli.analytic, "coverage_upper_bound", noisy)
    assert cli.main(["coverage", "--drops", "0", "--out", str(tmp_path / "w.csv")]) == cli.EXIT_NUMERICAL


def test_seed_from_environment():
    args = cli._build_parser().parse_args(["coverage"])
    assert cli.resolve_spec(args, environ={"HCN_SEED": "99"}).mc.seed == 99
    args = cli._build_parser().parse_args(["coverage", "--seed", "7"])
    assert cli.resolve_spec(args, environ={"HCN_SEED": "99"}).mc.seed == 7


def test_flags_override_config():
    args = cli._build_parser().parse_args(
        ["coverage", "--association", "max-sir", "--etx-mode", "independent",
         "--error-shape", "delta", "--variance-mode", "rederived", "--fidelity", "full",
         "--format", "json", "--drops", "100"]
    )
    spec = cli.resolve_spec(args, environ={})
    assert spec.model.association == "max_sir" and spec.model.etx_mode == "independent"
    assert spec.model.error_shape == "delta" and spec.rederived
    assert spec.mc.fidelity == "full" and spec.mc.n_drops == 100
    assert spec.output.format == "json"


def test_rate_subcommand_defaults_to_impairment_sweep():
    args = cli._build_parser().parse_args(["rate"])
    spec = cli.resolve_spec(args, environ={})
    assert spec.experiment.sweep == "kappa"


def test_dump_config_flag(capsys):
    assert cli.main(["compare", "--preset", "fig6-compare", "--dump-config"]) == 0
    spec = parse_config(capsys.readouterr().out)
    assert spec.experiment.mode == "compare" and spec.impairments.delta == 0.1
