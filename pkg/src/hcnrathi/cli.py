"""Command-line front end: analytic and Monte Carlo sweeps.

Exit codes: 0 success, 1 configuration error, 2 validation failure (a Monte
Carlo estimate exceeds the analytic bound by more than two standard
errors), 3 a numerical warning is present in the status column.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
import warnings
from dataclasses import dataclass, field

from . import analytic, simulator
from .config import PRESETS, ExperimentSpec, dump_config, load_config, parse_config
from .errors import ConfigError

__all__ = ["COLUMNS", "RunResult", "run_experiment", "format_rows", "main"]

COLUMNS = ("sweep_value", "analytic_raw", "analytic_clamped", "mc_mean", "mc_se", "status", "seconds")
COMPARE_SCHEMES = ("siso", "sdma", "su_bf")

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2, 3


@dataclass
class RunResult:
    """Rows of one experiment plus a summary used for the exit code."""

    columns: tuple
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        if self.summary.get("violations", 0) > 0:
            return EXIT_VALIDATION
        if self.summary.get("warnings", 0) > 0:
            return EXIT_NUMERICAL
        return EXIT_OK


def _model_kwargs(spec: ExperimentSpec) -> dict:
    return dict(
        error_shape=spec.model.error_shape,
        error_variance=spec.model.error_variance,
        rederived=spec.rederived,
    )


def _mc_kwargs(spec: ExperimentSpec) -> dict:
    return dict(
        seed=spec.mc.seed,
        fidelity=spec.mc.fidelity,
        etx_mode=spec.model.etx_mode,
        workers=spec.mc.workers,
        **_model_kwargs(spec),
    )


def _coverage_rows(spec: ExperimentSpec, scheme: str) -> list[dict]:
    ex = spec.experiment
    cfg = spec.network_config(scheme)
    model = _model_kwargs(spec)
    n_drops = spec.mc.n_drops
    rows = []
    if ex.sweep == "t_db":
        imp = spec.impairment_profile()
        t_lin = [10 ** (v / 10) for v in ex.values]
        start = time.perf_counter()
        mc = None
        if n_drops:
            mc = simulator.estimate_coverage(
                cfg, imp, t_lin, n_drops, association=spec.model.association, **_mc_kwargs(spec)
            )
        mc_share = (time.perf_counter() - start) / len(t_lin)
        for i, (v, t) in enumerate(zip(ex.values, t_lin)):
            start = time.perf_counter()
            pt = analytic.coverage_upper_bound(t, cfg, imp, **model)
            rows.append(_row(v, pt, mc.mean[i] if mc else math.nan,
                             mc.se[i] if mc else math.nan,
                             time.perf_counter() - start + mc_share))
        return rows
    t = 10 ** (ex.t_db / 10)
    for v in ex.values:
        start = time.perf_counter()
        imp = spec.impairment_profile(**{ex.sweep: v})
        pt = analytic.coverage_upper_bound(t, cfg, imp, **model)
        mean = se = math.nan
        if n_drops:
            mc = simulator.estimate_coverage(
                cfg, imp, [t], n_drops, association=spec.model.association, **_mc_kwargs(spec)
            )
            mean, se = float(mc.mean[0]), float(mc.se[0])
        rows.append(_row(v, pt, mean, se, time.perf_counter() - start))
    return rows


def _row(value, pt: analytic.CoveragePoint, mean, se, seconds) -> dict:
    return dict(
        sweep_value=float(value), analytic_raw=pt.bound_raw, analytic_clamped=pt.bound,
        mc_mean=float(mean), mc_se=float(se), status=pt.status, seconds=seconds,
    )


def _rate_rows(spec: ExperimentSpec, scheme: str) -> list[dict]:
    ex = spec.experiment
    cfg = spec.network_config(scheme)
    rows = []
    for v in ex.values:
        start = time.perf_counter()
        imp = spec.impairment_profile(**{ex.sweep: v})
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", RuntimeWarning)
            rate = analytic.average_rate(cfg, imp, **_model_kwargs(spec))
        status = "quadrature-warning" if caught else "ok"
        mean = se = math.nan
        if spec.mc.n_drops:
            association = spec.model.association
            mc = simulator.estimate_rate(
                cfg, imp, spec.mc.n_drops,
                association="max_sir" if association == "union" else association,
                **_mc_kwargs(spec),
            )
            mean, se = mc.mean, mc.se
        rows.append(dict(
            sweep_value=float(v), analytic_raw=rate, analytic_clamped=rate,
            mc_mean=float(mean), mc_se=float(se), status=status,
            seconds=time.perf_counter() - start,
        ))
    return rows


def _flag_violations(rows: list[dict]) -> int:
    count = 0
    for row in rows:
        if math.isfinite(row["mc_mean"]) and row["mc_mean"] - 2 * row["mc_se"] > row["analytic_raw"]:
            row["status"] = "bound-violated"
            count += 1
    return count


def run_experiment(spec: ExperimentSpec) -> RunResult:
    """Evaluate every sweep point of ``spec``.

    Coverage, validate and compare modes report the coverage bound; rate
    mode reports the average rate in nats. Validate mode marks rows where
    the Monte Carlo estimate exceeds the bound by more than two standard
    errors.
    """
    spec.validate()
    mode = spec.experiment.mode
    if mode == "compare":
        rows = []
        for scheme in COMPARE_SCHEMES:
            rows += [dict(scheme=scheme, **r) for r in _coverage_rows(spec, scheme)]
        columns = ("scheme",) + COLUMNS
    elif mode == "rate":
        rows, columns = _rate_rows(spec, spec.experiment.scheme), COLUMNS
    else:
        rows, columns = _coverage_rows(spec, spec.experiment.scheme), COLUMNS
    violations = _flag_violations(rows) if mode == "validate" else 0
    summary = dict(
        mode=mode,
        rows=len(rows),
        violations=violations,
        warnings=sum(r["status"] == "quadrature-warning" for r in rows),
        seconds=sum(r["seconds"] for r in rows),
    )
    return RunResult(columns, rows, summary)


def format_rows(result: RunResult, spec: ExperimentSpec, fmt: str) -> str:
    """Render as CSV (header plus one line per row) or JSON with the embedded configuration."""
    if fmt == "json":
        rows = [
            {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in r.items()}
            for r in result.rows
        ]
        spec_dict = json.loads(json.dumps(spec.to_dict()).replace("NaN", "null"))
        payload = dict(spec=spec_dict, summary=result.summary, rows=rows)
        return json.dumps(payload, indent=2, allow_nan=False) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(result.columns)
    for row in result.rows:
        writer.writerow([row[c] if isinstance(row[c], str) else repr(float(row[c]))
                         for c in result.columns])
    return buf.getvalue()


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hcnrathi",
        description="Coverage bound and rate sweeps for multi-antenna cellular networks "
        "with hardware impairments, pilot contamination and channel aging.",
    )
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode, text in (
        ("coverage", "coverage bound (and optional Monte Carlo) over a sweep"),
        ("rate", "average rate in nats over an impairment or Doppler sweep"),
        ("validate", "coverage sweep that fails when Monte Carlo exceeds the bound"),
        ("compare", "coverage curves for SISO, SDMA and SU-BF"),
    ):
        p = sub.add_parser(mode, help=text)
        p.add_argument("--config", metavar="PATH", help="configuration file")
        p.add_argument("--preset", choices=sorted(PRESETS), help="built-in parameter set")
        p.add_argument("--seed", type=int, metavar="U64")
        p.add_argument("--drops", type=int, metavar="N", help="Monte Carlo drops (0 = analytic only)")
        p.add_argument("--fidelity", choices=("full", "marks"))
        p.add_argument("--workers", type=int, metavar="N")
        p.add_argument("--out", metavar="PATH", help="output file ('-' for stdout)")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--association", choices=("union", "nearest", "max-sir"))
        p.add_argument("--etx-mode", choices=("correlated", "independent"))
        p.add_argument("--error-shape", choices=("k", "delta"))
        p.add_argument("--variance-mode", choices=("printed", "rederived"))
        p.add_argument("--dump-config", action="store_true",
                       help="print the resolved configuration and exit")
    return parser


def resolve_spec(args: argparse.Namespace, environ=os.environ) -> ExperimentSpec:
    """Combine config file or preset, subcommand and flags into one spec."""
    if args.config and args.preset:
        raise ConfigError("--config and --preset are mutually exclusive")
    if args.config:
        spec = load_config(args.config)
    else:
        spec = parse_config(PRESETS[args.preset or "baseline"])
    experiment = {"mode": args.mode}
    if args.mode == "rate" and spec.experiment.sweep == "t_db":
        # the rate integrates over every threshold, so sweep a common impairment instead
        experiment.update(sweep="kappa", values=(0.0, 0.04, 0.08, 0.15))
    if args.mode == "compare":
        experiment["scheme"] = "custom"
    spec = spec.with_overrides("experiment", **experiment)
    seed = args.seed
    if seed is None and environ.get("HCN_SEED"):
        try:
            seed = int(environ["HCN_SEED"])
        except ValueError:
            raise ConfigError(f"HCN_SEED: not an integer ({environ['HCN_SEED']!r})") from None
    mc = {k: v for k, v in (("seed", seed), ("n_drops", args.drops),
                            ("fidelity", args.fidelity), ("workers", args.workers)) if v is not None}
    if mc:
        spec = spec.with_overrides("mc", **mc)
    model = {
        k: v for k, v in (
            ("association", args.association and args.association.replace("-", "_")),
            ("etx_mode", args.etx_mode),
            ("error_shape", args.error_shape),
            ("variance_mode", args.variance_mode),
        ) if v is not None
    }
    if model:
        spec = spec.with_overrides("model", **model)
    output = {k: v for k, v in (("path", args.out), ("format", args.format)) if v is not None}
    if output:
        spec = spec.with_overrides("output", **output)
    return spec


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        spec = resolve_spec(args)
    except ConfigError as exc:
        print(f"hcnrathi: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.dump_config:
        sys.stdout.write(dump_config(spec))
        return EXIT_OK
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        result = run_experiment(spec)
    text = format_rows(result, spec, spec.output.format)
    if spec.output.path in ("", "-"):
        sys.stdout.write(text)
    else:
        with open(spec.output.path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    s = result.summary
    print(
        f"hcnrathi: {s['mode']}: {s['rows']} rows, {s['violations']} bound violations, "
        f"{s['warnings']} numerical warnings, {s['seconds']:.2f} s",
        file=sys.stderr,
    )
    return result.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
