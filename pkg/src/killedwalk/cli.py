"""Reproducible batch front-end.

Every run resolves its configuration (file plus flag overrides, flags
winning), executes one subcommand, and writes the data file together with
a manifest that echoes the fully resolved configuration, the library
version and the master seed.  Feeding the manifest back through --config
reproduces the data files byte for byte, whatever --threads says: all
randomness is keyed per work item, never per worker.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field

from . import __version__
from .env import Environment, make_distribution, sample_environment
from .entropy import OptimizerConfig, minimize_variational
from .line_solver import F_limit, green_function_window, two_point_a
from .lyapunov import estimate_alpha_mc, estimate_alpha_ergodic, estimate_beta
from .tree import TreeConfig, first_passage_gf, reduce_to_line, sigma_finite_prob

COMMANDS = ("alpha", "beta", "variational", "tree-reduce", "green", "selftest")

CSV_COLUMNS = {
    "alpha": ["method", "value", "ci_halfwidth", "n_samples", "trunc_bias", "n_dropped"],
    "alpha-ergodic": ["k", "a_over_k"],
    "beta": ["n", "b_over_n", "method", "stat_err", "trunc_err"],
    "variational": ["theta", "E_Q_F", "kl_per_site", "objective"],
    "green": ["n", "g_value", "neg_log_g", "ratio"],
    "tree-reduce": ["site", "rho_lower", "rho_mid", "rho_upper", "h_lower", "h_upper"],
    "selftest": ["check", "value", "expected", "abs_error", "status"],
}


@dataclass
class RunConfig:
    """Fully resolved description of one batch run."""

    command: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    threads: int = 1
    format: str = "csv"
    out: str | None = None

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "params": self.params,
            "seed": self.seed,
            "threads": self.threads,
            "format": self.format,
            "out": self.out,
        }


class ConfigError(ValueError):
    def __init__(self, message: str, config_field: str = ""):
        super().__init__(message)
        self.config_field = config_field


def _fmt(value) -> str:
    """Stable text form: shortest float round-trip, so identical numbers
    always serialize to identical bytes."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def _write_csv(path: str, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(col)) for col in columns])


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _dist_from(params: dict):
    spec = params.get("distribution")
    if spec is None:
        raise ConfigError("missing distribution spec", config_field="distribution")
    try:
        return make_distribution(spec)
    except ValueError as exc:
        raise ConfigError(f"bad distribution: {exc}", config_field="distribution") from exc


def run(config: RunConfig) -> dict:
    """Execute one subcommand; returns {"rows", "columns", "summary"}."""
    handler = {
        "alpha": _run_alpha,
        "beta": _run_beta,
        "variational": _run_variational,
        "tree-reduce": _run_tree_reduce,
        "green": _run_green,
        "selftest": _run_selftest,
    }.get(config.command)
    if handler is None:
        raise ConfigError(f"unknown command {config.command!r}", config_field="command")
    return handler(config)


def _run_alpha(config: RunConfig) -> dict:
    p = config.params
    dist = _dist_from(p)
    method = p.get("method", "mc")
    if method == "mc":
        est = estimate_alpha_mc(
            dist,
            n_samples=int(p.get("n_samples", 1000)),
            tol=float(p.get("tol", 1e-7)),
            seed=config.seed,
            threads=config.threads,
        )
        row = {
            "method": est.method,
            "value": est.value,
            "ci_halfwidth": est.ci_halfwidth,
            "n_samples": est.n_samples,
            "trunc_bias": est.trunc_bias,
            "n_dropped": est.params.get("n_dropped", 0),
        }
        return {"rows": [row], "columns": CSV_COLUMNS["alpha"], "summary": row}
    if method == "ergodic":
        ratios = estimate_alpha_ergodic(
            dist,
            n=int(p.get("n", 2000)),
            r_offset=int(p.get("r_offset", 64)),
            seed=config.seed,
            stream_id=int(p.get("stream_id", 0)),
        )
        rows = [{"k": k, "a_over_k": v} for k, v in ratios]
        summary = {"method": "quenched-ergodic", "value": rows[-1]["a_over_k"], "n": len(rows)}
        return {"rows": rows, "columns": CSV_COLUMNS["alpha-ergodic"], "summary": summary}
    raise ConfigError(f"alpha method must be 'mc' or 'ergodic', got {method!r}", "method")


def _run_beta(config: RunConfig) -> dict:
    p = config.params
    dist = _dist_from(p)
    est = estimate_beta(
        dist,
        n_grid=p.get("n_grid", [2, 4, 8]),
        r_ratio=float(p.get("r_ratio", 4.0)),
        method=p.get("method", "auto"),
        seed=config.seed,
        n_paths=int(p.get("n_paths", 200_000)),
        threads=config.threads,
    )
    rows = [
        {
            "n": row["n"],
            "b_over_n": row["b_over_n"],
            "method": row["method"],
            "stat_err": row["se_b_over_n"],
            "trunc_err": row["trunc_over_n"],
        }
        for row in est.params["grid"]
    ]
    summary = {
        "value": est.value,
        "ci_halfwidth": est.ci_halfwidth,
        "method": est.method,
        "min_over_grid": est.params["min_over_grid"],
        "min_over_grid_n": est.params["min_over_grid_n"],
    }
    return {"rows": rows, "columns": CSV_COLUMNS["beta"], "summary": summary}


def _run_variational(config: RunConfig) -> dict:
    p = config.params
    dist = _dist_from(p)
    cfg = OptimizerConfig(
        n_samples=int(p.get("n_samples", 1000)),
        tol=float(p.get("tol", 1e-7)),
        seed=config.seed,
        theta_lo=float(p.get("theta_lo", -1.0)),
        theta_hi=float(p.get("theta_hi", 6.0)),
        n_grid=int(p.get("n_grid", 25)),
        param_tol=float(p.get("param_tol", 1e-4)),
        max_evals=int(p.get("max_evals", 200)),
        threads=config.threads,
    )
    beta_cfg = p.get("beta", {})
    if beta_cfg is None:
        beta_cfg = {}
    beta_hat = None
    if beta_cfg is not False:
        beta_hat = estimate_beta(
            dist,
            n_grid=beta_cfg.get("n_grid", [2, 4, 8]),
            r_ratio=float(beta_cfg.get("r_ratio", 4.0)),
            seed=config.seed,
            n_paths=int(beta_cfg.get("n_paths", 100_000)),
            threads=config.threads,
        )
    report = minimize_variational(
        dist, family=p.get("family", "exponential-tilt"), optimizer_cfg=cfg, beta_hat=beta_hat
    )
    rows = [
        {k: row[k] for k in ("theta", "E_Q_F", "kl_per_site", "objective")}
        for row in report.objective_curve
    ]
    summary = {
        "alpha_hat": report.alpha_hat.value,
        "alpha_ci": report.alpha_hat.ci_halfwidth,
        "beta_hat": beta_hat.value if beta_hat else None,
        "beta_ci": beta_hat.ci_halfwidth if beta_hat else None,
        "var_min_value": report.var_min_value,
        "var_min_theta": report.var_min_tilt.theta,
        "stat_halfwidth": report.stat_halfwidth,
        "trunc_budget": report.trunc_budget,
        "converged": report.converged,
        "n_evals": report.n_evals,
    }
    return {"rows": rows, "columns": CSV_COLUMNS["variational"], "summary": summary}


def _run_tree_reduce(config: RunConfig) -> dict:
    p = config.params
    dist = _dist_from(p)
    try:
        tree_cfg = TreeConfig(
            d=int(p.get("d", 3)),
            drift_p=p.get("drift_p"),
            depth_cap_D=int(p.get("depth_cap", 10)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), config_field="tree") from exc
    n = int(p.get("n", 8))
    model = reduce_to_line(
        tree_cfg, dist, n,
        seed=config.seed,
        stream_id=int(p.get("stream_id", 0)),
        r_ratio=float(p.get("r_ratio", 4.0)),
        threads=config.threads,
    )
    rows = [
        {
            "site": b.site_index,
            "rho_lower": b.rho_lower,
            "rho_mid": b.midpoint,
            "rho_upper": b.rho_upper,
            "h_lower": b.h_bracket.lower,
            "h_upper": b.h_bracket.upper,
        }
        for b in model.brackets
    ]
    r = model.env_mid.window_lo
    step = model.step_right_prob
    a_mid = two_point_a(model.env_mid, 0, n, r, step)
    a_low = two_point_a(model.env_lower, 0, n, r, step)
    a_high = two_point_a(model.env_upper, 0, n, r, step)
    summary = {
        "alpha_tilde_per_site": a_mid / n,
        "alpha_tilde_lower": a_low / n,
        "alpha_tilde_upper": a_high / n,
        "systematic_halfwidth": (a_high - a_low) / (2 * n),
        "step_right_prob": step,
        "n": n,
        "max_bracket_halfwidth": model.max_halfwidth,
    }
    return {
        "rows": rows,
        "columns": CSV_COLUMNS["tree-reduce"],
        "summary": summary,
        "environment": model.env_mid,
    }


def _run_green(config: RunConfig) -> dict:
    p = config.params
    window = tuple(p.get("window", (-100, 100)))
    env_file = p.get("environment_file")
    if env_file:
        env = Environment.load(env_file)
        window = (env.window_lo, env.window_hi)
    else:
        dist = _dist_from(p)
        env = sample_environment(dist, window, config.seed, int(p.get("stream_id", 0)))
    step = float(p.get("step_right_prob", 0.5))
    alpha_ref = p.get("alpha_ref")
    if alpha_ref is None:
        alpha_ref = F_limit(env, tol=float(p.get("tol", 1e-9)), p=step).a_value
    rows = []
    for n in p.get("n_values", [5, 10, 20]):
        n = int(n)
        g = green_function_window(env, 0, n, window, step)
        neg_log_g = -math.log(g) if g > 0 else math.inf
        rows.append(
            {"n": n, "g_value": g, "neg_log_g": neg_log_g, "ratio": neg_log_g / (n * alpha_ref)}
        )
    summary = {"alpha_ref": alpha_ref, "window": list(window)}
    return {"rows": rows, "columns": CSV_COLUMNS["green"], "summary": summary}


def _run_selftest(config: RunConfig) -> dict:
    """Closed-form identity suite; every row must pass at 1e-12."""
    import numpy as np

    checks = []

    def check(name, value, expected, tol=1e-12):
        err = abs(value - expected)
        checks.append(
            {
                "check": name,
                "value": value,
                "expected": expected,
                "abs_error": err,
                "status": "PASS" if err <= tol else "FAIL",
            }
        )

    check("sigma-finite-prob-d3", sigma_finite_prob(3), 0.8)
    check("sigma-finite-prob-d4", sigma_finite_prob(4), 0.6)
    for d in range(3, 11):
        check(f"first-passage-gf-d{d}", first_passage_gf(d, 1.0), 1.0 / (d - 1))
        gf = first_passage_gf(d, 1.0)
        lhs = sigma_finite_prob(d)
        rhs = 2.0 / d + ((d - 2.0) / d) * gf * lhs
        check(f"sigma-recursion-residual-d{d}", lhs - rhs, 0.0)
    for r in (-1, -4, -9):
        env = Environment(r, 1, np.zeros(1 - r + 1))
        check(f"gamblers-ruin-r{r}", F_limit(env, r_schedule=[r]).e_value, -r / (1.0 - r))
    const = make_distribution({"kind": "point", "value": -math.log(0.8)})
    env = sample_environment(const, (-64, 1), seed=0)
    check("constant-potential-one-step", F_limit(env, tol=1e-12).a_value, math.log(2.0), tol=1e-9)
    n_fail = sum(1 for row in checks if row["status"] == "FAIL")
    return {
        "rows": checks,
        "columns": CSV_COLUMNS["selftest"],
        "summary": {"n_checks": len(checks), "n_failed": n_fail},
        "failed": n_fail,
    }


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    file_cfg: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            loaded = json.load(fh)
        # a manifest is itself a valid config: unwrap its echoed run block
        file_cfg = loaded.get("run_config", loaded)
    command = args.command or file_cfg.get("command")
    if not command:
        raise ConfigError("no command given (flag or config file)", config_field="command")
    params = dict(file_cfg.get("params", {}))
    for key, value in (args.param or []):
        params[key] = value
    seed = args.seed if args.seed is not None else int(file_cfg.get("seed", 0))
    seed &= 0xFFFFFFFFFFFFFFFF  # master seed is a 64-bit word
    threads = args.threads if args.threads is not None else int(file_cfg.get("threads", 1))
    fmt = args.format or file_cfg.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {fmt!r}", config_field="format")
    out = args.out or file_cfg.get("out")
    return RunConfig(command=command, params=params, seed=seed, threads=threads, format=fmt, out=out)


def _parse_param(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise argparse.ArgumentTypeError("expected KEY=JSONVALUE")
    key, raw = text.split("=", 1)
    try:
        return key, json.loads(raw)
    except json.JSONDecodeError:
        return key, raw


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="killedwalk",
        description="survival-exponent laboratory for random walks killed by random potentials",
    )
    parser.add_argument("command", nargs="?", choices=COMMANDS, help="subcommand to run")
    parser.add_argument("--config", help="JSON config file (or a previously emitted manifest)")
    parser.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
    parser.add_argument("--threads", type=int, default=None, help="worker cap; never changes results")
    parser.add_argument("--format", choices=("csv", "json"), default=None)
    parser.add_argument("--out", help="output base path")
    parser.add_argument(
        "--param",
        "-P",
        action="append",
        type=_parse_param,
        metavar="KEY=JSON",
        help="override one params entry, e.g. -P n_samples=4000",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = None
    try:
        config = _resolve_config(args)
        result = run(config)
    except ConfigError as exc:
        record = {"error": str(exc), "field": exc.config_field, "command": args.command, "exit_code": 2}
        print(json.dumps(record), file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError) as exc:
        command = config.command if config else args.command
        record = {"error": str(exc), "field": "", "command": command, "exit_code": 1}
        print(json.dumps(record), file=sys.stderr)
        return 1

    base = config.out or f"killedwalk-{config.command}"
    data_path = f"{base}.{config.format}"
    manifest_path = f"{base}.manifest.json"
    outputs = {"data": data_path, "manifest": manifest_path}
    if config.command == "tree-reduce":
        env_path = f"{base}.rho-env.json"
        result["environment"].save(env_path)
        outputs["environment"] = env_path
    if config.format == "csv":
        _write_csv(data_path, result["columns"], result["rows"])
    else:
        _write_json(
            data_path,
            {"command": config.command, "rows": result["rows"], "summary": result["summary"]},
        )
    _write_json(
        manifest_path,
        {
            "killedwalk_version": __version__,
            "master_seed": config.seed,
            "run_config": config.to_dict(),
            "outputs": outputs,
        },
    )
    for key, value in result["summary"].items():
        print(f"{key}: {value}")
    for path in outputs.values():
        print(f"wrote {path}")
    if config.command == "selftest":
        for row in result["rows"]:
            print(f"[{row['status']}] {row['check']}: {row['value']!r} vs {row['expected']!r}")
        return 0 if result["failed"] == 0 else 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
