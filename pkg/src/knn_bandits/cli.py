"""Command-line entry point: ``run``, ``sweep`` and ``concentration``.

Exit codes: 0 success, 1 a concentration check failed, 2 invalid
configuration or arguments, 3 I/O failure.

``rounds_<rep>.csv`` columns (in order)::

    t, chosen_arm, k_chosen, reward, oracle_arm, oracle_reward,
    regret, pseudo_regret, cum_regret, cum_pseudo_regret

``sweep.csv`` columns: ``horizon, policy, mean_regret, stderr,
mean_pseudo_regret``. Floats are written with 17 significant digits
(``format(v, ".17g")``), which is locale independent; a missing standard
error (single replication) is an empty field.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .concentration import (
    SCHEMES,
    Bernoulli,
    BernoulliEnvelope,
    GaussianHalfSquare,
    StandardNormal,
    verify_bound,
)
from .config import ConfigModel, load_config, resolve, to_run_config
from .simulation import ROUND_FIELDS, ConfigError, simulate, summarize

OUTPUT_DIR_ENV = "KNN_BANDITS_OUTPUT_DIR"

EXIT_OK, EXIT_FAIL, EXIT_VALIDATION, EXIT_IO = 0, 1, 2, 3


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(format_value(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8", newline="\n")


def _csv_list(text: str, cast=str) -> list:
    return [cast(v) for v in text.split(",") if v.strip()]


def _apply_overrides(model: ConfigModel, args) -> ConfigModel:
    data = model.model_dump()
    if getattr(args, "horizon", None) is not None:
        data["horizon"] = args.horizon
    if getattr(args, "seed", None) is not None:
        data["master_seed"] = args.seed
    if getattr(args, "theta", None) is not None:
        data["policy"]["theta"] = args.theta
    if getattr(args, "replications", None) is not None:
        data["replications"] = args.replications
    if getattr(args, "jobs", None) is not None:
        data["n_jobs"] = args.jobs
    out = getattr(args, "output_dir", None) or os.environ.get(OUTPUT_DIR_ENV)
    if out:
        data["output"]["dir"] = out
    return type(model).model_validate(data)


def _load(args) -> ConfigModel:
    return resolve(_apply_overrides(load_config(args.config), args))


def cmd_run(args) -> int:
    model = _load(args)
    cfg = to_run_config(model)
    results = simulate(cfg)
    summary = summarize(results, cfg.horizon)
    out = Path(model.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    if "csv" in model.output.formats:
        for res in sorted(results, key=lambda r: r.replication):
            rows = [[getattr(rec, f) for f in ROUND_FIELDS] for rec in res.records]
            write_csv(out / f"rounds_{res.replication}.csv", ROUND_FIELDS, rows)
    if "json" in model.output.formats:
        write_json(out / "summary.json", {
            "artifact_version": __version__,
            "config": model.model_dump(),
            "seeds": [
                {"replication": r, "entropy": model.master_seed, "environment_spawn_key": [r, 0],
                 "policy_spawn_key": [r, 1]}
                for r in range(model.replications)
            ],
            "summary": summary.to_dict(),
        })
    return EXIT_OK


SWEEP_FIELDS = ("horizon", "policy", "mean_regret", "stderr", "mean_pseudo_regret")


def sweep_rows(model: ConfigModel, horizons, policies) -> list:
    rows = []
    for h in horizons:
        for kind in policies:
            data = model.model_dump()
            data["horizon"] = h
            data["policy"]["kind"] = kind
            if kind != model.policy.kind:
                data["policy"]["theta"] = None
            m = resolve(type(model).model_validate(data))
            cfg = to_run_config(m)
            s = summarize(simulate(cfg), h)
            rows.append([h, kind, s.mean_regret, s.stderr_regret, s.mean_pseudo_regret])
    return rows


def cmd_sweep(args) -> int:
    model = _load(args)
    horizons = _csv_list(args.horizons, int)
    if not horizons or horizons != sorted(horizons) or len(set(horizons)) != len(horizons):
        raise ConfigError("horizons", "horizons must be strictly ascending")
    policies = _csv_list(args.policies) if args.policies else [model.policy.kind]
    rows = sweep_rows(model, horizons, policies)
    out = Path(model.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "sweep.csv", SWEEP_FIELDS, rows)
    return EXIT_OK


def cmd_concentration(args) -> int:
    deltas = _csv_list(args.deltas, float)
    if not deltas or any(d <= 1 for d in deltas):
        raise ConfigError("deltas", "every delta must be > 1")
    if args.n < 2:
        raise ConfigError("n", "n must be >= 2")
    if args.replications < 1:
        raise ConfigError("replications", "replications must be >= 1")
    schemes = _csv_list(args.schemes)
    bad = [s for s in schemes if s not in SCHEMES]
    if bad or not schemes:
        raise ConfigError("schemes", f"unknown schemes {bad}; choose from {list(SCHEMES)}")
    if args.phi == "gaussian":
        bound, dist = GaussianHalfSquare(), StandardNormal()
    else:
        if args.xi_max is None:
            raise ConfigError("xi_max", "bernoulli envelope needs --xi-max")
        try:
            bound = BernoulliEnvelope(args.xi_max)
            dist = Bernoulli(args.xi_max if args.p is None else args.p)
        except ValueError as err:
            raise ConfigError("xi_max", str(err)) from None
        if dist.p > bound.xi_max:
            raise ConfigError("p", "Bernoulli mean must not exceed xi_max")
    rng = np.random.default_rng(args.seed)
    reports = verify_bound(bound, dist, args.n, deltas, args.replications, rng, schemes, args.coin_q)
    payload = [dict(r.to_dict(), envelope=bound.as_dict(), distribution=dist.as_dict())
               for r in reports]
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="knn-bandits", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="JSON run configuration")
        p.add_argument("--horizon", type=int)
        p.add_argument("--seed", type=int, help="override master_seed")
        p.add_argument("--theta", type=float)
        p.add_argument("--replications", type=int)
        p.add_argument("--jobs", type=int, help="parallel replications (joblib n_jobs)")
        p.add_argument("--output-dir", help=f"overrides output.dir and ${OUTPUT_DIR_ENV}")

    p_run = sub.add_parser("run", help="simulate one policy and write rounds/summary files")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="final regret for several horizons and policies")
    common(p_sweep)
    p_sweep.add_argument("--horizons", required=True, help="comma-separated ascending horizons")
    p_sweep.add_argument("--policies", help="comma-separated policy kinds (default: config policy)")
    p_sweep.set_defaults(func=cmd_sweep)

    p_conc = sub.add_parser("concentration", help="Monte Carlo check of the self-normalized tail bound")
    p_conc.add_argument("--phi", choices=("gaussian", "bernoulli"), default="gaussian")
    p_conc.add_argument("--xi-max", type=float)
    p_conc.add_argument("--p", type=float, help="Bernoulli mean of Z (default xi_max)")
    p_conc.add_argument("--n", type=int, default=1000)
    p_conc.add_argument("--deltas", default="3,5,8")
    p_conc.add_argument("--schemes", default=",".join(SCHEMES))
    p_conc.add_argument("--coin-q", type=float, default=0.5)
    p_conc.add_argument("--replications", type=int, default=100_000)
    p_conc.add_argument("--seed", type=int, default=0)
    p_conc.add_argument("--output", help="also write the JSON report here")
    p_conc.set_defaults(func=cmd_concentration)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
