"""Command-line interface: simulate / generate / train / calibrate / backtest / report.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Every run writes a manifest (config hash, seeds, versions) next to its
outputs, sufficient to reproduce them bit-exactly.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from datetime import date as Date, timedelta
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import dataio, riskmetrics, trainer
from .backtest import (HedgePlan, make_parametric_delta_source, make_rl_delta_source,
                       run_hedge, select_contract)
from .calibration import (MODEL_BS, MODEL_HESTON, MODEL_JD, OptionSlice, calibrate,
                          params_vector)
from .errors import (CalibrationFailedError, DataError, InsufficientDataError,
                     NumericError, ParameterError, RlhedgeError, TrainingFailedError)
from .marketsim import GbmParams, simulate_batch
from .neuralpolicy import GAUSSIAN_POLICY, SCALAR_VALUE, NetSpec
from .pricers import (BsParams, HestonParams, JumpDiffusionParams, ModelParams,
                      OptionContract, model_prices_strikes)
from .qlbs import QlbsConfig, QlbsEnv
from .rlop import RlopConfig, RlopEnv

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

RL_MODELS = ("qlbs", "rlop")
PARAMETRIC_MODELS = (MODEL_BS, MODEL_JD, MODEL_HESTON)

MONEYNESS_SUBSETS = {
    "whole": lambda m: True,
    "lt1": lambda m: m < 1.0,
    "gt1": lambda m: m > 1.0,
    "gt103": lambda m: m > 1.03,
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _fmt(value: float) -> str:
    return repr(float(value))


def _gbm_from_config(cfg: dict) -> GbmParams:
    g = cfg["gbm"]
    return GbmParams(mu=g["mu"], sigma=g["sigma"], r=g["r"], s0=g["s0"],
                     horizon_steps=g["horizon_steps"], dt=g["dt"])


def _out_dir(args, cfg) -> Path:
    out = Path(args.out_dir if args.out_dir else cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_config_reference(args) -> int:
    text = json.dumps(config_mod.DEFAULTS, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    cfg = config_mod.load_config(args.config)
    out = _out_dir(args, cfg)
    gbm = _gbm_from_config(cfg)
    seed = cfg["seed"] + config_mod.SEED_OFFSET_SIMULATE
    prices = simulate_batch(gbm, seed, args.paths)
    path = out / "paths.csv"
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["schema_version", "path_id", "seed", "step", "price"])
        for i in range(args.paths):
            for t in range(gbm.horizon_steps + 1):
                writer.writerow([dataio.SCHEMA_VERSION, i, seed + i, t, _fmt(prices[i, t])])
    dataio.write_manifest(out, "simulate", cfg, sys.argv[1:], [str(path)])
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_generate(args) -> int:
    cfg = config_mod.load_config(args.config)
    out = _out_dir(args, cfg)
    gen = cfg["generate"]
    rows, sidecar = dataio.generate_synthetic(
        kind=gen["kind"], model_cfg=gen["model"], n_days=gen["n_days"],
        expiry_days=gen["expiry_days"], moneyness_grid=gen["moneyness_grid"],
        noise_bp=gen["noise_bp"], gbm=_gbm_from_config(cfg),
        start_date=gen["start_date"],
        seed=cfg["seed"] + config_mod.SEED_OFFSET_GENERATE)
    slice_path = out / "slices.csv"
    truth_path = out / "slices_truth.json"
    dataio.write_slices(slice_path, rows)
    truth_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")
    dataio.write_manifest(out, "generate", cfg, sys.argv[1:],
                          [str(slice_path), str(truth_path)])
    print(f"wrote {slice_path} ({len(rows)} rows) and {truth_path}")
    return EXIT_OK


def _train_env(cfg: dict, method: str):
    gbm = _gbm_from_config(cfg)
    tr = cfg["train"]
    if method == "qlbs":
        section = cfg["qlbs"]
        contract = OptionContract(strike=section["strike"],
                                  expiry_steps=gbm.horizon_steps,
                                  tau_years=gbm.horizon_steps * gbm.dt)
        env_cfg = QlbsConfig(gbm=gbm, contract=contract,
                             lambda_risk=section["lambda_risk"],
                             epsilon_tc=section["epsilon_tc"],
                             batch_paths=tr["episodes_per_batch"])
        env = QlbsEnv(env_cfg)
        extra_meta = {"lambda_risk": section["lambda_risk"],
                      "epsilon_tc": section["epsilon_tc"]}
        seed_offset = config_mod.SEED_OFFSET_TRAIN_QLBS
    else:
        section = cfg["rlop"]
        env_cfg = RlopConfig(gbm=gbm, strike=section["strike"],
                             epsilon_tc=section["epsilon_tc"],
                             penalty_kind=section["penalty_kind"],
                             premium_mode=section["premium_mode"],
                             fixed_w0=section["fixed_w0"],
                             batch_paths=tr["episodes_per_batch"])
        env = RlopEnv(env_cfg)
        extra_meta = {"epsilon_tc": section["epsilon_tc"],
                      "penalty_kind": section["penalty_kind"]}
        seed_offset = config_mod.SEED_OFFSET_TRAIN_RLOP
    meta = {"method": method, "mu": gbm.mu, "sigma": gbm.sigma, "r": gbm.r,
            "s0": gbm.s0, "dt": gbm.dt, "horizon_steps": gbm.horizon_steps,
            "strike": section["strike"], **extra_meta}
    return env, meta, seed_offset


def _cmd_train(args) -> int:
    cfg = config_mod.load_config(args.config)
    out = _out_dir(args, cfg)
    method = args.method
    env, meta, seed_offset = _train_env(cfg, method)
    tr = cfg["train"]
    tcfg = trainer.TrainConfig(
        episodes_per_batch=tr["episodes_per_batch"], n_batches=tr["n_batches"],
        lr_policy=tr["lr_policy"], lr_value=tr["lr_value"],
        seed=cfg["seed"] + seed_offset, eval_paths=tr["eval_paths"],
        convergence_window=tr["convergence_window"],
        convergence_tol=tr["convergence_tol"])
    policy_spec = NetSpec(input_dim=env.state_dim, hidden_width=tr["hidden_width"],
                          n_blocks=tr["n_blocks"], head=GAUSSIAN_POLICY)
    value_spec = NetSpec(input_dim=env.state_dim, hidden_width=tr["hidden_width"],
                         n_blocks=tr["n_blocks"], head=SCALAR_VALUE)
    log_path = out / f"train_{method}.jsonl"
    report, ckpt = trainer.train(env, policy_spec, value_spec, tcfg, meta=meta,
                                 log_path=log_path)
    price, se = trainer.evaluate(env, ckpt, tcfg.eval_paths,
                                 tcfg.seed + trainer.EVAL_SEED_OFFSET)
    ckpt_path = out / f"checkpoint_{method}.npz"
    trainer.save_checkpoint(ckpt_path, ckpt)
    dataio.write_manifest(out, f"train_{method}", cfg, sys.argv[1:],
                          [str(ckpt_path), str(log_path)])
    print(f"{method}: price={price:.6f} se={se:.6f} batches={len(report.mean_return)} "
          f"stop={report.stop_reason} checkpoint={ckpt_path}")
    return EXIT_OK


def _params_to_dict(model: ModelParams) -> dict:
    if isinstance(model, BsParams):
        return {"sigma": model.sigma}
    if isinstance(model, JumpDiffusionParams):
        return {"sigma": model.sigma, "jump_intensity": model.jump_intensity,
                "jump_mean_log": model.jump_mean_log, "jump_std_log": model.jump_std_log}
    if isinstance(model, HestonParams):
        return {"v0": model.v0, "kappa": model.kappa, "theta": model.theta,
                "xi": model.xi, "rho": model.rho}
    raise ParameterError(f"unknown params {type(model).__name__}")


def _params_from_dict(kind: str, d: dict) -> ModelParams:
    if kind == MODEL_BS:
        return BsParams(**d)
    if kind == MODEL_JD:
        return JumpDiffusionParams(**d)
    if kind == MODEL_HESTON:
        return HestonParams(**d)
    raise ParameterError(f"unknown model kind {kind!r}")


def _slice_model_prices(option_slice: OptionSlice, model: ModelParams) -> list:
    prices = []
    for quote in option_slice.quotes:
        arr = model_prices_strikes(model, quote.forward_quote,
                                   [quote.contract.strike], quote.contract.tau_years)
        prices.append(float(arr[0]))
    return prices


def _subset_slice(option_slice: OptionSlice, prices, predicate):
    quotes, kept = [], []
    for quote, price in zip(option_slice.quotes, prices):
        if predicate(quote.contract.strike / quote.forward_quote.forward):
            quotes.append(quote)
            kept.append(price)
    return OptionSlice(date=option_slice.date, quotes=quotes), kept


def _cmd_calibrate(args) -> int:
    slices = dataio.ingest(args.slices)
    cfg = config_mod.load_config(args.config) if args.config else dict(config_mod.DEFAULTS)
    out = _out_dir(args, cfg)
    models = [m.strip() for m in args.model.split(",")]
    for model in models:
        if model not in PARAMETRIC_MODELS:
            raise _UsageError(f"unknown model {model!r}")
    restarts = cfg["backtest"]["calibration_restarts"]
    params_path = out / "params.csv"
    iv_path = out / "ivrmse_days.csv"
    n_failed = 0
    with open(params_path, "w", newline="", encoding="utf-8") as p_handle, \
            open(iv_path, "w", newline="", encoding="utf-8") as i_handle:
        p_writer = csv.writer(p_handle)
        p_writer.writerow(["schema_version", "date", "model", "objective",
                           "n_quotes", "converged", "iterations", "params_json"])
        i_writer = csv.writer(i_handle)
        i_writer.writerow(["schema_version", "date", "model", "subset", "value",
                           "n_used", "n_dropped"])
        for option_slice in slices:
            for model in models:
                try:
                    result = calibrate(option_slice, model, n_restarts=restarts)
                except (CalibrationFailedError, InsufficientDataError) as exc:
                    n_failed += 1
                    print(f"calibration skipped {option_slice.date} {model}: {exc}",
                          file=sys.stderr)
                    continue
                p_writer.writerow([
                    dataio.SCHEMA_VERSION, option_slice.date.isoformat(), model,
                    _fmt(result.objective), result.n_quotes, int(result.converged),
                    result.iterations,
                    config_mod.canonical_json(_params_to_dict(result.model)),
                ])
                prices = _slice_model_prices(option_slice, result.model)
                for subset, predicate in MONEYNESS_SUBSETS.items():
                    sub_slice, sub_prices = _subset_slice(option_slice, prices, predicate)
                    if not sub_slice.quotes:
                        continue
                    try:
                        day = riskmetrics.ivrmse_day(sub_slice, sub_prices)
                    except InsufficientDataError:
                        continue
                    i_writer.writerow([
                        dataio.SCHEMA_VERSION, option_slice.date.isoformat(), model,
                        subset, _fmt(day.value), day.n_used, day.n_dropped,
                    ])
    dataio.write_manifest(out, "calibrate", cfg, sys.argv[1:],
                          [str(params_path), str(iv_path)])
    print(f"wrote {params_path} and {iv_path} ({n_failed} day-model fits skipped)")
    return EXIT_OK


def _load_params_csv(path) -> dict:
    """(date_iso, model) -> ModelParams from a calibrate output file."""
    table = {}
    with open(path, newline="", encoding="utf-8") as handle:
        for record in csv.DictReader(handle):
            table[(record["date"], record["model"])] = _params_from_dict(
                record["model"], json.loads(record["params_json"]))
    return table


def _cmd_backtest(args) -> int:
    cfg = config_mod.load_config(args.config)
    out = _out_dir(args, cfg)
    slices = dataio.ingest(args.slices)
    closes = dataio.underlying_series(args.slices)
    models = [m.strip() for m in args.models.split(",")]
    for model in models:
        if model not in PARAMETRIC_MODELS + RL_MODELS:
            raise _UsageError(f"unknown model {model!r}")
    params_table = _load_params_csv(args.params) if args.params else {}
    cost_rate = cfg["backtest"]["cost_rate"] if args.cost_rate is None else args.cost_rate
    restarts = cfg["backtest"]["calibration_restarts"]
    checkpoints = {}
    for rl in RL_MODELS:
        if rl in models:
            ckpt_path = cfg["backtest"][f"checkpoint_{rl}"]
            if ckpt_path is None:
                raise DataError(f"backtest.checkpoint_{rl} required for model {rl}")
            checkpoints[rl] = trainer.load_checkpoint(ckpt_path)

    bucket_bounds = {int(k): tuple(v) for k, v in cfg["buckets"]["bounds"].items()}
    last_date = max(closes)
    rows = []
    for option_slice in slices:
        for bucket in cfg["buckets"]["centers"]:
            for target in cfg["moneyness_targets"]:
                try:
                    quote = select_contract(option_slice, target, bucket, bucket_bounds)
                except DataError:
                    continue
                n_days = quote.contract.expiry_steps
                expiry = option_slice.date + timedelta(days=n_days)
                if expiry > last_date:
                    continue  # realized path not fully observed
                try:
                    path = np.array([closes[option_slice.date + timedelta(days=k)]
                                     for k in range(n_days + 1)])
                except KeyError:
                    continue  # gap in the realized path
                tau = quote.contract.tau_years
                r = -math.log(quote.forward_quote.discount) / tau
                for model in models:
                    row = _run_one_backtest(
                        option_slice, quote, path, model, params_table, checkpoints,
                        cost_rate, r, restarts, cfg["asset"], bucket, target)
                    rows.append(row)
    if not rows:
        raise DataError("no backtestable (day, bucket, target) combinations")
    suffix = f"c{int(round(cost_rate * 1e4))}bp"
    out_path = out / f"outcomes_{suffix}.csv"
    dataio.write_outcomes(out_path, rows)
    dataio.write_manifest(out, f"backtest_{suffix}", cfg, sys.argv[1:], [str(out_path)])
    n_ok = sum(1 for row in rows if row.status == "ok")
    print(f"wrote {out_path} ({n_ok}/{len(rows)} ok)")
    return EXIT_OK


def _run_one_backtest(option_slice, quote, path, model, params_table, checkpoints,
                      cost_rate, r, restarts, asset, bucket, target) -> dataio.OutcomeRow:
    date_iso = option_slice.date.isoformat()
    failed = dataio.OutcomeRow(
        date=date_iso, asset=asset, model=model, bucket=bucket,
        target_moneyness=target, pnl_net=math.nan, tc_total=math.nan,
        xi=math.nan, n_rebalances=0, status="failed")
    try:
        if model in RL_MODELS:
            source = make_rl_delta_source(checkpoints[model], quote.contract.strike)
        else:
            key = (date_iso, model)
            if key in params_table:
                fitted = params_table[key]
            else:
                fitted = calibrate(option_slice, model, n_restarts=restarts).model
            source = make_parametric_delta_source(fitted, quote.contract.strike,
                                                  r, dataio.SYNTH_DT)
        plan = HedgePlan(delta_source=source, cost_rate=cost_rate,
                         premium=quote.mid_price, label=model)
        outcome = run_hedge(plan, path, quote.contract, r, dataio.SYNTH_DT,
                            path_id=date_iso)
    except (CalibrationFailedError, InsufficientDataError, NumericError, DataError):
        return failed
    if outcome.status != "ok":
        return failed
    return dataio.OutcomeRow(
        date=date_iso, asset=asset, model=model, bucket=bucket,
        target_moneyness=target, pnl_net=outcome.pnl_net,
        tc_total=outcome.tc_total, xi=outcome.xi,
        n_rebalances=outcome.n_rebalances, status="ok")


def _target_str(target: float) -> str:
    return f"{target:.2f}".replace(".", "p")


def _cmd_report(args) -> int:
    rows = dataio.read_outcomes(args.outcomes)
    out = Path(args.out_dir if args.out_dir else "out")
    out.mkdir(parents=True, exist_ok=True)
    groups = {}
    failed_counts = {}
    for row in rows:
        key = (row.asset, row.bucket, row.target_moneyness)
        if row.status == "ok":
            groups.setdefault(key, {}).setdefault(row.model, []).append(row)
        else:
            failed_counts[(key, row.model)] = failed_counts.get((key, row.model), 0) + 1

    outputs = []
    summary = {"schema_version": dataio.SCHEMA_VERSION, "settings": {}}
    tail_path = out / "tail_report.csv"
    risk_path = out / "risk_cost.csv"
    score_path = out / "scorecard.csv"
    with open(tail_path, "w", newline="", encoding="utf-8") as t_handle, \
            open(risk_path, "w", newline="", encoding="utf-8") as r_handle, \
            open(score_path, "w", newline="", encoding="utf-8") as s_handle:
        t_writer = csv.writer(t_handle)
        t_writer.writerow(["schema_version", "asset", "bucket", "target_moneyness",
                           "model", "es_05", "es_10", "var_05", "var_10",
                           "shortfall_prob", "n_days", "n_failed"])
        r_writer = csv.writer(r_handle)
        r_writer.writerow(["schema_version", "asset", "bucket", "target_moneyness",
                           "model", "mean_tc", "mean_tc_lo", "mean_tc_hi",
                           "rmse_xi", "rmse_xi_lo", "rmse_xi_hi", "n_days"])
        s_writer = csv.writer(s_handle)
        s_writer.writerow(["schema_version", "asset", "bucket", "target_moneyness",
                           "best_es_05", "best_es_10", "best_shortfall_prob",
                           "n_days"])
        for key in sorted(groups):
            asset, bucket, target = key
            by_model = groups[key]
            setting_summary = {}
            for model in sorted(by_model):
                model_rows = by_model[model]
                pnls = [r.pnl_net for r in model_rows]
                tail = riskmetrics.tail_report(pnls)
                point = riskmetrics.rmse_xi([r.xi for r in model_rows],
                                            [r.tc_total for r in model_rows])
                n_failed = failed_counts.get((key, model), 0)
                t_writer.writerow([
                    dataio.SCHEMA_VERSION, asset, bucket, _fmt(target), model,
                    _fmt(tail.es_05), _fmt(tail.es_10), _fmt(tail.var_05),
                    _fmt(tail.var_10), _fmt(tail.shortfall_prob), tail.n_days,
                    n_failed])
                r_writer.writerow([
                    dataio.SCHEMA_VERSION, asset, bucket, _fmt(target), model,
                    _fmt(point.mean_tc), _fmt(point.mean_tc_ci[0]),
                    _fmt(point.mean_tc_ci[1]), _fmt(point.rmse_xi),
                    _fmt(point.rmse_xi_ci[0]), _fmt(point.rmse_xi_ci[1]),
                    len(model_rows)])
                ecdf_path = out / (f"ecdf_{asset}_{bucket}_"
                                   f"{_target_str(target)}_{model}.csv")
                with open(ecdf_path, "w", newline="", encoding="utf-8") as e_handle:
                    e_writer = csv.writer(e_handle)
                    e_writer.writerow(["schema_version", "value", "cum_prob"])
                    for value, prob in tail.ecdf:
                        e_writer.writerow([dataio.SCHEMA_VERSION, _fmt(value), _fmt(prob)])
                outputs.append(str(ecdf_path))
                setting_summary[model] = {
                    "es_05": tail.es_05, "es_10": tail.es_10,
                    "var_05": tail.var_05, "var_10": tail.var_10,
                    "shortfall_prob": tail.shortfall_prob,
                    "mean_tc": point.mean_tc, "mean_tc_ci": list(point.mean_tc_ci),
                    "rmse_xi": point.rmse_xi, "rmse_xi_ci": list(point.rmse_xi_ci),
                    "n_days": tail.n_days, "n_failed": n_failed,
                }
            card = riskmetrics.scorecard(
                {m: [r.pnl_net for r in by_model[m]] for m in by_model})
            n_days = max(card["n_days"].values())
            s_writer.writerow([
                dataio.SCHEMA_VERSION, asset, bucket, _fmt(target),
                f"{card['es_05']['winner']} ({card['es_05']['value']:.4g})",
                f"{card['es_10']['winner']} ({card['es_10']['value']:.4g})",
                f"{card['shortfall_prob']['winner']} ({card['shortfall_prob']['value']:.4g})",
                n_days])
            summary["settings"][f"{asset}|{bucket}|{target:g}"] = {
                "models": setting_summary,
                "scorecard": {c: {"winner": card[c]["winner"], "value": card[c]["value"]}
                              for c in ("es_05", "es_10", "shortfall_prob")},
            }
    outputs += [str(tail_path), str(risk_path), str(score_path)]

    if args.ivrmse_days:
        iv_table = {}
        with open(args.ivrmse_days, newline="", encoding="utf-8") as handle:
            for record in csv.DictReader(handle):
                key = (record["model"], record["subset"])
                iv_table.setdefault(key, []).append(float(record["value"]))
        models = sorted({m for m, _ in iv_table})
        iv_path = out / "ivrmse.csv"
        with open(iv_path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["schema_version", "subset"] + models)
            for subset in ("whole", "lt1", "gt1", "gt103"):
                row = [dataio.SCHEMA_VERSION, subset]
                for model in models:
                    values = iv_table.get((model, subset))
                    row.append(_fmt(riskmetrics.equal_day_mean(values)) if values else "")
                writer.writerow(row)
        summary["ivrmse"] = {
            f"{model}|{subset}": riskmetrics.equal_day_mean(values)
            for (model, subset), values in sorted(iv_table.items())}
        outputs.append(str(iv_path))

    summary_path = out / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                            encoding="utf-8")
    outputs.append(str(summary_path))
    dataio.write_manifest(out, "report", None, sys.argv[1:], outputs)
    print(f"wrote {summary_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="rlhedge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("config-reference", help="emit the default config with all keys")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_config_reference)

    p = sub.add_parser("simulate", help="simulate GBM paths to CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--paths", type=int, default=10)
    p.add_argument("--out-dir")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("generate", help="generate synthetic option chains")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("train", help="train a hedging policy")
    p.add_argument("--method", choices=RL_MODELS, required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("calibrate", help="per-day least-squares calibration")
    p.add_argument("--model", required=True,
                   help="comma-separated subset of bs,jd,heston")
    p.add_argument("--slices", required=True)
    p.add_argument("--config")
    p.add_argument("--out-dir")
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("backtest", help="realized-path daily delta hedging")
    p.add_argument("--config", required=True)
    p.add_argument("--slices", required=True)
    p.add_argument("--models", required=True,
                   help="comma-separated subset of bs,jd,heston,qlbs,rlop")
    p.add_argument("--params", help="params.csv from calibrate (else refit)")
    p.add_argument("--cost-rate", type=float, default=None,
                   help="override backtest.cost_rate")
    p.add_argument("--out-dir")
    p.set_defaults(func=_cmd_backtest)

    p = sub.add_parser("report", help="tail/risk-cost/IVRMSE tables from outcomes")
    p.add_argument("--outcomes", required=True)
    p.add_argument("--ivrmse-days", help="ivrmse_days.csv from calibrate")
    p.add_argument("--out-dir")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except (DataError, ParameterError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, CalibrationFailedError, TrainingFailedError,
            InsufficientDataError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except RlhedgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
