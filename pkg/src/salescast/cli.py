"""Command-line entry point: ``salescast <command> [options]``.

Every command writes its results plus ``run_metadata.json`` into ``--out``.
Options can come from ``--config file.json`` (keys mirror the long flag names
with dashes as underscores); explicit flags win over the file.  Relative input
paths that do not exist are looked up under ``$SALESCAST_DATA_DIR``.
Outputs are staged in a temporary directory and only moved into place when
the command succeeds.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import shutil
import sys
import tempfile
import warnings
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd
import scipy

from . import __version__, metrics
from .errors import ConfigError, DataError, NumericalError, SalescastError

DATA_DIR_ENV = "SALESCAST_DATA_DIR"
METADATA = "run_metadata.json"


# ---------------------------------------------------------------------------
# helpers


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (Path,)):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def dump_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def resolve_input(path) -> Path:
    if path is None:
        raise ConfigError("missing required input path")
    p = Path(path)
    if p.exists():
        return p
    base = os.environ.get(DATA_DIR_ENV)
    if base and not p.is_absolute() and (Path(base) / p).exists():
        return Path(base) / p
    raise DataError(f"input file not found: {path}")


def require(args, *names):
    missing = ["--" + n.replace("_", "-") for n in names if getattr(args, n, None) in (None, "")]
    if missing:
        raise ConfigError(f"{args.command} requires {', '.join(missing)}")


def _split_list(v):
    if v is None:
        return None
    if isinstance(v, (list, tuple)):
        return [str(x) for x in v]
    return [s for s in str(v).split(",") if s]


def _parse_value(v: str):
    try:
        return json.loads(v)
    except json.JSONDecodeError:
        return v


def parse_params(items) -> dict:
    """``KEY=VALUE`` pairs (values parsed as JSON when possible) or a dict from config."""
    if items is None:
        return {}
    if isinstance(items, dict):
        return dict(items)
    out = {}
    for it in items:
        if "=" not in it:
            raise ConfigError(f"--param expects KEY=VALUE, got {it!r}")
        k, v = it.split("=", 1)
        out[k.strip()] = _parse_value(v)
    return out


class Outputs:
    """Staging area for result files."""

    def __init__(self, out_dir):
        self.final = Path(out_dir)
        parent = self.final.parent
        parent.mkdir(parents=True, exist_ok=True)
        self.stage = Path(tempfile.mkdtemp(prefix=".salescast-", dir=parent))
        self.files = []

    def path(self, name) -> Path:
        self.files.append(name)
        return self.stage / name

    def commit(self):
        self.final.mkdir(parents=True, exist_ok=True)
        for name in self.files:
            os.replace(self.stage / name, self.final / name)
        shutil.rmtree(self.stage, ignore_errors=True)

    def discard(self):
        shutil.rmtree(self.stage, ignore_errors=True)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def _versions():
    return {
        "salescast": __version__,
        "numpy": np.__version__,
        "pandas": pd.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args, out: Outputs, params):
    from . import synthdata as sd

    kind = args.kind
    if kind == "sales":
        spec = sd.GeneratorSpec(seed=args.seed, **params)
        frame, truth = sd.generate_sales(spec)
        from .core import write_csv

        write_csv(frame, out.path("data.csv"))
        dump_json(truth, out.path("truth.json"))
    elif kind == "demand":
        df = sd.generate_demand(seed=args.seed, **params)
        df.to_csv(out.path("demand.csv"), index=False, lineterminator="\n", float_format="%.10g")
    elif kind == "cases":
        p = {"alpha": 2.0, "beta": 1.5, "t0": 8.0, **params}
        t, cases = sd.generate_logistic_cases(seed=args.seed, **p)
        pd.DataFrame({"week": t, "cases": cases}).to_csv(
            out.path("cases.csv"), index=False, lineterminator="\n", float_format="%.10g"
        )
        dump_json(p, out.path("truth.json"))
    elif kind == "returns":
        shifts = {k: tuple(v) for k, v in params.pop("shifts", {}).items()}
        spec = sd.ReturnsSpec(seed=args.seed, shifts=shifts, **params)
        df = sd.generate_returns(spec)
        df.to_csv(out.path("returns.csv"), index=False, lineterminator="\n", float_format="%.10g")
    else:
        raise ConfigError(f"unknown synth kind {kind!r}")


def _read_frame(path, categorical):
    from .core import read_csv

    return read_csv(resolve_input(path), _split_list(categorical) or ())


def cmd_fit(args, out: Outputs, params):
    require(args, "train")
    from .learners import fit_learner

    train = _read_frame(args.train, args.categorical)
    features = _split_list(args.features)
    if args.model == "lasso" and args.lam is not None:
        params["lam"] = args.lam
    model = fit_learner(args.model, train, features, seed=args.seed, **params)
    payload = model.to_dict()
    payload["seed"] = args.seed
    dump_json(payload, out.path("model.json"))
    report = {"train": metrics.report(model.predict(train), train.target).to_dict()}
    if args.valid:
        valid = _read_frame(args.valid, args.categorical)
        report["validation"] = metrics.report(model.predict(valid), valid.target).to_dict()
    dump_json(report, out.path("metrics.json"))


def cmd_stack(args, out: Outputs, params):
    require(args, "data", "boundary")
    from .core import SplitSpec, time_split
    from .learners import fit_learner
    from .stacking import (build_meta_matrix, error_table, evaluate_stack, read_predictions,
                           stack_fit_bayes, stack_fit_lasso)

    frame = _read_frame(args.data, args.categorical)
    split = SplitSpec(args.boundary, args.oos)
    train = time_split(frame, split)[0]
    models = [
        fit_learner(name, train, _split_list(args.features), seed=args.seed, **params.get(name, {}))
        for name in (_split_list(args.models) or [])
    ]
    ext = read_predictions(resolve_input(args.predictions)) if args.predictions else None
    meta = build_meta_matrix(models, frame, split, external=ext,
                             stack_train_frac=args.stack_train_frac)
    if args.meta == "lasso":
        stacked = stack_fit_lasso(meta, args.lam)
    elif args.meta == "bayes":
        from .bayes import SamplerConfig

        cfg = SamplerConfig(args.draws, args.burn_in, args.chains, args.seed)
        stacked = stack_fit_bayes(meta, config=cfg, nonneg=args.nonneg)
        post = stacked.info.pop("samples")
        post.to_csv(out.path("meta_draws.csv"))
    else:
        raise ConfigError(f"unknown meta model {args.meta!r}")
    weights = stacked.to_dict()
    weights["validation"] = evaluate_stack(stacked, meta, "stack_train").to_dict()
    X_test, _ = meta.part("stack_test")
    if X_test.shape[0]:
        weights["out_of_sample"] = evaluate_stack(stacked, meta, "stack_test").to_dict()
    dump_json(weights, out.path("weights.json"))
    error_table(meta, stacked).to_csv(
        out.path("error_table.csv"), index=False, lineterminator="\n", float_format="%.6f"
    )
    meta.to_frame().to_csv(out.path("meta_matrix.csv"), index=False, lineterminator="\n",
                           float_format="%.10g")


def _sampler(args):
    from .bayes import SamplerConfig

    return SamplerConfig(args.draws, args.burn_in, args.chains, args.seed)


def _prior(args, params):
    from .bayes import PriorSpec

    overrides = {k: tuple(v) for k, v in params.get("priors", {}).items()}
    return PriorSpec(mean=args.prior_mean, sd=args.prior_sd, overrides=overrides,
                     constraint=args.constraint, fixed_nu=args.fixed_nu)


def cmd_bayes(args, out: Outputs, params):
    require(args, "data")
    from . import bayes

    prior = _prior(args, params)
    cfg = _sampler(args)
    model = args.model
    if model == "robust":
        df = pd.read_csv(resolve_input(args.data))
        xs = _split_list(args.x)
        if not xs:
            raise ConfigError("robust model needs --x columns")
        missing = [c for c in [*xs, args.y] if c not in df.columns]
        if missing:
            raise ConfigError(f"columns not in data: {missing}")
        post = bayes.fit_robust_linear(df[xs].to_numpy(float), df[args.y].to_numpy(float), prior,
                                       cfg, names=[f"beta_{c}" for c in xs],
                                       standardize=args.standardize)
    elif model == "logistic":
        frame = _read_frame(args.data, args.categorical)
        post = bayes.fit_logistic_trend(frame, prior, cfg)
        target = _read_frame(args.predict, args.categorical) if args.predict else frame
        pred = bayes.predict_logistic_trend(post, target, seed=args.seed)
        pred.to_csv(out.path("predictive.csv"), index=False, lineterminator="\n",
                    float_format="%.10g")
    elif model == "hierarchical":
        frame = _read_frame(args.data, args.categorical)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            post = bayes.fit_hierarchical(frame, prior, cfg, stores=_split_list(args.stores))
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    elif model == "epidemic":
        df = pd.read_csv(resolve_input(args.data))
        if not {"week", "cases"} <= set(df.columns):
            raise DataError("epidemic data needs columns week,cases")
        post = bayes.fit_epidemic(df["week"].to_numpy(float), df["cases"].to_numpy(float),
                                  prior, cfg)
        dump_json(bayes.epidemic_peak(post, args.start_date), out.path("peak.json"))
    elif model == "crisis":
        df = pd.read_csv(resolve_input(args.data))
        if not {"date", "return"} <= set(df.columns):
            raise DataError("crisis data needs columns date,return")
        periods = params.get("periods") or bayes.DEFAULT_CRISES
        post = bayes.fit_crisis_weights(df["date"], df["return"].to_numpy(float), periods,
                                        prior, cfg)
    else:
        raise ConfigError(f"unknown bayes model {model!r}")
    post.to_csv(out.path("draws.csv"))
    bayes.write_summary(post, out.path("summary.json"))


def cmd_trendnet(args, out: Outputs, params):
    require(args, "train")
    from .trendnet import TrendNetConfig, permutation_importance, train, write_telemetry

    tr = _read_frame(args.train, args.categorical)
    va = _read_frame(args.valid, args.categorical) if args.valid else None
    embed = {}
    for item in _split_list(args.embed) or []:
        name, _, dim = item.partition(":")
        embed[name] = int(dim or 4)
    cfg = TrendNetConfig(embed=embed, onehot=tuple(_split_list(args.onehot) or ()),
                         numeric=tuple(_split_list(args.numeric) or ()), epochs=args.epochs,
                         seed=args.seed, **params)
    net = train(tr, cfg, with_trend=not args.no_trend, valid_frame=va)
    net.save(out.path("model.json"))
    write_telemetry(net, out.path("telemetry.csv"))
    if va is not None:
        pred = net.predict(va)
        pd.DataFrame({"date": va.dates.astype(str), "entity": va.entity, "model_name": "trendnet",
                      "prediction": pred}).to_csv(out.path("predictions.csv"), index=False,
                                                  lineterminator="\n", float_format="%.10g")
        dump_json(metrics.report(pred, va.target).to_dict(), out.path("metrics.json"))
        if len(va) >= 2:
            imp = permutation_importance(net, va, seed=args.seed)
            pd.DataFrame({"feature": list(imp), "importance": list(imp.values())}).to_csv(
                out.path("importance.csv"), index=False, lineterminator="\n", float_format="%.10g"
            )


def cmd_rl(args, out: Outputs, params):
    from .rl import (PRICING_AGENT, PRICING_PRESETS, SUPPLY_AGENT, AgentConfig, PricingEnv,
                     PricingEnvConfig, SupplyEnv, SupplyEnvConfig, expected_pricing_rewards,
                     read_demand_csv, train_agent)
    from .rl import dqn

    env_params = params.get("env", {})
    agent_params = params.get("agent", {})
    if args.env == "pricing":
        if args.preset not in PRICING_PRESETS:
            raise ConfigError(f"unknown preset {args.preset!r}; choose {sorted(PRICING_PRESETS)}")
        env = PricingEnv(PricingEnvConfig(**{**PRICING_PRESETS[args.preset], **env_params}))
        base = {**PRICING_AGENT, "decay_every": "episode", "episodes": 300}
        labels = list(env.cfg.actions)
    elif args.env == "supply":
        kw = {"pack_size": args.pack_size, **env_params}
        if args.demand:
            env_cfg = read_demand_csv(resolve_input(args.demand), **kw)
        else:
            from .synthdata import generate_demand

            env_cfg = SupplyEnvConfig.from_frame(generate_demand(seed=args.seed), **kw)
        env = SupplyEnv(env_cfg)
        base = {**SUPPLY_AGENT, "decay_every": "step", "episodes": 30}
        labels = list(env.cfg.actions)
    else:
        raise ConfigError(f"unknown env {args.env!r}")
    acfg = {**base, **agent_params, "seed": args.seed}
    if args.episodes is not None:
        acfg["episodes"] = args.episodes
    agent, log = train_agent(env, AgentConfig(**acfg), record_trace=args.env == "supply")
    dqn.write_episode_log(log, out.path("episodes.csv"))
    dqn.write_action_log(log, out.path("actions.csv"))
    dqn.write_action_histogram(log, env.n_actions, labels, out.path("action_histogram.csv"))
    dump_json(agent.to_dict(), out.path("agent.json"))
    if args.env == "pricing":
        exp = expected_pricing_rewards(env.cfg)
        pd.DataFrame({"action": range(len(labels)), "price_e": labels, "expected_reward": exp}).to_csv(
            out.path("oracle.csv"), index=False, lineterminator="\n", float_format="%.10g"
        )
    else:
        dqn.write_weekday_heatmap(log, env.n_actions, out.path("weekday_heatmap.csv"))
        dqn.write_supply_trace(log, out.path("trace.csv"))


def cmd_report(args, out: Outputs, params):
    """Turn an existing run directory into plot-ready tables.  Nothing is refit."""
    require(args, "run")
    run = Path(args.run)
    meta_path = run / METADATA
    if not meta_path.exists():
        raise DataError(f"{run} has no {METADATA}; not a salescast run directory")
    with open(meta_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    command = meta["command"]
    made = []

    def csv_out(df, name):
        df.to_csv(out.path(name), index=False, lineterminator="\n", float_format="%.10g")
        made.append(name)

    if command == "bayes":
        with open(run / "summary.json", encoding="utf-8") as fh:
            summ = json.load(fh)
        rows = []
        for name, s in summ["parameters"].items():
            rows.append({"parameter": name, "mean": s["mean"], "sd": s["sd"], "cv": s["cv"],
                         **{f"q{k}": v for k, v in s["quantiles"].items()}})
        csv_out(pd.DataFrame(rows), "posterior_boxplot.csv")
    elif command == "stack":
        with open(run / "weights.json", encoding="utf-8") as fh:
            w = json.load(fh)
        csv_out(pd.DataFrame({"model": w["names"], "weight": w["weights"]}), "stacking_weights.csv")
        csv_out(pd.read_csv(run / "error_table.csv"), "error_table.csv")
    elif command == "rl":
        ep = pd.read_csv(run / "episodes.csv")
        ep["rolling_mean_reward"] = ep["mean_reward"].rolling(10, min_periods=1).mean()
        csv_out(ep, "reward_curve.csv")
        csv_out(pd.read_csv(run / "action_histogram.csv"), "action_frequency.csv")
        acts = pd.read_csv(run / "actions.csv")
        csv_out(acts[["episode", "step", "action"]], "action_trace.csv")
        if (run / "weekday_heatmap.csv").exists():
            csv_out(pd.read_csv(run / "weekday_heatmap.csv"), "weekday_heatmap.csv")
            tr = pd.read_csv(run / "trace.csv")
            last = tr[tr["episode"] == tr["episode"].max()]
            csv_out(last[["step", "demand", "supply", "stock", "shortage"]], "supply_timeseries.csv")
    elif command == "trendnet":
        csv_out(pd.read_csv(run / "telemetry.csv"), "loss_curve.csv")
        if (run / "importance.csv").exists():
            imp = pd.read_csv(run / "importance.csv").sort_values(
                "importance", ascending=False, kind="mergesort")
            csv_out(imp, "importance_ranked.csv")
    elif command == "fit":
        with open(run / "metrics.json", encoding="utf-8") as fh:
            m = json.load(fh)
        csv_out(pd.DataFrame([{"window": k, **v} for k, v in m.items()]), "metrics.csv")
    elif command == "synth":
        for name in ("data.csv", "demand.csv", "cases.csv", "returns.csv"):
            if (run / name).exists():
                df = pd.read_csv(run / name)
                csv_out(df.describe().reset_index().rename(columns={"index": "stat"}),
                        f"describe_{name}")
    else:
        raise DataError(f"cannot report on command {command!r}")
    dump_json({"source_run": str(run), "source_command": command, "files": made},
              out.path("report.json"))


COMMANDS = {
    "synth": cmd_synth, "fit": cmd_fit, "stack": cmd_stack, "bayes": cmd_bayes,
    "trendnet": cmd_trendnet, "rl": cmd_rl, "report": cmd_report,
}


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="salescast", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"salescast {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True):
        sp.add_argument("--config", help="JSON file with option values")
        sp.add_argument("--out", required=False, help="output directory")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--param", action="append", metavar="KEY=VALUE",
                        help="extra model/generator parameter (repeatable)")
        sp.add_argument("-v", "--verbose", action="count", default=0)

    def sampler(sp):
        sp.add_argument("--draws", type=int, default=2000, help="draws per chain")
        sp.add_argument("--burn-in", type=int, default=2000)
        sp.add_argument("--chains", type=int, default=2)

    sp = sub.add_parser("synth", help="generate synthetic data")
    common(sp)
    sp.add_argument("--kind", choices=["sales", "demand", "cases", "returns"], default="sales")

    sp = sub.add_parser("fit", help="fit one base learner")
    common(sp)
    sp.add_argument("--model", choices=["lasso", "extratrees", "randomforest", "perceptron"],
                    default="lasso")
    sp.add_argument("--lambda", dest="lam", type=float, default=None)
    sp.add_argument("--train")
    sp.add_argument("--valid")
    sp.add_argument("--features", help="comma-separated covariates (default: all)")
    sp.add_argument("--categorical", help="comma-separated categorical covariates")

    sp = sub.add_parser("stack", help="two-level stacking")
    common(sp)
    sampler(sp)
    sp.add_argument("--data", help="frame CSV with actual targets")
    sp.add_argument("--boundary", help="first validation date")
    sp.add_argument("--oos", help="first out-of-sample date")
    sp.add_argument("--models", help="comma-separated base learners to fit on the train window")
    sp.add_argument("--predictions", help="external predictions CSV")
    sp.add_argument("--features")
    sp.add_argument("--categorical")
    sp.add_argument("--meta", choices=["lasso", "bayes"], default="lasso")
    sp.add_argument("--lambda", dest="lam", type=float, default=0.01)
    sp.add_argument("--nonneg", action="store_true")
    sp.add_argument("--stack-train-frac", type=float, default=0.5)

    sp = sub.add_parser("bayes", help="Bayesian model fits")
    common(sp)
    sampler(sp)
    sp.add_argument("--model", choices=["robust", "logistic", "hierarchical", "epidemic", "crisis"],
                    default="robust")
    sp.add_argument("--data")
    sp.add_argument("--predict", help="frame CSV to predict (logistic model)")
    sp.add_argument("--categorical")
    sp.add_argument("--x", help="comma-separated regressors (robust model)")
    sp.add_argument("--y", default="target")
    sp.add_argument("--standardize", action="store_true")
    sp.add_argument("--stores")
    sp.add_argument("--start-date", help="date of week 0 (epidemic model)")
    sp.add_argument("--prior-mean", type=float, default=0.0)
    sp.add_argument("--prior-sd", type=float, default=1.0)
    sp.add_argument("--constraint", choices=["nonneg", "nonpos"], default=None)
    sp.add_argument("--fixed-nu", type=float, default=None)

    sp = sub.add_parser("trendnet", help="train the trend-correction network")
    common(sp)
    sp.add_argument("--train")
    sp.add_argument("--valid")
    sp.add_argument("--categorical")
    sp.add_argument("--embed", default="store:4", help="col:dim list")
    sp.add_argument("--onehot", default="weekday,promo")
    sp.add_argument("--numeric", default="")
    sp.add_argument("--epochs", type=int, default=40)
    sp.add_argument("--no-trend", action="store_true")

    sp = sub.add_parser("rl", help="train a DQN agent")
    common(sp)
    sp.add_argument("--env", choices=["pricing", "supply"], default="pricing")
    sp.add_argument("--preset", default="moderate")
    sp.add_argument("--episodes", type=int, default=None)
    sp.add_argument("--demand", help="demand CSV (date,demand,promo) for the supply env")
    sp.add_argument("--pack-size", type=float, default=0.05)

    sp = sub.add_parser("report", help="plot-ready tables from an existing run")
    common(sp)
    sp.add_argument("--run", help="run directory to read")
    p.subcommands = sub.choices
    return p


def _apply_config(parser, argv):
    """Re-parse with defaults taken from ``--config``; explicit flags still win."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        with open(resolve_input(args.config), encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed config {args.config}: {e}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    sp = parser.subcommands[args.command]
    dests = {a.dest for a in sp._actions}
    cfg = {k.replace("-", "_"): v for k, v in cfg.items() if k != "command"}
    if "lambda" in cfg:
        cfg["lam"] = cfg.pop("lambda")
    unknown = sorted(set(cfg) - dests - {"params"})
    if unknown:
        raise ConfigError(f"unknown config keys for {args.command}: {unknown}")
    params = cfg.pop("params", None)
    sp.set_defaults(**cfg)
    args = parser.parse_args(argv)
    args.config_params = params
    return args


def _resolved_config(args) -> dict:
    skip = {"config", "out", "verbose", "config_params"}
    d = {k: v for k, v in vars(args).items() if k not in skip}
    return d


def run(argv=None) -> int:
    parser = build_parser()
    out = None
    try:
        args = _apply_config(parser, argv)
        if not args.out:
            raise ConfigError("--out is required")
        params = parse_params(getattr(args, "config_params", None))
        params.update(parse_params(args.param))
        resolved = _resolved_config(args)
        resolved["params"] = params
        out = Outputs(args.out)
        with warnings.catch_warnings():
            if not args.verbose:
                warnings.simplefilter("ignore")
            COMMANDS[args.command](args, out, params)
        blob = json.dumps(resolved, sort_keys=True, default=_json_default)
        meta = {
            "command": args.command,
            "seed": args.seed,
            "config": json.loads(blob),
            "config_hash": hashlib.sha256(blob.encode()).hexdigest(),
            "versions": _versions(),
            "outputs": {n: _sha256(out.stage / n) for n in sorted(out.files)},
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        }
        dump_json(meta, out.path(METADATA))
        out.commit()
        if args.verbose:
            print(f"wrote {len(out.files)} files to {out.final}", file=sys.stderr)
        return 0
    except SalescastError as e:
        if out is not None:
            out.discard()
        print(f"salescast: error: {e}", file=sys.stderr)
        return e.exit_code
    except (TypeError, KeyError) as e:
        # bad keys in --param / config blocks surface here
        if out is not None:
            out.discard()
        print(f"salescast: configuration error: {e}", file=sys.stderr)
        return ConfigError.exit_code
    except BaseException:
        if out is not None:
            out.discard()
        raise


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
