"""Command-line experiment runner.

    drhmc run --model lgssm3 --method drhmc --h E --chains 4 --out runs/a
    drhmc run --config exp.cfg --seed 3
    drhmc compare --model lgssm2 --dataset 2 --methods drhmc:E,drhmc:y,prior-std,direct --out runs/t1

A config file holds ``key = value`` lines using the long flag names
(``model``, ``method``, ``h``, ``chains``, ...); flags given on the command
line override it.  Exit status: 0 success, 1 run aborted on divergences,
2 invalid configuration.
"""
import argparse
import configparser
import csv
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List, Optional

import numpy as np

from .diagnostics import ChainOutput, effective_sample_size, sd_mcse, summarize
from .errors import ConfigError, DRHMCError, InvalidData, RunAborted
from .models import MODELS, build_model
from .models.base import METHODS
from .samplers import HmcConfig, RmhmcConfig, SshmcConfig, run_chain

SCHEMA_VERSION = 1
THREADS_ENV = "DRHMC_THREADS"


@dataclass
class ExperimentConfig:
    model: str = "funnel"
    method: str = "drhmc"
    h: Optional[str] = None
    chains: int = 4
    warmup: int = 1000
    iters: int = 1000
    seed: int = 0
    data: Optional[str] = None
    dataset: int = 1
    T: Optional[int] = None
    out: str = "drhmc-out"
    threads: Optional[int] = None
    step_size: Optional[float] = None
    L_min: Optional[int] = None
    L_max: Optional[int] = None
    adapt_mass: bool = False
    max_div_rate: Optional[float] = None

    def validate(self):
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {', '.join(MODELS)}")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.chains < 1:
            raise ConfigError("chains must be >= 1")
        if self.iters < 4:
            raise ConfigError("iters must be >= 4")
        if self.warmup < 0:
            raise ConfigError("warmup must be >= 0")
        if self.dataset not in (1, 2):
            raise ConfigError("dataset must be 1 or 2")
        if self.max_div_rate is not None and not 0.0 <= self.max_div_rate <= 1.0:
            raise ConfigError("max_div_rate must lie in [0, 1]")
        return self

    def sampler_config(self):
        kw = {"warmup": self.warmup, "iters": self.iters, "max_divergence_rate": self.max_div_rate}
        if self.step_size is not None:
            kw["step_size"] = self.step_size
        if self.L_min is not None:
            kw["L_min"] = self.L_min
        if self.L_max is not None:
            kw["L_max"] = self.L_max
        if self.method == "sshmc":
            if self.L_min is not None or self.L_max is not None or self.step_size is not None:
                raise ConfigError("sshmc uses its fixed ABLA schedule; step_size, L_min and L_max do not apply")
            return SshmcConfig(**kw)
        if self.method == "rmhmc":
            return RmhmcConfig(**kw)
        return HmcConfig(adapt_mass=self.adapt_mass, **kw)


_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _coerce(key, value):
    if value is None:
        return None
    t = _TYPES[key]
    text = str(value).strip()
    if text.lower() in ("", "none", "null"):
        return None
    try:
        if t in (int, Optional[int]):
            return int(text)
        if t in (float, Optional[float]):
            return float(text)
        if t is bool:
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
    except ValueError:
        raise ConfigError(f"bad value {text!r} for {key}")
    return text


def read_config_file(path):
    """``key = value`` pairs from a sectionless file (``#`` comments allowed)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        with open(path) as fh:
            parser.read_string("[experiment]\n" + fh.read())
    except (OSError, configparser.Error) as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    out = {}
    for k, v in parser["experiment"].items():
        key = k.replace("-", "_")
        key = {"l_min": "L_min", "l_max": "L_max", "t": "T"}.get(key, key)
        if key not in _TYPES:
            raise ConfigError(f"unknown config key {k!r}")
        out[key] = _coerce(key, v)
    return out


def make_config(args, base=None):
    vals = dict(base or {})
    for f in fields(ExperimentConfig):
        v = getattr(args, f.name, None)
        if v is not None and not (f.type is bool and v is False):
            vals[f.name] = v
    return ExperimentConfig(**vals).validate()


def resolve_threads(cfg):
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer")
    return cfg.threads or cfg.chains


# ------------------------------------------------------------------ running
def run_experiment(cfg: ExperimentConfig):
    """Sample per ``cfg``; returns ``(ChainOutput, model, status)``.

    ``status`` is ``"ok"`` or ``"aborted"``; an aborted run returns the
    partial output.
    """
    try:
        model = build_model(cfg.model, cfg.data, dataset_id=cfg.dataset, T=cfg.T, seed=cfg.seed)
    except (OSError, InvalidData) as e:
        raise ConfigError(str(e))
    scfg = cfg.sampler_config()
    try:
        out = run_chain(model, cfg.method, scfg, seed=cfg.seed, chains=cfg.chains, h=cfg.h, workers=resolve_threads(cfg))
        return out, model, "ok"
    except RunAborted as e:
        out = getattr(e, "output", None)
        if out is None:
            raise
        return out, model, "aborted"


def _fmt(x):
    """Shortest round-trip decimal text."""
    return repr(float(x))


def write_draws(path, out: ChainOutput):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["chain", "iter"] + out.names + [f"bar:{n}" for n in out.qbar_names])
        for c, ch in enumerate(out.chains):
            for i in range(ch.q.shape[0]):
                w.writerow([c, i] + [_fmt(v) for v in ch.q[i]] + [_fmt(v) for v in ch.qbar[i]])


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _coord_summaries(arr, names):
    res = {}
    for j, n in enumerate(names):
        s = summarize(arr[:, :, j])
        res[n] = {
            "mean": _num(s.mean),
            "sd": _num(s.sd),
            "n_eff": _num(s.n_eff),
            "mcse": _num(s.mcse),
            "sd_mcse": _num(sd_mcse(arr[:, :, j])),
            "degenerate": bool(s.degenerate),
        }
    return res


def build_summary(cfg, out: ChainOutput, model, status):
    derived = {}
    if model.derived:
        q = out.q.reshape(-1, out.q.shape[-1])
        for name, f in model.derived.items():
            vals = np.array([f(row) for row in q]).reshape(out.q.shape[:2])
            s = summarize(vals)
            derived[name] = {"mean": _num(s.mean), "sd": _num(s.sd), "n_eff": _num(s.n_eff), "mcse": _num(s.mcse)}
    return {
        "schema_version": SCHEMA_VERSION,
        "status": status,
        "config": asdict(cfg),
        "sampler": out.settings,
        "chains": out.n_chains,
        "iterations": out.n_iter,
        "cpu_seconds": out.seconds,
        "accept_rate": _num(out.accept_rate) if out.n_iter else None,
        "step_sizes": [float(c.step_size) for c in out.chains],
        "divergences": {
            "sampling": out.divergences,
            "warmup": out.warmup_divergences,
            "rate": out.divergence_rate,
            "per_chain": [int(c.divergent.sum()) for c in out.chains],
        },
        "coordinates": _coord_summaries(out.q, out.names) if out.n_iter >= 4 else {},
        "modified": _coord_summaries(out.qbar, out.qbar_names) if out.n_iter >= 4 else {},
        "derived": derived if out.n_iter >= 4 else {},
    }


def write_outputs(cfg, out, model, status):
    d = Path(cfg.out)
    d.mkdir(parents=True, exist_ok=True)
    write_draws(d / "draws.csv", out)
    summary = build_summary(cfg, out, model, status)
    with open(d / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


# --------------------------------------------------------------- comparison
def group_min_ess(out: ChainOutput, model):
    """{block name: min n_eff over the block's original coordinates}."""
    res = {}
    o = 0
    for name, dim in zip(model.names, model.dims):
        vals = [effective_sample_size(out.q[:, :, j]) for j in range(o, o + dim)]
        vals = [v for v in vals if math.isfinite(v)]
        res[name] = min(vals) if vals else float("nan")
        o += dim
    return res


def compare_methods(configs: List[ExperimentConfig]):
    """One row per config: min n_eff and n_eff/s per block, CPU seconds."""
    if not configs:
        raise ConfigError("nothing to compare")
    keys = {(c.model, c.data, c.dataset, c.T, c.seed) for c in configs}
    if len(keys) > 1:
        raise ConfigError("compared configs must share model, data and seed")
    rows = []
    for cfg in configs:
        out, model, status = run_experiment(cfg)
        if status != "ok":
            raise RunAborted(f"{cfg.method} run aborted on divergences")
        sec = out.seconds
        row = {"method": cfg.method, "h": cfg.h or "", "cpu_seconds": sec}
        for g, v in group_min_ess(out, model).items():
            row[f"n_eff:{g}"] = v
            row[f"n_eff_per_s:{g}"] = v / sec if sec > 0 else float("nan")
        rows.append(row)
    return rows


def write_table(path, rows):
    names = ["method", "h", "cpu_seconds"]
    names += [k for k in rows[0] if k not in names]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=names, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (_fmt(v) if isinstance(v, float) else v) for k, v in r.items()})


# ---------------------------------------------------------------- argparse
def _add_common(p):
    p.add_argument("--config", help="key = value experiment file")
    p.add_argument("--model", choices=MODELS)
    p.add_argument("--h", help="h-strategy of the DRHMC transform (model specific)")
    p.add_argument("--chains", type=int)
    p.add_argument("--warmup", type=int)
    p.add_argument("--iters", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--data", help="CSV file with one observation column")
    p.add_argument("--dataset", type=int, help="LGSSM simulation regime (1 or 2)")
    p.add_argument("--T", type=int, help="length of simulated series")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int, help=f"worker count (env {THREADS_ENV} overrides)")
    p.add_argument("--step-size", dest="step_size", type=float)
    p.add_argument("--L-min", dest="L_min", type=int)
    p.add_argument("--L-max", dest="L_max", type=int)
    p.add_argument("--adapt-mass", dest="adapt_mass", action="store_true", default=None)
    p.add_argument("--max-div-rate", dest="max_div_rate", type=float)


def build_parser():
    p = argparse.ArgumentParser(prog="drhmc", description="Dynamically rescaled HMC experiments")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="sample one model with one method")
    _add_common(r)
    r.add_argument("--method", choices=METHODS)
    c = sub.add_parser("compare", help="n_eff per second of several methods on one model")
    _add_common(c)
    c.add_argument("--methods", required=True, help="comma list of method[:h], e.g. drhmc:E,direct")
    return p


def _config_from(args, **over):
    base = read_config_file(args.config) if args.config else {}
    cfg = make_config(args, base)
    if over:
        vals = asdict(cfg)
        vals.update(over)
        cfg = ExperimentConfig(**vals).validate()
    return cfg


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            cfg = _config_from(args)
            out, model, status = run_experiment(cfg)
            summary = write_outputs(cfg, out, model, status)
            div = summary["divergences"]
            print(f"{cfg.model}/{cfg.method}: {summary['chains']} chains x {summary['iterations']} draws, "
                  f"{div['sampling']} divergences, {summary['cpu_seconds']:.2f} CPU s -> {cfg.out}")
            if status != "ok":
                print("run aborted: divergence rate above bound (partial output written)", file=sys.stderr)
                return 1
            return 0
        cfgs = []
        for item in args.methods.split(","):
            method, _, h = item.strip().partition(":")
            cfgs.append(_config_from(args, method=method, h=h or None))
        rows = compare_methods(cfgs)
        d = Path(cfgs[0].out)
        d.mkdir(parents=True, exist_ok=True)
        write_table(d / "table.csv", rows)
        for r in rows:
            rates = "  ".join(f"{k.split(':', 1)[1]} {v:.2f}/s" for k, v in r.items() if k.startswith("n_eff_per_s:"))
            print(f"{r['method']:10s} {r['h'] or '-':6s} {r['cpu_seconds']:8.2f} s  {rates}")
        return 0
    except ConfigError as e:
        parser.print_usage(sys.stderr)
        print(f"drhmc: error: {e}", file=sys.stderr)
        return 2
    except RunAborted as e:
        print(f"drhmc: {e}", file=sys.stderr)
        return 1
    except DRHMCError as e:
        print(f"drhmc: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
