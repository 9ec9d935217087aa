"""Command-line driver: ingest, train, sample, evaluate, select, report.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric error.  On
failure a one-line JSON object ``{"error": category, "type": ..., "message": ...}``
is written to stderr.  ``CRYSTALDIT_NUM_THREADS`` caps torch's intra-op
thread pool.
"""

import argparse
import csv
import io
import json
import os
import shlex
import sys
from pathlib import Path

import numpy as np
import torch

from .artifacts import atomic_write, dumps, provenance, write_npz
from .checkpoint import check_config, load_into, read_checkpoint, save_checkpoint
from .config import RunConfig, format_config, parse_config_text, resolve_config
from .errors import ConfigMismatch, CrystalDiTError, DatasetError, UsageError
from .evaluate import evaluate_batch
from .fixtures import make_synthetic_dataset
from .net import build_model
from .sample import DECODE_LOG, generate, write_samples
from .select import (PHASES, append_history, balance_score, moving_average, read_history,
                     score_history, select_checkpoints)
from .tensorize import load_dataset, load_structures, stack, write_cif_dir, write_table
from .training import TrainConfig, Trainer

EXIT_CODES = {"usage": 2, "data": 3, "numeric": 4}
THREADS_ENV = "CRYSTALDIT_NUM_THREADS"
LOSS_LOG = "loss_log.csv"
RUN_CONFIG = "run_config.txt"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _command_line(argv):
    return shlex.join(["crystaldit", *argv])


def _comment_block(header):
    return [f"{k}: {json.dumps(v) if isinstance(v, (dict, list)) else v}" for k, v in header.items()]


def _overrides(args):
    keys = ("variant", "hidden_dim", "num_layers", "num_heads", "timesteps", "lr",
            "batch_size", "checkpoint_every", "sigma")
    return {k: getattr(args, k, None) for k in keys}


# ingest

def cmd_ingest(args, command):
    tensors, report = load_dataset(args.data, args.mode)
    lat, atoms = stack(tensors)
    meta = {**provenance(command, {"mode": args.mode}, 0), "mode": args.mode,
            "report": report.as_dict()}
    write_npz(args.out, {"lattice_norm": lat, "atoms": atoms, "meta": np.array(json.dumps(meta))})
    report_path = Path(args.report or str(args.out) + ".report.json")
    atomic_write(report_path, dumps({**meta["report"], **provenance(command, {"mode": args.mode}, 0)}))
    print(dumps(report.as_dict()), end="")


def read_cache(path):
    try:
        with np.load(path, allow_pickle=False) as npz:
            meta = json.loads(str(npz["meta"]))
            return npz["lattice_norm"].copy(), npz["atoms"].copy(), meta
    except (OSError, KeyError, ValueError) as err:
        raise DatasetError(f"cannot read cache {path}: {err}") from err


# train

def cmd_train(args, command):
    lat, atoms, meta = read_cache(args.cache)
    overrides = _overrides(args)
    cfg = resolve_config(args.config, args.preset, overrides)
    if cfg.mode != meta["mode"]:
        if args.config is not None and "mode" in parse_config_text(Path(args.config).read_text()):
            raise ConfigMismatch(f"config mode {cfg.mode!r} but cache holds {meta['mode']!r}")
        cfg = resolve_config(args.config, args.preset, {**overrides, "mode": meta["mode"]})
    torch.manual_seed(args.seed)
    model = build_model(cfg.model_config())
    trainer = Trainer(model, lat, atoms, cfg.schedule(), cfg.loss_weights(),
                      TrainConfig(cfg.lr, cfg.batch_size, args.seed))
    ckpt_dir = Path(args.ckpt_dir)
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    cfg_dict = cfg.as_dict()
    prov = provenance(command, cfg_dict, args.seed)
    atomic_write(ckpt_dir / RUN_CONFIG,
                 "".join(f"# {line}\n" for line in _comment_block(prov)) + format_config(cfg))
    rows = []
    for _ in range(args.epochs):
        for loss in trainer.run_epoch():
            rows.append((trainer.epoch, trainer.step, loss))
        if trainer.epoch % cfg.checkpoint_every == 0 or trainer.epoch == args.epochs:
            save_checkpoint(ckpt_dir / f"ckpt_epoch_{trainer.epoch:06d}.ckpt", model, cfg_dict,
                            trainer.epoch, args.seed,
                            {"command": command, "config_hash": prov["config_hash"],
                             "total_epochs": args.epochs})
    buf = io.StringIO()
    for line in _comment_block(prov):
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "step", "loss"])
    w.writerows((e, s, repr(loss)) for e, s, loss in rows)
    atomic_write(ckpt_dir / LOSS_LOG, buf.getvalue())
    print(json.dumps({"epochs": trainer.epoch, "steps": trainer.step,
                      "final_loss": rows[-1][2] if rows else None}))


def load_model(path):
    header, tensors = read_checkpoint(path)
    try:
        cfg = RunConfig(**{k: tuple(v) if isinstance(v, list) else v
                           for k, v in header["config"].items()})
    except TypeError as err:
        raise ConfigMismatch(f"{path}: unrecognised config keys") from err
    check_config(header, cfg.as_dict())
    model = build_model(cfg.model_config())
    load_into(model, tensors)
    return model, cfg, header


# sample

def cmd_sample(args, command):
    model, cfg, header = load_model(args.ckpt)
    result = generate(model, cfg.schedule(), args.n, args.seed, cfg.decoder(), args.chunk_size)
    prov = provenance(command, cfg.as_dict(), args.seed)
    prov.update({"checkpoint_epoch": header["epoch"],
                 "total_epochs": header.get("total_epochs"), "n": args.n})
    write_samples(result, args.out, prov)
    print(json.dumps({"n_attempted": result.n_attempted, "n_written": len(result.structures),
                      "n_dropped": result.n_dropped}))


# evaluate

def cmd_evaluate(args, command):
    cfg = resolve_config(args.config, "desk", {})
    test = load_structures(args.test)[1]
    train = load_structures(args.train)[1]
    report = evaluate_batch(args.gen, test, train, args.seed, cfg.tolerances())
    epoch = args.epoch
    log_path = Path(args.gen) / DECODE_LOG
    if epoch is None and log_path.exists():
        epoch = json.loads(log_path.read_text()).get("header", {}).get("checkpoint_epoch")
    eval_cfg = {k: getattr(cfg, k) for k in ("ltol", "stol", "angle_tol")}
    eval_cfg["alpha"] = list(cfg.alpha)
    scores = {repr(a): balance_score(report, a) for a in cfg.alpha}
    out = {**provenance(command, eval_cfg, args.seed), "config": eval_cfg, "epoch": epoch,
           "metrics": report.as_dict(), "balance_score": scores}
    text = dumps(out)
    if args.out:
        atomic_write(args.out, text)
    if args.history:
        if epoch is None:
            raise UsageError("--history needs an epoch (from the decode log or --epoch)")
        append_history(args.history, epoch, report)
    print(text, end="")


# select / report

def _alphas(raw):
    try:
        return [float(a) for a in raw.split(",") if a.strip()]
    except ValueError as err:
        raise UsageError(f"bad alpha list {raw!r}") from err


def cmd_select(args, command):
    entries = read_history(args.history)
    result = {**provenance(command, {"alpha": args.alpha, "total_epochs": args.total_epochs}, 0),
              "winners": {}}
    for alpha in _alphas(args.alpha):
        best = select_checkpoints(score_history(entries, alpha, args.total_epochs))
        result["winners"][repr(alpha)] = {
            p: None if best[p] is None else {"epoch": best[p].epoch,
                                             "balance_score": best[p].balance_score}
            for p in PHASES}
    text = dumps(result)
    if args.out:
        atomic_write(args.out, text)
    print(text, end="")


SERIES = ("un_rate", "structural_valid_pct", "chemical_valid_pct", "d_rho", "d_elem")


def cmd_report(args, command):
    entries = sorted(read_history(args.history), key=lambda em: em[0])
    epochs = [e for e, _ in entries]
    out_dir = Path(args.out_dir)
    prov = provenance(command, {"window": args.window, "alpha": args.alpha}, 0)
    series = {name: [np.nan if getattr(m, name) is None else getattr(m, name) for _, m in entries]
              for name in SERIES}
    for alpha in _alphas(args.alpha):
        series[f"balance_alpha_{alpha:g}"] = [balance_score(m, alpha) for _, m in entries]
    written = []
    for name, raw in series.items():
        smooth = moving_average(raw, args.window)
        buf = io.StringIO()
        for line in _comment_block(prov):
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "raw", "smoothed"])
        w.writerows((e, repr(float(r)), repr(float(s))) for e, r, s in zip(epochs, raw, smooth))
        path = out_dir / f"{name}.csv"
        atomic_write(path, buf.getvalue())
        written.append(str(path))
    print(json.dumps({"files": written}))


def cmd_make_fixtures(args, command):
    structures = make_synthetic_dataset(args.n, args.seed)
    comments = _comment_block(provenance(command, {"n": args.n}, args.seed))
    out = Path(args.out)
    if out.suffix == ".csv":
        out.parent.mkdir(parents=True, exist_ok=True)
        write_table(structures, out)
    else:
        write_cif_dir(structures, out, comments)
    print(json.dumps({"n": len(structures), "out": str(out)}))


def build_parser():
    p = _Parser(prog="crystaldit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("ingest", help="tensorize a CIF directory or table into a cache")
    s.add_argument("--data", required=True)
    s.add_argument("--mode", choices=("2d", "1d"), default="2d")
    s.add_argument("--out", required=True)
    s.add_argument("--report", help="ingest report path (default: <out>.report.json)")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("train", help="train from a cache, writing checkpoints and a loss log")
    s.add_argument("--cache", required=True)
    s.add_argument("--config")
    s.add_argument("--preset", choices=("desk", "full"), default="desk")
    s.add_argument("--epochs", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--ckpt-dir", required=True)
    s.add_argument("--variant", choices=("unified", "dual"))
    s.add_argument("--hidden-dim", type=int)
    s.add_argument("--num-layers", type=int)
    s.add_argument("--num-heads", type=int)
    s.add_argument("--timesteps", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--checkpoint-every", type=int)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("sample", help="generate CIFs from a checkpoint")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--chunk-size", type=int, default=256)
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("evaluate", help="screening metrics for a directory of generated CIFs")
    s.add_argument("--gen", required=True)
    s.add_argument("--test", required=True)
    s.add_argument("--train", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.add_argument("--config")
    s.add_argument("--history", help="append the metrics to this history log")
    s.add_argument("--epoch", type=int)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("select", help="best checkpoint per training phase")
    s.add_argument("--history", required=True)
    s.add_argument("--alpha", default="1.0", help="comma-separated exponents")
    s.add_argument("--total-epochs", type=int, required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_select)

    s = sub.add_parser("report", help="raw and smoothed metric series as CSV files")
    s.add_argument("--history", required=True)
    s.add_argument("--window", type=int, default=10)
    s.add_argument("--alpha", default="1.0")
    s.add_argument("--out-dir", default="report")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("make-fixtures", help="write the synthetic fixture dataset")
    s.add_argument("--n", type=int, default=16)
    s.add_argument("--seed", type=int, default=7)
    s.add_argument("--out", required=True, help="directory, or a .csv table")
    s.set_defaults(func=cmd_make_fixtures)
    return p


def _validate(args):
    for name in ("epochs", "n", "total_epochs"):
        value = getattr(args, name, None)
        if value is not None and value < 1:
            raise UsageError(f"--{name.replace('_', '-')} must be at least 1")


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    threads = os.environ.get(THREADS_ENV)
    try:
        if threads:
            try:
                torch.set_num_threads(max(1, int(threads)))
            except ValueError as err:
                raise UsageError(f"{THREADS_ENV} must be an integer") from err
        args = build_parser().parse_args(argv)
        _validate(args)
        args.func(args, _command_line(argv))
    except CrystalDiTError as err:
        return _fail(err.category, err)
    except OSError as err:
        return _fail("data", err)
    return 0


def _fail(category, err):
    print(json.dumps({"error": category, "type": type(err).__name__, "message": str(err)}),
          file=sys.stderr)
    return EXIT_CODES[category]


if __name__ == "__main__":
    sys.exit(main())
