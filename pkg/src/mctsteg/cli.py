"""Command-line front end.

Subcommands:
  embed       tree-search embedding over a cover manifest
  baseline    plain or clustering baseline embedding
  train-env   fit the builtin detector on cover/stego manifests
  evaluate    metric tables for finished runs
  bench       plain vs cmd vs mctsteg comparison on one manifest

Every flag can come from a key=value config file (--config); precedence is
flags over file over defaults. The MCTSTEG_LOG environment variable sets
the log level. Batch work is deterministic for a fixed seed: per-image
seeds derive from the manifest position, and outputs are written in
manifest order regardless of worker scheduling.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import media, metrics, pipeline, rng
from .environment import (
    ConstantEnvironment,
    TrainConfig,
    extract_features,
    load_model,
    save_model,
    train,
)
from .errors import ConfigError, StegError
from .lattice import SchemeKind, decompose
from .mcts import Budget
from .metrics import Report, summarize_method
from .remote import RemoteEnvironment
from .types import Domain, ModificationMap, PixelMatrix

log = logging.getLogger("mctsteg")

_SCHEMES = {k.value: k for k in SchemeKind}


def _opt(name, type_, default, help_, **kw):
    return {"name": name, "type": type_, "default": default, "help": help_, **kw}


_COMMON = [
    _opt("config", str, None, "key=value config file; flags override it"),
    _opt("seed", int, 0, "run seed; per-image seeds derive from it"),
]

_EMBED_OPTS = _COMMON + [
    _opt("covers", str, None, "cover manifest (newline-separated paths)", required=True),
    _opt("out", str, None, "output directory", required=True),
    _opt("payload", float, 0.4, "payload in bits per element"),
    _opt("alpha", float, 1.5, "cost division factor for preferred directions"),
    _opt("max-searches", int, 128, "tree searches per sublattice"),
    _opt("threshold", float, 0.98, "cover-confidence early-stop threshold"),
    _opt("uct-c", float, math.sqrt(2.0), "UCT exploration constant"),
    _opt("env", str, None,
         "environment: builtin:<model>|exec:<cmd>|tcp:<host:port>|constant:<v>",
         required=True),
    _opt("scheme", str, "spatial2x2", "sublattice scheme: spatial2x2|jpegblock"),
    _opt("cost", str, "hill", "cost source: hill | file:<dir with .cost1 files>"),
    _opt("jobs", int, 1, "parallel workers (one env handle each)"),
    _opt("adjust-first", bool, False, "tree-adjust the first sublattice too"),
]

_BASELINE_OPTS = _COMMON + [
    _opt("covers", str, None, "cover manifest", required=True),
    _opt("out", str, None, "output directory", required=True),
    _opt("payload", float, 0.4, "payload in bits per element"),
    _opt("method", str, "plain", "baseline method: plain|cmd"),
    _opt("alpha", float, 9.0, "clustering cost division factor (cmd only)"),
    _opt("scheme", str, "spatial2x2", "sublattice scheme (cmd only)"),
    _opt("cost", str, "hill", "cost source: hill | file:<dir>"),
    _opt("jobs", int, 1, "parallel workers"),
]

_TRAIN_OPTS = _COMMON + [
    _opt("covers", str, None, "cover manifest", required=True),
    _opt("stegos", str, None, "stego manifest, pairwise aligned with covers",
         required=True),
    _opt("out", str, None, "model output path", required=True),
    _opt("epochs", int, 40, "training epochs"),
    _opt("lr", float, 0.05, "initial learning rate"),
    _opt("val-fraction", float, 0.2, "fraction of pairs held out"),
]

_EVAL_OPTS = _COMMON + [
    _opt("covers", str, None, "cover manifest", required=True),
    _opt("run", str, None, "method run as name=dir; repeatable",
         required=True, repeat=True),
    _opt("env", str, None, "detector for p_e (optional)"),
    _opt("orders", str, "2,3,4", "comma-separated cluster orders"),
    _opt("out", str, None, "write the JSON report here"),
]

_BENCH_OPTS = _COMMON + [
    _opt("covers", str, None, "cover manifest", required=True),
    _opt("out", str, None, "output directory", required=True),
    _opt("payload", float, 0.4, "payload in bits per element"),
    _opt("alpha", float, 1.5, "tree-search cost division factor"),
    _opt("cmd-alpha", float, 9.0, "clustering baseline division factor"),
    _opt("max-searches", int, 128, "tree searches per sublattice"),
    _opt("threshold", float, 0.98, "early-stop threshold"),
    _opt("uct-c", float, math.sqrt(2.0), "UCT exploration constant"),
    _opt("env", str, None, "environment spec (required)", required=True),
    _opt("scheme", str, "spatial2x2", "sublattice scheme"),
    _opt("cost", str, "hill", "cost source"),
    _opt("jobs", int, 1, "parallel workers"),
]


def _parse_config_file(path: str) -> dict:
    values = {}
    for lineno, raw in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), 1
    ):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _coerce(opt, raw: str):
    if opt["type"] is bool:
        lowered = raw.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"option {opt['name']}: not a boolean: {raw!r}")
    try:
        return opt["type"](raw)
    except ValueError:
        raise ConfigError(f"option {opt['name']}: bad value {raw!r}")


def _build_subparser(sub, name: str, opts, help_: str):
    p = sub.add_parser(name, help=help_)
    for opt in opts:
        flag = "--" + opt["name"]
        if opt["type"] is bool:
            p.add_argument(flag, action="store_const", const=True, default=None,
                           help=opt["help"])
        elif opt.get("repeat"):
            p.add_argument(flag, action="append", default=None, help=opt["help"])
        else:
            p.add_argument(flag, type=opt["type"], default=None, help=opt["help"])
    p.set_defaults(_opts=opts, _command=name)
    return p


def _resolve(args) -> dict:
    """Merge flag, config-file and default values, in that precedence."""
    file_values = {}
    if args.config:
        file_values = _parse_config_file(args.config)
    known = {o["name"] for o in args._opts}
    for key in file_values:
        if key not in known:
            raise ConfigError(f"config file sets unknown option {key!r}")
    resolved = {}
    for opt in args._opts:
        name = opt["name"]
        flag_value = getattr(args, name.replace("-", "_"))
        if flag_value is not None:
            resolved[name] = flag_value
        elif name in file_values:
            if opt.get("repeat"):
                resolved[name] = [
                    v.strip() for v in file_values[name].split(",") if v.strip()
                ]
            else:
                resolved[name] = _coerce(opt, file_values[name])
        else:
            resolved[name] = opt["default"]
        if opt.get("required") and resolved[name] is None:
            raise ConfigError(f"option --{name} is required")
    return resolved


def make_env(spec: str):
    """Build an environment handle from its CLI spec string."""
    kind, _, rest = spec.partition(":")
    if kind == "builtin":
        if not rest:
            raise ConfigError("builtin env needs a model path")
        return load_model(rest)
    if kind == "exec":
        if not rest:
            raise ConfigError("exec env needs a command")
        return RemoteEnvironment.spawn(rest)
    if kind == "tcp":
        host, _, port = rest.rpartition(":")
        if not host or not port.isdigit():
            raise ConfigError(f"tcp env needs host:port, got {rest!r}")
        return RemoteEnvironment.connect(host, int(port))
    if kind == "constant":
        try:
            return ConstantEnvironment(float(rest))
        except ValueError:
            raise ConfigError(f"constant env needs a number, got {rest!r}")
    raise ConfigError(f"unknown environment spec {spec!r}")


def _read_cover(path: Path) -> PixelMatrix:
    if path.suffix == ".pixf1":
        return media.read_raw_plane(path, Domain.JPEG)
    return media.read_pgm(path)


def _write_stego(img: PixelMatrix, out_dir: Path, stem: str) -> Path:
    if img.domain is Domain.SPATIAL:
        path = out_dir / f"{stem}.pgm"
        media.write_pgm(img, path)
    else:
        path = out_dir / f"{stem}.pixf1"
        media.write_raw_plane(img, path)
    return path


def _cost_pair(cover: PixelMatrix, cost_spec: str, cover_path: Path):
    if cost_spec == "hill":
        return pipeline.CostSource.BUILTIN_HILL, None
    kind, _, rest = cost_spec.partition(":")
    if kind != "file" or not rest:
        raise ConfigError(f"cost spec must be 'hill' or 'file:<dir>', got {cost_spec!r}")
    cost_path = Path(rest) / (cover_path.stem + ".cost1")
    return pipeline.CostSource.EXTERNAL_FILE, media.read_cost_map(cost_path)


def _embed_one(cover_path: str, cfg: dict, env, image_seed: int) -> dict:
    cover_path = Path(cover_path)
    cover = _read_cover(cover_path)
    source, external = _cost_pair(cover, cfg["cost"], cover_path)
    scheme = decompose(cover.width, cover.height, _SCHEMES[cfg["scheme"]])
    budget = Budget(
        max_searches=cfg["max-searches"],
        confidence_threshold=cfg["threshold"],
        exploration_c=cfg["uct-c"],
        alpha=cfg["alpha"],
    )
    payload_bits = cfg["payload"] * cover.data.size
    if payload_bits == 0:
        log.warning("payload is 0; stego will equal the cover for %s",
                    cover_path.name)
    plan = pipeline.EmbedPlan(
        payload_bits_total=payload_bits,
        scheme=scheme,
        env=env,
        budget=budget,
        rng_seed=image_seed,
        cost_source=source,
        external_costs=external,
        adjust_first=bool(cfg.get("adjust-first")),
    )
    result = pipeline.embed(cover, plan)
    out_dir = Path(cfg["out"])
    stego_path = _write_stego(result.stego, out_dir, cover_path.stem)
    media.write_modification_map(result.mods, out_dir / f"{cover_path.stem}_mods.pixf1")
    return {
        "image": cover_path.name,
        "stego": stego_path.name,
        "seed": image_seed,
        "payload_bits": payload_bits,
        "baseline_confidence": result.baseline_confidence,
        "final_confidence": result.final_confidence,
        "sublattices": [
            {
                "index": t.sublattice_index,
                "searches_used": t.searches_used,
                "r_top": t.r_top,
                "terminated_by": t.terminated_by.value if t.terminated_by else None,
                "realized_entropy_bits": t.realized_entropy_bits,
            }
            for t in result.per_sublattice
        ],
    }


_WORKER_ENV = None
_WORKER_CFG = None


def _init_embed_worker(cfg: dict):
    global _WORKER_ENV, _WORKER_CFG
    _WORKER_CFG = cfg
    _WORKER_ENV = make_env(cfg["env"])


def _embed_task(item):
    index, cover_path = item
    seed = rng.image_seed(_WORKER_CFG["seed"], index)
    return index, _embed_one(cover_path, _WORKER_CFG, _WORKER_ENV, seed)


def _run_embed_batch(cfg: dict) -> list:
    covers = media.read_manifest(cfg["covers"])
    if not covers:
        raise ConfigError("cover manifest is empty")
    out_dir = Path(cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    items = [(i, str(p)) for i, p in enumerate(covers)]
    records = [None] * len(items)
    if cfg["jobs"] <= 1:
        _init_embed_worker(cfg)
        try:
            for item in items:
                index, record = _embed_task(item)
                records[index] = record
                log.info("embedded %s", record["image"])
        finally:
            _close_worker_env()
    else:
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=cfg["jobs"],
            initializer=_init_embed_worker,
            initargs=(cfg,),
        ) as pool:
            for index, record in pool.map(_embed_task, items):
                records[index] = record
                log.info("embedded %s", record["image"])
    trace_path = out_dir / "trace.jsonl"
    with trace_path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    media.write_manifest(
        [out_dir / r["stego"] for r in records], out_dir / "manifest.txt"
    )
    return records


def _close_worker_env():
    global _WORKER_ENV
    if _WORKER_ENV is not None and hasattr(_WORKER_ENV, "close"):
        _WORKER_ENV.close()
    _WORKER_ENV = None


def cmd_embed(cfg: dict) -> int:
    _run_embed_batch(cfg)
    return 0


def _baseline_one(cover_path: str, cfg: dict, image_seed: int) -> dict:
    cover_path = Path(cover_path)
    cover = _read_cover(cover_path)
    _, external = _cost_pair(cover, cfg["cost"], cover_path)
    payload_bits = cfg["payload"] * cover.data.size
    if cfg["method"] == "plain":
        stego, mods = pipeline.plain_embed(
            cover, payload_bits, image_seed, costs=external
        )
    elif cfg["method"] == "cmd":
        stego, mods = pipeline.cmd_embed(
            cover, payload_bits, alpha=cfg["alpha"], rng_seed=image_seed,
            kind=_SCHEMES[cfg["scheme"]], costs=external,
        )
    else:
        raise ConfigError(f"unknown baseline method {cfg['method']!r}")
    out_dir = Path(cfg["out"])
    stego_path = _write_stego(stego, out_dir, cover_path.stem)
    media.write_modification_map(mods, out_dir / f"{cover_path.stem}_mods.pixf1")
    return {
        "image": cover_path.name,
        "stego": stego_path.name,
        "seed": image_seed,
        "payload_bits": payload_bits,
        "method": cfg["method"],
    }


def _baseline_task(item):
    index, cover_path = item
    seed = rng.image_seed(_WORKER_CFG["seed"], index)
    return index, _baseline_one(cover_path, _WORKER_CFG, seed)


def _init_baseline_worker(cfg: dict):
    global _WORKER_CFG
    _WORKER_CFG = cfg


def cmd_baseline(cfg: dict) -> int:
    covers = media.read_manifest(cfg["covers"])
    if not covers:
        raise ConfigError("cover manifest is empty")
    out_dir = Path(cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    items = [(i, str(p)) for i, p in enumerate(covers)]
    records = [None] * len(items)
    if cfg["jobs"] <= 1:
        _init_baseline_worker(cfg)
        for item in items:
            index, record = _baseline_task(item)
            records[index] = record
    else:
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=cfg["jobs"],
            initializer=_init_baseline_worker,
            initargs=(cfg,),
        ) as pool:
            for index, record in pool.map(_baseline_task, items):
                records[index] = record
    with (out_dir / "trace.jsonl").open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    media.write_manifest(
        [out_dir / r["stego"] for r in records], out_dir / "manifest.txt"
    )
    return 0


def cmd_train_env(cfg: dict) -> int:
    cover_paths = media.read_manifest(cfg["covers"])
    stego_paths = media.read_manifest(cfg["stegos"])
    if len(cover_paths) != len(stego_paths):
        raise ConfigError(
            f"manifest sizes differ: {len(cover_paths)} covers vs "
            f"{len(stego_paths)} stegos"
        )
    covers = np.array([extract_features(_read_cover(p)) for p in cover_paths])
    stegos = np.array([extract_features(_read_cover(p)) for p in stego_paths])
    model, report = train(
        covers, stegos,
        TrainConfig(cfg["epochs"], cfg["lr"], cfg["seed"], cfg["val-fraction"]),
    )
    save_model(model, cfg["out"])
    print(
        f"trained on {report.n_train} samples: "
        f"train accuracy {report.train_accuracy:.4f}, "
        f"validation accuracy {report.val_accuracy:.4f} ({report.n_val} samples)"
    )
    return 0


def _parse_runs(entries) -> list:
    runs = []
    for entry in entries:
        name, sep, run_dir = entry.partition("=")
        if not sep or not name or not run_dir:
            raise ConfigError(f"--run expects name=dir, got {entry!r}")
        runs.append((name, Path(run_dir)))
    return runs


def _evaluate_runs(cover_paths, runs, env, orders) -> Report:
    cover_conf = None
    if env is not None:
        cover_conf = np.array(
            [env.score(_read_cover(p)).cover_confidence for p in cover_paths]
        )
    rows = []
    for name, run_dir in runs:
        mods_list = []
        stego_conf = []
        for p in cover_paths:
            mods_list.append(media.read_modification_map(
                run_dir / f"{p.stem}_mods.pixf1"
            ))
            if env is not None:
                stego_path = run_dir / f"{p.stem}.pgm"
                if not stego_path.exists():
                    stego_path = run_dir / f"{p.stem}.pixf1"
                stego_conf.append(
                    env.score(_read_cover(stego_path)).cover_confidence
                )
        detector_pe = None
        if env is not None:
            detector_pe = metrics.p_e(1.0 - cover_conf, 1.0 - np.array(stego_conf))
        rows.append(summarize_method(name, mods_list, orders, detector_pe))
    return Report(rows)


def cmd_evaluate(cfg: dict) -> int:
    cover_paths = media.read_manifest(cfg["covers"])
    runs = _parse_runs(cfg["run"])
    orders = tuple(int(x) for x in str(cfg["orders"]).split(",") if x)
    env = make_env(cfg["env"]) if cfg["env"] else None
    try:
        report = _evaluate_runs(cover_paths, runs, env, orders)
    finally:
        if env is not None and hasattr(env, "close"):
            env.close()
    print(report.to_text())
    if cfg["out"]:
        Path(cfg["out"]).write_text(report.to_json() + "\n", encoding="utf-8")
    return 0


def cmd_bench(cfg: dict) -> int:
    out_root = Path(cfg["out"])
    out_root.mkdir(parents=True, exist_ok=True)
    base = {
        "covers": cfg["covers"], "payload": cfg["payload"], "seed": cfg["seed"],
        "cost": cfg["cost"], "scheme": cfg["scheme"], "jobs": cfg["jobs"],
    }
    runs = []
    for method in ("plain", "cmd"):
        mcfg = dict(base)
        mcfg.update(
            out=str(out_root / method), method=method,
            alpha=cfg["cmd-alpha"],
        )
        cmd_baseline(mcfg)
        runs.append((method, out_root / method))
    ecfg = dict(base)
    ecfg.update(
        out=str(out_root / "mctsteg"), env=cfg["env"], alpha=cfg["alpha"],
        **{"max-searches": cfg["max-searches"], "threshold": cfg["threshold"],
           "uct-c": cfg["uct-c"], "adjust-first": False},
    )
    cmd_embed(ecfg)
    runs.append(("mctsteg", out_root / "mctsteg"))

    cover_paths = media.read_manifest(cfg["covers"])
    env = make_env(cfg["env"])
    try:
        report = _evaluate_runs(cover_paths, runs, env, (2, 3, 4))
    finally:
        if hasattr(env, "close"):
            env.close()
    print(report.to_text())
    (out_root / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")

    by_name = {r.method: r for r in report.rows}
    mcts_fcc = by_name["mctsteg"].mean_fcc[2]
    plain_fcc = by_name["plain"].mean_fcc[2]
    ok = mcts_fcc > plain_fcc
    print(
        f"fcc-direction: {'PASS' if ok else 'FAIL'} "
        f"(mctsteg fcc2 {mcts_fcc:.6f} vs plain {plain_fcc:.6f})"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mctsteg",
        description="tree-search driven non-additive steganographic embedding",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _build_subparser(sub, "embed", _EMBED_OPTS, "embed a manifest of covers")
    _build_subparser(sub, "baseline", _BASELINE_OPTS, "plain/cmd baseline embedding")
    _build_subparser(sub, "train-env", _TRAIN_OPTS, "train the builtin detector")
    _build_subparser(sub, "evaluate", _EVAL_OPTS, "metric tables for finished runs")
    _build_subparser(sub, "bench", _BENCH_OPTS, "three-method comparison")
    return parser


_HANDLERS = {
    "embed": cmd_embed,
    "baseline": cmd_baseline,
    "train-env": cmd_train_env,
    "evaluate": cmd_evaluate,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("MCTSTEG_LOG", "WARNING").upper(),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve(args)
        return _HANDLERS[args._command](cfg)
    except (StegError, OSError) as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
