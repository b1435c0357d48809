"""Command-line surface.

Commands: gen-data, train, emulate, eval, invert, bench, plot.
Configuration comes from a JSON file (--config) plus --set key=value
overrides (overrides win). Unknown keys are rejected. Seeds are mandatory
for stochastic commands; HYPEREM_SEED supplies a default.

Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import checkpoint, classical, metrics, pipeline, retrieval, synthrtm, vae
from .hsdata import (ParameterMap, read_cube, read_param_map, split_dataset,
                     write_cube, write_param_map)
from .svgplot import heatmap_svg


class UsageError(Exception):
    pass


# command -> (required keys, {optional key: default})
SCHEMAS = {
    "gen-data": ({"n_cubes", "out_dir"},
                 {"height": 64, "width": 64, "bands": 211, "seed": None}),
    "train": ({"model", "data_dir", "out"},
              {"seed": None, "epochs": 150, "pretrain_epochs": None,
               "n_spectra": 3000, "n_components": 2, "regularizer": 1e-6,
               "widths": [16, 32, 64], "n_down": 2, "latent": 20,
               "hidden": None, "batch_size": None, "base_lr": 1e-4,
               "log": None, "split_fractions": [0.7, 0.2, 0.1]}),
    "emulate": ({"model", "maps", "out_dir"},
                {"mode": "mean", "seed": None}),
    "eval": ({"ref", "emu", "out"}, {}),
    "invert": ({"cube", "out_prefix"},
               {"param": "cab", "ref_cube": None, "lut_grid": None,
                "cost": "rmse"}),
    "bench": ({"model", "maps", "out"}, {"repeats": 3, "workers": 1}),
    "plot": ({"mode", "out"},
             {"ref": None, "emu": None, "band_index": 0, "map": None,
              "title": ""}),
}


def load_config(command: str, config_path: str | None, overrides: list) -> dict:
    cfg = {}
    if config_path:
        try:
            with open(config_path) as f:
                cfg = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read config {config_path}: {e}")
    for item in overrides:
        if "=" not in item:
            raise UsageError(f"--set needs key=value, got {item!r}")
        key, _, raw = item.partition("=")
        try:
            cfg[key] = json.loads(raw)
        except json.JSONDecodeError:
            cfg[key] = raw
    required, optional = SCHEMAS[command]
    allowed = required | set(optional)
    unknown = set(cfg) - allowed
    if unknown:
        raise UsageError(f"unknown config keys for {command}: {sorted(unknown)}")
    for key, default in optional.items():
        cfg.setdefault(key, default)
    if "seed" in allowed and cfg.get("seed") is None:
        env = os.environ.get("HYPEREM_SEED")
        if env is not None:
            cfg["seed"] = int(env)
    missing = required - set(k for k in cfg if cfg[k] is not None)
    if missing:
        raise UsageError(f"missing config keys for {command}: {sorted(missing)}")
    return cfg


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(
        json.dumps(cfg, sort_keys=True).encode("utf-8")).hexdigest()


def _require_seed(cfg: dict, why: str) -> int:
    if cfg.get("seed") is None:
        raise UsageError(f"seed required for {why} (set 'seed' or HYPEREM_SEED)")
    return int(cfg["seed"])


def _load_dataset(data_dir: str) -> list:
    manifest_path = os.path.join(data_dir, "manifest.json")
    try:
        with open(manifest_path) as f:
            manifest = json.load(f)
    except OSError as e:
        raise UsageError(f"cannot read dataset manifest: {e}")
    pairs = []
    for entry in manifest["files"]:
        pmap = read_param_map(os.path.join(data_dir, entry["map"]))
        cube = read_cube(os.path.join(data_dir, entry["cube"]))
        pairs.append((pmap, cube))
    return pairs


def _load_maps(path: str) -> list:
    if os.path.isdir(path):
        names = sorted(n for n in os.listdir(path) if n.endswith(".hpm"))
        if not names:
            raise UsageError(f"no .hpm files in {path}")
        return [read_param_map(os.path.join(path, n)) for n in names]
    return [read_param_map(path)]


# ---------------------------------------------------------------- commands

def cmd_gen_data(cfg: dict) -> int:
    seed = _require_seed(cfg, "data generation")
    out_dir = cfg["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    n = int(cfg["n_cubes"])
    files, seeds = [], []
    for i, (pmap, cube) in enumerate(
            synthrtm.gen_dataset(n, int(cfg["height"]), int(cfg["width"]),
                                 int(cfg["bands"]), seed)):
        cube_name = f"cube_{i:04d}.hsc"
        map_name = f"map_{i:04d}.hpm"
        write_cube(cube, os.path.join(out_dir, cube_name))
        write_param_map(pmap, os.path.join(out_dir, map_name))
        files.append({"cube": cube_name, "map": map_name})
        seeds.append(seed + i)
    manifest = {"config": cfg, "config_hash": config_hash(cfg),
                "files": files, "seeds": seeds}
    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        json.dump(manifest, f, sort_keys=True, indent=1)
    print(f"wrote {n} cube/map pairs to {out_dir}", file=sys.stderr)
    return 0


def cmd_train(cfg: dict) -> int:
    if cfg["model"] not in pipeline.MODEL_KINDS:
        raise UsageError(f"unknown model kind {cfg['model']!r}; "
                         f"choose from {pipeline.MODEL_KINDS}")
    seed = _require_seed(cfg, "training")
    pairs = _load_dataset(cfg["data_dir"])
    split = split_dataset(len(pairs), tuple(cfg["split_fractions"]), seed)
    model, log = pipeline.train_model(
        cfg["model"], pairs, split.train_indices, seed,
        epochs=int(cfg["epochs"]),
        pretrain_epochs=None if cfg["pretrain_epochs"] is None
        else int(cfg["pretrain_epochs"]),
        n_spectra=int(cfg["n_spectra"]),
        n_components=int(cfg["n_components"]),
        regularizer=float(cfg["regularizer"]),
        hidden=tuple(cfg["hidden"]) if cfg["hidden"] else None,
        widths=tuple(cfg["widths"]), n_down=int(cfg["n_down"]),
        latent=int(cfg["latent"]),
        batch_size=None if cfg["batch_size"] is None else int(cfg["batch_size"]),
        base_lr=float(cfg["base_lr"]))
    checkpoint.save_model(model, cfg["out"],
                          metadata={"seed": seed, "config_hash": config_hash(cfg),
                                    "model": cfg["model"]})
    if cfg["log"]:
        keys = sorted({k for row in log for k in row})
        with open(cfg["log"], "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=keys)
            writer.writeheader()
            writer.writerows(log)
    print(f"trained {cfg['model']} -> {cfg['out']}", file=sys.stderr)
    return 0


def cmd_emulate(cfg: dict) -> int:
    model, _ = checkpoint.load_model(cfg["model"])
    maps = _load_maps(cfg["maps"])
    mode = cfg["mode"]
    if mode not in ("mean", "sample"):
        raise UsageError("mode must be 'mean' or 'sample'")
    seed = 0
    if mode == "sample":
        seed = _require_seed(cfg, "sample-mode emulation")
    os.makedirs(cfg["out_dir"], exist_ok=True)
    wavelengths = 400.0 + 10.0 * np.arange(_model_bands(model))
    for i, pmap in enumerate(maps):
        cube = pipeline.emulate_any(model, pmap, wavelengths, mode, seed + i)
        write_cube(cube, os.path.join(cfg["out_dir"], f"emulated_{i:04d}.hsc"))
    print(f"emulated {len(maps)} cube(s) -> {cfg['out_dir']}", file=sys.stderr)
    return 0


def _model_bands(model) -> int:
    if isinstance(model, vae.VaeEmulator):
        return model.arch["bands"]
    if isinstance(model, classical.MlpModel):
        return model.n_outputs
    return model.pca.mean_spectrum.shape[0]


def cmd_eval(cfg: dict) -> int:
    ref = read_cube(cfg["ref"])
    emu = read_cube(cfg["emu"])
    report = metrics.evaluate(ref, emu)
    with open(cfg["out"], "w", newline="") as f:
        f.write(f"# masked_pixel_count={report.masked_pixel_count}\n")
        writer = csv.writer(f)
        writer.writerow(["metric", "value"])
        for key, val in report.as_dict().items():
            if key == "masked_pixel_count":
                continue
            writer.writerow([key, "inf" if math.isinf(val) else f"{val:.12g}"])
    print(f"metrics -> {cfg['out']}", file=sys.stderr)
    return 0


def cmd_invert(cfg: dict) -> int:
    cube = read_cube(cfg["cube"])
    lut = synthrtm.build_lut(cfg["lut_grid"], synthrtm.BandGrid(cube.bands))
    param = cfg["param"]
    est = retrieval.retrieve_map(cube, lut, param, cfg["cost"])
    prefix = cfg["out_prefix"]
    _write_single_map(est, f"{param}", f"{prefix}_retrieved.hpm", lut, param)
    if cfg["ref_cube"]:
        ref = retrieval.retrieve_map(read_cube(cfg["ref_cube"]), lut, param,
                                     cfg["cost"])
        result = retrieval.relative_error_map(
            ref, est, retrieval.grid_range(lut, param))
        _write_single_map(result.error_map, f"{param}_re_percent",
                          f"{prefix}_re.hpm", None, None)
        with open(f"{prefix}_re.csv", "w", newline="") as f:
            f.write(f"# normalization_range={retrieval.grid_range(lut, param)}\n")
            writer = csv.writer(f)
            writer.writerow(["mean_relative_error_percent"])
            writer.writerow([f"{result.mean_relative_error:.12g}"])
    print(f"inversion -> {prefix}_*", file=sys.stderr)
    return 0


def _write_single_map(values: np.ndarray, name: str, path, lut, param) -> None:
    finite = values[np.isfinite(values)]
    lo = float(finite.min()) if finite.size else 0.0
    hi = float(finite.max()) if finite.size else 1.0
    if lut is not None:
        grid = lut.grid_spec[param]
        lo, hi = float(min(grid)), float(max(grid))
    filled = np.where(np.isfinite(values), values, lo)
    write_param_map(ParameterMap((name,), ((lo, max(hi, lo + 1e-9)),),
                                 filled[:, :, None].astype(np.float32)), path)


def cmd_bench(cfg: dict) -> int:
    model, _ = checkpoint.load_model(cfg["model"])
    maps = _load_maps(cfg["maps"])
    wavelengths = 400.0 + 10.0 * np.arange(_model_bands(model))
    result = metrics.throughput_bench(
        lambda m: pipeline.emulate_any(model, m, wavelengths),
        maps, int(cfg["repeats"]))
    with open(cfg["out"], "w", newline="") as f:
        f.write(f"# workers={cfg['workers']} n_images={result['n_images']}\n")
        writer = csv.writer(f)
        writer.writerow(["measurement", "seconds"])
        for i, t in enumerate(result["raw_seconds"]):
            writer.writerow([f"pass_{i}", f"{t:.9g}"])
        writer.writerow(["median", f"{result['median_seconds']:.9g}"])
        writer.writerow(["images_per_second",
                         f"{result['images_per_second']:.9g}"])
    print(f"throughput {result['images_per_second']:.3g} images/s",
          file=sys.stderr)
    return 0


def cmd_plot(cfg: dict) -> int:
    mode = cfg["mode"]
    if mode == "scatter":
        if not (cfg["ref"] and cfg["emu"]):
            raise UsageError("scatter plot needs 'ref' and 'emu' cube paths")
        ref, emu = read_cube(cfg["ref"]), read_cube(cfg["emu"])
        metrics.scatter_export(ref, emu, int(cfg["band_index"]), cfg["out"])
    elif mode == "errmap":
        if not cfg["map"]:
            raise UsageError("errmap plot needs a 'map' (HPM1) path")
        pmap = read_param_map(cfg["map"])
        heatmap_svg(pmap.values[:, :, 0].astype(np.float64), cfg["out"],
                    title=cfg["title"] or pmap.names[0])
    else:
        raise UsageError(f"unknown plot mode {mode!r}")
    print(f"plot -> {cfg['out']}", file=sys.stderr)
    return 0


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "emulate": cmd_emulate,
    "eval": cmd_eval,
    "invert": cmd_invert,
    "bench": cmd_bench,
    "plot": cmd_plot,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyperem",
        description="Hyperspectral image emulation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (JSON-parsed value)")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        cfg = load_config(args.command, args.config, args.set)
        return COMMANDS[args.command](cfg)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # runtime failure
        print(f"failure: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
