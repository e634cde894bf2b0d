"""Command-line entry point: dataset prep, the two training phases,
inference, rendering, metrics, mesh export, and the interactive service.

Exit codes: 0 success, 1 usage error, 2 runtime failure.  Logs go to
stderr; file outputs land where the flags point; `metrics` prints JSON
to stdout.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .dataprep import SynthProfile, load_dataset, save_dataset, synth_dataset
from .grids import ColorGrid, OccupancyGrid, load_voxb, save_voxb
from .mesh import colorize, marching_cubes, write_mesh
from .metrics import PatchSpec, div_score, loose_iou, lp_score, strict_iou
from .render import VIEW_BY_NAME, render_color, save_png
from .trainer import (Pipeline, PipelineConfig, eval_geometry_iou,
                      eval_texture_mae, train_geometry, train_texture)

# ------------------------------------------------------- config file format
# Flat key=value lines, one per PipelineConfig field; '#' starts a comment.
# CLI precedence: shortcut flags > --set pairs > --config file > defaults.

_BOOL_KEYS = {"symmetry", "adversarial"}
_INT_KEYS = {"k", "receptive_field", "backbone_channels", "style_dim",
             "dilate_radius", "seed", "epochs", "steps_per_epoch",
             "eval_every", "min_steps"}
_FLOAT_KEYS = {"alpha", "beta", "gamma", "smooth_sigma", "lr"}
_OPT_FLOAT_KEYS = {"early_stop_iou", "early_stop_mae", "max_seconds"}
_INT_TUPLE_KEYS = {"up_channels", "disc_channels"}
_FIELD_ORDER = [f.name for f in dataclasses.fields(PipelineConfig)]


def parse_config_value(key: str, text: str):
    text = text.strip()
    if key in _BOOL_KEYS:
        low = text.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ValueError(f"{key} wants true/false, got {text!r}")
    if key in _INT_KEYS:
        return int(text)
    if key in _FLOAT_KEYS:
        return float(text)
    if key in _OPT_FLOAT_KEYS:
        return None if text.lower() in ("", "none") else float(text)
    if key == "views":
        return tuple(s.strip() for s in text.split(",") if s.strip())
    if key in _INT_TUPLE_KEYS:
        return tuple(int(s) for s in text.split(",") if s.strip())
    if key == "view_beta":
        if not text or text.lower() == "none":
            return {}
        pairs = {}
        for item in text.split(","):
            name, _, val = item.partition(":")
            if not _:
                raise ValueError(f"view_beta wants name:value pairs, got {item!r}")
            pairs[name.strip()] = float(val)
        return pairs
    raise ValueError(f"unknown config key {key!r}")


def format_config_value(key: str, val) -> str:
    if key in _BOOL_KEYS:
        return "true" if val else "false"
    if val is None:
        return "none"
    if key == "views":
        return ",".join(val)
    if key in _INT_TUPLE_KEYS:
        return ",".join(str(int(v)) for v in val)
    if key == "view_beta":
        return ",".join(f"{n}:{v!r}" for n, v in sorted(val.items()))
    return repr(val) if isinstance(val, float) else str(val)


def read_config_file(path) -> dict:
    values = {}
    for i, line in enumerate(Path(path).read_text().splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, val = stripped.partition("=")
        if not sep:
            raise ValueError(f"{path}:{i}: expected key=value, got {line!r}")
        key = key.strip()
        values[key] = parse_config_value(key, val)
    return values


def write_config_file(cfg: PipelineConfig, path) -> None:
    lines = [f"{k}={format_config_value(k, getattr(cfg, k))}"
             for k in _FIELD_ORDER]
    Path(path).write_text("\n".join(lines) + "\n")


def make_pipeline_config(config_file=None, sets=(), defaults=None,
                         **shortcuts) -> PipelineConfig:
    values = dict(defaults or {})
    if config_file is not None:
        values.update(read_config_file(config_file))
    for item in sets:
        key, sep, val = item.partition("=")
        if not sep:
            raise ValueError(f"--set wants key=value, got {item!r}")
        key = key.strip()
        values[key] = parse_config_value(key, val)
    for key, val in shortcuts.items():
        if val is not None:
            values[key] = val
    return PipelineConfig(**values)


def _shortcuts(args) -> dict:
    return dict(seed=args.seed, epochs=args.epochs,
                steps_per_epoch=args.steps, lr=args.lr)


def _resume_path(resume, base: Path):
    if resume is None:
        return None
    p = Path(resume)
    return str(p) if p.is_absolute() or p.parent != Path(".") else str(base / p)


# ------------------------------------------------------------ model folders
# A trained model directory holds config.txt, styles.json, the geometry
# bundle (geo.*) and, after the second phase, the texture bundle (tex.*).

def _write_model_meta(out: Path, cfg: PipelineConfig, style_names,
                      data_dir) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_config_file(cfg, out / "config.txt")
    meta = {"styles": list(style_names), "dataset": str(Path(data_dir).resolve()),
            "k": cfg.k, "fine_res": cfg.K}
    (out / "styles.json").write_text(json.dumps(meta, indent=2) + "\n")


def open_model_dir(path) -> tuple[PipelineConfig, Pipeline, dict, str]:
    """Load config + the best available checkpoint (texture phase wins).
    Returns (config, pipeline, metadata, phase)."""
    root = Path(path)
    cfg_path = root / "config.txt"
    if not cfg_path.exists():
        raise FileNotFoundError(f"{root} has no config.txt; train a model first")
    cfg = PipelineConfig(**read_config_file(cfg_path))
    phase = "tex" if (root / "tex.ckpt").exists() else "geo"
    ckpt = root / f"{phase}.ckpt"
    if not ckpt.exists():
        raise FileNotFoundError(f"{root} has neither tex.ckpt nor geo.ckpt")
    pipe = Pipeline.restore(ckpt, cfg)
    meta_path = root / "styles.json"
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
    else:
        meta = {"styles": [f"style{i:02d}" for i in range(pipe.n_styles)]}
    return cfg, pipe, meta, phase


def _load_coarse(path) -> OccupancyGrid:
    grid = load_voxb(path)
    if not isinstance(grid, OccupancyGrid):
        raise ValueError(f"{path} is not an occupancy grid")
    return grid


# ---------------------------------------------------------------- commands

def cmd_prep(args) -> None:
    profile = SynthProfile(fine_res=args.fine_res, factor=args.factor,
                           n_contents=args.contents)
    styles, view_sets, contents = synth_dataset(args.seed, args.styles, profile)
    save_dataset(args.out, styles, view_sets, contents)
    print(f"wrote {len(styles)} styles and {len(contents)} contents "
          f"to {args.out}", file=sys.stderr)


def cmd_train_geo(args) -> None:
    styles, contents, _ = load_dataset(args.data)
    cfg = make_pipeline_config(args.config, args.set,
                               defaults={"k": styles[0].coarse.dims[0]},
                               **_shortcuts(args))
    out = Path(args.out)
    pipe = Pipeline(cfg, len(styles))
    _write_model_meta(out, cfg, [ex.name for ex in styles], args.data)
    state = train_geometry(pipe, styles, contents,
                           log_path=out / "geo_log.csv", ckpt_dir=out,
                           resume=_resume_path(args.resume, out))
    iou = eval_geometry_iou(pipe, styles)
    print(f"geometry phase done at step {state.step}: strict-iou {iou:.4f}"
          f"{' (' + state.note + ')' if state.note else ''}", file=sys.stderr)


def cmd_train_tex(args) -> None:
    styles, _, _ = load_dataset(args.data)
    model = Path(args.model)
    cfg = make_pipeline_config(args.config or model / "config.txt", args.set,
                               **_shortcuts(args))
    resume = _resume_path(args.resume, model)
    if resume is None:
        pipe = Pipeline.restore(model / "geo.ckpt", cfg)
    else:
        pipe = Pipeline(cfg, len(styles))   # bundle carries all weights
    state = train_texture(pipe, styles, log_path=model / "tex_log.csv",
                          ckpt_dir=model, resume=resume)
    mae = eval_texture_mae(pipe, styles)
    print(f"texture phase done at step {state.step}: masked mae {mae:.4f}"
          f"{' (' + state.note + ')' if state.note else ''}", file=sys.stderr)


def cmd_detailize(args) -> None:
    _, pipe, _, _ = open_model_dir(args.model)
    coarse = _load_coarse(args.coarse)
    geo, col = pipe.detailize(coarse, args.style)
    save_voxb(f"{args.out}.geo.voxb", geo)
    save_voxb(f"{args.out}.tex.voxb", col)
    print(f"{args.out}.geo.voxb / .tex.voxb: {geo.dims[0]}^3, "
          f"{int(geo.data.sum())} occupied", file=sys.stderr)


def cmd_render(args) -> None:
    geo = _load_coarse(args.geo)
    tex = load_voxb(args.tex)
    if not isinstance(tex, ColorGrid):
        raise ValueError(f"{args.tex} is not a color grid")
    names = args.view or sorted(VIEW_BY_NAME)
    out = Path(args.out)
    if len(names) == 1 and out.suffix == ".png":
        targets = {names[0]: out}
    else:
        out.mkdir(parents=True, exist_ok=True)
        targets = {n: out / f"{n}.png" for n in names}
    for name, path in targets.items():
        save_png(path, render_color(geo, tex, VIEW_BY_NAME[name]).rgb)
    print(f"rendered {', '.join(targets)} to {out}", file=sys.stderr)


def cmd_metrics(args) -> None:
    cfg, pipe, meta, phase = open_model_dir(args.model)
    styles, contents, manifest = load_dataset(args.data)
    spec = PatchSpec(size=args.patch_size, stride=args.patch_stride)
    style_geos = [ex.geo for ex in styles]

    per_style, outputs = [], {}
    for j, ex in enumerate(styles):
        out = pipe.generate_geometry(ex.coarse, j)
        row = {"style": ex.name,
               "fine_iou": strict_iou(out, ex.geo),
               "strict_iou": strict_iou(out, ex.coarse),
               "loose_iou": loose_iou(out, ex.coarse, cfg.dilate_radius)}
        if not args.no_patches:
            lp = lp_score(out, style_geos, spec, threshold=args.threshold)
            row["lp"] = lp.score
            row["lp_patches"] = lp.qualifying
        per_style.append(row)

    per_content = []
    for i, coarse in enumerate(contents):
        name = manifest["contents"][i]
        for j, ex in enumerate(styles):
            out = pipe.generate_geometry(coarse, j)
            outputs[(i, j)] = out
            per_content.append({
                "content": name, "style": ex.name,
                "strict_iou": strict_iou(out, coarse),
                "loose_iou": loose_iou(out, coarse, cfg.dilate_radius)})

    rows = per_style + per_content
    report = {
        "checkpoint": phase,
        "styles": meta["styles"],
        "per_style": per_style,
        "per_content": per_content,
        "worst": {"strict_iou": min(r["strict_iou"] for r in rows),
                  "loose_iou": min(r["loose_iou"] for r in rows)},
    }
    if phase == "tex":
        report["texture_mae"] = eval_texture_mae(pipe, styles)
    if not args.no_patches and outputs:
        report["div"] = div_score(outputs, style_geos, spec,
                                  threshold=args.threshold)
    json.dump(report, sys.stdout, indent=2)
    print()


def cmd_export(args) -> None:
    _, pipe, _, _ = open_model_dir(args.model)
    coarse = _load_coarse(args.coarse)
    _, density, col = pipe.detailize_full(coarse, args.style)
    mesh = colorize(marching_cubes(density, iso=args.iso, pad=True), col,
                    interpolate=args.interpolate)
    fmt = args.format or (args.out.rsplit(".", 1)[-1].lower()
                          if "." in args.out else "ply")
    write_mesh(mesh, fmt, args.out)
    print(f"{args.out}: {len(mesh.vertices)} vertices, "
          f"{len(mesh.triangles)} triangles", file=sys.stderr)


def cmd_serve(args) -> None:
    from .service import DetailizeService, ModelHandle, serve

    models = {}
    for spec in args.model:
        name, sep, path = spec.partition("=")
        if not sep:
            name, path = Path(spec).name, spec
        _, pipe, meta, _ = open_model_dir(path)
        models[name] = ModelHandle(pipe, tuple(meta["styles"]))
    service = DetailizeService(models, max_workers=args.workers)
    print(f"serving {sorted(models)} on {args.host}:{args.port}",
          file=sys.stderr)
    serve(service, host=args.host, port=args.port, static_dir=args.static)


# ------------------------------------------------------------------ parser

class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _add_train_flags(sp) -> None:
    sp.add_argument("--config", help="key=value config file")
    sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override one config key (repeatable)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--steps", type=int, help="steps per epoch")
    sp.add_argument("--lr", type=float)
    sp.add_argument("--resume", metavar="PREFIX",
                    help="checkpoint bundle prefix to continue from")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="voxdetail",
                description="Few-exemplar voxel detailization pipeline.")
    sub = p.add_subparsers(dest="command", metavar="command", required=True)

    sp = sub.add_parser("prep", help="write a synthetic exemplar dataset")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--styles", type=int, default=2)
    sp.add_argument("--contents", type=int, default=2)
    sp.add_argument("--fine-res", type=int, default=64)
    sp.add_argument("--factor", type=int, default=8)
    sp.set_defaults(func=cmd_prep)

    sp = sub.add_parser("train-geo", help="phase one: geometry upsampler")
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True, help="model directory to create")
    _add_train_flags(sp)
    sp.set_defaults(func=cmd_train_geo)

    sp = sub.add_parser("train-tex", help="phase two: texture, geometry frozen")
    sp.add_argument("--data", required=True)
    sp.add_argument("--model", required=True, help="directory from train-geo")
    _add_train_flags(sp)
    sp.set_defaults(func=cmd_train_tex)

    sp = sub.add_parser("detailize", help="upsample one coarse grid to voxels")
    sp.add_argument("--model", required=True)
    sp.add_argument("--coarse", required=True, help="coarse occupancy .voxb")
    sp.add_argument("--style", type=int, default=0)
    sp.add_argument("--out", required=True, metavar="PREFIX",
                    help="writes PREFIX.geo.voxb and PREFIX.tex.voxb")
    sp.set_defaults(func=cmd_detailize)

    sp = sub.add_parser("render", help="orthographic views of a voxel pair")
    sp.add_argument("--geo", required=True)
    sp.add_argument("--tex", required=True)
    sp.add_argument("--view", action="append", choices=sorted(VIEW_BY_NAME),
                    help="view name (repeatable; default all)")
    sp.add_argument("--out", required=True,
                    help="png path for one view, directory otherwise")
    sp.set_defaults(func=cmd_render)

    sp = sub.add_parser("metrics", help="evaluate a model on a dataset (JSON)")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--patch-size", type=int, default=16)
    sp.add_argument("--patch-stride", type=int, default=8)
    sp.add_argument("--threshold", type=float, default=0.95)
    sp.add_argument("--no-patches", action="store_true",
                    help="skip the patch-based scores")
    sp.set_defaults(func=cmd_metrics)

    sp = sub.add_parser("export", help="detailize and write a colored mesh")
    sp.add_argument("--model", required=True)
    sp.add_argument("--coarse", required=True)
    sp.add_argument("--style", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--format", choices=("ply", "obj"))
    sp.add_argument("--iso", type=float, default=0.5)
    sp.add_argument("--interpolate", action="store_true",
                    help="trilinear vertex colors instead of nearest voxel")
    sp.set_defaults(func=cmd_export)

    sp = sub.add_parser("serve", help="run the interactive editing service")
    sp.add_argument("--model", action="append", required=True,
                    metavar="[NAME=]DIR")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)
    sp.add_argument("--static", help="directory of editor assets to serve")
    sp.add_argument("--workers", type=int, default=2)
    sp.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        if isinstance(exc.code, int) or exc.code is None:
            return exc.code or 0
        return 1
    try:
        args.func(args)
    except Exception as exc:
        print(f"voxdetail: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
