"""Command-line surface: generate, estimate-dim, pretrain-vq, train, eval, predict, plot.

Exit codes: 0 success, 2 usage error, 1 runtime failure. Every run writes a
manifest JSON next to its primary output (config hash, seed, input checksums)
sufficient to reproduce it; manifests carry no timestamps so reruns are
bit-identical.
"""

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np
import torch

from . import checkpoint as ckpt_io
from . import training
from .datagen import NSEConfig, SWEConfig, TrajectoryDataset, gen_bouncing, read_dataset, simulate_nse, simulate_swe, write_dataset
from .errors import PastNetError
from .intrinsic import intrinsic_dim
from .metrics import compute_report
from .model import predict as model_predict
from .runconfig import load_config, validate_config

OUT_DIR_ENV = "PASTNET_OUT_DIR"


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_manifest(primary_output, command: str, args_record: dict, inputs: list, seed=None):
    manifest = {
        "command": command,
        "arguments": args_record,
        "seed": seed,
        "inputs": {str(p): _sha256(p) for p in inputs if p and Path(p).exists()},
        "output": str(primary_output),
    }
    path = Path(str(primary_output) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _default_out_dir() -> Path:
    return Path(os.environ.get(OUT_DIR_ENV, "runs"))


def _load_run_config(path):
    cfg = load_config(path)
    problems = validate_config(cfg)
    if problems:
        raise PastNetError("invalid config:\n  " + "\n  ".join(problems))
    return cfg


def _resolve_out_dir(cfg) -> Path:
    out = cfg.get("out_dir")
    out_dir = Path(out) if out else _default_out_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def cmd_generate(args) -> int:
    width = args.width if args.width is not None else args.height
    if args.kind == "bounce":
        ds = gen_bouncing(
            args.num, args.frames, args.height, width,
            n_glyphs=args.glyphs, seed=args.seed,
        )
    elif args.kind == "nse":
        if width != args.height:
            raise PastNetError("the vorticity solver runs on a square grid; omit --width")
        cfg = NSEConfig(grid=args.height, n_frames=args.frames)
        ds = simulate_nse(cfg, args.num, seed=args.seed)
    elif args.kind == "swe":
        if width != args.height:
            raise PastNetError("the shallow-water solver runs on a square grid; omit --width")
        cfg = SWEConfig(grid=args.height, n_frames=args.frames)
        ds = simulate_swe(cfg, args.num, seed=args.seed)
    else:  # argparse choices guard this
        raise PastNetError(f"unknown generator kind {args.kind!r}")
    write_dataset(ds, args.out)
    _write_manifest(args.out, "generate", {
        "kind": args.kind, "num": args.num, "frames": args.frames,
        "height": args.height, "width": args.width, "glyphs": args.glyphs,
    }, inputs=[], seed=args.seed)
    print(f"wrote {ds.data.shape} trajectories to {args.out}")
    return 0


def cmd_estimate_dim(args) -> int:
    ds = read_dataset(args.data)
    if args.ckpt:
        ckpt = ckpt_io.load_checkpoint(args.ckpt)
        model = ckpt_io.restore_model(ckpt)
        model.eval()
        offset, scale = ckpt.norm
        frames = torch.from_numpy((ds.data[:, : ckpt.config.input_frames] - offset) / scale)
        with torch.no_grad():
            feats = model.discrete.encode(frames)
        features = feats.reshape(-1, *feats.shape[2:]).numpy()
    else:
        # vectors are per-pixel temporal profiles (T*C per location)
        n, t, c, h, w = ds.data.shape
        features = ds.data.transpose(0, 3, 4, 1, 2).reshape(n * h * w, t * c)
    est = intrinsic_dim(features, neighbors=args.neighbors, sample=args.sample, seed=args.seed)
    defined = est.local_dims[np.isfinite(est.local_dims)]
    result = {
        "dim": est.dim,
        "neighbors": est.neighbors,
        "sample_size": est.sample_size,
        "excluded": est.excluded,
        "mean_local_dim": float(defined.mean()) if defined.size else None,
        "seed": args.seed,
        "inputs": {str(p): _sha256(p) for p in (args.data, args.ckpt) if p},
    }
    print(json.dumps(result, indent=2))
    return 0


def cmd_pretrain_vq(args) -> int:
    cfg = _load_run_config(args.config)
    model_cfg = cfg.to_model_config()
    out_dir = _resolve_out_dir(cfg)
    ds = read_dataset(cfg.get("data"))
    ckpt, logs = training.run_pipeline(ds.data, model_cfg, stop_after="vqvae")
    ckpt_path = out_dir / "pretrain_vq.pstc"
    ckpt_io.save_checkpoint(ckpt, ckpt_path)
    (out_dir / "pretrain_log.json").write_text(json.dumps(logs, indent=2) + "\n")
    _write_manifest(ckpt_path, "pretrain-vq", {"config": str(args.config)},
                    inputs=[args.config, cfg.get("data")], seed=model_cfg.seed)
    print(f"wrote {ckpt_path} (latent_dim={ckpt.latent_dim})")
    return 0


def cmd_train(args) -> int:
    cfg = _load_run_config(args.config)
    model_cfg = cfg.to_model_config()
    out_dir = _resolve_out_dir(cfg)
    ds = read_dataset(cfg.get("data"))

    if args.resume:
        resume = ckpt_io.load_checkpoint(args.resume)
        offset, scale = resume.norm
        data = ((ds.data - offset) / scale).astype(np.float32)
        ckpt, history = training.train_phase2_full(
            data, model_cfg, resume=resume, out_dir=out_dir
        )
        logs = {"full": history, "norm": [offset, scale]}
    elif cfg.get("pretrain_checkpoint"):
        pre = ckpt_io.load_checkpoint(cfg.get("pretrain_checkpoint"))
        offset, scale = pre.norm
        data = ((ds.data - offset) / scale).astype(np.float32)
        ckpt, history = training.train_phase2_full(
            data, model_cfg, resume=pre, out_dir=out_dir
        )
        logs = {"full": history, "norm": [offset, scale]}
    else:
        ckpt, logs = training.run_pipeline(ds.data, model_cfg, out_dir=out_dir)

    ckpt_path = out_dir / "model_full.pstc"
    ckpt_io.save_checkpoint(ckpt, ckpt_path)
    (out_dir / "training_log.json").write_text(json.dumps(logs, indent=2) + "\n")
    _write_manifest(ckpt_path, "train", {"config": str(args.config), "resume": args.resume},
                    inputs=[args.config, cfg.get("data"), args.resume], seed=model_cfg.seed)
    final = logs["full"]["losses"][-1] if logs.get("full", {}).get("losses") else None
    print(f"wrote {ckpt_path}" + (f" (final loss {final:.6g})" if final is not None else ""))
    return 0


def cmd_eval(args) -> int:
    ckpt = ckpt_io.load_checkpoint(args.ckpt)
    ds = read_dataset(args.data)
    cfg = ckpt.config
    t, t_f = cfg.input_frames, cfg.output_frames
    if ds.data.shape[2:] != (cfg.channels, cfg.height, cfg.width) or ds.data.shape[1] < t + t_f:
        raise PastNetError(
            f"dataset shape {ds.data.shape} is incompatible with the checkpoint config "
            f"(needs (*, >={t + t_f}, {cfg.channels}, {cfg.height}, {cfg.width}))"
        )
    limit = args.limit if args.limit else ds.data.shape[0]
    preds, targets = [], []
    for i in range(min(limit, ds.data.shape[0])):
        past = ds.data[i, :t]
        preds.append(model_predict(ckpt, past).numpy())
        targets.append(ds.data[i, t : t + t_f])
    pred = np.stack(preds)
    target = np.stack(targets)
    report = compute_report(pred, target)
    doc = report.to_dict()
    doc["checkpoint"] = str(args.ckpt)
    doc["data"] = str(args.data)
    doc["sequences"] = int(pred.shape[0])
    doc["frames"] = {
        "input": np.round(ds.data[0, :t], 5).tolist(),
        "target": np.round(target[0], 5).tolist(),
        "prediction": np.round(pred[0], 5).tolist(),
    }
    Path(args.report).write_text(json.dumps(doc, indent=2) + "\n")
    _write_manifest(args.report, "eval", {"ckpt": str(args.ckpt), "data": str(args.data)},
                    inputs=[args.ckpt, args.data], seed=cfg.seed)
    print(f"wrote {args.report} (mse_pixel={doc['mse_pixel']:.6g})")
    return 0


def cmd_predict(args) -> int:
    ckpt = ckpt_io.load_checkpoint(args.ckpt)
    ds = read_dataset(args.input)
    cfg = ckpt.config
    t = cfg.input_frames
    if ds.data.shape[2:] != (cfg.channels, cfg.height, cfg.width) or ds.data.shape[1] < t:
        raise PastNetError(
            f"dataset shape {ds.data.shape} is incompatible with the checkpoint config "
            f"(needs (*, >={t}, {cfg.channels}, {cfg.height}, {cfg.width}))"
        )
    preds = np.stack([model_predict(ckpt, ds.data[i, :t]).numpy() for i in range(ds.data.shape[0])])
    out = TrajectoryDataset(
        data=preds.astype(np.float32),
        generator="prediction",
        params={"checkpoint": str(args.ckpt), "source": str(args.input)},
        seed=cfg.seed,
        split="prediction",
    )
    write_dataset(out, args.out)
    _write_manifest(args.out, "predict", {"ckpt": str(args.ckpt), "input": str(args.input)},
                    inputs=[args.ckpt, args.input], seed=cfg.seed)
    print(f"wrote predictions {preds.shape} to {args.out}")
    return 0


def cmd_plot(args) -> int:
    from . import plotting

    doc = json.loads(Path(args.report).read_text())
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if any(stage in doc for stage in ("autoencoder", "vqvae", "full")):
        path = out_dir / "loss_curves.png"
        plotting.plot_loss_curves(doc, path)
        written.append(path)
    if doc.get("per_frame"):
        path = out_dir / "per_frame_metrics.png"
        plotting.plot_per_frame_metrics(doc, path)
        written.append(path)
    if doc.get("frames"):
        path = out_dir / "frame_strip.png"
        plotting.plot_frame_strip(
            {name: np.asarray(seq) for name, seq in doc["frames"].items()}, path
        )
        written.append(path)
    if not written:
        raise PastNetError(f"report {args.report} contains nothing to plot")
    _write_manifest(out_dir / "plots", "plot", {"report": str(args.report)},
                    inputs=[args.report])
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pastnet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic trajectory dataset")
    p.add_argument("--kind", choices=("bounce", "nse", "swe"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--num", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=20)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=None, help="defaults to --height")
    p.add_argument("--glyphs", type=int, default=2)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("estimate-dim", help="estimate intrinsic dimension of a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", default=None, help="use this checkpoint's encoder features")
    p.add_argument("--neighbors", type=int, default=20)
    p.add_argument("--sample", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_estimate_dim)

    p = sub.add_parser("pretrain-vq", help="run the autoencoder and quantization stages")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_pretrain_vq)

    p = sub.add_parser("train", help="train the full model (all stages unless resumed)")
    p.add_argument("--config", required=True)
    p.add_argument("--resume", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--limit", type=int, default=0, help="evaluate at most this many sequences")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="predict futures for every sequence in a dataset")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("plot", help="emit loss-curve / metric / frame-strip images")
    p.add_argument("--report", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        return args.func(args)
    except PastNetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
