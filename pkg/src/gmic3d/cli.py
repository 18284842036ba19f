"""Command-line entry point wiring data generation, training, evaluation,
benchmarking, and the zeta ablation."""

import argparse
import json
import math
import os
import sys
from dataclasses import replace

import numpy as np
import torch

from . import __version__
from .config import (
    ModelConfig,
    TrainConfig,
    ConfigurationError,
    PROFILES,
    FULL_IMAGE_3D,
    read_kv_config,
    apply_kv,
    config_to_dict,
)
from .container import FormatError
from .costmodel import count_macs, extrapolate_linear
from .metrics import (
    classification_report,
    segmentation_report,
    upsample_saliency,
    CLASS_NAMES,
)
from .phantom import generate_dataset, save_dataset, load_dataset, spec_from_dict
from .training import (
    Checkpoint,
    train,
    predict_tta,
    sample_hyperparameters,
    apply_hyperparameters,
)

DATASET_FILENAME = "phantom.vols"
CHECKPOINT_FILENAME = "checkpoint.ckpt"


def _out_dir(args):
    out = os.environ.get("GMIC3D_OUT_DIR", args.out)
    os.makedirs(out, exist_ok=True)
    return out


def _write_manifest(out, args, extra=None):
    manifest = {
        "subcommand": args.command,
        "version": __version__,
        "argv": sys.argv[1:],
        "seed": getattr(args, "seed", None),
    }
    if extra:
        manifest.update(extra)
    with open(os.path.join(out, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)


def _split_configs(kv):
    """Route flat config keys to (ModelConfig, TrainConfig)."""
    model_cfg, train_cfg = ModelConfig(), TrainConfig()
    model_kv, train_kv = {}, {}
    for key, value in kv.items():
        if hasattr(train_cfg, key):
            train_kv[key] = value
        else:
            model_kv[key] = value
    model_cfg = apply_kv(model_cfg, model_kv)
    train_cfg = apply_kv(train_cfg, train_kv)
    return model_cfg, train_cfg


def _load_configs(path, seed=None):
    kv = read_kv_config(path) if path else {}
    model_cfg, train_cfg = _split_configs(kv)
    if seed is not None:
        train_cfg = replace(train_cfg, seed=seed)
    return model_cfg, train_cfg


def cmd_generate_data(args):
    kv = read_kv_config(args.spec) if args.spec else {}
    if args.seed is not None:
        kv["seed"] = args.seed
    spec = spec_from_dict(kv)
    volumes = generate_dataset(spec, args.groups)
    out = _out_dir(args)
    save_dataset(os.path.join(out, DATASET_FILENAME), volumes, spec)
    _write_manifest(out, args, {"spec": {k: str(v) for k, v in vars(spec).items()}})
    print(f"wrote {len(volumes)} volumes ({args.groups} groups) to {out}")
    return 0


def cmd_train(args):
    volumes = load_dataset(os.path.join(args.data, DATASET_FILENAME))
    model_cfg, train_cfg = _load_configs(args.config, args.seed)
    out = _out_dir(args)

    if args.search:
        rng = np.random.default_rng(train_cfg.seed)
        best_ckpt, best_auc, trials = None, -math.inf, []
        for trial in range(args.search):
            hp = sample_hyperparameters(rng, mode="3d")
            m_cfg, t_cfg = apply_hyperparameters(model_cfg, train_cfg, hp)
            ckpt = train(volumes, m_cfg, t_cfg, log=print)
            trial_auc = max(ckpt.history) if ckpt.history else 0.0
            trials.append({"trial": trial, "auc": trial_auc, "hp": hp})
            print(f"trial {trial}: val-auc(M) {trial_auc:.4f}")
            if trial_auc > best_auc:
                best_auc, best_ckpt = trial_auc, ckpt
        checkpoint = best_ckpt
        extra = {"search_trials": trials}
    else:
        checkpoint = train(volumes, model_cfg, train_cfg, log=print)
        extra = {}

    checkpoint.save(os.path.join(out, CHECKPOINT_FILENAME))
    extra.update(
        {
            "model_cfg": config_to_dict(checkpoint.model_cfg),
            "train_cfg": config_to_dict(checkpoint.train_cfg),
        }
    )
    _write_manifest(out, args, extra)
    best = max(checkpoint.history) if checkpoint.history else float("nan")
    print(f"best validation malignant AUC: {best:.4f}")
    return 0


def collect_predictions(model, volumes, train_cfg, tta=0, seed=0):
    """Per-volume fused predictions and native-resolution saliency maps."""
    rng = np.random.default_rng(seed)
    model.eval()
    scores, saliencies = [], []
    for vol in volumes:
        if tta > 0:
            scores.append(predict_tta(vol, model, train_cfg, n=tta, rng=rng))
        with torch.no_grad():
            out = model(torch.from_numpy(np.asarray(vol.voxels, dtype=np.float32)))
        if tta == 0:
            scores.append(out["p_final"].numpy())
        saliencies.append(out["saliency"].numpy())
    return np.array(scores), saliencies


def full_report(model, volumes, train_cfg, tta=0, n_iter=1000, seed=0):
    scores, saliencies = collect_predictions(model, volumes, train_cfg, tta, seed)
    group_ids = [v.group_id for v in volumes]
    downsample = model.cfg.global_backbone.downsample
    report = {}
    for c, cls in enumerate(CLASS_NAMES):
        labels = [getattr(v, f"y_{cls}") for v in volumes]
        cls_rep = classification_report(
            scores[:, c], labels, group_ids, n_iter=n_iter, seed=seed
        )
        sal_list, mask_list = [], []
        for vol, sal in zip(volumes, saliencies):
            if vol.mask is None or not vol.mask[..., c].any():
                continue
            height, width, depth = vol.voxels.shape
            up = np.stack(
                [
                    upsample_saliency(sal[:, :, d, c], downsample, height, width)
                    for d in range(depth)
                ],
                axis=2,
            )
            sal_list.append(up)
            mask_list.append(vol.mask[..., c])
        cls_rep.update(segmentation_report(sal_list, mask_list, n_iter, seed))
        for key, value in cls_rep.items():
            report[f"{cls}/{key}"] = value
    return report


def cmd_eval(args):
    checkpoint = Checkpoint.load(args.checkpoint)
    volumes = load_dataset(os.path.join(args.data, DATASET_FILENAME))
    model = checkpoint.build_model()
    report = full_report(
        model,
        volumes,
        checkpoint.train_cfg,
        tta=args.tta,
        n_iter=args.bootstrap,
        seed=args.seed or 0,
    )
    with open(args.report, "w") as f:
        json.dump(report, f, indent=2, sort_keys=True)
    print(f"wrote report to {args.report}")

    if args.dump_patches:
        with open(args.dump_patches, "w") as f:
            for vol in volumes:
                with torch.no_grad():
                    out = model(
                        torch.from_numpy(np.asarray(vol.voxels, dtype=np.float32))
                    )
                ps = out["patch_set"]
                for k, (loc, score) in enumerate(zip(ps.locations, ps.scores)):
                    f.write(
                        f"{vol.group_id} {vol.view_id} {k} "
                        f"{loc.x} {loc.y} {loc.d} {score:.6f}\n"
                    )
        print(f"wrote patch locations to {args.dump_patches}")
    return 0


def cmd_bench(args):
    cfg = PROFILES[args.profile]()
    if args.profile == "full":
        height, width = FULL_IMAGE_3D
    else:
        height = width = 96
    rows = []
    shape = (height, width, args.slices)
    if args.extrapolate:
        points = [int(s) for s in args.extrapolate.split(",")]
        measured = [
            (s, count_macs(cfg, (height, width, s), args.model).total_macs)
            for s in points
        ]
        macs = extrapolate_linear(measured, args.slices)
        mem = extrapolate_linear(
            [
                (s, count_macs(cfg, (height, width, s), args.model).peak_memory_bytes)
                for s in points
            ],
            args.slices,
        )
        rows.append((args.model + " (extrapolated)", macs, mem))
    report = count_macs(cfg, shape, args.model)
    rows.append((args.model, report.total_macs, report.peak_memory_bytes))

    print(f"input {height}x{width}x{args.slices} ({args.profile} profile)")
    print(f"{'model':<28}{'GMACs':>14}{'peak act. MB':>16}")
    for name, macs, mem in rows:
        print(f"{name:<28}{macs / 1e9:>14.3f}{mem / 1e6:>16.1f}")
    for module, macs in report.module_macs.items():
        print(f"  {module:<26}{macs / 1e9:>14.3f}")
    return 0


def cmd_ablate(args):
    volumes = load_dataset(os.path.join(args.data, DATASET_FILENAME))
    model_cfg, train_cfg = _load_configs(args.config, args.seed)
    out = _out_dir(args)
    zetas = []
    for tok in args.zeta.split(","):
        tok = tok.strip().lower()
        zetas.append(math.inf if tok in ("inf", "infinity") else float(tok))
    results = []
    for zeta in zetas:
        cfg = replace(model_cfg, zeta=zeta)
        ckpt = train(volumes, cfg, train_cfg, log=print)
        trial_auc = max(ckpt.history) if ckpt.history else 0.0
        label = "inf" if math.isinf(zeta) else f"{zeta:g}"
        results.append({"zeta": label, "val_auc_malignant": trial_auc})
        print(f"zeta={label}: val-auc(M) {trial_auc:.4f}")
    with open(os.path.join(out, "ablation.json"), "w") as f:
        json.dump(results, f, indent=2)
    _write_manifest(out, args, {"results": results})
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gmic3d",
        description="Saliency-guided two-stage classification of 3D volumes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-data", help="generate a phantom dataset")
    p.add_argument("--spec", help="key=value phantom spec file")
    p.add_argument("--out", required=True)
    p.add_argument("--groups", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_generate_data)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--config", help="key=value model/train config file")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--search", type=int, default=0, help="random-search trials")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--report", required=True, help="output JSON path")
    p.add_argument("--tta", type=int, default=0, help="test-time augmentations")
    p.add_argument("--bootstrap", type=int, default=1000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--dump-patches", help="write selected patch locations")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="analytic compute/memory accounting")
    p.add_argument("--profile", choices=sorted(PROFILES), default="desk")
    p.add_argument(
        "--model", choices=("gmic3d", "dense2d", "dense3d"), default="gmic3d"
    )
    p.add_argument("--slices", type=int, default=96)
    p.add_argument("--extrapolate", help="comma list of slice counts to fit")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("ablate", help="train across zeta values")
    p.add_argument("--zeta", required=True, help="comma list, e.g. 0,5,10,inf")
    p.add_argument("--config")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None):
    threads = os.environ.get("GMIC3D_THREADS")
    if threads:
        torch.set_num_threads(int(threads))
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as e:
        print(f"error:config: {e}", file=sys.stderr)
        return 1
    except FormatError as e:
        print(f"error:format: {e}", file=sys.stderr)
        return 1
    except (OSError, ValueError, RuntimeError) as e:
        print(f"error:runtime: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
