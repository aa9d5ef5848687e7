"""Command-line surface: dataset generation, training, evaluation, inference,
gradient checking and visualization dumps."""

import argparse
import os
import sys

import numpy as np
from PIL import Image as PILImage

from . import data, gradcheck, train as training, visuals
from .checkpoint import CheckpointError
from .config import ConfigError, load_config
from .errors import NumericError, ValidationError
from .metrics import MetricsError


def _fail(kind: str, message: str) -> int:
    print(f"AGRNET-FAIL {kind}: {message}", file=sys.stderr)
    return 1


def _load_image(path: str) -> np.ndarray:
    img = PILImage.open(path).convert("RGB")
    return np.asarray(img, dtype=np.float64) / 255.0


def cmd_dataset_generate(args) -> int:
    data.write_dataset(args.out, args.train, args.val, args.seed, args.image_size)
    print(f"wrote {args.train} train + {args.val} val samples to {args.out}")
    return 0


def _apply_flag_overrides(args, overrides: list):
    if args.no_graph:
        overrides.append("model.use_graph=false")
    if args.no_edge:
        overrides.append("model.use_edge=false")
    if args.spatial_pool:
        overrides.append("model.spatial_pool=true")


def cmd_train(args) -> int:
    overrides = list(args.set or [])
    _apply_flag_overrides(args, overrides)
    cfg = load_config(args.config, overrides)
    ckpt_path, trace = training.train(cfg, log=print)
    print(f"checkpoint written to {ckpt_path}")
    _, val = training.get_datasets(cfg)
    if val:
        model, _, _, _ = training.load_model(ckpt_path)
        _, overall, report = training.evaluate(model, val)
        print(report, end="")
    return 0


def cmd_eval(args) -> int:
    model, cfg, step, _ = training.load_model(args.ckpt)
    samples = data.load_dataset(args.data, args.split)
    if not samples:
        return _fail("config", f"no {args.split!r} samples in {args.data}")
    _, overall, report = training.evaluate(model, samples)
    print(report, end="")
    return 0


def cmd_infer(args) -> int:
    model, cfg, _, _ = training.load_model(args.ckpt)
    image = _load_image(args.image)
    if image.shape[0] % 8 or image.shape[1] % 8:
        return _fail("config", "image dimensions must be multiples of 8")
    import torch
    model.eval()
    x = torch.from_numpy(image).permute(2, 0, 1).unsqueeze(0).float()
    with torch.no_grad():
        pred = model(x).logits_full.argmax(dim=1)[0].numpy()
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "parsing.png")
    visuals.save_parsing_png(pred, out_path)
    print(f"wrote {out_path}")
    return 0


def cmd_gradcheck(args) -> int:
    seeds = tuple(range(args.instances))
    rows, passed, n = gradcheck.run_gradcheck(seeds=seeds)
    print(gradcheck.format_gradcheck_report(rows), end="")
    print(f"instances: {n}  status: {'PASS' if passed else 'FAIL'}")
    if not passed:
        failures = [f"{c}/{t}" for c, _, t, e in rows if e > gradcheck.TOLERANCE]
        return _fail("gradcheck", "tolerance exceeded for " + ", ".join(failures))
    return 0


def cmd_dump_visuals(args) -> int:
    model, _, _, _ = training.load_model(args.ckpt)
    image = _load_image(args.image)
    paths = visuals.dump_visuals(model, image, args.out)
    for p in paths:
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agrnet")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dataset", help="dataset utilities")
    dsub = p.add_subparsers(dest="dataset_command", required=True)
    g = dsub.add_parser("generate", help="write a synthetic dataset directory")
    g.add_argument("--out", required=True)
    g.add_argument("--train", type=int, default=256)
    g.add_argument("--val", type=int, default=64)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--image-size", type=int, default=96)
    g.set_defaults(func=cmd_dataset_generate)

    t = sub.add_parser("train", help="train a model")
    t.add_argument("--config", default=None, help="flat key=value config file")
    t.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config key")
    t.add_argument("--no-graph", action="store_true")
    t.add_argument("--no-edge", action="store_true")
    t.add_argument("--spatial-pool", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--split", default="val")
    e.set_defaults(func=cmd_eval)

    i = sub.add_parser("infer", help="run inference on one image")
    i.add_argument("--ckpt", required=True)
    i.add_argument("--image", required=True)
    i.add_argument("--out", required=True)
    i.set_defaults(func=cmd_infer)

    c = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    c.add_argument("--instances", type=int, default=3,
                   help="number of random seeds per operation")
    c.set_defaults(func=cmd_gradcheck)

    d = sub.add_parser("dump-visuals", help="write inspection images")
    d.add_argument("--ckpt", required=True)
    d.add_argument("--image", required=True)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_dump_visuals)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail("config", str(exc))
    except ValidationError as exc:
        return _fail("validation", str(exc))
    except NumericError as exc:
        return _fail("numeric", str(exc))
    except (CheckpointError, MetricsError, data.GenerationError) as exc:
        return _fail(type(exc).__name__.lower().replace("error", ""), str(exc))
    except OSError as exc:
        return _fail("io", f"{exc}")


if __name__ == "__main__":
    sys.exit(main())
