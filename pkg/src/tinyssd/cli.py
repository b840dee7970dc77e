"""Command-line entry point: ``tinyssd <subcommand> [options]``.

Exit status is 0 on success, 1 when an input violates a module contract
(bad file, failed check, invalid config) and 2 on bad usage.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path
from types import SimpleNamespace

import cv2
import numpy as np

from . import config as config_mod
from . import matching, priors as priors_mod
from .augment import augment_pipeline, sample_rng
from .dataio import load_dataset, parse_annotation, read_image, read_manifest, save_dataset
from .evaluation import evaluate
from .gradcheck import loss_gradcheck, net_gradcheck
from .inference import Detection, detect_arrays, format_detections, parse_detections
from .tinynet import TinySSD, load_checkpoint, save_checkpoint, synth_dataset, train
from .tinynet.train import training_priors

log = logging.getLogger("tinyssd")

GRADCHECK_TOLERANCE = 1e-3


class ContractError(Exception):
    """A check or input failed; reported with exit status 1."""


def _load_config(args) -> config_mod.RunConfig:
    cfg = config_mod.load(args.config) if args.config else config_mod.RunConfig()
    return config_mod.apply_overrides(cfg, args.set or [])


def _open_out(path):
    return open(path, "w", newline="") if path else sys.stdout


def cmd_priors(args):
    cfg = _load_config(args)
    ps = priors_mod.build_priors(cfg.specs())
    fh = _open_out(args.out)
    try:
        priors_mod.write_csv(ps, fh)
    finally:
        if fh is not sys.stdout:
            fh.close()
    log.info("%d priors", ps.total)


def cmd_match(args):
    with open(args.priors, newline="") as fh:
        ps = priors_mod.read_csv(fh)
    boxes, labels, _ = parse_annotation(Path(args.annotation).read_text())
    a = matching.match(ps, boxes, labels, args.threshold)
    fh = _open_out(args.out)
    try:
        matching.write_csv(a, fh)
    finally:
        if fh is not sys.stdout:
            fh.close()
    log.info("%d positives of %d priors", a.n_pos, len(a))


def cmd_gradcheck(args):
    rng = np.random.default_rng(args.seed)
    loss_err = loss_gradcheck(rng, args.instances)
    net_err = net_gradcheck(rng)
    worst = max(loss_err, net_err)
    print(f"loss max rel err {loss_err:.3e}")
    print(f"net max rel err {net_err:.3e}")
    print(f"max rel err {worst:.3e} (gaps within the 1e-6 absolute floor count as exact)")
    if not worst < GRADCHECK_TOLERANCE:
        raise ContractError(f"gradient check failed: {worst:.3e} >= {GRADCHECK_TOLERANCE}")


def cmd_augment(args):
    cfg = _load_config(args)
    samples = load_dataset(args.manifest)
    if not samples:
        raise ContractError(f"{args.manifest}: empty dataset")
    out = []
    for k in range(args.count):
        idx = k % len(samples)
        out.append(augment_pipeline(samples[idx], cfg.augment, sample_rng(args.seed, idx, k // len(samples)), args.size))
    manifest = save_dataset(out, args.out, prefix="aug")
    print(manifest)


def cmd_synth(args):
    cfg = _load_config(args)
    seed = cfg.data.train_seed if args.seed is None else args.seed
    n = cfg.data.train_images if args.n is None else args.n
    samples = synth_dataset(seed, n, cfg.model.input_size)
    print(save_dataset(samples, args.out, prefix="synth"))


def _dataset(cfg, manifest, split):
    if manifest:
        return load_dataset(manifest)
    if split == "train":
        return synth_dataset(cfg.data.train_seed, cfg.data.train_images, cfg.model.input_size)
    return synth_dataset(cfg.data.test_seed, cfg.data.test_images, cfg.model.input_size)


def cmd_train(args):
    cfg = _load_config(args)
    if args.iterations is not None:
        cfg.train.iterations = args.iterations
    if args.seed is not None:
        cfg.train.seed = args.seed
    if args.no_boundary_boxes:
        cfg.train.use_boundary_boxes = False
    data = _dataset(cfg, args.manifest, "train")
    res = train(cfg.model, cfg.specs(), data, cfg.train, cfg.augment)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out, res.checkpoint)
    if args.loss_trace:
        np.savetxt(args.loss_trace, res.losses, fmt="%.9g", header="loss", comments="")
    n = max(1, min(50, len(res.losses)))
    print(f"checkpoint {out}; loss median first {n}: {np.median(res.losses[:n]):.4f}, "
          f"last {n}: {np.median(res.losses[-n:]):.4f}")


def _model(cfg, checkpoint):
    ck = load_checkpoint(checkpoint)
    net = TinySSD(cfg.model)
    expected = net.param_shapes()
    got = {k: v.shape for k, v in ck.params.items()}
    if got != expected:
        raise ContractError(f"{checkpoint}: parameters do not fit the configured model")
    net.params = ck.params
    return net


def _detect(net, cfg, pixels, use_boundary_boxes):
    ps, rows = training_priors(cfg.specs(), use_boundary_boxes)
    size = net.spec.input_size
    if pixels.shape[:2] != (size, size):
        pixels = cv2.resize(pixels, (size, size), interpolation=cv2.INTER_LINEAR)
    conf, loc, _ = net.forward(pixels)
    labels, scores, boxes = detect_arrays(conf[0, rows], loc[0, rows], ps, cfg.inference)
    return [Detection(int(l), float(s), tuple(float(v) for v in b)) for l, s, b in zip(labels, scores, boxes)]


def _overlay(pixels, dets, path):
    img = np.ascontiguousarray((np.clip(pixels, 0, 1) * 255).astype(np.uint8)[..., ::-1])
    h, w = img.shape[:2]
    for d in dets:
        x0, y0, x1, y1 = d.box
        cv2.rectangle(img, (int(x0 * w), int(y0 * h)), (int(x1 * w), int(y1 * h)), (0, 0, 255), 1)
    if not cv2.imwrite(str(path), img):
        raise ContractError(f"cannot write {path}")


def cmd_detect(args):
    cfg = _load_config(args)
    net = _model(cfg, args.checkpoint)
    use_bb = not args.no_boundary_boxes and cfg.train.use_boundary_boxes
    if args.image:
        pixels = read_image(args.image)
        dets = [d for d in _detect(net, cfg, pixels, use_bb) if d.score >= args.min_score]
        text = format_detections(dets)
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        if args.overlay:
            _overlay(pixels, [d for d in dets if d.score >= args.overlay_score], args.overlay)
        return
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for image_path, _ in read_manifest(args.manifest):
        dets = _detect(net, cfg, read_image(image_path), use_bb)
        (out_dir / (image_path.stem + ".txt")).write_text(format_detections(dets))
    print(out_dir)


def cmd_eval(args):
    cfg = _load_config(args)
    det_dir = Path(args.detections)
    dets, gts = [], {}
    for image_path, ann_path in read_manifest(args.manifest):
        key = image_path.stem
        boxes, labels, difficult = parse_annotation(ann_path.read_text())
        gts[key] = SimpleNamespace(boxes=boxes, labels=labels, difficult=difficult)
        det_file = det_dir / f"{key}.txt"
        if not det_file.exists():
            raise ContractError(f"missing detections for {key}: {det_file}")
        dets += [(key, d.label, d.score, d.box) for d in parse_detections(det_file.read_text())]
    classes = range(1, cfg.model.num_classes + 1)
    aps, m = evaluate(dets, gts, classes, cfg.eval)
    lines = ["class,ap"] + [f"{c},{aps[c]:.6f}" for c in classes] + [f"mAP,{m:.6f}"]
    for c in classes:
        print(f"class {c:>3}  AP {aps[c]:.4f}")
    print(f"mAP {m:.4f}")
    if args.csv:
        Path(args.csv).write_text("\n".join(lines) + "\n")


def cmd_bench(args):
    cfg = _load_config(args)
    net = _model(cfg, args.checkpoint) if args.checkpoint else TinySSD(cfg.model)
    if not args.checkpoint:
        net.init_params(np.random.default_rng(args.seed))
    samples = synth_dataset(args.seed, args.images, cfg.model.input_size)
    ps = priors_mod.build_priors(cfg.specs())
    start = time.perf_counter()
    for s in samples:
        conf, loc, _ = net.forward(s.pixels)
        detect_arrays(conf[0], loc[0], ps, cfg.inference)
    elapsed = time.perf_counter() - start
    print(f"{args.images} images, {ps.total} priors each, {elapsed:.3f} s")
    print(f"{args.images * ps.total / elapsed:.0f} boxes/s, {args.images / elapsed:.1f} images/s")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tinyssd", description="Single-shot detector toolkit.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="YAML run configuration")
        sp.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a config value")
        sp.set_defaults(fn=fn)
        return sp

    sp = add("priors", cmd_priors, "write the prior boxes as CSV")
    sp.add_argument("--out")

    sp = add("match", cmd_match, "match an annotation against a priors CSV")
    sp.add_argument("--priors", required=True)
    sp.add_argument("--annotation", required=True)
    sp.add_argument("--threshold", type=float, default=0.5)
    sp.add_argument("--out")

    sp = add("gradcheck", cmd_gradcheck, "finite-difference check of loss and network gradients")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--instances", type=int, default=20)

    sp = add("augment", cmd_augment, "write augmented copies of a dataset")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--count", type=int, default=16)
    sp.add_argument("--size", type=int, default=64)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)

    sp = add("synth", cmd_synth, "write a synthetic dataset to disk")
    sp.add_argument("--out", required=True)
    sp.add_argument("--n", type=int)
    sp.add_argument("--seed", type=int)

    sp = add("train", cmd_train, "train the toy detector")
    sp.add_argument("--manifest", help="training data (default: synthetic split from the config)")
    sp.add_argument("--out", required=True, help="checkpoint path")
    sp.add_argument("--iterations", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--no-boundary-boxes", action="store_true", help="ignore priors crossing the image border")
    sp.add_argument("--loss-trace", help="write per-iteration loss to this file")

    sp = add("detect", cmd_detect, "run a checkpoint on an image or a manifest")
    sp.add_argument("--checkpoint", required=True)
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--image")
    src.add_argument("--manifest")
    sp.add_argument("--out", help="detections file (single image)")
    sp.add_argument("--out-dir", default="detections", help="one detections file per image (manifest)")
    sp.add_argument("--overlay", help="write the image with boxes drawn")
    sp.add_argument("--overlay-score", type=float, default=0.5)
    sp.add_argument("--min-score", type=float, default=0.0)
    sp.add_argument("--no-boundary-boxes", action="store_true")

    sp = add("eval", cmd_eval, "score detection files against annotations")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--detections", required=True, help="directory of <image stem>.txt files")
    sp.add_argument("--csv", help="also write the AP table as CSV")

    sp = add("bench", cmd_bench, "measure forward + detect throughput")
    sp.add_argument("--checkpoint")
    sp.add_argument("--images", type=int, default=50)
    sp.add_argument("--seed", type=int, default=0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.fn(args)
    except BrokenPipeError:
        # reader closed early (e.g. piped into head)
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0
    except (ContractError, ValueError, OSError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
