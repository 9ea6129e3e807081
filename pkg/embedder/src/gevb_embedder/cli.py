"""embedder command line interface."""

from __future__ import annotations

import argparse
import json

from .extract import BACKBONES, EmbedJob, extract_features


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(
        prog="embedder",
        description="Extract backbone features from an image directory into a GEVB file.",
    )
    parser.add_argument("--dir", required=True, help="image directory (flat or class-per-subdir)")
    parser.add_argument("--backbone", choices=sorted(BACKBONES), default="vgg16")
    parser.add_argument("--out", required=True, help="output .gevb path")
    parser.add_argument("--batch", type=int, default=32)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--weights", choices=("pretrained", "random"), default="pretrained")
    parser.add_argument("--seed", type=int, default=0, help="init seed for --weights random")
    parser.add_argument("--on-error", choices=("abort", "skip"), default="abort")
    args = parser.parse_args(argv)

    job = EmbedJob(
        image_dir=args.dir,
        backbone=args.backbone,
        output_path=args.out,
        batch_size=args.batch,
        device=args.device,
        weights=args.weights,
        seed=args.seed,
        on_error=args.on_error,
    )
    path = extract_features(job)
    with open(str(path) + ".meta.json") as fh:
        meta = json.load(fh)
    print(json.dumps({"output": str(path), "count": meta["count"], "dim": meta["dim"],
                      "backbone": meta["backbone"], "layer": meta["layer"],
                      "skipped": meta["skipped"]}, indent=2))


if __name__ == "__main__":
    main()
