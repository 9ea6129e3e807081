#!/usr/bin/env python3
"""Materialize a synthetic blob corpus as a class-per-directory PNG tree.

Example:
    python scripts/make_toy_dataset.py --out /tmp/blobs --per-class 50 --classes 2
"""

import argparse

from trilemma_eval.data import save_image_dataset
from trilemma_eval.toydata import make_blob_dataset


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True)
    parser.add_argument("--per-class", type=int, default=50)
    parser.add_argument("--classes", type=int, default=2)
    parser.add_argument("--size", type=int, default=8, help="square image side length")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    ds = make_blob_dataset(
        args.per_class,
        num_classes=args.classes,
        image_hw=(args.size, args.size),
        seed=args.seed,
    )
    save_image_dataset(ds, args.out)
    print(f"wrote {len(ds)} images ({args.classes} classes) to {args.out}")


if __name__ == "__main__":
    main()
