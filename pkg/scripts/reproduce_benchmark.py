#!/usr/bin/env python3
"""Benchmark reproduction driver for real datasets.

Wires the counting pipeline to a model server speaking the wire protocol
(see the model-server package) and evaluates a dataset split. Needs the
dataset on disk and, for the reference backend, segmentation/embedding
checkpoints plus a GPU; expect hours for a full test split.

Examples:
    python3 scripts/reproduce_benchmark.py --dataset fsc147 --root /data/FSC147 \
        --server "python3 -m occam_model_server" --profile S --out runs/fsc147
    python3 scripts/reproduce_benchmark.py --dataset carpk --root /data/CARPK \
        --server http://localhost:8731 --profile S --max-gt 300
"""
import argparse
import sys

from occam.cli import main as occam_main


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dataset", required=True, choices=["fsc147", "carpk", "stitched"])
    parser.add_argument("--root", required=True)
    parser.add_argument("--split", default="test")
    parser.add_argument("--server", required=True, help="model server command or base URL")
    parser.add_argument("--profile", default="S", choices=["S", "M"])
    parser.add_argument("--max-gt", type=int, default=None)
    parser.add_argument("--out", default="runs/benchmark")
    args = parser.parse_args()

    argv = [
        "eval",
        "--dataset", args.dataset,
        "--root", args.root,
        "--split", args.split,
        "--profile", args.profile,
        "--provider", f"wire:{args.server}",
        "--embedder", f"wire:{args.server}",
        "--out", args.out,
    ]
    if args.max_gt is not None:
        argv += ["--max-gt", str(args.max_gt)]
    return occam_main(argv)


if __name__ == "__main__":
    sys.exit(main())
