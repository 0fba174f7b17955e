#!/usr/bin/env python3
"""End-to-end demo on a synthetic two-class disk scene.

Runs the full pipeline with the mock provider and baseline embedder,
prints the count report, and writes a visualization PNG.
"""
import argparse
import json
from pathlib import Path

import numpy as np

from occam.config import from_profile
from occam.embedding import BaselineEmbedder
from occam.imaging import save_png
from occam.pipeline import count_image
from occam.prompting import MockProvider
from occam.viz import render_clusters


def draw_disk(img, cx, cy, radius, color):
    h, w = img.shape[:2]
    yy, xx = np.ogrid[:h, :w]
    img[(xx - cx) ** 2 + (yy - cy) ** 2 <= radius**2] = color


def build_scene():
    img = np.zeros((300, 360, 3), dtype=np.uint8)
    for row in range(3):
        for col in range(4):
            draw_disk(img, 40 + col * 80, 40 + row * 70, 14, (220, 30, 30))
    for i, (cx, cy) in enumerate(
        [(30, 250), (90, 250), (150, 250), (210, 250), (270, 250), (330, 250), (330, 60)]
    ):
        draw_disk(img, cx, cy, 13, (30, 30, 220))
    return img


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("demo_out"))
    parser.add_argument("--profile", default="M", choices=["S", "M"])
    args = parser.parse_args()

    img = build_scene()
    cfg = from_profile(args.profile)
    result = count_image(img, MockProvider(), BaselineEmbedder(), cfg)

    args.out.mkdir(parents=True, exist_ok=True)
    save_png(img, args.out / "scene.png")
    save_png(render_clusters(img, result), args.out / "clusters.png")
    report = result.to_report()
    (args.out / "report.json").write_text(json.dumps(report, indent=2))
    print(json.dumps(report, indent=2))
    print(f"\nwrote {args.out}/scene.png, clusters.png, report.json")


if __name__ == "__main__":
    main()
