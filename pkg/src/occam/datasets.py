"""Dataset loaders and the synthetic multi-class stitcher.

The FSC-147 layout is the published one: an annotation JSON with
per-image ``points`` and ``box_examples_coordinates``, a split JSON
mapping split names to filename lists, an image directory, and an
optional image-to-class text file. CARPK uses one annotation text file
per image with one box per line. The stitcher composes canvases from
single-class records, at most two columns per row, images unscaled.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np
from PIL import Image as PILImage

from .errors import DataError
from .evaluation import GroundTruth
from .imaging import load_image

log = logging.getLogger(__name__)

FSC_ANNOTATION_NAMES = ("annotation_FSC147_384.json", "annotations.json")
FSC_SPLIT_NAMES = ("Train_Test_Val_FSC_147.json", "splits.json")
FSC_IMAGE_DIRS = ("images_384_VarV2", "images")
FSC_CLASS_NAMES = ("ImageClasses_FSC147.txt", "classes.txt")

STITCH_COLUMNS = 2


@dataclass
class DatasetRecord:
    image_path: Path
    ground_truth: GroundTruth
    split: str
    image_size: tuple[int, int]  # (width, height)
    class_label: str | None = None
    exemplar_boxes: list[tuple[float, float, float, float]] | None = None

    def load_image(self) -> np.ndarray:
        return load_image(self.image_path)


def _find(root: Path, names: tuple[str, ...], kind: str) -> Path:
    for name in names:
        path = root / name
        if path.exists():
            return path
    raise DataError(f"no {kind} found under {root} (tried {', '.join(names)})")


def _image_size(path: Path) -> tuple[int, int]:
    try:
        with PILImage.open(path) as im:
            return im.size
    except OSError as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc


def load_fsc147(
    root,
    split: str,
    annotation_file: str | None = None,
    split_file: str | None = None,
    images_dir: str | None = None,
    classes_file: str | None = None,
) -> list[DatasetRecord]:
    """Load one split of an FSC-147 style dataset.

    File names default to the published layout (with generic fallbacks)
    and can be overridden individually.
    """
    root = Path(root)
    ann_path = _find(root, (annotation_file,) if annotation_file else FSC_ANNOTATION_NAMES, "annotation JSON")
    split_path = _find(root, (split_file,) if split_file else FSC_SPLIT_NAMES, "split JSON")
    image_dir = _find(root, (images_dir,) if images_dir else FSC_IMAGE_DIRS, "image directory")

    try:
        annotations = json.loads(ann_path.read_text())
        splits = json.loads(split_path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed dataset JSON under {root}: {exc}") from exc

    if split not in splits:
        raise DataError(f"unknown split {split!r}; available: {sorted(splits)}")

    classes: dict[str, str] = {}
    for name in (classes_file,) if classes_file else FSC_CLASS_NAMES:
        path = root / name
        if path.exists():
            for line in path.read_text().splitlines():
                if line.strip():
                    fname, _, label = line.partition("\t")
                    classes[fname.strip()] = label.strip()
            break

    records = []
    for fname in splits[split]:
        if fname not in annotations:
            raise DataError(f"image {fname!r} in split {split!r} lacks annotations")
        entry = annotations[fname]
        image_path = image_dir / fname
        if not image_path.exists():
            raise DataError(f"missing image file {image_path}")
        width, height = _image_size(image_path)
        points = [(float(x), float(y)) for x, y in entry.get("points", [])]
        for x, y in points:
            if not (0 <= x <= width and 0 <= y <= height):
                raise DataError(f"{fname}: point ({x}, {y}) outside {width}x{height}")
        label = classes.get(fname, "object")
        exemplars = []
        for box in entry.get("box_examples_coordinates", []):
            xs = [float(p[0]) for p in box]
            ys = [float(p[1]) for p in box]
            exemplars.append((min(xs), min(ys), max(xs), max(ys)))
        records.append(
            DatasetRecord(
                image_path=image_path,
                ground_truth=GroundTruth(points_by_class={label: points}),
                split=split,
                image_size=(width, height),
                class_label=label,
                exemplar_boxes=exemplars or None,
            )
        )
    return records


def load_carpk(root, split: str) -> list[DatasetRecord]:
    """Load a CARPK-style dataset: per-image box annotation text files."""
    root = Path(root)
    set_file = root / "ImageSets" / f"{split}.txt"
    if not set_file.exists():
        raise DataError(f"missing split list {set_file}")
    image_dir = root / "Images"
    ann_dir = root / "Annotations"

    records = []
    for stem in set_file.read_text().split():
        image_path = None
        for ext in (".png", ".jpg", ".jpeg"):
            cand = image_dir / f"{stem}{ext}"
            if cand.exists():
                image_path = cand
                break
        if image_path is None:
            raise DataError(f"missing image for {stem!r} under {image_dir}")
        ann_path = ann_dir / f"{stem}.txt"
        if not ann_path.exists():
            raise DataError(f"missing annotation file {ann_path}")
        boxes = []
        for lineno, line in enumerate(ann_path.read_text().splitlines(), start=1):
            if not line.strip():
                continue
            parts = line.split()
            try:
                x1, y1, x2, y2 = (float(v) for v in parts[:4])
            except ValueError as exc:
                raise DataError(f"{ann_path}:{lineno}: malformed box line {line!r}") from exc
            boxes.append((x1, y1, x2, y2))
        centers = [((x1 + x2) / 2, (y1 + y2) / 2) for x1, y1, x2, y2 in boxes]
        width, height = _image_size(image_path)
        records.append(
            DatasetRecord(
                image_path=image_path,
                ground_truth=GroundTruth(
                    points_by_class={"car": centers}, boxes_by_class={"car": boxes}
                ),
                split=split,
                image_size=(width, height),
                class_label="car",
            )
        )
    return records


def load_stitched(root) -> list[DatasetRecord]:
    """Load a dataset written by the stitcher (images/ + annotations.json)."""
    root = Path(root)
    ann_path = root / "annotations.json"
    if not ann_path.exists():
        raise DataError(f"missing {ann_path}")
    try:
        annotations = json.loads(ann_path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed {ann_path}: {exc}") from exc
    records = []
    for fname in sorted(annotations):
        image_path = root / "images" / fname
        if not image_path.exists():
            raise DataError(f"missing stitched image {image_path}")
        points_by_class = {
            label: [(float(x), float(y)) for x, y in pts]
            for label, pts in annotations[fname]["classes"].items()
        }
        records.append(
            DatasetRecord(
                image_path=image_path,
                ground_truth=GroundTruth(points_by_class=points_by_class),
                split="test",
                image_size=_image_size(image_path),
            )
        )
    return records


@dataclass(frozen=True)
class StitchSpec:
    seed: int
    num_images: int = 100
    min_sub_images: int = 1
    max_sub_images: int = 10

    def __post_init__(self):
        if self.num_images < 1 or self.min_sub_images < 1:
            raise ValueError("num_images and min_sub_images must be >= 1")
        if self.max_sub_images < self.min_sub_images:
            raise ValueError("max_sub_images < min_sub_images")


def _draw_distinct_classes(rng, pool: list[DatasetRecord], k: int) -> list[DatasetRecord]:
    distinct = {r.class_label for r in pool}
    if len(distinct) < k:
        raise DataError(f"pool has {len(distinct)} distinct classes, canvas needs {k}")
    chosen: list[DatasetRecord] = []
    used: set[str] = set()
    attempts = 0
    while len(chosen) < k:
        attempts += 1
        if attempts > 10000:
            raise DataError("class rejection sampling did not converge")
        record = pool[int(rng.integers(0, len(pool)))]
        if record.class_label in used:
            continue
        used.add(record.class_label)
        chosen.append(record)
    return chosen


def stitch_canvas(records: list[DatasetRecord]) -> tuple[np.ndarray, GroundTruth]:
    """Compose loaded records onto one zero-padded canvas, two per row."""
    images = [r.load_image() for r in records]
    rows = [images[i : i + STITCH_COLUMNS] for i in range(0, len(images), STITCH_COLUMNS)]
    row_heights = [max(im.shape[0] for im in row) for row in rows]
    canvas_w = max(sum(im.shape[1] for im in row) for row in rows)
    canvas_h = sum(row_heights)
    canvas = np.zeros((canvas_h, canvas_w, 3), dtype=np.uint8)

    points_by_class: dict[str, list[tuple[float, float]]] = {}
    idx = 0
    y_off = 0
    for row, row_h in zip(rows, row_heights):
        x_off = 0
        for im in row:
            record = records[idx]
            idx += 1
            h, w = im.shape[:2]
            canvas[y_off : y_off + h, x_off : x_off + w] = im
            for label, pts in record.ground_truth.points_by_class.items():
                shifted = [(x + x_off, y + y_off) for x, y in pts]
                points_by_class.setdefault(label, []).extend(shifted)
            x_off += w
        y_off += row_h
    return canvas, GroundTruth(points_by_class=points_by_class)


def stitch_multiclass(
    spec: StitchSpec, pool: list[DatasetRecord]
) -> Iterator[tuple[int, np.ndarray, GroundTruth]]:
    """Yield (index, canvas, ground truth) canvases, deterministic per seed.

    Every canvas uses its own generator derived from (seed, index), so
    canvases are reproducible independently of each other.
    """
    if not pool:
        raise DataError("empty source pool")
    if any(r.class_label is None for r in pool):
        raise DataError("stitch pool records need class labels")
    for i in range(spec.num_images):
        rng = np.random.default_rng([spec.seed, i])
        k = int(rng.integers(spec.min_sub_images, spec.max_sub_images + 1))
        chosen = _draw_distinct_classes(rng, pool, k)
        canvas, gt = stitch_canvas(chosen)
        yield i, canvas, gt


def write_stitched(
    spec: StitchSpec, pool: list[DatasetRecord], out_dir, variant: int = 1
) -> Path:
    """Materialize a stitched dataset: images/NNN.png + annotations + meta."""
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    annotations = {}
    for i, canvas, gt in stitch_multiclass(spec, pool):
        fname = f"{i:03d}.png"
        PILImage.fromarray(canvas).save(out_dir / "images" / fname, format="PNG")
        annotations[fname] = {
            "classes": {label: [[x, y] for x, y in pts] for label, pts in gt.points_by_class.items()}
        }
    (out_dir / "annotations.json").write_text(json.dumps(annotations, indent=2, sort_keys=True))
    meta = {
        "seed": spec.seed,
        "variant": variant,
        "num_images": spec.num_images,
        "sub_images": [spec.min_sub_images, spec.max_sub_images],
    }
    (out_dir / "meta.json").write_text(json.dumps(meta, indent=2))
    return out_dir
