import numpy as np
import pytest

from occam.evaluation import GroundTruth


def draw_disk(img, cx, cy, radius, color):
    h, w = img.shape[:2]
    yy, xx = np.ogrid[:h, :w]
    inside = (xx - cx) ** 2 + (yy - cy) ** 2 <= radius**2
    img[inside] = color
    return inside


class DiskScene:
    """Synthetic scene of colored disks on black, with per-class centers."""

    def __init__(self, width, height):
        self.image = np.zeros((height, width, 3), dtype=np.uint8)
        self.points_by_class = {}

    def add_disk(self, label, cx, cy, radius, color):
        draw_disk(self.image, cx, cy, radius, color)
        self.points_by_class.setdefault(label, []).append((float(cx), float(cy)))

    @property
    def ground_truth(self):
        return GroundTruth(points_by_class={k: list(v) for k, v in self.points_by_class.items()})


def build_two_class_scene():
    """12 red and 7 blue non-overlapping disks on a 360x300 canvas."""
    scene = DiskScene(360, 300)
    red = (220, 30, 30)
    blue = (30, 30, 220)
    k = 0
    for row in range(3):
        for col in range(4):
            scene.add_disk("red", 40 + col * 80, 40 + row * 70, 14 + (k % 3), red)
            k += 1
    positions = [(30, 250), (90, 250), (150, 250), (210, 250), (270, 250), (330, 250), (330, 60)]
    for i, (cx, cy) in enumerate(positions):
        scene.add_disk("blue", cx, cy, 13 + (i % 3), blue)
    return scene


def build_tiny_disk_scene(n=40):
    """Tiny disks too small (relative to the image) for a gated provider
    at full scale, but visible inside 3x3 tiles. Radius 6 keeps every disk
    on a 10px seed grid even after tile-local re-gridding."""
    scene = DiskScene(300, 300)
    color = (40, 200, 60)
    count = 0
    for row in range(7):
        for col in range(6):
            if count >= n:
                break
            scene.add_disk("dot", 25 + col * 48, 25 + row * 42, 6, color)
            count += 1
    return scene


@pytest.fixture
def two_class_scene():
    return build_two_class_scene()


@pytest.fixture
def tiny_disk_scene():
    return build_tiny_disk_scene()
