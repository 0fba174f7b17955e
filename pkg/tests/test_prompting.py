import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from occam.errors import DataError, ProtocolError
from occam.imaging import BinaryMask
from occam.prompting import (
    FileProvider,
    MockProvider,
    RawMask,
    RawMaskSet,
    RecordingProvider,
    SeedPoint,
    generate_seed_grid,
    segment,
)

from conftest import DiskScene


def test_grid_100x100_spacing10():
    points = generate_seed_grid(100, 100, 10)
    assert len(points) == 100
    assert points[0] == SeedPoint(5, 5)
    assert points[1] == SeedPoint(15, 5)  # row-major
    assert points[-1] == SeedPoint(95, 95)


def test_grid_single_cell():
    assert generate_seed_grid(10, 10, 10) == [SeedPoint(5, 5)]


def test_grid_center_fallback():
    assert generate_seed_grid(7, 7, 10) == [SeedPoint(3, 3)]


def test_grid_mixed_fallback():
    points = generate_seed_grid(7, 25, 10)
    assert points == [SeedPoint(3, 5), SeedPoint(3, 15)]


def test_grid_rejects_empty_image():
    with pytest.raises(ValueError):
        generate_seed_grid(0, 10, 10)


def test_grid_translation_regular():
    points = generate_seed_grid(55, 35, 10)
    xs = sorted({p.x for p in points})
    ys = sorted({p.y for p in points})
    assert all(b - a == 10 for a, b in zip(xs, xs[1:]))
    assert all(b - a == 10 for a, b in zip(ys, ys[1:]))


@settings(max_examples=120)
@given(
    st.integers(min_value=1, max_value=300),
    st.integers(min_value=1, max_value=300),
    st.integers(min_value=1, max_value=40),
)
def test_grid_count_matches_enumeration(width, height, spacing):
    points = generate_seed_grid(width, height, spacing)
    if width < spacing:
        xs = [width // 2]
    else:
        xs = [x for x in range(spacing // 2, width, spacing)]
    if height < spacing:
        ys = [height // 2]
    else:
        ys = [y for y in range(spacing // 2, height, spacing)]
    assert len(points) == len(xs) * len(ys)
    assert len(points) >= 1
    assert all(0 <= p.x < width and 0 <= p.y < height for p in points)


def test_segment_empty_point_list():
    raw = segment(MockProvider(), np.zeros((20, 20, 3), dtype=np.uint8), [])
    assert raw.masks == []


def test_mock_provider_returns_disk_masks():
    scene = DiskScene(60, 60)
    scene.add_disk("a", 15, 15, 8, (200, 0, 0))
    scene.add_disk("b", 45, 45, 8, (0, 200, 0))
    points = [SeedPoint(15, 15), SeedPoint(45, 45), SeedPoint(30, 5)]
    raw = segment(MockProvider(), scene.image, points)
    by_point = {rm.point_index: rm for rm in raw.masks}
    assert set(by_point) == {0, 1}  # background point gives nothing
    assert by_point[0].mask.pixels[15, 15]
    assert not by_point[0].mask.pixels[45, 45]
    assert by_point[1].mask.pixels[45, 45]


def test_mock_provider_min_rel_area_hides_small_blobs():
    scene = DiskScene(200, 200)
    scene.add_disk("a", 30, 30, 5, (200, 0, 0))
    provider = MockProvider(min_rel_area=0.01)
    raw = segment(provider, scene.image, [SeedPoint(30, 30)])
    assert raw.masks == []
    # the same disk in a small crop exceeds the gate
    crop = scene.image[:66, :66]
    raw = segment(provider, crop, [SeedPoint(30, 30)])
    assert len(raw.masks) == 1


def test_segment_rejects_out_of_bounds_point():
    with pytest.raises(ValueError):
        segment(MockProvider(), np.zeros((10, 10, 3), dtype=np.uint8), [SeedPoint(10, 0)])


def test_segment_validates_provider_payload():
    class BadProvider:
        max_masks_per_point = 3
        deterministic = True
        serialized = False

        def segment(self, img, points, image_id=None):
            h, w = img.shape[:2]
            out = RawMaskSet(width=w, height=h, points=list(points))
            mask = BinaryMask(np.ones((h, w), dtype=bool))
            for slot in range(4):
                out.masks.append(RawMask(mask=mask, score=0.5, point_index=0, slot=slot))
            return out

    with pytest.raises(ProtocolError):
        segment(BadProvider(), np.zeros((8, 8, 3), dtype=np.uint8), [SeedPoint(1, 1)])


def test_record_then_replay_roundtrip(tmp_path):
    scene = DiskScene(50, 50)
    scene.add_disk("a", 25, 25, 10, (120, 60, 10))
    points = generate_seed_grid(50, 50, 10)

    recorder = RecordingProvider(MockProvider(), tmp_path)
    original = segment(recorder, scene.image, points, image_id="scene.png")

    replayed = segment(FileProvider(tmp_path), scene.image, points, image_id="scene.png")
    assert len(replayed.masks) == len(original.masks)
    for a, b in zip(original.masks, replayed.masks):
        assert a.point_index == b.point_index
        assert a.score == b.score
        assert np.array_equal(a.mask.pixels, b.mask.pixels)
    assert (tmp_path / "index.json").exists()


def test_file_provider_missing_entry(tmp_path):
    scene = DiskScene(30, 30)
    recorder = RecordingProvider(MockProvider(), tmp_path)
    segment(recorder, scene.image, [SeedPoint(5, 5)], image_id="a.png")

    with pytest.raises(DataError):
        segment(FileProvider(tmp_path), scene.image, [SeedPoint(5, 5)], image_id="other.png")
    with pytest.raises(DataError):
        # same image, different grid -> different request key
        segment(FileProvider(tmp_path), scene.image, [SeedPoint(6, 6)], image_id="a.png")


def test_file_provider_requires_image_id(tmp_path):
    with pytest.raises(DataError):
        FileProvider(tmp_path).segment(np.zeros((5, 5, 3), dtype=np.uint8), [])
