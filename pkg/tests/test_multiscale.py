import numpy as np

from occam.errors import ProviderError
from occam.imaging import iou
from occam.maskproc import FilterConfig
from occam.multiscale import MultiscaleConfig, refine_multiscale, run_base, _tile_bounds
from occam.prompting import MockProvider

from conftest import DiskScene


CFG = FilterConfig()


def test_tile_bounds_cover_extent():
    for extent in (3, 10, 31, 100, 299):
        bounds = _tile_bounds(extent)
        assert bounds[0][0] == 0
        assert bounds[-1][1] == extent
        for (a0, a1), (b0, b1) in zip(bounds, bounds[1:]):
            assert a1 == b0
    assert _tile_bounds(2) == [(0, 2)]


def test_refine_skipped_when_enough_candidates(two_class_scene):
    provider = MockProvider()
    ms = MultiscaleConfig(min_candidates=10, max_depth=1)
    base = run_base(two_class_scene.image, provider, 10, CFG)
    refined = refine_multiscale(two_class_scene.image, provider, 10, CFG, ms)
    assert len(base) == 19
    assert len(refined) == len(base)


def test_blank_image_stays_empty():
    img = np.zeros((90, 90, 3), dtype=np.uint8)
    provider = MockProvider()
    out = refine_multiscale(img, provider, 10, CFG, MultiscaleConfig())
    assert out == []


def test_tiles_reveal_tiny_disks(tiny_disk_scene):
    provider = MockProvider(min_rel_area=0.003)
    ms = MultiscaleConfig(min_candidates=10, max_depth=1)
    base = run_base(tiny_disk_scene.image, provider, 10, CFG)
    refined = refine_multiscale(tiny_disk_scene.image, provider, 10, CFG, ms)
    assert len(base) == 0
    assert len(refined) == 40
    # translated masks list stable ids and land on the original disks
    assert [c.id for c in refined] == list(range(40))
    for cand in refined:
        assert cand.mask.shape == tiny_disk_scene.image.shape[:2]


def test_zero_depth_equals_base(tiny_disk_scene):
    provider = MockProvider(min_rel_area=0.003)
    ms = MultiscaleConfig(min_candidates=10, max_depth=0)
    base = run_base(tiny_disk_scene.image, provider, 10, CFG)
    refined = refine_multiscale(tiny_disk_scene.image, provider, 10, CFG, ms)
    assert len(refined) == len(base) == 0


def test_refined_never_fewer_than_base(tiny_disk_scene):
    provider = MockProvider(min_rel_area=0.003)
    for depth in (0, 1, 2):
        ms = MultiscaleConfig(min_candidates=50, max_depth=depth)
        base = run_base(tiny_disk_scene.image, provider, 10, CFG)
        refined = refine_multiscale(tiny_disk_scene.image, provider, 10, CFG, ms)
        assert len(refined) >= len(base)


def test_accumulated_set_keeps_dedup_invariant():
    # disks visible at both scales: tile masks must not duplicate base ones
    scene = DiskScene(120, 120)
    scene.add_disk("a", 30, 30, 10, (200, 0, 0))
    scene.add_disk("b", 90, 90, 10, (0, 0, 200))
    provider = MockProvider()
    ms = MultiscaleConfig(min_candidates=10, max_depth=1)  # 2 < 10 triggers tiles
    refined = refine_multiscale(scene.image, provider, 10, CFG, ms)
    for i in range(len(refined)):
        for j in range(i + 1, len(refined)):
            assert iou(refined[i].mask, refined[j].mask) <= CFG.iou_dup_threshold


def test_record_and_replay_through_tiles(tiny_disk_scene, tmp_path):
    from occam.prompting import FileProvider, RecordingProvider

    ms = MultiscaleConfig(min_candidates=10, max_depth=1)
    recorder = RecordingProvider(MockProvider(min_rel_area=0.003), tmp_path)
    live = refine_multiscale(
        tiny_disk_scene.image, recorder, 10, CFG, ms, image_id="tiny.png"
    )
    replayed = refine_multiscale(
        tiny_disk_scene.image, FileProvider(tmp_path), 10, CFG, ms, image_id="tiny.png"
    )
    assert len(live) == len(replayed) == 40
    for a, b in zip(live, replayed):
        assert np.array_equal(a.mask.pixels, b.mask.pixels)


def test_failing_tile_returns_base(two_class_scene, caplog):
    class FlakyProvider(MockProvider):
        def __init__(self):
            super().__init__()
            self.calls = 0

        def segment(self, img, points, image_id=None):
            self.calls += 1
            if self.calls > 1:  # every tile call fails
                raise ProviderError("boom")
            return super().segment(img, points, image_id=image_id)

    provider = FlakyProvider()
    ms = MultiscaleConfig(min_candidates=100, max_depth=1)  # force tiling
    with caplog.at_level("WARNING"):
        out = refine_multiscale(two_class_scene.image, provider, 10, CFG, ms)
    assert len(out) == 19
    assert any("keeping base candidates" in r.message for r in caplog.records)
