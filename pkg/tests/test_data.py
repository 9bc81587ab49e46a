"""Tests for ingestion, augmentation and synthetic data."""

import itertools

import numpy as np
import pytest
from PIL import Image

from bdcnet.config.models import AugmentConfig
from bdcnet.data import (
    EdgeDataset,
    ManifestRecord,
    Sample,
    augment,
    boundary_map,
    consensus,
    crop,
    hflip,
    label_map,
    load_float_map,
    load_raster,
    load_sample,
    parse_manifest,
    quantize,
    rescale,
    resize_map,
    rotate,
    save_float_map,
    save_raster,
    synth_shapes,
    write_manifest,
    write_synth_dataset,
)
from bdcnet.errors import CheckpointIntegrityError, ConfigurationError, IngestionError


def make_sample(h: int = 8, w: int = 8, seed: int = 0) -> Sample:
    rng = np.random.default_rng(seed)
    gt = (rng.uniform(size=(h, w)) > 0.8).astype(np.float32)
    image = rng.uniform(size=(1, 3, h, w)).astype(np.float32)
    return Sample(image=image, gt=gt, id="s", regions={"small": gt.copy()})


def write_png(path, array):
    Image.fromarray(np.asarray(array, dtype=np.uint8)).save(path)


class TestConsensus:
    """Test merging annotator maps."""

    def test_single_binary_annotation(self):
        gt = np.zeros((3, 3), dtype=np.uint8)
        gt[1] = 255
        np.testing.assert_array_equal(consensus([gt]), gt / 255.0)

    def test_two_annotators(self):
        """Both mark one pixel, one marks an extra: consensus 1.0 and 0.5."""
        a = np.zeros((2, 2), dtype=np.uint8)
        b = np.zeros((2, 2), dtype=np.uint8)
        a[0, 0] = b[0, 0] = 255
        a[1, 1] = 255
        result = consensus([a, b])
        assert result[0, 0] == 1.0
        assert result[1, 1] == 0.5
        assert result[0, 1] == 0.0

    def test_three_annotators(self):
        maps = [np.array([[255, 0], [255, 255]]), np.array([[255, 0], [0, 255]]), np.array([[0, 0], [0, 255]])]
        expected = np.array([[2, 0], [1, 3]]) / 3
        np.testing.assert_allclose(consensus([m.astype(np.uint8) for m in maps]), expected, rtol=1e-6)

    def test_annotator_order_irrelevant(self):
        rng = np.random.default_rng(3)
        maps = [(rng.uniform(size=(5, 7)) > 0.6).astype(np.uint8) * 255 for _ in range(4)]
        maps[2][0, 0] = 130
        expected = consensus(maps)
        for order in itertools.permutations(range(4)):
            np.testing.assert_array_equal(consensus([maps[i] for i in order]), expected)

    def test_size_mismatch(self):
        with pytest.raises(IngestionError):
            consensus([np.zeros((2, 2)), np.zeros((3, 2))])

    def test_empty(self):
        with pytest.raises(IngestionError):
            consensus([])


class TestIngestion:
    """Test reading images, annotations and manifests."""

    @pytest.fixture
    def files(self, tmp_path):
        rng = np.random.default_rng(0)
        (tmp_path / "img").mkdir()
        (tmp_path / "gt").mkdir()
        for name in ("a", "b"):
            write_png(tmp_path / "img" / f"{name}.png", rng.integers(0, 256, size=(6, 7, 3)))
            edges = np.zeros((6, 7))
            edges[3] = 255
            write_png(tmp_path / "gt" / f"{name}.png", edges)
        return tmp_path

    def test_load_sample(self, files):
        sample = load_sample(files / "img" / "a.png", files / "gt" / "a.png")
        assert sample.id == "a"
        assert sample.image.shape == (1, 3, 6, 7)
        assert sample.image.dtype == np.float32
        assert 0.0 <= sample.image.min() and sample.image.max() <= 1.0
        assert sample.gt[3].tolist() == [1.0] * 7

    def test_grayscale_image_replicated(self, files):
        write_png(files / "gray.png", np.full((6, 7), 51))
        sample = load_sample(files / "gray.png", files / "gt" / "a.png", "g")
        np.testing.assert_allclose(sample.image, 0.2, rtol=1e-6)

    def test_size_mismatch(self, files):
        write_png(files / "small.png", np.zeros((3, 3)))
        with pytest.raises(IngestionError, match="GT"):
            load_sample(files / "img" / "a.png", files / "small.png")

    def test_unreadable_raster(self, files):
        (files / "broken.png").write_text("not an image")
        with pytest.raises(IngestionError):
            load_raster(files / "broken.png")
        with pytest.raises(FileNotFoundError):
            load_raster(files / "absent.png")

    def test_manifest_round_trip(self, files):
        manifest = files / "manifest.tsv"
        manifest.write_text(
            "# image\tgt\tid\n"
            "img/a.png\tgt/a.png\n"
            "\n"
            "img/b.png\tgt/a.png,gt/b.png\tsecond\n",
            encoding="utf-8",
        )

        records = parse_manifest(manifest)

        assert [r.id for r in records] == ["a", "second"]
        assert records[1].annotations == (files / "gt" / "a.png", files / "gt" / "b.png")

        dataset = EdgeDataset.from_manifest(manifest)
        assert len(dataset) == 2
        assert dataset.ids == ["a", "second"]
        assert dataset.by_id("second").gt.shape == (6, 7)
        assert [s.id for s in dataset] == ["a", "second"]
        with pytest.raises(KeyError):
            dataset.by_id("missing")

        copy = files / "copy.tsv"
        write_manifest(copy, records)
        assert parse_manifest(copy) == records

    def test_malformed_line(self, files):
        manifest = files / "bad.tsv"
        manifest.write_text("img/a.png\n", encoding="utf-8")
        with pytest.raises(IngestionError, match="bad.tsv:1"):
            parse_manifest(manifest)

    def test_duplicate_ids(self, files):
        manifest = files / "dup.tsv"
        manifest.write_text("img/a.png\tgt/a.png\tx\nimg/b.png\tgt/b.png\tx\n", encoding="utf-8")
        with pytest.raises(IngestionError, match="Duplicate"):
            parse_manifest(manifest)

    def test_sample_validation(self):
        with pytest.raises(IngestionError):
            Sample(image=np.zeros((1, 3, 4, 4)), gt=np.zeros((4, 5)), id="x")
        with pytest.raises(IngestionError):
            Sample(image=np.zeros((1, 3, 4, 4)), gt=np.full((4, 4), 2.0), id="x")


class TestRaster:
    """Test raster and float-map I/O and resampling."""

    def test_quantize(self):
        prob = np.array([0.0, 0.5, 0.999, 1.2, -0.1])
        assert quantize(prob).tolist() == [0, 128, 255, 255, 0]

    def test_raster_round_trip(self, tmp_path):
        array = np.arange(12, dtype=np.uint8).reshape(3, 4)
        save_raster(tmp_path / "x.pgm", array)
        np.testing.assert_array_equal(load_raster(tmp_path / "x.pgm"), array)

    def test_float_map_round_trip(self, tmp_path):
        prob = np.random.default_rng(0).uniform(size=(5, 6)).astype(np.float32)
        save_float_map(tmp_path / "p.f32", {"fused": prob})
        loaded = load_float_map(tmp_path / "p.f32")
        assert loaded["fused"].tobytes() == prob.tobytes()

    def test_float_map_rejects_checkpoints(self, tmp_path):
        from bdcnet.tensor.checkpoint import write_container

        write_container(tmp_path / "c.bdcn", {"w": np.zeros(1)}, {"kind": "checkpoint"})
        with pytest.raises(CheckpointIntegrityError):
            load_float_map(tmp_path / "c.bdcn")

    def test_resize_align_corners(self):
        out = resize_map(np.array([[0.0, 1.0]]), 1, 5)
        np.testing.assert_allclose(out, [[0.0, 0.25, 0.5, 0.75, 1.0]])

    def test_resize_leading_axes(self):
        image = np.random.default_rng(0).uniform(size=(1, 3, 4, 6))
        out = resize_map(image, 8, 12)
        assert out.shape == (1, 3, 8, 12)
        np.testing.assert_allclose(out[..., 0, 0], image[..., 0, 0])
        np.testing.assert_allclose(out[..., -1, -1], image[..., -1, -1])

    def test_resize_nearest_keeps_values(self):
        gt = (np.random.default_rng(0).uniform(size=(9, 9)) > 0.7).astype(np.float32)
        assert set(np.unique(resize_map(gt, 13, 7, order=0))) <= {0.0, 1.0}


class TestAugment:
    """Test geometric augmentation."""

    def test_identity_config(self):
        sample = make_sample()
        config = AugmentConfig(flip=False, rotations=(0.0,), scales=(1.0,))
        out = augment(sample, config, 0)
        np.testing.assert_array_equal(out.image, sample.image)
        np.testing.assert_array_equal(out.gt, sample.gt)

    def test_flip_is_involution(self):
        sample = make_sample()
        twice = hflip(hflip(sample))
        np.testing.assert_array_equal(twice.image, sample.image)
        np.testing.assert_array_equal(twice.gt, sample.gt)
        np.testing.assert_array_equal(hflip(sample).gt, sample.gt[:, ::-1])

    def test_rotation_round_trip(self):
        sample = make_sample()
        back = rotate(rotate(sample, 90), -90)
        np.testing.assert_array_equal(back.image, sample.image)
        np.testing.assert_array_equal(back.gt, sample.gt)
        np.testing.assert_array_equal(back.regions["small"], sample.regions["small"])

    def test_quarter_turn_swaps_axes(self):
        sample = make_sample(6, 10)
        rotated = rotate(sample, 90)
        assert rotated.image.shape == (1, 3, 10, 6)
        assert rotated.gt.shape == (10, 6)

    def test_arbitrary_angle_keeps_frame(self):
        sample = make_sample(12, 12)
        rotated = rotate(sample, 30)
        assert rotated.gt.shape == (12, 12)
        assert set(np.unique(rotated.gt)) <= {0.0, 1.0}

    def test_rescale_keeps_gt_binary(self):
        sample = make_sample(10, 10)
        scaled = rescale(sample, 1.5)
        assert scaled.image.shape == (1, 3, 15, 15)
        assert set(np.unique(scaled.gt)) <= {0.0, 1.0}
        with pytest.raises(ConfigurationError):
            rescale(sample, 0.0)

    def test_crop(self):
        sample = make_sample(8, 8)
        window = crop(sample, 4, 5, top=2, left=1)
        np.testing.assert_array_equal(window.gt, sample.gt[2:6, 1:6])
        with pytest.raises(ConfigurationError):
            crop(sample, 9, 4)
        with pytest.raises(ConfigurationError):
            crop(sample, 4, 4, top=5)

    def test_deterministic_for_seed(self):
        sample = make_sample(16, 16)
        config = AugmentConfig(crop=(8, 8))
        a = augment(sample, config, 123)
        b = augment(sample, config, 123)
        assert a.image.tobytes() == b.image.tobytes()
        assert a.gt.shape == (8, 8)

    @pytest.mark.parametrize("flip", [False, True])
    @pytest.mark.parametrize("degrees", [0.0, 90.0, 180.0, 270.0, 30.0])
    @pytest.mark.parametrize("factor", [0.75, 1.0, 1.25])
    @pytest.mark.parametrize("window", [None, (6, 5)])
    def test_image_and_gt_stay_aligned(self, flip, degrees, factor, window):
        sample = make_sample(10, 14)
        config = AugmentConfig(flip=flip, rotations=(degrees,), scales=(factor,), crop=window)

        for seed in range(3):
            out = augment(sample, config, seed)

            h, w = (14, 10) if degrees in (90.0, 270.0) else (10, 14)
            expected = window or (round(h * factor), round(w * factor))
            assert out.gt.shape == expected
            assert out.image.shape == (1, 3, *expected)
            assert out.regions["small"].shape == expected

    def test_crop_larger_than_image(self):
        with pytest.raises(ConfigurationError):
            augment(make_sample(8, 8), AugmentConfig(scales=(1.0,), crop=(12, 12)), 0)


class TestSynth:
    """Test the synthetic shape generator."""

    def test_zero_count(self):
        assert synth_shapes(0, 0) == []

    def test_deterministic(self):
        a = synth_shapes(7, 3, 48)
        b = synth_shapes(7, 3, 48)
        for x, y in zip(a, b, strict=True):
            assert x.image.tobytes() == y.image.tobytes()
            assert x.gt.tobytes() == y.gt.tobytes()
        assert [s.id for s in a] == ["synth_0000", "synth_0001", "synth_0002"]

    def test_gt_lies_on_shape_boundaries(self):
        """Every GT pixel is inside some shape and 4-adjacent to a pixel outside it."""
        for sample in synth_shapes(3, 5, 64):
            masks = [shape.rasterize(64) for shape in sample.shapes]
            padded = [np.pad(m, 1, constant_values=False) for m in masks]
            for r, c in np.argwhere(sample.gt > 0):
                on_boundary = False
                for mask, pad in zip(masks, padded, strict=True):
                    if not mask[r, c]:
                        continue
                    neighbours = (pad[r, c + 1], pad[r + 2, c + 1], pad[r + 1, c], pad[r + 1, c + 2])
                    on_boundary |= not all(neighbours)
                assert on_boundary

    def test_regions_partition_gt(self):
        for sample in synth_shapes(1, 4, 64):
            small, large = sample.regions["small"], sample.regions["large"]
            np.testing.assert_array_equal(np.maximum(small, large), sample.gt)
            assert large.sum() > 0
            assert {s.regime for s in sample.shapes} >= {"large"}

    def test_image_range(self):
        sample = synth_shapes(2, 1, 32)[0]
        assert sample.image.shape == (1, 3, 32, 32)
        assert sample.image.dtype == np.float32
        assert 0.0 <= sample.image.min() and sample.image.max() <= 1.0

    def test_too_small(self):
        with pytest.raises(ConfigurationError):
            synth_shapes(0, 1, 16)

    def test_boundary_map(self):
        labels = np.zeros((5, 5), dtype=np.int32)
        labels[1:4, 1:4] = 1
        edges = boundary_map(labels)
        assert edges.sum() == 8
        assert not edges[2, 2]
        assert label_map([], 4).sum() == 0

    def test_write_dataset(self, tmp_path):
        samples = synth_shapes(5, 2, 32)
        manifests = write_synth_dataset(tmp_path / "toy", samples)

        assert set(manifests) == {"all", "small", "large"}
        records = parse_manifest(manifests["all"])
        assert [r.id for r in records] == ["synth_0000", "synth_0001"]
        assert isinstance(records[0], ManifestRecord)

        loaded = EdgeDataset.from_manifest(manifests["all"])[0]
        np.testing.assert_array_equal(loaded.gt, samples[0].gt)
        assert np.abs(loaded.image - samples[0].image).max() <= 0.5 / 255 + 1e-6

        large = EdgeDataset.from_manifest(manifests["large"])[1]
        np.testing.assert_array_equal(large.gt, samples[1].regions["large"])
