"""Seeded corruption tests: exact determinism, statistical behavior of the
noise models, the cartoon identity configuration, and the directory runner."""

import json
import math

import numpy as np
import pytest

from capood.corrupt import (
    DEFAULT_PARAMS,
    CorruptionSpec,
    apply_corruption,
    cartoon_corrupt,
    corrupt_directory,
    crop_bbox,
    file_seed,
    random_noise_image,
    salt_pepper,
    snow_corrupt,
    write_corruption_manifest,
)
from capood.errors import ValidationError
from capood.images import RasterImage, load_image, save_image
from capood.rng import byte_block


def noise_image(seed, w=16, h=16):
    return RasterImage(byte_block(seed, w * h * 3).reshape(h, w, 3))


class TestSaltPepper:
    def test_p_zero_is_identity(self):
        img = noise_image(1)
        assert salt_pepper(img, 0.0, seed=5) == img

    def test_p_one_saturates_every_pixel(self):
        out = salt_pepper(noise_image(2), 1.0, seed=5)
        flat = out.pixels.reshape(-1, 3)
        assert all(tuple(px) in ((0, 0, 0), (255, 255, 255)) for px in flat.tolist())

    def test_affected_pixels_are_pure_black_or_white(self):
        img = RasterImage.filled(32, 32, (90, 120, 150))
        out = salt_pepper(img, 0.3, seed=9)
        changed = np.any(out.pixels != img.pixels, axis=2)
        assert changed.any()
        hit = out.pixels[changed]
        assert set(map(tuple, hit.tolist())) <= {(0, 0, 0), (255, 255, 255)}

    def test_fraction_within_four_sigma(self):
        p, w, h = 0.1, 128, 128
        img = RasterImage.filled(w, h, (128, 128, 128))
        out = salt_pepper(img, p, seed=3)
        n = w * h
        frac = float(np.any(out.pixels != 128, axis=2).mean())
        sigma = math.sqrt(p * (1 - p) / n)
        assert abs(frac - p) <= 4 * sigma
        black = float(np.all(out.pixels == 0, axis=2).mean())
        sigma_b = math.sqrt((p / 2) * (1 - p / 2) / n)
        assert abs(black - p / 2) <= 4 * sigma_b

    def test_same_seed_same_output(self):
        img = noise_image(4)
        assert salt_pepper(img, 0.2, seed=7) == salt_pepper(img, 0.2, seed=7)

    def test_different_seed_different_output(self):
        img = RasterImage.filled(32, 32, (128, 128, 128))
        assert salt_pepper(img, 0.2, seed=7) != salt_pepper(img, 0.2, seed=8)

    def test_rejects_bad_probability(self):
        with pytest.raises(ValidationError):
            salt_pepper(noise_image(0), 1.5)


class TestSnow:
    def test_deterministic(self):
        img = noise_image(5, 40, 30)
        a = snow_corrupt(img, seed=11)
        b = snow_corrupt(img, seed=11)
        assert a == b
        assert a != snow_corrupt(img, seed=12)

    def test_brightens_dark_image(self):
        img = RasterImage.filled(48, 48, (30, 35, 40))
        out = snow_corrupt(img, density=0.3, seed=2)
        assert float(out.pixels.mean()) > float(img.pixels.mean()) + 20

    def test_zero_density_is_pure_brightness_lift(self):
        img = noise_image(6, 20, 20)
        lift = 0.2
        out = snow_corrupt(img, density=0.0, brightness_lift=lift, seed=1)
        expected = np.clip(
            np.round(img.pixels.astype(float) * (1 - lift) + 255.0 * lift), 0, 255
        ).astype(np.uint8)
        assert np.array_equal(out.pixels, expected)

    def test_unblurred_flakes_hit_white(self):
        img = RasterImage.filled(64, 64, (0, 0, 0))
        out = snow_corrupt(img, density=0.5, blur_radius=0, brightness_lift=0.0, seed=3)
        assert np.all(out.pixels == 255, axis=2).any()
        assert np.all(out.pixels == 0, axis=2).any()

    def test_blur_softens_flakes(self):
        img = RasterImage.filled(64, 64, (0, 0, 0))
        hard = snow_corrupt(img, density=0.2, blur_radius=0, brightness_lift=0.0, seed=4)
        soft = snow_corrupt(img, density=0.2, blur_radius=2, brightness_lift=0.0, seed=4)
        values = np.unique(soft.pixels)
        assert len(values) > len(np.unique(hard.pixels))
        assert ((values > 0) & (values < 255)).any()

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValidationError):
            snow_corrupt(noise_image(0), density=-0.1)
        with pytest.raises(ValidationError):
            snow_corrupt(noise_image(0), blur_radius=-1)
        with pytest.raises(ValidationError):
            snow_corrupt(noise_image(0), brightness_lift=1.5)


class TestCartoon:
    def test_identity_configuration(self):
        img = noise_image(7, 24, 24)
        out = cartoon_corrupt(img, levels=256, smooth_iters=0, edge_threshold=1.01)
        assert out == img

    def test_two_levels_on_flat_images(self):
        for value, expected in ((10, 64), (127, 64), (128, 192), (250, 192)):
            img = RasterImage.filled(8, 8, (value, value, value))
            out = cartoon_corrupt(img, levels=2, smooth_iters=0, edge_threshold=1.01)
            assert np.all(out.pixels == expected)

    def test_edges_painted_black(self):
        px = np.full((16, 16, 3), 50, dtype=np.uint8)
        px[:, 8:] = 220
        out = cartoon_corrupt(
            RasterImage(px), levels=256, smooth_iters=0, edge_threshold=0.25
        )
        black = np.all(out.pixels == 0, axis=2)
        assert black[:, 7].all() and black[:, 8].all()
        assert not black[:, 2].any() and not black[:, 13].any()

    def test_smoothing_reduces_variance_without_killing_edges(self):
        px = np.zeros((24, 24, 3), dtype=np.uint8)
        px[:, 12:] = 200
        rough = px.astype(int) + byte_block(13, px.size).reshape(px.shape) % 21 - 10
        img = RasterImage(np.clip(rough, 0, 255).astype(np.uint8))
        out = cartoon_corrupt(img, levels=256, smooth_iters=3, edge_threshold=1.01)
        left_in = img.pixels[:, :8].astype(float)
        left_out = out.pixels[:, :8].astype(float)
        assert left_out.std() < left_in.std()
        assert abs(float(out.pixels[:, 16:].mean()) - 200.0) < 15.0

    def test_quantization_reduces_palette(self):
        img = noise_image(8, 32, 32)
        out = cartoon_corrupt(img, levels=4, smooth_iters=0, edge_threshold=1.01)
        assert set(np.unique(out.pixels).tolist()) <= {32, 96, 160, 224}

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValidationError):
            cartoon_corrupt(noise_image(0), levels=1)
        with pytest.raises(ValidationError):
            cartoon_corrupt(noise_image(0), levels=257)
        with pytest.raises(ValidationError):
            cartoon_corrupt(noise_image(0), smooth_iters=-1)
        with pytest.raises(ValidationError):
            cartoon_corrupt(noise_image(0), edge_threshold=0.0)


class TestNoiseAndCrop:
    def test_noise_matches_byte_stream(self):
        img = random_noise_image(5, 4, seed=21)
        assert np.array_equal(img.pixels.reshape(-1), byte_block(21, 60))

    def test_noise_mean_within_four_sigma(self):
        img = random_noise_image(64, 64, seed=1)
        n = img.pixels.size
        sigma = math.sqrt((256.0**2 - 1) / 12.0 / n)
        assert abs(float(img.pixels.mean()) - 127.5) <= 4 * sigma

    def test_noise_rejects_degenerate_size(self):
        with pytest.raises(ValidationError):
            random_noise_image(0, 4)

    def test_crop_values(self):
        img = noise_image(9, 10, 8)
        out = crop_bbox(img, 2, 1, 7, 4)
        assert (out.width, out.height) == (5, 3)
        assert np.array_equal(out.pixels, img.pixels[1:4, 2:7])

    def test_crop_rejects_bad_bbox(self):
        img = noise_image(0, 10, 8)
        for bbox in ((5, 0, 5, 4), (0, 0, 11, 4), (-1, 0, 5, 4), (0, 3, 5, 3)):
            with pytest.raises(ValidationError):
                crop_bbox(img, *bbox)


class TestCorruptionSpec:
    def test_defaults_filled(self):
        spec = CorruptionSpec("snow", seed=4)
        assert spec.params == DEFAULT_PARAMS["snow"]

    def test_override_keeps_other_defaults(self):
        spec = CorruptionSpec("snow", params={"density": 0.5})
        assert spec.params["density"] == 0.5
        assert spec.params["blur_radius"] == DEFAULT_PARAMS["snow"]["blur_radius"]

    def test_rejects_unknown_kind(self):
        with pytest.raises(ValidationError):
            CorruptionSpec("motion_blur")

    def test_rejects_unknown_parameter(self):
        with pytest.raises(ValidationError):
            CorruptionSpec("jpeg", params={"qualty": 10})

    def test_json_round_trip(self):
        spec = CorruptionSpec("salt_pepper", seed=99, params={"p": 0.25})
        again = CorruptionSpec.from_json(json.loads(json.dumps(spec.to_json())))
        assert again == spec

    def test_from_json_rejects_malformed(self):
        with pytest.raises(ValidationError):
            CorruptionSpec.from_json({"seed": 3})

    def test_apply_dispatches_every_kind(self):
        img = noise_image(3, 24, 24)
        for kind in DEFAULT_PARAMS:
            out = apply_corruption(img, CorruptionSpec(kind, seed=1))
            assert (out.width, out.height) == (img.width, img.height)
            if kind != "cartoon":
                assert out != img


class TestDirectoryRunner:
    def make_inputs(self, root, n=3):
        src = root / "clean"
        src.mkdir()
        for i in range(n):
            save_image(noise_image(100 + i, 12, 10), src / f"img_{i}.ppm")
        return src

    def test_file_seed_varies_by_name_and_is_stable(self):
        assert file_seed(7, "a.png") != file_seed(7, "b.png")
        assert file_seed(7, "a.png") == file_seed(7, "a.png")
        assert file_seed(7, "a.png") != file_seed(8, "a.png")

    def test_runner_writes_outputs_and_manifest(self, tmp_path):
        src = self.make_inputs(tmp_path)
        dst = tmp_path / "noisy"
        spec = CorruptionSpec("salt_pepper", seed=5, params={"p": 0.3})
        entries = list(corrupt_directory(src, dst, spec))
        write_corruption_manifest(entries, tmp_path / "manifest.jsonl")

        assert [e["src"].rsplit("/", 1)[-1] for e in entries] == [
            "img_0.ppm",
            "img_1.ppm",
            "img_2.ppm",
        ]
        seeds = [e["seed"] for e in entries]
        assert len(set(seeds)) == len(seeds)
        for entry in entries:
            out = load_image(entry["dst"])
            assert (out.width, out.height) == (12, 10)
        lines = (tmp_path / "manifest.jsonl").read_text().splitlines()
        assert [json.loads(line)["dst"] for line in lines] == [e["dst"] for e in entries]

    def test_rerun_is_byte_identical(self, tmp_path):
        src = self.make_inputs(tmp_path)
        spec = CorruptionSpec("snow", seed=12)
        d1, d2 = tmp_path / "run1", tmp_path / "run2"
        list(corrupt_directory(src, d1, spec))
        list(corrupt_directory(src, d2, spec))
        for name in ("img_0.ppm", "img_1.ppm", "img_2.ppm"):
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes()

    def test_per_file_noise_differs(self, tmp_path):
        src = tmp_path / "clean"
        src.mkdir()
        flat = RasterImage.filled(16, 16, (128, 128, 128))
        save_image(flat, src / "a.ppm")
        save_image(flat, src / "b.ppm")
        dst = tmp_path / "out"
        list(corrupt_directory(src, dst, CorruptionSpec("salt_pepper", seed=1)))
        assert (dst / "a.ppm").read_bytes() != (dst / "b.ppm").read_bytes()

    def test_empty_directory_rejected(self, tmp_path):
        empty = tmp_path / "none"
        empty.mkdir()
        with pytest.raises(ValidationError):
            list(corrupt_directory(empty, tmp_path / "out", CorruptionSpec("jpeg")))
