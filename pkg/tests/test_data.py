import math

import numpy as np
import pytest

import rednet.data as data
from rednet.data import (Blind, Blur, DiskKernel, GaussianKernel,
                         GaussianNoise, MotionKernel, PairDir, SRDegrade,
                         TextOverlay, add_gaussian_noise, bicubic_resize,
                         blur_image, build_blur_kernel, corrupt, degrade_sr,
                         extract_patches, load_pair_dir, overlay_text,
                         parse_corruption_spec, read_pgm, synthetic_images,
                         write_pgm)
from rednet.tensor import RngStream


class TestPgm:
    def test_round_trip_integer_image(self, tmp_path):
        img = (RngStream(1).uniform((37, 23)) * 255).round().astype(
            np.float32)
        path = tmp_path / "img.pgm"
        write_pgm(img, path)
        assert np.array_equal(read_pgm(path), img)

    def test_write_clamps_and_rounds(self, tmp_path):
        img = np.array([[255.7, -3.0], [99.5, 0.2]])
        path = tmp_path / "img.pgm"
        write_pgm(img, path)
        assert np.array_equal(read_pgm(path), [[255, 0], [100, 0]])

    def test_comments_in_header(self, tmp_path):
        path = tmp_path / "c.pgm"
        path.write_bytes(b"P5 # magic\n# a comment line\n2 2\n255\n\x01\x02\x03\x04")
        assert np.array_equal(read_pgm(path), [[1, 2], [3, 4]])

    def test_ascii_format_rejected(self, tmp_path):
        path = tmp_path / "a.pgm"
        path.write_bytes(b"P2\n2 2\n255\n1 2 3 4\n")
        with pytest.raises(ValueError, match="unsupported"):
            read_pgm(path)

    def test_wrong_maxval_rejected(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P5\n2 2\n127\n\x01\x02\x03\x04")
        with pytest.raises(ValueError, match="maxval"):
            read_pgm(path)

    def test_truncated_payload_rejected(self, tmp_path):
        path = tmp_path / "t.pgm"
        path.write_bytes(b"P5\n4 4\n255\n\x01\x02")
        with pytest.raises(ValueError, match="truncated"):
            read_pgm(path)


class TestExtractPatches:
    def test_grid_count(self):
        img = np.arange(100.0 * 100).reshape(100, 100)
        patches = extract_patches(img, 50, 25)
        assert len(patches) == 9  # (floor(50/25)+1)^2

    def test_patch_equals_image_when_exact(self):
        img = RngStream(2).uniform((50, 50))
        patches = extract_patches(img, 50, 1)
        assert len(patches) == 1
        assert np.array_equal(patches[0], img)

    def test_grid_order_row_major(self):
        img = np.arange(16.0).reshape(4, 4)
        patches = extract_patches(img, 2, 2)
        assert np.array_equal(patches[0], [[0, 1], [4, 5]])
        assert np.array_equal(patches[1], [[2, 3], [6, 7]])
        assert np.array_equal(patches[2], [[8, 9], [12, 13]])

    def test_oversized_patch_rejected(self):
        with pytest.raises(ValueError):
            extract_patches(np.zeros((10, 10)), 11, 1)


class TestGaussianNoiseOp:
    def test_zero_sigma_identity(self):
        img = RngStream(3).uniform((8, 8)) * 255
        assert np.array_equal(add_gaussian_noise(img, 0.0, RngStream(4)), img)

    def test_psnr_matches_closed_form(self):
        # PSNR(x + n, x) ~ 20*log10(255/sigma) = 11.2285 dB at sigma 70
        img = np.full((256, 256), 128.0)
        noisy = add_gaussian_noise(img, 70.0, RngStream(5))
        from rednet.metrics import psnr
        assert abs(psnr(noisy, img) - 20 * math.log10(255 / 70)) < 0.1

    def test_noise_mean_near_zero(self):
        img = np.zeros((1000, 1000))
        noisy = add_gaussian_noise(img, 70.0, RngStream(6))
        assert abs(noisy.mean()) < 0.28  # 4*sigma/sqrt(N)

    def test_unclipped(self):
        img = np.zeros((64, 64))
        noisy = add_gaussian_noise(img, 50.0, RngStream(7))
        assert noisy.min() < 0


def _bicubic_weight(x):
    ax = abs(x)
    if ax <= 1:
        return (1.5 * ax - 2.5) * ax * ax + 1.0
    if ax < 2:
        return ((-0.5 * ax + 2.5) * ax - 4.0) * ax + 2.0
    return 0.0


def _bicubic_oracle(img, out_h, out_w):
    # direct per-pixel evaluation of the separable cubic kernel
    h, w = img.shape
    out = np.zeros((out_h, out_w))
    for oy in range(out_h):
        sy = (oy + 0.5) * h / out_h - 0.5
        by = math.floor(sy)
        for ox in range(out_w):
            sx = (ox + 0.5) * w / out_w - 0.5
            bx = math.floor(sx)
            acc = 0.0
            wsum = 0.0
            for ty in range(-1, 3):
                for tx in range(-1, 3):
                    wy = _bicubic_weight(sy - (by + ty))
                    wx = _bicubic_weight(sx - (bx + tx))
                    iy = min(max(by + ty, 0), h - 1)
                    ix = min(max(bx + tx, 0), w - 1)
                    acc += wy * wx * img[iy, ix]
                    wsum += wy * wx
            out[oy, ox] = acc / wsum
    return out


class TestBicubic:
    def test_identity_when_same_dims(self):
        img = RngStream(8).uniform((13, 9)) * 255
        assert np.allclose(bicubic_resize(img, 13, 9), img, atol=1e-12)

    def test_constant_preserved(self):
        img = np.full((10, 14), 42.0)
        for dims in ((20, 28), (5, 7), (13, 11)):
            assert np.allclose(bicubic_resize(img, *dims), 42.0, atol=1e-10)

    def test_matches_direct_evaluation(self):
        img = RngStream(9).uniform((12, 10)) * 255
        got = bicubic_resize(img, 18, 25)
        assert np.allclose(got, _bicubic_oracle(img, 18, 25), atol=1e-9)

    def test_upsampled_ramp_reproduced(self):
        # cubic-convolution resampling reproduces a linear ramp away from
        # the clamped borders
        img = np.tile(np.arange(32.0), (32, 1))
        up = bicubic_resize(img, 64, 64)
        expected_col = (np.arange(64) + 0.5) * 0.5 - 0.5
        interior = slice(4, 60)
        assert np.allclose(up[interior, interior],
                           np.tile(expected_col[interior], (56, 1)),
                           atol=1e-3)

    def test_bad_dims_rejected(self):
        with pytest.raises(ValueError):
            bicubic_resize(np.zeros((4, 4)), 0, 4)


class TestDegradeSr:
    def test_constant_unchanged(self):
        img = np.full((24, 24), 77.0)
        assert np.allclose(degrade_sr(img, 3), 77.0, atol=1e-9)

    def test_shape_contract_odd_dims(self):
        img = RngStream(10).uniform((63, 47))
        assert degrade_sr(img, 4).shape == (63, 47)

    def test_monotone_in_scale(self):
        from rednet.metrics import psnr
        img = synthetic_images(1, 96, 96, RngStream(11))[0]
        values = [psnr(degrade_sr(img, s), img) for s in (2, 3, 4)]
        assert all(math.isfinite(v) for v in values)
        assert values[0] > values[1] > values[2]

    def test_too_small_rejected(self):
        with pytest.raises(ValueError):
            degrade_sr(np.zeros((3, 8)), 4)

    def test_bad_scale_rejected(self):
        with pytest.raises(ValueError):
            degrade_sr(np.zeros((8, 8)), 5)


class TestBlurKernels:
    def test_disk_radius_one_is_cross(self):
        k = build_blur_kernel(DiskKernel(1))
        expected = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]]) / 5.0
        assert np.allclose(k, expected)

    def test_motion_length_one_is_delta(self):
        k = build_blur_kernel(MotionKernel(1, 37.0))
        assert k.shape == (1, 1)
        assert k[0, 0] == 1.0

    def test_motion_horizontal(self):
        k = build_blur_kernel(MotionKernel(5, 0.0))
        assert k.shape == (1, 5)
        assert np.allclose(k, 0.2)

    def test_motion_vertical(self):
        k = build_blur_kernel(MotionKernel(5, 90.0))
        assert k.shape == (5, 1)
        assert np.allclose(k, 0.2)

    def test_motion_diagonal_has_length_cells(self):
        k = build_blur_kernel(MotionKernel(7, 45.0))
        assert np.count_nonzero(k) == 7

    @pytest.mark.parametrize("spec", [
        DiskKernel(1), DiskKernel(2.5), DiskKernel(5),
        GaussianKernel(0.8, 5), GaussianKernel(1.5, 9), GaussianKernel(3, 21),
        MotionKernel(1, 0), MotionKernel(9, 30), MotionKernel(15, 120),
    ])
    def test_nonnegative_and_normalized(self, spec):
        k = build_blur_kernel(spec)
        assert np.all(k >= 0)
        assert abs(k.sum() - 1.0) < 1e-6
        assert k.shape[0] % 2 == 1 and k.shape[1] % 2 == 1

    def test_degenerate_specs_rejected(self):
        with pytest.raises(ValueError):
            DiskKernel(0.5)
        with pytest.raises(ValueError):
            MotionKernel(0, 10)
        with pytest.raises(ValueError):
            GaussianKernel(0.0, 5)
        with pytest.raises(ValueError):
            GaussianKernel(1.0, 4)


class TestBlurImage:
    def test_delta_kernel_identity(self):
        img = RngStream(12).uniform((9, 9)) * 255
        assert np.allclose(blur_image(img, np.array([[1.0]])), img)

    def test_constant_unchanged(self):
        img = np.full((8, 8), 13.0)
        k = build_blur_kernel(GaussianKernel(1.0, 5))
        assert np.allclose(blur_image(img, k), 13.0)

    def test_hand_correlation_with_clamped_borders(self):
        # every 3x3 clamped window of this image contains the 9 exactly
        # once, so a normalized box kernel maps it to all ones
        img = np.zeros((3, 3))
        img[1, 1] = 9.0
        out = blur_image(img, np.full((3, 3), 1.0 / 9.0))
        assert np.allclose(out, np.ones((3, 3)))

    def test_matches_loop_oracle(self):
        rng = RngStream(13)
        img = rng.uniform((7, 6)) * 255
        kernel = rng.uniform((3, 5))
        kernel /= kernel.sum()
        expected = np.zeros_like(img)
        h, w = img.shape
        for i in range(h):
            for j in range(w):
                acc = 0.0
                for di in range(-1, 2):
                    for dj in range(-2, 3):
                        ii = min(max(i + di, 0), h - 1)
                        jj = min(max(j + dj, 0), w - 1)
                        acc += kernel[di + 1, dj + 2] * img[ii, jj]
                expected[i, j] = acc
        assert np.allclose(blur_image(img, kernel), expected, atol=1e-10)

    def test_even_kernel_rejected(self):
        with pytest.raises(ValueError):
            blur_image(np.zeros((5, 5)), np.ones((2, 2)) / 4)


class TestOverlayText:
    def test_coverage_reached_within_tolerance(self):
        img = np.full((180, 180), 255.0)
        out, mask = overlay_text(img, 10, 0.1, 0.0, RngStream(14))
        frac = (out == 0).mean()
        assert 0.08 <= frac <= 0.12  # +-20% of the requested coverage
        assert mask.mean() >= 0.1

    def test_mask_is_exactly_the_changed_pixels(self):
        img = np.full((120, 120), 255.0)
        out, mask = overlay_text(img, 8, 0.05, 0.0, RngStream(15))
        assert np.array_equal(mask, out != img)

    def test_deterministic(self):
        img = np.full((90, 90), 200.0)
        a = overlay_text(img, 7, 0.08, 10.0, RngStream(16))
        b = overlay_text(img, 7, 0.08, 10.0, RngStream(16))
        assert np.array_equal(a[0], b[0])
        assert np.array_equal(a[1], b[1])

    def test_unreachable_coverage_raises(self, monkeypatch):
        monkeypatch.setattr(data, "MAX_TEXT_PLACEMENTS", 3)
        with pytest.raises(ValueError, match="unreachable"):
            overlay_text(np.full((200, 200), 255.0), 5, 0.9, 0.0,
                         RngStream(17))

    def test_small_glyph_rejected(self):
        with pytest.raises(ValueError):
            overlay_text(np.zeros((50, 50)), 4, 0.1, 0.0, RngStream(18))


class TestCorruptDispatch:
    def test_gaussian_zero_identity(self):
        img = RngStream(19).uniform((16, 16)) * 255
        assert np.array_equal(corrupt(img, GaussianNoise(0.0), RngStream(20)),
                              img)

    def test_blind_choices_roughly_uniform(self):
        spec = Blind((GaussianNoise(10.0), GaussianNoise(70.0)))
        img = np.zeros((4, 4))
        rng = RngStream(21)
        high = 0
        trials = 10_000
        for _ in range(trials):
            out = corrupt(img, spec, rng)
            if out.std() > 30:  # sigma-70 draws are well separated
                high += 1
        assert abs(high / trials - 0.5) < 0.02

    def test_sr_keeps_shape(self):
        img = RngStream(22).uniform((33, 21))
        assert corrupt(img, SRDegrade(2), RngStream(23)).shape == (33, 21)

    def test_never_changes_dimensions(self):
        img = synthetic_images(1, 40, 56, RngStream(24))[0]
        rng = RngStream(25)
        specs = [GaussianNoise(30), SRDegrade(4),
                 Blur(DiskKernel(2)), Blur(MotionKernel(5, 45)),
                 TextOverlay(6, 0.05, 0.0),
                 Blind((GaussianNoise(10), SRDegrade(2)))]
        for spec in specs:
            assert corrupt(img, spec, rng).shape == img.shape

    def test_pairdir_rejected(self):
        with pytest.raises(ValueError, match="pairdir"):
            corrupt(np.zeros((8, 8)), PairDir("/tmp/x"), RngStream(26))


class TestSpecParsing:
    @pytest.mark.parametrize("text,expected", [
        ("gaussian:30", GaussianNoise(30.0)),
        ("gaussian:12.5", GaussianNoise(12.5)),
        ("sr:3", SRDegrade(3)),
        ("blur:disk:5", Blur(DiskKernel(5.0))),
        ("blur:gaussian:1.5:9", Blur(GaussianKernel(1.5, 9))),
        ("blur:motion:9:45", Blur(MotionKernel(9, 45.0))),
        ("text:10:0.1", TextOverlay(10, 0.1, 0.0)),
        ("text:10:0.1:255", TextOverlay(10, 0.1, 255.0)),
        ("pairdir:/data/pairs", PairDir("/data/pairs")),
        ("blind:gaussian:10,gaussian:70",
         Blind((GaussianNoise(10.0), GaussianNoise(70.0)))),
        ("blind:sr:2,sr:3,sr:4",
         Blind((SRDegrade(2), SRDegrade(3), SRDegrade(4)))),
    ])
    def test_grammar(self, text, expected):
        assert parse_corruption_spec(text) == expected

    @pytest.mark.parametrize("text", [
        "sharpen:3", "gaussian", "gaussian:-1", "sr:5", "blur:disk",
        "blur:box:3", "text:10", "text:3:0.1", "pairdir:", "blind:",
    ])
    def test_bad_specs_rejected(self, text):
        with pytest.raises(ValueError):
            parse_corruption_spec(text)


class TestPairDirLoader:
    def test_load_pairs(self, tmp_path):
        rng = RngStream(27)
        for name in ("a", "b"):
            clean = (rng.uniform((20, 20)) * 255).round()
            write_pgm(clean, tmp_path / f"{name}.clean.pgm")
            write_pgm(clean * 0.5, tmp_path / f"{name}.corrupt.pgm")
        pairs = load_pair_dir(tmp_path)
        assert len(pairs) == 2
        corrupted, clean = pairs[0]
        assert corrupted.shape == clean.shape == (20, 20)

    def test_missing_sibling_rejected(self, tmp_path):
        write_pgm(np.zeros((8, 8)), tmp_path / "x.clean.pgm")
        with pytest.raises(ValueError, match="x.corrupt.pgm"):
            load_pair_dir(tmp_path)

    def test_empty_dir_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="no .*clean"):
            load_pair_dir(tmp_path)


def test_synthetic_images_properties():
    imgs = synthetic_images(5, 64, 48, RngStream(28))
    assert len(imgs) == 5
    for img in imgs:
        assert img.shape == (64, 48)
        assert img.dtype == np.float32
        assert img.min() >= 0 and img.max() <= 255
    again = synthetic_images(5, 64, 48, RngStream(28))
    assert all(np.array_equal(a, b) for a, b in zip(imgs, again))
