import math

import numpy as np
import pytest

from thermocolor.image import GrayImage, RgbImage
from thermocolor.synthetic import make_gray_pair, make_rgb_pair
from thermocolor.registration import (
    RegistrationError,
    bench_registration,
    crop_registered,
    entropy,
    full_search_range,
    histogram256,
    joint_histogram,
    mutual_information,
    reduced_search_range,
    register_exhaustive,
    register_reduced,
    register_trimmed,
    set_thread_count,
    write_bench_csv,
)


def gray(arr):
    return GrayImage(np.asarray(arr, dtype=np.uint8))


def planted_pair(rng, th_hw=(24, 32), opt_hw=(60, 80), offset=(9, 12)):
    """Thermal noise patch embedded verbatim in an optical noise image."""
    thermal = rng.integers(0, 256, size=th_hw, dtype=np.uint8)
    optical = rng.integers(0, 256, size=opt_hw, dtype=np.uint8)
    r, c = offset
    optical[r : r + th_hw[0], c : c + th_hw[1]] = thermal
    return gray(thermal), gray(optical)


def brute_force_best(thermal, optical):
    """Independent oracle: canonical MI at every offset, first max wins."""
    ta, oa = thermal.pixels, optical.pixels
    a, b = ta.shape
    best, best_rc = -math.inf, (0, 0)
    for r in range(oa.shape[0] - a + 1):
        for c in range(oa.shape[1] - b + 1):
            mi = mutual_information(ta, oa[r : r + a, c : c + b])
            if best < mi:
                best, best_rc = mi, (r, c)
    return best_rc, best


class TestEntropy:
    def test_constant_image(self):
        assert entropy(histogram256(gray(np.full((8, 8), 7)))) == 0.0

    def test_two_equiprobable_bins(self):
        img = gray([[0, 255], [0, 255]])
        assert abs(entropy(histogram256(img)) - math.log(2)) < 1e-15

    def test_four_equiprobable_bins(self):
        img = gray([[0, 1], [2, 3]])
        assert abs(entropy(histogram256(img)) - math.log(4)) < 1e-15

    def test_empty_histogram_rejected(self):
        with pytest.raises(ValueError):
            entropy(np.zeros(256, dtype=np.int64))


class TestJointHistogram:
    def test_marginals_match(self):
        rng = np.random.default_rng(40)
        a = rng.integers(0, 256, size=(16, 16), dtype=np.uint8)
        b = rng.integers(0, 256, size=(16, 16), dtype=np.uint8)
        joint = joint_histogram(a, b)
        assert joint.sum() == a.size
        assert np.array_equal(joint.sum(axis=1), histogram256(a))
        assert np.array_equal(joint.sum(axis=0), histogram256(b))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            joint_histogram(np.zeros((2, 2), np.uint8), np.zeros((2, 3), np.uint8))


class TestMutualInformation:
    def test_self_mi_equals_entropy_exactly(self):
        rng = np.random.default_rng(41)
        for _ in range(10):
            img = rng.integers(0, 256, size=(13, 17), dtype=np.uint8)
            assert mutual_information(img, img) == entropy(histogram256(img))

    def test_independent_two_by_two(self):
        a = np.array([[0, 0], [255, 255]], dtype=np.uint8)
        b = np.array([[0, 255], [0, 255]], dtype=np.uint8)
        assert abs(mutual_information(a, b)) < 1e-12

    def test_identical_two_level(self):
        a = np.array([[0, 0], [255, 255]], dtype=np.uint8)
        assert abs(mutual_information(a, a) - math.log(2)) < 1e-15

    def test_symmetry_bitwise(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            a = rng.integers(0, 256, size=(9, 11), dtype=np.uint8)
            b = rng.integers(0, 256, size=(9, 11), dtype=np.uint8)
            assert mutual_information(a, b) == mutual_information(b, a)

    def test_remap_invariance_bitwise(self):
        rng = np.random.default_rng(43)
        for _ in range(20):
            a = rng.integers(0, 256, size=(12, 12), dtype=np.uint8)
            b = rng.integers(0, 256, size=(12, 12), dtype=np.uint8)
            perm = rng.permutation(256).astype(np.uint8)
            assert mutual_information(perm[a], b) == mutual_information(a, b)
            assert mutual_information(a, perm[b]) == mutual_information(a, b)

    def test_bounds(self):
        rng = np.random.default_rng(44)
        for _ in range(30):
            a = rng.integers(0, 256, size=(10, 10), dtype=np.uint8)
            b = rng.integers(0, 256, size=(10, 10), dtype=np.uint8)
            mi = mutual_information(a, b)
            cap = min(entropy(histogram256(a)), entropy(histogram256(b)))
            assert 0.0 <= mi <= cap + 1e-12


class TestSearchRanges:
    def test_full_range(self):
        rng = full_search_range((24, 32), (60, 80))
        assert (rng.x_lo, rng.x_hi, rng.y_lo, rng.y_hi) == (0, 37, 0, 49)

    def test_reduced_is_central_half(self):
        rng = reduced_search_range((24, 32), (60, 80))
        # d_x = 36 -> [9, 27]; d_y = 48 -> [12, 36] (inclusive)
        assert (rng.x_lo, rng.x_hi, rng.y_lo, rng.y_hi) == (9, 28, 12, 37)

    def test_collapsed_axis_gives_single_central_offset(self):
        rng = reduced_search_range((5, 5), (5, 6))
        assert (rng.x_lo, rng.x_hi) == (0, 1)
        assert rng.x_hi - rng.x_lo == 1

    def test_thermal_larger_rejected(self):
        with pytest.raises(RegistrationError):
            full_search_range((10, 10), (9, 20))

    def test_reduced_subset_of_full_when_large(self):
        rng = np.random.default_rng(45)
        for _ in range(30):
            a, b = rng.integers(2, 8, size=2)
            x = a + rng.integers(1, 20)
            y = b + rng.integers(1, 20)
            if (x - a) * (y - b) <= 16:
                continue
            full = full_search_range((a, b), (x, y))
            red = reduced_search_range((a, b), (x, y))
            assert red.size < full.size
            assert full.x_lo <= red.x_lo and red.x_hi <= full.x_hi
            assert full.y_lo <= red.y_lo and red.y_hi <= full.y_hi


class TestExhaustive:
    def test_recovers_planted_offset_and_score(self):
        rng = np.random.default_rng(46)
        thermal, optical = planted_pair(rng, offset=(7, 3))
        res = register_exhaustive(thermal, optical)
        assert (res.offset_x, res.offset_y) == (7, 3)
        assert res.mi_score == entropy(histogram256(thermal))
        assert res.candidates_evaluated == 37 * 49

    def test_equal_sizes_single_candidate(self):
        rng = np.random.default_rng(47)
        img = gray(rng.integers(0, 256, size=(16, 16), dtype=np.uint8))
        res = register_exhaustive(img, img)
        assert (res.offset_x, res.offset_y) == (0, 0)
        assert res.candidates_evaluated == 1
        assert res.mi_score == entropy(histogram256(img))

    def test_matches_brute_force_oracle(self):
        # coarse 8-level alphabet: tiny patches over 256 levels saturate MI
        # (an all-distinct patch is a bijection of any other), so ties between
        # unrelated offsets would otherwise be possible
        rng = np.random.default_rng(48)
        for _ in range(3):
            thermal = (rng.integers(0, 8, size=(6, 7)) * 32).astype(np.uint8)
            optical = (rng.integers(0, 8, size=(14, 13)) * 32).astype(np.uint8)
            optical[5:11, 4:11] = thermal
            res = register_exhaustive(gray(thermal), gray(optical))
            (br, bc), bmi = brute_force_best(gray(thermal), gray(optical))
            assert (res.offset_x, res.offset_y) == (br, bc)
            assert abs(res.mi_score - bmi) < 1e-12

    def test_survives_monotonic_remap(self):
        rng = np.random.default_rng(49)
        thermal, optical = planted_pair(rng, offset=(11, 20))
        inverted = gray(255 - optical.pixels)
        res = register_exhaustive(thermal, inverted)
        assert (res.offset_x, res.offset_y) == (11, 20)

    def test_first_max_wins_ties(self):
        # constant background: only the two exact copies reach MI = H(thermal),
        # so the tie is deterministic and the row-major earlier copy must win
        rng = np.random.default_rng(50)
        thermal = rng.integers(0, 256, size=(4, 4), dtype=np.uint8)
        optical = np.full((12, 20), 7, dtype=np.uint8)
        optical[2:6, 8:12] = thermal  # row-major earlier
        optical[5:9, 2:6] = thermal
        res = register_exhaustive(gray(thermal), gray(optical))
        assert (res.offset_x, res.offset_y) == (2, 8)

    def test_thermal_larger_than_optical_rejected(self):
        with pytest.raises(RegistrationError):
            register_exhaustive(
                gray(np.zeros((10, 10))), gray(np.zeros((10, 9)))
            )


class TestReduced:
    def test_agrees_with_exhaustive_inside_window(self):
        rng = np.random.default_rng(51)
        for _ in range(5):
            r = int(rng.integers(9, 28))
            c = int(rng.integers(12, 37))
            thermal, optical = make_gray_pair(rng, (24, 32), (60, 80), (r, c))
            res_e = register_exhaustive(thermal, optical)
            res_r = register_reduced(thermal, optical)
            assert (res_e.offset_x, res_e.offset_y) == (r, c)
            assert (res_r.offset_x, res_r.offset_y) == (res_e.offset_x, res_e.offset_y)
            assert res_r.mi_score == res_e.mi_score

    def test_result_stays_inside_window_when_planted_outside(self):
        rng = np.random.default_rng(52)
        thermal, optical = planted_pair(rng, offset=(0, 0))  # outside central window
        res = register_reduced(thermal, optical)
        win = reduced_search_range(thermal.pixels.shape, optical.pixels.shape)
        assert win.contains(res.offset_x, res.offset_y)

    def test_fewer_candidates_than_exhaustive(self):
        rng = np.random.default_rng(53)
        for _ in range(5):
            thermal, optical = planted_pair(rng, offset=(15, 20))
            res_e = register_exhaustive(thermal, optical)
            res_r = register_reduced(thermal, optical)
            assert res_r.candidates_evaluated < res_e.candidates_evaluated
            assert res_r.candidates_evaluated <= reduced_search_range(
                thermal.pixels.shape, optical.pixels.shape
            ).size

    def test_early_stop_cuts_rows_after_peak(self):
        rng = np.random.default_rng(54)
        # planted near the top of the central window: rows after the peak are
        # silent, so the scan stops well before the window's last row
        thermal, optical = make_gray_pair(rng, (24, 32), (60, 80), (10, 24))
        res = register_reduced(thermal, optical)
        win = reduced_search_range(thermal.pixels.shape, optical.pixels.shape)
        assert (res.offset_x, res.offset_y) == (10, 24)
        assert res.candidates_evaluated < win.size


class TestTrimmed:
    def test_trim_zero_identical_to_reduced(self):
        rng = np.random.default_rng(55)
        thermal, optical = planted_pair(rng, offset=(14, 18))
        res_r = register_reduced(thermal, optical)
        res_t = register_trimmed(thermal, optical, trim=0)
        assert (res_t.offset_x, res_t.offset_y) == (res_r.offset_x, res_r.offset_y)
        assert res_t.mi_score == res_r.mi_score
        assert res_t.candidates_evaluated == res_r.candidates_evaluated

    def test_band_on_thermal_edge_is_excluded(self):
        rng = np.random.default_rng(56)
        trim = 6
        offset = (14, 20)
        thermal, optical = make_gray_pair(rng, (24, 32), (60, 80), offset)
        banded = thermal.pixels.copy()
        banded[:, -trim:] = 255  # synthetic color band on the right edge
        res = register_trimmed(gray(banded), optical, trim=trim)
        # interior matched where the interior of the planted copy sits
        assert (res.offset_x - trim, res.offset_y - trim) == offset

    def test_trim_too_large_rejected(self):
        rng = np.random.default_rng(57)
        thermal, optical = planted_pair(rng)
        with pytest.raises(RegistrationError):
            register_trimmed(thermal, optical, trim=12)  # 24 <= 2*12


class TestCrop:
    def test_eq4_arithmetic(self):
        from thermocolor.registration import RegistrationResult

        result = RegistrationResult(100, 50, 1.0, 1, 0.0, "trimmed")
        marked = np.zeros((400, 500, 3), dtype=np.uint8)
        marked[70, 20] = (1, 2, 3)
        marked[357, 403] = (4, 5, 6)
        out = crop_registered(RgbImage(marked), result, 288, 384, 30)
        assert out.pixels.shape == (288, 384, 3)
        assert tuple(out.pixels[0, 0]) == (1, 2, 3)
        assert tuple(out.pixels[-1, -1]) == (4, 5, 6)

    def test_zero_trim_top_left(self):
        from thermocolor.registration import RegistrationResult

        img = RgbImage(np.arange(5 * 6 * 3, dtype=np.uint8).reshape(5, 6, 3) % 250)
        result = RegistrationResult(0, 0, 1.0, 1, 0.0, "exhaustive")
        out = crop_registered(img, result, 2, 3, 0)
        assert np.array_equal(out.pixels, img.pixels[:2, :3])

    def test_out_of_bounds_is_registration_failure(self):
        from thermocolor.registration import RegistrationResult

        img = RgbImage(np.zeros((50, 50, 3), dtype=np.uint8))
        result = RegistrationResult(10, 10, 1.0, 1, 0.0, "trimmed")
        with pytest.raises(RegistrationError):
            crop_registered(img, result, 30, 30, 20)  # starts at -10

    def test_full_pipeline_crop_is_pixel_exact(self):
        from thermocolor.image import rgb_to_gray

        rng = np.random.default_rng(58)
        trim = 6
        r, c = 13, 22
        thermal, optical_rgb = make_rgb_pair(rng, (24, 32), (60, 80), (r, c))
        optical_gray = rgb_to_gray(optical_rgb)
        res = register_trimmed(thermal, optical_gray, trim=trim)
        out = crop_registered(optical_rgb, res, 24, 32, trim)
        assert np.array_equal(out.pixels, optical_rgb.pixels[r : r + 24, c : c + 32])


class TestDeterminism:
    def test_thread_count_does_not_change_results(self):
        rng = np.random.default_rng(59)
        thermal, optical = make_gray_pair(rng, (24, 32), (60, 80), (16, 25))
        set_thread_count(1)
        res1 = register_exhaustive(thermal, optical)
        red1 = register_reduced(thermal, optical)
        set_thread_count(2)
        res2 = register_exhaustive(thermal, optical)
        red2 = register_reduced(thermal, optical)
        set_thread_count(2)
        assert (res1.offset_x, res1.offset_y, res1.mi_score) == (
            res2.offset_x,
            res2.offset_y,
            res2.mi_score,
        )
        assert (red1.offset_x, red1.offset_y, red1.mi_score) == (
            red2.offset_x,
            red2.offset_y,
            red2.mi_score,
        )

    def test_repeated_runs_identical(self):
        rng = np.random.default_rng(60)
        thermal, optical = make_gray_pair(rng, (24, 32), (60, 80), (12, 30))
        first = register_reduced(thermal, optical)
        second = register_reduced(thermal, optical)
        assert (first.offset_x, first.offset_y, first.mi_score) == (
            second.offset_x,
            second.offset_y,
            second.mi_score,
        )


class TestBench:
    def test_central_agreement_and_ratios(self, tmp_path):
        rng = np.random.default_rng(61)
        pairs = []
        for i in range(3):
            r = int(rng.integers(9, 28))
            c = int(rng.integers(12, 37))
            thermal, optical = make_gray_pair(rng, (24, 32), (60, 80), (r, c))
            pairs.append((f"p{i}", thermal, optical))
        report = bench_registration(pairs, trim=6)
        assert report.agreement["reduced"] == 1.0
        assert report.agreement["trimmed"] == 1.0
        assert report.mean_candidates["reduced"] < report.mean_candidates["exhaustive"]
        path = tmp_path / "bench.csv"
        write_bench_csv(report, path)
        text = path.read_text()
        assert "t_reduced_over_t_exhaustive" in text
        assert "t_trimmed_over_t_reduced" in text
        assert text.count("\n") >= 3 * 3 + 1 + 7

    def test_empty_set_rejected(self):
        with pytest.raises(ValueError):
            bench_registration([])
