import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sonomaly.detectors import (
    AnomalyMap,
    GaussianField,
    MemoryBank,
    coverage_radius,
    greedy_k_center,
    load_model,
    nearest_distances,
    padim_fit,
    padim_score,
    patchcore_fit,
    patchcore_score,
    postprocess,
    sample_score,
    save_model,
)
from sonomaly.errors import DataError, ParameterError, ShapeError, StatisticsError
from sonomaly.features import ExtractorSpec
from sonomaly.features.pyramid import CoordMap, PatchGrid

from .oracles import (
    brute_greedy_k_center,
    brute_nearest_distances,
    direct_gaussian_blur,
    explicit_mahalanobis,
    sample_covariance,
)


def grid_from(arr: np.ndarray, t=None, f=None) -> PatchGrid:
    h, w, _ = arr.shape
    return PatchGrid(arr, CoordMap(t or h, f or w, h, w))


class TestPadim:
    def test_identical_grids(self):
        rng = np.random.default_rng(0)
        base = rng.standard_normal((3, 4, 5))
        eps = 0.01
        field = padim_fit([grid_from(base), grid_from(base.copy())], eps)
        assert np.allclose(field.mean, base)
        # zero variance: cov = eps*I, precision = I/eps
        assert np.allclose(field.precision, np.eye(5) / eps)
        assert np.allclose(padim_score(grid_from(base), field), 0.0)

    def test_hand_variance_c1(self):
        eps = 0.01
        g1 = grid_from(np.full((1, 1, 1), 1.0))
        g2 = grid_from(np.full((1, 1, 1), 3.0))
        field = padim_fit([g1, g2], eps)
        assert field.mean[0, 0, 0] == pytest.approx(2.0)
        # sample variance with n-1: ((1-2)^2 + (3-2)^2) / 1 = 2
        assert 1.0 / field.precision[0, 0, 0, 0] == pytest.approx(2.0 + eps)

    def test_single_grid_rejected(self):
        with pytest.raises(StatisticsError):
            padim_fit([grid_from(np.zeros((2, 2, 3)))], 0.01)

    def test_diag_covariance_example(self):
        # mu=(0,0), cov=diag(2, 0.5), eps -> 0, x=(2,1): sqrt(4/2 + 1/0.5) = 2
        field = GaussianField(
            mean=np.zeros((1, 1, 2)),
            precision=np.linalg.inv(np.diag([2.0, 0.5]))[None, None],
            epsilon=0.0,
        )
        x = grid_from(np.array([[[2.0, 1.0]]]))
        assert padim_score(x, field)[0, 0] == pytest.approx(2.0, abs=1e-12)

    def test_euclidean_case(self):
        field = GaussianField(np.zeros((1, 1, 2)), np.eye(2)[None, None], 0.0)
        x = grid_from(np.array([[[3.0, 4.0]]]))
        assert padim_score(x, field)[0, 0] == pytest.approx(5.0)

    def test_shape_mismatch(self):
        field = GaussianField(np.zeros((1, 1, 2)), np.eye(2)[None, None], 0.0)
        with pytest.raises(ShapeError):
            padim_score(grid_from(np.zeros((2, 1, 2))), field)

    def test_against_explicit_inverse_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            c = int(rng.integers(1, 9))
            n = int(rng.integers(2, 9))
            h, w = int(rng.integers(1, 4)), int(rng.integers(1, 4))
            eps = float(rng.uniform(0.001, 0.1))
            data = rng.standard_normal((n, h, w, c))
            grids = [grid_from(data[i]) for i in range(n)]
            field = padim_fit(grids, eps)
            query = rng.standard_normal((h, w, c))
            scores = padim_score(grid_from(query), field)
            for hi in range(h):
                for wi in range(w):
                    rows = data[:, hi, wi, :]
                    cov = sample_covariance(rows) + eps * np.eye(c)
                    expected = explicit_mahalanobis(query[hi, wi], rows.mean(axis=0), cov)
                    rel = abs(scores[hi, wi] - expected) / max(expected, 1e-12)
                    assert rel <= 1e-6

    def test_training_order_invariance(self):
        rng = np.random.default_rng(1)
        data = [rng.standard_normal((2, 3, 4)) for _ in range(6)]
        f1 = padim_fit([grid_from(d) for d in data], 0.01)
        f2 = padim_fit([grid_from(d) for d in reversed(data)], 0.01)
        assert np.allclose(f1.mean, f2.mean)
        assert np.allclose(f1.precision, f2.precision, rtol=1e-9, atol=1e-9)

    def test_score_positive_off_mean(self):
        rng = np.random.default_rng(2)
        data = [rng.standard_normal((2, 2, 3)) for _ in range(5)]
        field = padim_fit([grid_from(d) for d in data], 0.01)
        query = field.mean + 0.5
        scores = padim_score(grid_from(query), field)
        assert (scores > 0).all()


class TestPatchCore:
    def test_fraction_one_keeps_pool_order(self):
        rng = np.random.default_rng(3)
        g = grid_from(rng.standard_normal((2, 3, 4)))
        bank = patchcore_fit([g], 1.0)
        assert np.array_equal(bank.coreset, g.patch_vectors())
        assert np.array_equal(bank.selected_indices, np.arange(6))

    def test_1d_pool_hand_example(self):
        # pool {0, 1, 2, 10}, N=3 -> values selected in order 0, 10, 2
        pool = np.array([[0.0], [1.0], [2.0], [10.0]])
        sel = greedy_k_center(pool, 3)
        assert pool[sel].ravel().tolist() == [0.0, 10.0, 2.0]

    def test_single_vector_any_fraction(self):
        g = grid_from(np.ones((1, 1, 3)))
        bank = patchcore_fit([g], 0.001)
        assert bank.coreset.shape == (1, 3)

    def test_query_in_bank_scores_zero(self):
        rng = np.random.default_rng(4)
        g = grid_from(rng.standard_normal((2, 2, 3)))
        bank = patchcore_fit([g], 1.0)
        assert np.allclose(patchcore_score(g, bank), 0.0)

    def test_hand_distance(self):
        bank = MemoryBank(np.array([[0.0, 0.0], [1.0, 1.0]]), 1.0, 2, np.arange(2))
        g = grid_from(np.array([[[1.0, 0.0]]]))
        assert patchcore_score(g, bank)[0, 0] == pytest.approx(1.0)

    def test_empty_bank(self):
        bank = MemoryBank(np.empty((0, 2)), 1.0, 0, np.arange(0))
        with pytest.raises(DataError):
            patchcore_score(grid_from(np.zeros((1, 1, 2))), bank)

    def test_dim_mismatch(self):
        bank = MemoryBank(np.zeros((2, 3)), 1.0, 2, np.arange(2))
        with pytest.raises(ShapeError):
            patchcore_score(grid_from(np.zeros((1, 1, 2))), bank)

    def test_bad_fraction(self):
        g = grid_from(np.zeros((1, 1, 2)))
        for frac in (0.0, -0.5, 1.5):
            with pytest.raises(ParameterError):
                patchcore_fit([g], frac)

    def test_greedy_matches_brute_force_frozen(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            n = int(rng.integers(2, 51))
            c = int(rng.integers(1, 8))
            pool = rng.standard_normal((n, c))
            k = int(rng.integers(1, n + 1))
            assert greedy_k_center(pool, k).tolist() == brute_greedy_k_center(pool, k)

    def test_nearest_matches_brute_force_exactly(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            q = rng.standard_normal((int(rng.integers(1, 30)), 5))
            b = rng.standard_normal((int(rng.integers(1, 40)), 5))
            assert np.array_equal(nearest_distances(q, b), brute_nearest_distances(q, b))

    def test_fast_kernels_match_direct(self):
        # the large-problem expansion kernels agree with the exact ones
        from sonomaly.detectors.patchcore import _greedy_direct, _greedy_expansion

        rng = np.random.default_rng(7)
        pool = rng.standard_normal((500, 24))
        assert np.array_equal(_greedy_direct(pool, 80), _greedy_expansion(pool, 80))
        q = rng.standard_normal((2000, 40))
        b = rng.standard_normal((600, 40))
        fast = nearest_distances(q, b)  # above the direct limit
        slow = np.array([np.sqrt(((q[i] - b) ** 2).sum(axis=1).min()) for i in range(len(q))])
        assert np.allclose(fast, slow, rtol=1e-9, atol=1e-9)

    def test_coverage_radius_non_increasing(self):
        rng = np.random.default_rng(8)
        pool = rng.standard_normal((40, 3))
        order = greedy_k_center(pool, 40)
        radii = [coverage_radius(pool, pool[order[: k + 1]]) for k in range(12)]
        for a, b in zip(radii, radii[1:]):
            assert b <= a + 1e-12

    def test_training_scores_bounded_by_radius(self):
        rng = np.random.default_rng(9)
        grids = [grid_from(rng.standard_normal((3, 3, 4))) for _ in range(4)]
        bank = patchcore_fit(grids, 0.3)
        pool = np.concatenate([g.patch_vectors() for g in grids])
        radius = coverage_radius(pool, bank.coreset)
        for g in grids:
            assert patchcore_score(g, bank).max() <= radius + 1e-12

    @given(st.lists(st.lists(st.integers(-50, 50), min_size=2, max_size=2), min_size=2, max_size=30))
    @settings(max_examples=60, deadline=None)
    def test_greedy_property_integer_pools(self, rows):
        pool = np.array(rows, dtype=float)
        k = max(1, len(rows) // 2)
        assert greedy_k_center(pool, k).tolist() == brute_greedy_k_center(pool, k)


class TestPostprocess:
    def test_constant_map_preserved(self):
        coord = CoordMap(16, 12, 4, 3)
        out = postprocess(np.full((4, 3), 2.0), coord, smoothing_sigma=1.5)
        assert np.allclose(out.values, 2.0)
        assert out.values.shape == (16, 12)

    def test_sigma_zero_is_identity_resize(self):
        coord = CoordMap(4, 3, 4, 3)
        m = np.random.default_rng(10).standard_normal((4, 3))
        out = postprocess(m, coord, smoothing_sigma=0.0)
        assert np.array_equal(out.values, m)

    def test_blur_against_direct_convolution(self):
        # 9x9 single peak: blurred peak smaller, same location
        m = np.zeros((9, 9))
        m[4, 4] = 1.0
        coord = CoordMap(9, 9, 9, 9)
        sigma = 1.0
        out = postprocess(m, coord, smoothing_sigma=sigma)
        expected = direct_gaussian_blur(m, sigma)
        assert np.allclose(out.values, expected, rtol=1e-10, atol=1e-12)
        assert out.values[4, 4] < 1.0
        assert np.unravel_index(np.argmax(out.values), out.values.shape) == (4, 4)

    def test_normalization_contract(self):
        coord = CoordMap(8, 8, 4, 4)
        rng = np.random.default_rng(11)
        out = postprocess(rng.standard_normal((4, 4)), coord, 1.0, normalize=True)
        assert out.normalized
        assert out.values.min() == 0.0 and out.values.max() == 1.0
        const = postprocess(np.full((4, 4), 3.0), coord, 1.0, normalize=True)
        assert np.array_equal(const.values, np.zeros((8, 8)))

    def test_sample_score(self):
        m = AnomalyMap(np.array([[0.0, 3.7], [1.0, 2.0]]))
        assert sample_score(m) == 3.7
        assert sample_score(AnomalyMap(np.zeros((2, 2)))) == 0.0
        assert sample_score(m, reduce="mean") == pytest.approx(6.7 / 4)
        assert sample_score(m, reduce="topk_mean", top_k=2) == pytest.approx((3.7 + 2.0) / 2)
        with pytest.raises(ParameterError):
            sample_score(m, reduce="median")


class TestPersistence:
    def test_padim_round_trip(self, tmp_path):
        rng = np.random.default_rng(12)
        grids = [grid_from(rng.standard_normal((2, 3, 4)).astype(np.float32).astype(np.float64)) for _ in range(3)]
        field = padim_fit(grids, 0.01)
        spec = ExtractorSpec(seed=5)
        path = tmp_path / "padim.avdm"
        save_model(path, "padim", field, spec)
        name, loaded, spec2 = load_model(path)
        assert name == "padim" and spec2 == spec
        assert np.allclose(loaded.mean, field.mean, atol=1e-6)
        assert np.allclose(loaded.precision, field.precision, rtol=1e-5, atol=1e-5)

    def test_patchcore_round_trip(self, tmp_path):
        rng = np.random.default_rng(13)
        g = grid_from(rng.standard_normal((2, 2, 3)).astype(np.float32).astype(np.float64))
        bank = patchcore_fit([g], 0.5)
        spec = ExtractorSpec()
        path = tmp_path / "pc.avdm"
        save_model(path, "patchcore", bank, spec)
        name, loaded, _ = load_model(path)
        assert name == "patchcore"
        assert np.array_equal(loaded.coreset, bank.coreset)  # values were float32-exact
        assert np.array_equal(loaded.selected_indices, bank.selected_indices)
        assert loaded.source_count == bank.source_count

    def test_crc_guard(self, tmp_path):
        rng = np.random.default_rng(14)
        g = grid_from(rng.standard_normal((2, 2, 3)))
        bank = patchcore_fit([g], 1.0)
        path = tmp_path / "pc.avdm"
        save_model(path, "patchcore", bank, ExtractorSpec())
        data = bytearray(path.read_bytes())
        data[40] ^= 0x01
        path.write_bytes(bytes(data))
        from sonomaly.errors import FormatError

        with pytest.raises(FormatError):
            load_model(path)

    def test_save_bytes_deterministic(self, tmp_path):
        rng = np.random.default_rng(15)
        g = grid_from(rng.standard_normal((2, 2, 3)))
        bank = patchcore_fit([g], 1.0)
        p1, p2 = tmp_path / "a.avdm", tmp_path / "b.avdm"
        save_model(p1, "patchcore", bank, ExtractorSpec())
        save_model(p2, "patchcore", bank, ExtractorSpec())
        assert p1.read_bytes() == p2.read_bytes()
