import numpy as np
import pytest

from morecap.linalg import svd
from morecap.params import ParameterSet
from morecap.svd_filter import (ExpertSpec, apply_filter, diversity_factor,
                                retained_rank)


class TestDiversityFactor:
    def test_table_values(self):
        assert diversity_factor(1, 3) == pytest.approx(1.0 / 3.0)
        assert diversity_factor(3, 3) == 1.0
        assert diversity_factor(2, 2) == 1.0

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            diversity_factor(0, 3)
        with pytest.raises(ValueError):
            diversity_factor(4, 3)
        with pytest.raises(ValueError):
            diversity_factor(1, 0)


class TestRetainedRank:
    def test_full_factor_keeps_everything(self):
        assert retained_rank(1.0, np.zeros((512, 512))) == 512

    def test_round_half_up(self):
        assert retained_rank(2.0 / 3.0, np.zeros((512, 600))) == 341
        assert retained_rank(0.5, np.zeros((5, 9))) == 3  # 2.5 rounds up

    def test_floor_at_one(self):
        assert retained_rank(1.0 / 3.0, np.zeros((2, 40))) == 1

    def test_rejects_bad_factor(self):
        with pytest.raises(ValueError):
            retained_rank(0.0, np.zeros((3, 3)))
        with pytest.raises(ValueError):
            retained_rank(1.5, np.zeros((3, 3)))


class TestExpertSpec:
    def test_k_computed(self):
        spec = ExpertSpec(2, 3, ["a"])
        assert spec.k == pytest.approx(2.0 / 3.0)

    def test_last_expert_has_unit_factor(self):
        assert ExpertSpec(5, 5).k == 1.0

    def test_invalid_index(self):
        with pytest.raises(ValueError):
            ExpertSpec(0, 3)


def make_params(rng, with_extra=True):
    params = ParameterSet()
    params.add("target", rng.standard_normal((6, 6)))
    if with_extra:
        params.add("bystander", rng.standard_normal((4, 3)))
    return params


class TestApplyFilter:
    def test_unit_factor_is_identity(self):
        rng = np.random.default_rng(0)
        params = make_params(rng)
        before = params["target"].value.copy()
        apply_filter(params, ExpertSpec(3, 3, ["target"]))
        assert np.abs(params["target"].value - before).max() < 1e-8

    def test_hand_truncation(self):
        params = ParameterSet()
        params.add("w", np.diag([3.0, 2.0, 1.0]))
        apply_filter(params, ExpertSpec(2, 3, ["w"]))
        assert np.allclose(params["w"].value, np.diag([3.0, 2.0, 0.0]),
                           atol=1e-12)

    def test_untargeted_bit_identical(self):
        rng = np.random.default_rng(1)
        params = make_params(rng)
        before = params["bystander"].value.copy()
        apply_filter(params, ExpertSpec(1, 3, ["target"]))
        assert np.array_equal(params["bystander"].value, before)

    def test_missing_target_listed(self):
        params = make_params(np.random.default_rng(2), with_extra=False)
        with pytest.raises(KeyError, match="nonexistent"):
            apply_filter(params, ExpertSpec(1, 3, ["target", "nonexistent"]))

    def test_value_updated_in_place(self):
        rng = np.random.default_rng(3)
        params = make_params(rng, with_extra=False)
        buf = params["target"].value
        apply_filter(params, ExpertSpec(1, 3, ["target"]))
        assert params["target"].value is buf  # aliases stay valid

    def test_rank_bound_after_filter(self):
        rng = np.random.default_rng(4)
        w = rng.standard_normal((6, 6))
        params = ParameterSet()
        params.add("w", w)
        apply_filter(params, ExpertSpec(2, 3, ["w"]))  # l = round(4) = 4
        s = svd(params["w"].value).s
        assert (s > 1e-10 * s[0]).sum() <= 4

    def test_idempotent(self):
        rng = np.random.default_rng(5)
        params = ParameterSet()
        params.add("w", rng.standard_normal((8, 5)))
        spec = ExpertSpec(1, 3, ["w"])
        apply_filter(params, spec)
        once = params["w"].value.copy()
        apply_filter(params, spec)
        assert np.abs(params["w"].value - once).max() < 1e-8

    def test_distance_monotone_in_k(self):
        rng = np.random.default_rng(6)
        w = rng.standard_normal((12, 10))
        dists = []
        for i in range(1, 6):
            params = ParameterSet()
            params.add("w", w.copy())
            apply_filter(params, ExpertSpec(i, 5, ["w"]))
            dists.append(np.linalg.norm(w - params["w"].value))
        assert all(a >= b - 1e-12 for a, b in zip(dists, dists[1:]))
