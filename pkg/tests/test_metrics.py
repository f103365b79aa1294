import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import special_ortho_group

from oracles import loop_angular_separability, loop_dispersion, pairwise_auroc, sweep_dtacc, sweep_oscr
from vmfosr.errors import ClassWithNoSamples, EmptyInput, ZeroVector
from vmfosr.metrics import (
    EvalReport,
    accuracy,
    aggregate,
    angular_separability,
    auroc,
    dispersion,
    dtacc,
    norm_separability,
    oscr,
    oscr_curve,
    roc_curve,
)
from vmfosr.numerics import seeded_rng
from vmfosr.scoring import ScoredSample

score_lists = st.lists(st.integers(-5, 5).map(float), min_size=1, max_size=40)


def random_scores(rng, ties=False):
    nk, nu = rng.integers(1, 101, size=2)
    if ties:
        return rng.integers(0, 6, nk).astype(float), rng.integers(0, 6, nu).astype(float)
    return rng.normal(0.5, 1, nk), rng.normal(0, 1, nu)


class TestAccuracy:
    def test_all_correct(self):
        assert accuracy([1, 2, 3], [1, 2, 3]) == 1.0

    def test_single_wrong(self):
        assert accuracy([0], [1]) == 0.0

    def test_random_guessing(self):
        rng = seeded_rng(0)
        acc = accuracy(rng.integers(0, 5, 100_000), rng.integers(0, 5, 100_000))
        assert acc == pytest.approx(0.2, abs=0.01)

    def test_empty(self):
        with pytest.raises(EmptyInput):
            accuracy([], [])


class TestAuroc:
    def test_perfect(self):
        assert auroc([3, 4, 5], [0, 1, 2.9]) == 1.0

    def test_identical(self):
        assert auroc([1, 2, 2, 3], [3, 2, 1, 2]) == 0.5

    @pytest.mark.parametrize("ties", [False, True])
    def test_matches_pairwise_count(self, ties):
        rng = seeded_rng(1 + ties)
        for _ in range(50):
            k, u = random_scores(rng, ties)
            assert abs(auroc(k, u) - pairwise_auroc(k, u)) <= 1e-12

    @settings(max_examples=200)
    @given(score_lists, score_lists)
    def test_symmetry_exact(self, a, b):
        assert auroc(a, b) + auroc(b, a) == 1.0

    def test_empty(self):
        with pytest.raises(EmptyInput):
            auroc([], [1.0])

    def test_roc_curve_endpoints(self):
        fpr, tpr = roc_curve([1, 2], [0, 3])
        assert (fpr[0], tpr[0]) == (0, 0) and (fpr[-1], tpr[-1]) == (1, 1)
        assert np.trapezoid(tpr, fpr) == pytest.approx(auroc([1, 2], [0, 3]), abs=1e-15)


class TestOscr:
    def test_perfect(self):
        assert oscr((np.array([5.0, 6.0]), np.array([True, True])), [1.0, 2.0]) == 1.0

    @pytest.mark.parametrize("n_wrong", [0, 1, 3, 7])
    def test_separated_equals_accuracy(self, n_wrong):
        rng = seeded_rng(n_wrong)
        correct = np.ones(10, dtype=bool)
        correct[:n_wrong] = False
        value = oscr((rng.uniform(1, 2, 10), correct), rng.uniform(-1, 0.5, 13))
        assert value == (10 - n_wrong) / 10

    def test_scored_sample_input(self):
        samples = [ScoredSample(0.9, 1, True, 1), ScoredSample(0.8, 0, True, 2),
                   ScoredSample(0.3, 2, True, 2)]
        expected = sweep_oscr([0.9, 0.8, 0.3], [True, False, True], [0.5, 0.1])
        assert oscr(samples, [0.5, 0.1]) == pytest.approx(expected, abs=1e-15)

    @pytest.mark.parametrize("ties", [False, True])
    def test_matches_threshold_sweep(self, ties):
        rng = seeded_rng(10 + ties)
        for _ in range(50):
            k, u = random_scores(rng, ties)
            c = rng.uniform(size=k.size) < 0.7
            assert abs(oscr((k, c), u) - sweep_oscr(list(k), list(c), list(u))) <= 1e-10

    def test_never_exceeds_accuracy(self):
        rng = seeded_rng(12)
        for _ in range(100):
            k, u = random_scores(rng)
            c = rng.uniform(size=k.size) < rng.uniform()
            assert oscr((k, c), u) <= c.mean() + 1e-15

    def test_curve_monotone(self):
        rng = seeded_rng(13)
        k, u = random_scores(rng, ties=True)
        fpr, ccr = oscr_curve(k, rng.uniform(size=k.size) < 0.5, u)
        assert np.all(np.diff(fpr) >= 0) and np.all(np.diff(ccr) >= 0)

    def test_empty(self):
        with pytest.raises(EmptyInput):
            oscr([], [1.0])


class TestDtacc:
    def test_perfect(self):
        assert dtacc([2, 3], [0, 1]) == 1.0

    def test_identical(self):
        assert dtacc([1.0, 2.0], [1.0, 2.0]) == 0.5

    @pytest.mark.parametrize("ties", [False, True])
    def test_matches_exhaustive_sweep(self, ties):
        rng = seeded_rng(20 + ties)
        for _ in range(50):
            k, u = random_scores(rng, ties)
            assert abs(dtacc(k, u) - sweep_dtacc(list(k), list(u))) <= 1e-10

    @settings(max_examples=100)
    @given(score_lists, score_lists)
    def test_at_least_half(self, a, b):
        assert 0.5 <= dtacc(a, b) <= 1.0


class TestAngularSeparability:
    def test_self(self):
        X = seeded_rng(0).standard_normal((20, 5))
        assert angular_separability(X, X) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self):
        assert angular_separability(np.eye(4)[:2], np.eye(4)[2:]) == 0.0

    def test_matches_double_loop(self):
        rng = seeded_rng(1)
        for _ in range(50):
            K = rng.standard_normal((rng.integers(1, 60), 6))
            U = rng.standard_normal((rng.integers(1, 60), 6))
            assert abs(angular_separability(K, U) - loop_angular_separability(K.tolist(), U.tolist())) <= 1e-12

    def test_rescaling_invariance(self):
        rng = seeded_rng(2)
        K, U = rng.standard_normal((30, 4)), rng.standard_normal((20, 4))
        scaled = angular_separability(K * rng.uniform(0.1, 10, (30, 1)), U * rng.uniform(0.1, 10, (20, 1)))
        assert scaled == pytest.approx(angular_separability(K, U), abs=1e-12)

    def test_zero_vector(self):
        with pytest.raises(ZeroVector):
            angular_separability(np.zeros((1, 3)), np.ones((1, 3)))

    def test_empty(self):
        with pytest.raises(EmptyInput):
            angular_separability(np.empty((0, 3)), np.ones((1, 3)))


class TestNormSeparability:
    def test_equal_norms(self):
        assert norm_separability(np.eye(3), -np.eye(3)) == 0.5

    def test_known_larger(self):
        assert norm_separability(2 * np.eye(3), np.eye(3)) == 1.0

    def test_delegates_to_auroc(self):
        rng = seeded_rng(3)
        K, U = rng.standard_normal((40, 5)), rng.standard_normal((30, 5))
        assert norm_separability(K, U) == auroc(np.linalg.norm(K, axis=1), np.linalg.norm(U, axis=1))

    def test_rotation_invariance(self):
        rng = seeded_rng(4)
        K, U = rng.standard_normal((40, 5)), rng.standard_normal((30, 5))
        R = special_ortho_group.rvs(5, random_state=4)
        assert norm_separability(K @ R, U @ R) == norm_separability(K, U)


class TestDispersion:
    def test_orthogonal(self):
        assert dispersion(np.eye(2), [0, 1]) == 90.0

    def test_antipodal(self):
        assert dispersion(np.array([[1.0, 0.0], [-1.0, 0.0]]), [0, 1]) == 180.0

    def test_matches_pair_loop(self):
        rng = seeded_rng(5)
        for _ in range(50):
            C = int(rng.integers(2, 8))
            labels = np.r_[np.arange(C), rng.integers(0, C, 100)]
            X = rng.standard_normal((labels.size, 4)) + 0.5
            assert abs(dispersion(X, labels) - loop_dispersion(X.tolist(), labels.tolist())) <= 1e-9

    def test_orthogonal_transform_invariance(self):
        rng = seeded_rng(6)
        labels = rng.integers(0, 4, 80)
        X = rng.standard_normal((80, 6))
        R = special_ortho_group.rvs(6, random_state=6)
        assert dispersion(X @ R, labels) == pytest.approx(dispersion(X, labels), abs=1e-9)

    def test_identical_means_clamped(self):
        # cosines just above 1 must not produce NaN
        X = np.tile([[0.1, 0.2, 0.3]], (4, 1))
        assert dispersion(X, [0, 0, 1, 1]) == pytest.approx(0.0, abs=1e-6)

    def test_missing_class(self):
        with pytest.raises(ClassWithNoSamples):
            dispersion(np.eye(3), [0, 1, 1], n_classes=3)


class TestReport:
    def make(self, seed, rule, value):
        return EvalReport(seed, rule, value, value, value, value, 0.5, value, 80.0, 0.2)

    def test_aggregate_mean_std(self):
        agg = aggregate([self.make(0, "msp", 0.8), self.make(1, "msp", 0.6), self.make(0, "knn", 0.5)])
        assert agg["msp"]["auroc"]["mean"] == pytest.approx(0.7)
        assert agg["msp"]["auroc"]["std"] == pytest.approx(0.1)
        assert agg["knn"]["n_seeds"] == 1

    def test_csv_row_is_flat(self):
        row = self.make(0, "msp", 0.8).csv_row()
        assert "metadata" not in row and row["rule"] == "msp"
