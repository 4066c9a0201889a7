import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvtrace import evaluation as ev
from mvtrace import synth
from mvtrace.autoencoders import (
    ArchitectureConfig,
    AutoencoderSpec,
    OracleSpec,
    PcaSpec,
)
from mvtrace.data import SubjectRecord
from mvtrace.mesh import build_laplacian
from mvtrace.trace_regression import FistaConfig, RegressionDataset, RegularizationConfig

FISTA = FistaConfig(max_iters=2000, rel_tolerance=1e-8)


class TestFolds:
    def test_forty_subjects_ten_folds(self):
        plan = ev.make_folds(40, 10, seed=0)
        assert [len(f) for f in plan.folds] == [4] * 10
        assert len(plan.train_indices(0)) == 36

    def test_leave_one_out(self):
        plan = ev.make_folds(5, 5, seed=1)
        assert sorted(int(f[0]) for f in plan.folds) == [0, 1, 2, 3, 4]

    def test_deterministic(self):
        a = ev.make_folds(23, 7, seed=9)
        b = ev.make_folds(23, 7, seed=9)
        assert all(np.array_equal(x, y) for x, y in zip(a.folds, b.folds))

    def test_k_greater_than_n_rejected(self):
        with pytest.raises(ValueError):
            ev.make_folds(3, 5, seed=0)

    @pytest.mark.parametrize("n,k", [(11, 3), (40, 10), (7, 7), (25, 4)])
    def test_partition_properties(self, n, k):
        plan = ev.make_folds(n, k, seed=2)
        sizes = [len(f) for f in plan.folds]
        assert max(sizes) - min(sizes) <= 1
        combined = np.sort(np.concatenate(plan.folds))
        assert np.array_equal(combined, np.arange(n))


class TestMetrics:
    def test_perfect_prediction(self):
        y = np.array([1.0, 2.0, 5.0])
        assert ev.r_squared(y, y.copy()) == 1.0

    def test_mean_predictor_is_zero(self):
        y = np.array([1.0, 2.0, 3.0])
        assert ev.r_squared(y, np.full(3, 2.0)) == 0.0

    def test_hand_case(self):
        # 1 - 1/2
        assert ev.r_squared(np.array([1.0, 2.0, 3.0]), np.array([1.0, 2.0, 4.0])) == 0.5

    def test_constant_targets_rejected(self):
        with pytest.raises(ValueError, match="constant"):
            ev.r_squared(np.array([2.0, 2.0]), np.array([1.0, 3.0]))

    def test_mse(self):
        assert ev.mean_squared_error([1.0, 2.0], [0.0, 4.0]) == 2.5
        with pytest.raises(ValueError):
            ev.mean_squared_error([1.0], [1.0, 2.0])

    @settings(max_examples=40, deadline=None)
    @given(
        st.floats(min_value=-5, max_value=5, allow_nan=False).filter(lambda a: abs(a) > 1e-3),
        st.floats(min_value=-10, max_value=10, allow_nan=False),
    )
    def test_affine_invariance(self, a, b):
        rng = np.random.default_rng(0)
        y = rng.standard_normal(12)
        pred = y + 0.3 * rng.standard_normal(12)
        lhs = ev.r_squared(a * y + b, a * pred + b)
        rhs = ev.r_squared(y, pred)
        assert abs(lhs - rhs) < 1e-9


@pytest.fixture(scope="module")
def planted():
    subjects, mesh, gt = synth.generate(synth.GeneratorConfig(seed=0))
    return subjects, build_laplacian(mesh), gt


class TestRunCv:
    def test_oracle_passthrough_noiseless_r2(self):
        # known latents, noiseless planted score: near-perfect prediction
        subjects, mesh, gt = synth.generate(synth.GeneratorConfig(
            seed=1, noise_sigma=0.0, cluster_coherence=0.995,
            n_clusters=3, cluster_size=12,
        ))
        lap = build_laplacian(mesh)
        plan = ev.make_folds(40, 10, seed=1)
        res = ev.run_cv(
            subjects, lap, OracleSpec(latents=gt.latents),
            RegularizationConfig(alpha=1.0, eta=5.0),
            FistaConfig(max_iters=3000, rel_tolerance=1e-9), plan, seed=1,
        )
        assert res.mean_r2 > 0.95

    def test_permuted_scores_have_no_signal(self, planted):
        subjects, lap, _ = planted
        reg = RegularizationConfig(alpha=12, eta=20)
        for seed in range(5):
            y = np.array([s.score for s in subjects])
            perm = np.random.default_rng(200 + seed).permutation(len(y))
            shuffled = [
                SubjectRecord(s.subject_id, s.x_task, s.x_rest, y[perm[i]])
                for i, s in enumerate(subjects)
            ]
            res = ev.run_cv(shuffled, lap, PcaSpec(enc=4), reg, FISTA,
                            ev.make_folds(40, 10, seed), seed=seed)
            assert res.mean_r2 <= 0.1

    def test_averages_are_fold_means(self, planted):
        subjects, lap, _ = planted
        plan = ev.make_folds(40, 10, seed=3)
        res = ev.run_cv(subjects, lap, PcaSpec(enc=4),
                        RegularizationConfig(alpha=12, eta=20), FISTA, plan, seed=3)
        assert res.mean_mse == pytest.approx(np.mean([f.mse for f in res.folds]), abs=0)
        assert res.mean_r2 == pytest.approx(np.mean([f.r2 for f in res.folds]), abs=0)
        k = len(res.folds)
        assert res.stderr_mse == pytest.approx(
            np.std([f.mse for f in res.folds], ddof=1) / np.sqrt(k)
        )
        assert all(len(f.predictions) == len(plan.test_indices(f.fold_id)) for f in res.folds)

    def test_parallel_folds_match_sequential(self, planted):
        subjects, lap, _ = planted
        plan = ev.make_folds(40, 5, seed=4)
        reg = RegularizationConfig(alpha=12, eta=20)
        seq = ev.run_cv(subjects, lap, PcaSpec(enc=4), reg, FISTA, plan, seed=4, jobs=1)
        par = ev.run_cv(subjects, lap, PcaSpec(enc=4), reg, FISTA, plan, seed=4, jobs=2)
        assert all(
            np.array_equal(a.beta, b.beta) and a.mse == b.mse
            for a, b in zip(seq.folds, par.folds)
        )

    def test_fold_hygiene_bit_for_bit(self, planted):
        import io as std_io

        subjects, lap, _ = planted
        plan = ev.make_folds(40, 10, seed=5)
        spec = AutoencoderSpec(
            config=ArchitectureConfig(kind="mdae", enc=4, hidden_dims=()),
            epochs=3, batch_size=500, learning_rate=1e-3,
        )
        reg = RegularizationConfig(alpha=12, eta=20)
        train_idx, test_idx = plan.train_indices(0), plan.test_indices(0)

        def fold_artifacts(subject_list):
            result = ev.run_fold(
                subject_list, lap, spec, reg, FISTA, train_idx, test_idx,
                fold_id=0, fit_seed=123, keep_model=True,
            )
            buf_path = std_io.BytesIO()
            # serialize through the container writer for byte-level comparison
            import tempfile, os
            with tempfile.TemporaryDirectory() as d:
                p = os.path.join(d, "m.mvnn")
                result.model.save(p)
                model_bytes = open(p, "rb").read()
            return model_bytes, result.beta

        rng = np.random.default_rng(999)
        corrupted = list(subjects)
        for i in test_idx:
            s = subjects[i]
            corrupted[i] = SubjectRecord(
                s.subject_id,
                rng.standard_normal(s.x_task.shape),
                rng.standard_normal(s.x_rest.shape),
                rng.standard_normal(),
            )
        model_a, beta_a = fold_artifacts(subjects)
        model_b, beta_b = fold_artifacts(corrupted)
        assert model_a == model_b
        assert np.array_equal(beta_a, beta_b)


class TestSignificance:
    def test_identical_nonzero_rows_are_infinitely_significant(self):
        beta = np.zeros((6, 2))
        beta[2] = [1.0, -0.2]
        maps = [beta.copy() for _ in range(5)]
        sig = ev.significance_map(maps)
        assert np.isinf(sig.t[2]) and sig.mask[2]

    def test_all_zero_rows_not_significant(self):
        maps = [np.zeros((4, 2)) for _ in range(5)]
        sig = ev.significance_map(maps)
        assert np.all(sig.t == 0.0)
        assert not sig.mask.any()

    def test_fold_order_invariance(self):
        rng = np.random.default_rng(0)
        maps = [rng.standard_normal((8, 3)) for _ in range(6)]
        a = ev.significance_map(maps)
        b = ev.significance_map(maps[::-1])
        assert np.array_equal(a.mask, b.mask)
        assert np.allclose(a.t, b.t, equal_nan=True)

    def test_reductions(self):
        # identical fold maps have zero cross-fold variance; the documented
        # convention maps any nonzero mean to t = +inf
        maps = [np.array([[1.0, -3.0]]) for _ in range(4)]
        for reduction in ("signed-norm", "mean", "max-abs"):
            sig = ev.significance_map(maps, reduction=reduction)
            assert sig.t[0] == np.inf and sig.mask[0]
        # with cross-fold variance the reductions genuinely differ
        noisy = [np.array([[1.0 + 0.1 * k, -3.0 - 0.1 * k]]) for k in range(4)]
        signed = ev.significance_map(noisy, reduction="signed-norm").t[0]
        mean = ev.significance_map(noisy, reduction="mean").t[0]
        maxabs = ev.significance_map(noisy, reduction="max-abs").t[0]
        assert signed < 0 and mean < 0 and maxabs < 0  # negative-mean vertex
        assert len({round(float(v), 6) for v in (signed, mean, maxabs)}) == 3
        with pytest.raises(ValueError):
            ev.significance_map(maps, reduction="median")

    def test_finite_t_where_variance_positive(self):
        rng = np.random.default_rng(1)
        maps = [rng.standard_normal((5, 2)) for _ in range(8)]
        sig = ev.significance_map(maps)
        assert np.all(np.isfinite(sig.t))

    def test_needs_two_maps_and_equal_shapes(self):
        with pytest.raises(ValueError):
            ev.significance_map([np.zeros((3, 2))])
        with pytest.raises(ValueError):
            ev.significance_map([np.zeros((3, 2)), np.zeros((4, 2))])


class TestSweepAndCsv:
    def test_single_point_reduces_to_run_cv(self, planted):
        subjects, lap, _ = planted
        plan = ev.make_folds(40, 5, seed=6)
        reg = RegularizationConfig(alpha=12, eta=20)
        point = ev.SweepPoint(label="pca-4", spec=PcaSpec(enc=4))
        swept = ev.sweep([point], subjects, lap, plan, reg, FISTA, seed=6)
        direct = ev.run_cv(subjects, lap, PcaSpec(enc=4), reg, FISTA, plan, seed=6)
        assert swept.results[0].mean_mse == direct.mean_mse

    def test_enc_grid_rows(self, planted, tmp_path):
        subjects, lap, _ = planted
        plan = ev.make_folds(40, 5, seed=7)
        reg = RegularizationConfig(alpha=12, eta=20)
        points = [ev.SweepPoint(label=f"pca-{e}", spec=PcaSpec(enc=e)) for e in (2, 5, 10)]
        result = ev.sweep(points, subjects, lap, plan, reg, FISTA, seed=7)
        entries = list(zip(result.points, result.results))
        folds_csv = tmp_path / "folds.csv"
        summary_csv = tmp_path / "summary.csv"
        ev.write_fold_csv(folds_csv, entries)
        ev.write_summary_csv(summary_csv, entries)
        with open(folds_csv) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["config", "enc", "enc_t", "enc_r", "fold", "mse", "r2"]
        assert len(rows) == 1 + 3 * 5
        assert {r[0] for r in rows[1:]} == {"pca-2", "pca-5", "pca-10"}
        with open(summary_csv) as fh:
            srows = list(csv.reader(fh))
        assert len(srows) == 4
        for row in srows[1:]:
            float(row[4]), float(row[6])  # parse back

    def test_split_grid_rows(self, planted):
        subjects, lap, _ = planted
        plan = ev.make_folds(40, 4, seed=8)
        reg = RegularizationConfig(alpha=12, eta=20)
        points = []
        for split in [(8, 2), (5, 5), (2, 8)]:
            cfg = ArchitectureConfig(kind="mdae", enc=10, enc_split=split, hidden_dims=())
            points.append(ev.SweepPoint(
                label=f"mdae-{split[0]}-{split[1]}",
                spec=AutoencoderSpec(config=cfg, epochs=2, batch_size=500, learning_rate=1e-3),
            ))
        result = ev.sweep(points, subjects, lap, plan, reg, FISTA, seed=8)
        assert len(result.results) == 3
        assert ev.point_dims(points[0]) == (10, 8, 2)

    def test_empty_grid_rejected(self, planted):
        subjects, lap, _ = planted
        with pytest.raises(ValueError):
            ev.sweep([], subjects, lap, ev.make_folds(40, 5, 0), None, None)

    def test_significance_csv(self, tmp_path):
        maps = [np.zeros((3, 2)) for _ in range(4)]
        maps[0][1] = [1.0, 1.0]
        sig = ev.significance_map(maps)
        path = tmp_path / "sig.csv"
        ev.write_significance_csv(path, sig)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["vertex", "t", "significant"]
        assert len(rows) == 4


def test_tune_alpha_returns_grid_member(planted):
    subjects, lap, _ = planted
    model = PcaSpec(enc=4).fit(subjects[:20], seed=0)
    latents = np.stack([model.encode_subject(s).z for s in subjects[:20]])
    latents = (latents - latents.mean((0, 1))) / latents.std((0, 1))
    ds = RegressionDataset(latents, np.array([s.score for s in subjects[:20]]), lap)
    alphas = [1.0, 10.0, 100.0]
    best, table = ev.tune_alpha(ds, alphas, RegularizationConfig(alpha=1, eta=20),
                                FISTA, inner_folds=4, seed=0)
    assert best in alphas
    assert set(table) == set(alphas)
    assert all(np.isfinite(v) for v in table.values())
