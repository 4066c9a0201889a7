import numpy as np
import pytest

from conftest import random_views
from mvtrace.autoencoders import (
    ArchitectureConfig,
    AutoencoderSpec,
    FeatureScaler,
    OracleSpec,
    PcaSpec,
    RawSpec,
    ViewSpec,
    encode,
    encode_subject,
    load_representation,
    mdae_dims,
    stack_dims,
    table_architectures,
    train_concat_ae,
    train_mdae,
)
from mvtrace.data import SubjectRecord
from mvtrace.pca import fit_pca, reconstruction_mse

VIEW = ViewSpec(d_task=24, d_rest=30)


class TestConfigs:
    def test_view_spec(self):
        assert VIEW.d_concat == 54
        with pytest.raises(ValueError):
            ViewSpec(0, 3)

    @pytest.mark.parametrize("enc", [1, 0, 101, 150])
    def test_enc_range_enforced(self, enc):
        with pytest.raises(ValueError, match="enc"):
            ArchitectureConfig(kind="concat-ae", enc=enc)

    def test_mdae_split_must_sum(self):
        with pytest.raises(ValueError, match="enc_split"):
            ArchitectureConfig(kind="mdae", enc=10, enc_split=(8, 3))
        with pytest.raises(ValueError, match="enc_split"):
            ArchitectureConfig(kind="mdae", enc=10, enc_split=(10, 0))

    def test_mdae_default_split_balanced(self):
        cfg = ArchitectureConfig(kind="mdae", enc=9)
        assert cfg.enc_split == (5, 4)

    def test_split_rejected_for_single_stack(self):
        with pytest.raises(ValueError, match="enc_split"):
            ArchitectureConfig(kind="concat-ae", enc=10, enc_split=(5, 5))

    def test_bad_kind_and_activations(self):
        with pytest.raises(ValueError, match="kind"):
            ArchitectureConfig(kind="vae", enc=10)
        with pytest.raises(ValueError):
            ArchitectureConfig(kind="concat-ae", enc=10, hidden_activation="tanh")
        with pytest.raises(ValueError):
            ArchitectureConfig(kind="concat-ae", enc=10, output_activation="relu")

    def test_three_layer_concat_row(self):
        # the showcased stacking: [D_concat, 200, 130, enc, 130, 200, D_concat]
        cfg = ArchitectureConfig(kind="concat-ae", enc=10, hidden_dims=(200, 130))
        assert stack_dims(cfg, VIEW) == [54, 200, 130, 10, 130, 200, 54]

    def test_mdae_dims_per_view(self):
        cfg = ArchitectureConfig(kind="mdae", enc=10, enc_split=(8, 2), hidden_dims=(140, 120))
        dims = mdae_dims(cfg, VIEW)
        assert dims["encoder_task"] == [24, 140, 120, 8]
        assert dims["encoder_rest"] == [30, 140, 120, 2]
        assert dims["decoder_task"] == [10, 120, 140, 24]
        assert dims["decoder_rest"] == [10, 120, 140, 30]

    def test_catalog_constructible_and_complete(self):
        # 15 single-stack rows plus the 4 per-view mdae realizations
        cat = table_architectures(VIEW, enc=10)
        assert len(cat) == 19
        assert "ae-concat-3-200-130" in cat
        assert stack_dims(cat["ae-concat-3-200-130"], VIEW) == [54, 200, 130, 10, 130, 200, 54]
        kinds = {c.kind for c in cat.values()}
        assert kinds == {"monomodal-task", "monomodal-rest", "concat-ae", "mdae"}
        assert sum(1 for c in cat.values() if c.kind == "mdae") == 4


class TestScaler:
    def test_standardization(self):
        data = np.random.default_rng(0).standard_normal((100, 4)) * 3.0 + 5.0
        scaler = FeatureScaler.fit(data)
        out = scaler.transform(data)
        assert np.abs(out.mean(axis=0)).max() < 1e-12
        assert np.abs(out.std(axis=0) - 1.0).max() < 1e-12

    def test_minmax_targets_in_unit_interval(self):
        data = np.random.default_rng(1).standard_normal((50, 3))
        scaler = FeatureScaler.fit(data, minmax=True)
        targets = scaler.target(data)
        assert targets.min() >= 0.0 and targets.max() <= 1.0

    def test_constant_feature_passthrough(self):
        data = np.column_stack([np.ones(30), np.arange(30.0)])
        scaler = FeatureScaler.fit(data)
        assert np.all(scaler.transform(data)[:, 0] == 0.0)

    def test_dict_roundtrip(self):
        data = np.random.default_rng(2).standard_normal((40, 3))
        scaler = FeatureScaler.fit(data, minmax=True)
        clone = FeatureScaler.from_dict(scaler.to_dict())
        assert np.array_equal(scaler.target(data), clone.target(data))


def make_subject(sid, m, seed, d_task=6, d_rest=4):
    rng = np.random.default_rng(seed)
    return SubjectRecord(
        sid, rng.standard_normal((m, d_task)), rng.standard_normal((m, d_rest)), 0.0
    )


class TestConcatTraining:
    def test_lossless_bottleneck(self):
        # enc = D_concat with linear maps can represent the identity
        x_t, x_r = random_views(400, 3, 3, seed=0)
        cfg = ArchitectureConfig(kind="concat-ae", enc=6, hidden_dims=())
        model = train_concat_ae((x_t, x_r), cfg, seed=1, epochs=800,
                                batch_size=500, learning_rate=3e-3)
        # target space is standardized, so unit variance per feature
        assert model.reconstruction_mse(x_t, x_r) < 1e-4

    def test_subspace_data_matches_pca(self):
        rng = np.random.default_rng(3)
        basis = np.linalg.qr(rng.standard_normal((12, 5)))[0]
        data = rng.standard_normal((1200, 5)) @ basis.T * 2.0
        data += 0.1 * rng.standard_normal(data.shape)
        x_t, x_r = data[:, :7], data[:, 7:]
        cfg = ArchitectureConfig(kind="concat-ae", enc=5, hidden_dims=())
        model = train_concat_ae((x_t, x_r), cfg, seed=2, epochs=1500,
                                batch_size=500, learning_rate=3e-3)
        standardized = model.scaler.transform(data)
        pca_mse = reconstruction_mse(fit_pca(standardized, 5), standardized)
        assert model.reconstruction_mse(x_t, x_r) <= 1.05 * pca_mse

    def test_pair_list_input_accepted(self):
        pairs = [(np.ones(3) * i, np.zeros(2)) for i in range(20)]
        cfg = ArchitectureConfig(kind="concat-ae", enc=2, hidden_dims=())
        model = train_concat_ae(pairs, cfg, seed=0, epochs=3, batch_size=8,
                                learning_rate=1e-3)
        assert model.encode_pair(np.ones(3), np.zeros(2)).shape == (2,)

    def test_empty_data_rejected(self):
        cfg = ArchitectureConfig(kind="concat-ae", enc=2)
        with pytest.raises(ValueError, match="empty"):
            train_concat_ae([], cfg, seed=0)

    def test_monomodal_never_reads_other_view(self):
        x_t, x_r = random_views(300, 5, 4, seed=4)
        cfg = ArchitectureConfig(kind="monomodal-task", enc=3, hidden_dims=())
        model = train_concat_ae((x_t, x_r), cfg, seed=5, epochs=10,
                                batch_size=100, learning_rate=1e-3)
        shuffled_rest = x_r[np.random.default_rng(0).permutation(len(x_r))]
        assert np.array_equal(
            model.encode_pair(x_t, x_r), model.encode_pair(x_t, shuffled_rest)
        )

    def test_epoch_losses_logged(self):
        x_t, x_r = random_views(100, 4, 3, seed=6)
        cfg = ArchitectureConfig(kind="concat-ae", enc=3, hidden_dims=(8,))
        model = train_concat_ae((x_t, x_r), cfg, seed=0, epochs=12,
                                batch_size=50, learning_rate=1e-3)
        assert len(model.epoch_losses) == 12
        assert model.epoch_losses[-1] < model.epoch_losses[0]


class TestMdaeTraining:
    def test_split_layout_task_first(self):
        x_t, x_r = random_views(200, 12, 5, seed=7)
        cfg = ArchitectureConfig(kind="mdae", enc=10, enc_split=(8, 2), hidden_dims=())
        model = train_mdae((x_t, x_r), cfg, seed=1, epochs=5, batch_size=100,
                           learning_rate=1e-3)
        z = encode(model, x_t[0], x_r[0])
        assert z.shape == (10,)
        z_task = model.encoder_task.forward(model.scaler_task.transform(x_t[:1]))[0]
        assert np.array_equal(z[:8], z_task)

    def test_equal_views_converge_to_equal_losses(self):
        rng = np.random.default_rng(0)
        base = rng.standard_normal((1500, 12))
        cfg = ArchitectureConfig(kind="mdae", enc=6, enc_split=(3, 3), hidden_dims=())
        model = train_mdae((base, base.copy()), cfg, seed=1, epochs=300,
                           batch_size=500, learning_rate=3e-3)
        _, loss_t, loss_r = model.epoch_losses[-1]
        assert abs(loss_t - loss_r) / max(loss_t, loss_r) < 0.10

    def test_zero_variance_data_reaches_zero_loss(self):
        x_t = np.ones((200, 6))
        x_r = np.full((200, 4), 3.0)
        cfg = ArchitectureConfig(kind="mdae", enc=4, enc_split=(2, 2), hidden_dims=())
        model = train_mdae((x_t, x_r), cfg, seed=0, epochs=300, batch_size=500,
                           learning_rate=1e-2)
        assert model.epoch_losses[-1][0] < 1e-6

    def test_kind_mismatch_rejected(self):
        cfg = ArchitectureConfig(kind="concat-ae", enc=4)
        with pytest.raises(ValueError):
            train_mdae((np.zeros((10, 3)), np.zeros((10, 3))), cfg, seed=0)
        cfg = ArchitectureConfig(kind="mdae", enc=4)
        with pytest.raises(ValueError):
            train_concat_ae((np.zeros((10, 3)), np.zeros((10, 3))), cfg, seed=0)

    def test_catalog_mdae_losses_decrease(self):
        # epoch-mean loss after training < first epoch, all catalog mdae rows
        x_t, x_r = random_views(48, 24, 30, seed=8, latent_dim=4)
        cat = table_architectures(VIEW, enc=5, hidden_activation="relu")
        mdae_rows = {k: v for k, v in cat.items() if v.kind == "mdae"}
        assert len(mdae_rows) == 4
        for config in mdae_rows.values():
            for seed in (0, 1, 2):
                model = train_mdae((x_t, x_r), config, seed=seed, epochs=300,
                                   batch_size=500, learning_rate=1e-3)
                assert model.epoch_losses[-1][0] < model.epoch_losses[0][0]

    def test_catalog_single_stack_losses_decrease(self):
        x_t, x_r = random_views(48, 24, 30, seed=9, latent_dim=4)
        cat = table_architectures(VIEW, enc=5, hidden_activation="relu")
        for config in (v for v in cat.values() if v.kind != "mdae"):
            model = train_concat_ae((x_t, x_r), config, seed=0, epochs=300,
                                    batch_size=500, learning_rate=1e-3)
            assert model.epoch_losses[-1] < model.epoch_losses[0]


@pytest.fixture(scope="module")
def models():
    x_t, x_r = random_views(300, 6, 4, seed=10, latent_dim=3)
    out = {}
    for kind in ("monomodal-task", "monomodal-rest", "concat-ae"):
        cfg = ArchitectureConfig(kind=kind, enc=4, hidden_dims=())
        out[kind] = train_concat_ae((x_t, x_r), cfg, seed=0, epochs=5,
                                    batch_size=100, learning_rate=1e-3)
    cfg = ArchitectureConfig(kind="mdae", enc=4, enc_split=(2, 2), hidden_dims=())
    out["mdae"] = train_mdae((x_t, x_r), cfg, seed=0, epochs=5,
                             batch_size=100, learning_rate=1e-3)
    return out


class TestEncoding:
    @pytest.mark.parametrize("kind", ["monomodal-task", "monomodal-rest", "concat-ae", "mdae"])
    def test_latent_dimension_contract(self, models, kind):
        z = encode(models[kind], np.zeros(6), np.zeros(4))
        assert z.shape == (4,)

    def test_encode_deterministic(self, models):
        x_t, x_r = np.ones(6), np.ones(4)
        a = encode(models["mdae"], x_t, x_r)
        b = encode(models["mdae"], x_t, x_r)
        assert np.array_equal(a, b)

    def test_encode_subject_rows_match_pointwise(self, models):
        subject = make_subject("s1", 20, seed=11)
        latent = encode_subject(models["concat-ae"], subject)
        assert latent.z.shape == (20, 4)
        for j in (0, 5, 9, 13, 19):
            row = encode(models["concat-ae"], subject.x_task[j], subject.x_rest[j])
            assert np.allclose(latent.z[j], row, atol=1e-12)

    def test_vertex_permutation_equivariance(self, models):
        subject = make_subject("s2", 15, seed=12)
        perm = np.random.default_rng(1).permutation(15)
        permuted = SubjectRecord(
            "s2", subject.x_task[perm], subject.x_rest[perm], subject.score
        )
        a = encode_subject(models["mdae"], subject).z
        b = encode_subject(models["mdae"], permuted).z
        assert np.array_equal(a[perm], b)

    def test_tiny_mesh_shape(self, models):
        subject = make_subject("s3", 3, seed=13)
        assert encode_subject(models["mdae"], subject).z.shape == (3, 4)


class TestPersistence:
    def test_concat_roundtrip(self, tmp_path):
        x_t, x_r = random_views(200, 5, 4, seed=14)
        cfg = ArchitectureConfig(kind="concat-ae", enc=3, hidden_dims=(6,),
                                 hidden_activation="relu", output_activation="sigmoid")
        model = train_concat_ae((x_t, x_r), cfg, seed=0, epochs=4,
                                batch_size=64, learning_rate=1e-3)
        path = tmp_path / "concat.mvnn"
        model.save(path)
        loaded = load_representation(path)
        assert loaded.config.kind == "concat-ae"
        assert np.array_equal(model.encode_pair(x_t, x_r), loaded.encode_pair(x_t, x_r))

    def test_mdae_roundtrip(self, tmp_path):
        x_t, x_r = random_views(200, 5, 4, seed=15)
        cfg = ArchitectureConfig(kind="mdae", enc=4, enc_split=(3, 1), hidden_dims=())
        model = train_mdae((x_t, x_r), cfg, seed=0, epochs=4, batch_size=64,
                           learning_rate=1e-3)
        path = tmp_path / "mdae.mvnn"
        model.save(path)
        loaded = load_representation(path)
        assert loaded.config.enc_split == (3, 1)
        assert np.array_equal(model.encode_pair(x_t, x_r), loaded.encode_pair(x_t, x_r))

    def test_pca_and_raw_roundtrip(self, tmp_path):
        subjects = [make_subject(f"s{i}", 10, seed=i) for i in range(4)]
        pca_model = PcaSpec(enc=3).fit(subjects, seed=0)
        path = tmp_path / "pca.mvnn"
        pca_model.save(path)
        loaded = load_representation(path)
        z_a = encode_subject(pca_model, subjects[0]).z
        z_b = encode_subject(loaded, subjects[0]).z
        assert np.allclose(z_a, z_b, atol=1e-12)

        raw = RawSpec(columns=7).fit(subjects, seed=0)
        raw_path = tmp_path / "raw.mvnn"
        raw.save(raw_path)
        assert load_representation(raw_path).columns == 7


class TestRepresentationSpecs:
    def test_autoencoder_spec_dispatch(self):
        subjects = [make_subject(f"s{i}", 8, seed=20 + i) for i in range(3)]
        spec = AutoencoderSpec(
            config=ArchitectureConfig(kind="mdae", enc=2, hidden_dims=()),
            epochs=2, batch_size=16, learning_rate=1e-3,
        )
        model = spec.fit(subjects, seed=0)
        assert model.latent_dim == 2
        assert encode_subject(model, subjects[0]).z.shape == (8, 2)

    def test_pca_spec(self):
        subjects = [make_subject(f"s{i}", 12, seed=30 + i) for i in range(3)]
        model = PcaSpec(enc=4).fit(subjects, seed=0)
        assert encode_subject(model, subjects[1]).z.shape == (12, 4)

    def test_raw_spec_truncates_and_pads(self):
        subjects = [make_subject("s0", 5, seed=40)]
        model = RawSpec(columns=4).fit(subjects, seed=0)
        assert encode_subject(model, subjects[0]).z.shape == (5, 4)
        model = RawSpec(columns=15).fit(subjects, seed=0)
        z = encode_subject(model, subjects[0]).z
        assert z.shape == (5, 15)
        assert np.all(z[:, 10:] == 0.0)
        model = RawSpec().fit(subjects, seed=0)
        assert encode_subject(model, subjects[0]).z.shape == (5, 10)

    def test_oracle_spec_lookup(self):
        subjects = [make_subject("s0", 6, seed=50)]
        latents = {"s0": np.ones((6, 2))}
        model = OracleSpec(latents=latents).fit(subjects, seed=0)
        assert np.array_equal(encode_subject(model, subjects[0]).z, np.ones((6, 2)))
        with pytest.raises(KeyError):
            model.encode_subject(make_subject("s9", 6, seed=51))
