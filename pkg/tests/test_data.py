import numpy as np
import pytest

from mvtrace.data import (
    LatentSubject,
    SubjectRecord,
    load_dataset,
    save_dataset,
    scores_array,
    stack_views,
)
from mvtrace.mesh import icosphere


def make_subjects(n, m, d_task, d_rest, seed=0):
    rng = np.random.default_rng(seed)
    return [
        SubjectRecord(
            f"s{i:03d}",
            rng.standard_normal((m, d_task)),
            rng.standard_normal((m, d_rest)),
            float(rng.standard_normal()),
        )
        for i in range(n)
    ]


def test_vertex_count_mismatch_rejected():
    with pytest.raises(ValueError, match="vertex count"):
        SubjectRecord("a", np.zeros((5, 3)), np.zeros((4, 2)), 0.0)


def test_latent_subject_must_be_2d():
    with pytest.raises(ValueError):
        LatentSubject("a", np.zeros(5))


def test_stack_views_shapes():
    subjects = make_subjects(3, 7, 4, 5)
    x_t, x_r = stack_views(subjects)
    assert x_t.shape == (21, 4)
    assert x_r.shape == (21, 5)
    assert np.array_equal(x_t[7:14], subjects[1].x_task)
    assert scores_array(subjects).shape == (3,)


def test_dataset_roundtrip(tmp_path):
    mesh = icosphere(1)
    subjects = make_subjects(4, mesh.vertex_count, 3, 2, seed=5)
    beta = np.zeros((mesh.vertex_count, 2))
    beta[[5, 9]] = [[1.0, -0.5], [0.25, 2.0]]
    out = save_dataset(
        tmp_path / "ds", subjects, mesh,
        beta_true=beta, support=np.array([5, 9]), cluster_ids=np.array([0, 1]),
    )
    assert (out / "mesh.off").exists()
    assert (out / "subjects.csv").exists()
    loaded, loaded_mesh, gt = load_dataset(out)
    assert loaded_mesh.vertex_count == mesh.vertex_count
    assert [s.subject_id for s in loaded] == [s.subject_id for s in subjects]
    for a, b in zip(loaded, subjects):
        assert np.array_equal(a.x_task, b.x_task)
        assert np.array_equal(a.x_rest, b.x_rest)
        assert a.score == b.score
    assert np.array_equal(gt["beta_true"], beta)
    assert gt["support"].tolist() == [5, 9]


def test_dataset_without_ground_truth(tmp_path):
    mesh = icosphere(0)
    subjects = make_subjects(2, mesh.vertex_count, 3, 2)
    save_dataset(tmp_path / "ds", subjects, mesh)
    _, _, gt = load_dataset(tmp_path / "ds")
    assert gt is None


def test_vertex_count_must_match_mesh(tmp_path):
    mesh = icosphere(0)
    subjects = make_subjects(1, 5, 3, 2)
    with pytest.raises(ValueError, match="vertices"):
        save_dataset(tmp_path / "ds", subjects, mesh)


def test_missing_subjects_csv(tmp_path):
    mesh = icosphere(0)
    save_dataset(tmp_path / "ds", make_subjects(1, 12, 2, 2), mesh)
    (tmp_path / "ds" / "subjects.csv").unlink()
    with pytest.raises(FileNotFoundError):
        load_dataset(tmp_path / "ds")
