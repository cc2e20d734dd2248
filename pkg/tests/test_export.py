"""Similarity metrics, distance tables, and the export file set."""

import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from nirm.export import (
    ExportError,
    build_edge_list,
    export_artifacts,
    item_rest_distances,
    similarity_matrix,
)
from nirm.model import ModelConfig
from nirm.postprocess import summarize
from nirm.sampler import McmcConfig, fit
from oracles import random_response_matrix


# -- similarity_matrix ------------------------------------------------------------


def test_similarity_zero_distance_is_one():
    pos = np.array([[1.0, 2.0], [1.0, 2.0], [4.0, 6.0]])
    s1 = similarity_matrix(pos, "s1").values
    s2 = similarity_matrix(pos, "s2").values
    assert s1[0, 1] == pytest.approx(1.0)
    assert s2[0, 1] == pytest.approx(1.0)
    assert np.allclose(np.diag(s1), 1.0)
    assert np.allclose(np.diag(s2), 1.0)


def test_similarity_log2_distance():
    pos = np.array([[0.0], [math.log(2.0)]])
    s1 = similarity_matrix(pos, "s1").values
    assert s1[0, 1] == pytest.approx(0.5, abs=1e-12)


def test_s2_zero_at_maximal_pair():
    rng = np.random.default_rng(0)
    pos = rng.normal(size=(6, 2))
    s2 = similarity_matrix(pos, "s2").values
    dist = np.linalg.norm(pos[:, None] - pos[None, :], axis=2)
    i, j = np.unravel_index(np.argmax(dist), dist.shape)
    assert s2[i, j] == pytest.approx(0.0, abs=1e-12)


def test_s2_identical_positions_warns():
    pos = np.zeros((3, 2))
    with pytest.warns(UserWarning, match="identical"):
        s2 = similarity_matrix(pos, "s2").values
    assert np.all(s2 == 1.0)


def test_rankings_agree_between_metrics():
    rng = np.random.default_rng(1)
    pos = rng.normal(size=(8, 3))
    dist = np.linalg.norm(pos[:, None] - pos[None, :], axis=2)
    iu, ju = np.triu_indices(8, 1)
    d = dist[iu, ju]
    s1 = similarity_matrix(pos, "s1").values[iu, ju]
    s2 = similarity_matrix(pos, "s2").values[iu, ju]
    order_d = np.argsort(-d)
    np.testing.assert_array_equal(np.argsort(s1), order_d)
    np.testing.assert_array_equal(np.argsort(s2), order_d)


# -- item_rest_distances ------------------------------------------------------------


def test_two_items_rest_distance():
    pos = np.array([[0.0, 0.0], [3.0, 4.0]])
    rest = item_rest_distances(pos)
    np.testing.assert_allclose(rest.values, [5.0, 5.0])


def test_equilateral_triangle_rest_distance():
    c = 2.0
    pos = np.array(
        [[0.0, 0.0], [c, 0.0], [c / 2.0, c * math.sqrt(3.0) / 2.0]]
    )
    rest = item_rest_distances(pos)
    np.testing.assert_allclose(rest.values, [c, c, c], atol=1e-12)


def test_rest_distance_matches_double_loop():
    rng = np.random.default_rng(2)
    pos = rng.normal(size=(9, 2))
    rest = item_rest_distances(pos)
    for i in range(9):
        acc = [np.linalg.norm(pos[i] - pos[j]) for j in range(9) if j != i]
        assert rest.values[i] == pytest.approx(float(np.mean(acc)), abs=1e-12)
    assert rest.max_index == int(np.argmax(rest.values))


# -- export_artifacts ------------------------------------------------------------------


@pytest.fixture(scope="module")
def small_fit():
    rng = np.random.default_rng(808)
    X = random_response_matrix(rng, 15, 5, ensure_positive_columns=True)
    config = ModelConfig(d=2)
    draws = fit(
        X, config, McmcConfig(total_iterations=400, burn_in=150, thinning=5, seed=3)
    )
    return X, summarize(draws)


def test_export_writes_complete_file_set(tmp_path, small_fit):
    X, summary = small_fit
    out = tmp_path / "art"
    written = export_artifacts(summary, X, out)
    names = sorted(p.name for p in written)
    assert names == sorted(
        [
            "positions.csv",
            "edges.csv",
            "beta_summary.csv",
            "theta_summary.csv",
            "distance_histogram.csv",
            "item_rest.csv",
            "latent_space.svg",
            "network.svg",
            "manifest.json",
        ]
    )
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 3
    assert manifest["model"]["d"] == 2
    assert manifest["content_hashes"]["data"] == X.content_hash()
    assert manifest["deviations"]


def test_histogram_has_choose_2_rows(tmp_path, small_fit):
    X, summary = small_fit
    out = tmp_path / "art"
    export_artifacts(summary, X, out)
    lines = (out / "distance_histogram.csv").read_text().strip().splitlines()
    assert len(lines) - 1 == X.n_items * (X.n_items - 1) // 2  # 10 for p=5


def test_reexport_is_byte_identical(tmp_path, small_fit):
    X, summary = small_fit
    a = tmp_path / "a"
    b = tmp_path / "b"
    export_artifacts(summary, X, a)
    export_artifacts(summary, X, b)
    for name in [p.name for p in a.iterdir()]:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_no_overwrite_without_flag(tmp_path, small_fit):
    X, summary = small_fit
    out = tmp_path / "art"
    export_artifacts(summary, X, out)
    with pytest.raises(ExportError, match="overwrite"):
        export_artifacts(summary, X, out)
    export_artifacts(summary, X, out, overwrite=True)


def test_edges_similarity_recomputable_from_distance(tmp_path, small_fit):
    X, summary = small_fit
    out = tmp_path / "art"
    export_artifacts(summary, X, out, similarity_metric="s1")
    lines = (out / "edges.csv").read_text().strip().splitlines()[1:]
    for line in lines:
        _, _, dist, sim = line.split(",")
        assert float(sim) == pytest.approx(math.exp(-float(dist)), rel=1e-4)
    # exact recomputation (not just 6-digit echo) from the edge list API
    edges = build_edge_list(summary.item_positions, X.item_ids, "s1")
    for _, _, dist, sim in edges.records:
        assert sim == pytest.approx(math.exp(-dist), abs=1e-9)


def test_edge_list_lexicographic_order(small_fit):
    X, summary = small_fit
    edges = build_edge_list(summary.item_positions, X.item_ids, "s1")
    keys = [(a, b) for a, b, _, _ in edges.records]
    assert keys == sorted(keys)
    assert all(a < b for a, b in keys)
    assert len(keys) == X.n_items * (X.n_items - 1) // 2


def test_theta_summary_grouped_by_sum_score(tmp_path, small_fit):
    X, summary = small_fit
    out = tmp_path / "art"
    export_artifacts(summary, X, out)
    lines = (out / "theta_summary.csv").read_text().strip().splitlines()
    assert lines[0] == "sum_score,freq,estimate,q05,median,q95"
    scores = X.sum_scores()
    seen = np.unique(scores)
    assert len(lines) - 1 == seen.size
    freqs = {int(line.split(",")[0]): int(line.split(",")[1]) for line in lines[1:]}
    for s in seen:
        assert freqs[int(s)] == int((scores == s).sum())


def test_svgs_are_wellformed_xml(tmp_path, small_fit):
    X, summary = small_fit
    out = tmp_path / "art"
    export_artifacts(summary, X, out)
    for name in ("latent_space.svg", "network.svg"):
        root = ET.fromstring((out / name).read_text())
        assert root.tag.endswith("svg")


def test_exported_distances_survive_rotation(small_fit):
    X, summary = small_fit
    from nirm.postprocess import principal_axes_rotate

    rotated = principal_axes_rotate(summary.item_positions)
    diff = rotated[:, None, :] - rotated[None, :, :]
    dist = np.sqrt(np.einsum("abd,abd->ab", diff, diff))
    np.testing.assert_allclose(dist, summary.item_distances, atol=1e-9)
