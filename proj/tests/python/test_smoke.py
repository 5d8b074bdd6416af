import json

import numpy as np
import pytest

import dfa


def test_cli_round_trip(tmp_path):
    code, out, err = dfa.run_cli(["fit", "--output", str(tmp_path / "dry"), "--shards", "14",
                                  "--k", "10", "--dry-run"])
    assert code == 0, err
    manifest = json.loads((tmp_path / "dry" / "manifest.json").read_text())
    assert manifest["config"]["shards"] == 14
    assert json.loads(out)["config"] == manifest["config"]

    code, _, err = dfa.run_cli(["fit", "--k", "0", "--output", str(tmp_path / "x")])
    assert code == 2
    assert json.loads(err)["error"]["category"] == "config_error"


def test_graph_and_laplacian():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(30, 2))
    lap = dfa.laplacian(pts, 4)
    assert lap.shape == (30, 30)
    assert np.allclose(lap, lap.T)
    assert np.allclose(lap.sum(axis=1), 0.0)
    assert np.linalg.eigvalsh(lap).min() > -1e-9
    edges = dfa.knn_edges(pts, 4)
    assert len(edges) == int(np.trace(lap)) // 2
    assert all(i < j for i, j in edges)


def test_generator_masking_and_discoveries():
    sim = dfa.generate_static(60, 4, k=5, seed=7)
    assert sim["A"].shape == (60, 4)
    assert set(np.unique(sim["A"])) <= {0, 1}
    np.testing.assert_allclose(sim["lambda"], sim["phi"][:, None] + sim["delta"][None, :])

    a_obs, cells = dfa.mask_entries(sim["A"], 0.2, 11)
    assert len(cells) == 48
    assert np.all(a_obs.flatten(order="F")[cells] == dfa.MISSING)

    # Brute-force oracle for the discovery counts.
    got = dfa.count_discoveries(sim["A"], sim["lambda"], cells)
    lam = sim["lambda"].flatten(order="F")[cells]
    truth = sim["A"].flatten(order="F")[cells]
    called = 1 / (1 + np.exp(-lam)) > 0.5
    assert got["discoveries"] == called.sum()
    assert got["false_discoveries"] == (called & (truth == 0)).sum()
    if called.sum():
        assert got["fdr"] == pytest.approx((called & (truth == 0)).sum() / called.sum())


def test_fit_and_predict_duplicate():
    sim = dfa.generate_static(24, 3, k=4, seed=5)
    fit = dfa.fit(sim["covariates"], sim["A"], k=4, chains=2, warmup=150, draws=100,
                  seed=3, delta_covariance="diagonal")
    assert fit["draws"].shape == (200, len(fit["names"]))
    assert fit["lambda_mean"].shape == (24, 3)
    assert np.isfinite(fit["max_rhat"])

    pred = dfa.predict(fit["names"], fit["draws"], sim["covariates"],
                       sim["covariates"][[6]], k=4)
    phi6 = fit["draws"][:, fit["names"].index("phi[6]")]
    np.testing.assert_array_equal(pred["phi"][:, 0], phi6)
    assert np.all(pred["lo"] <= pred["mean"]) and np.all(pred["mean"] <= pred["hi"])


def test_errors_and_helpers():
    with pytest.raises(dfa.DataError):
        dfa.fit(np.zeros((3, 1)), np.full((3, 2), 3, dtype=np.int32), k=1)
    with pytest.raises(dfa.ConfigError):
        dfa.fit(np.zeros((3, 1)), np.zeros((3, 2), dtype=np.int32), delta_covariance="full")
    np.testing.assert_allclose(dfa.interpolation_weights([2.0, 4.0]), [2 / 3, 1 / 3])
    assert dfa.git_blob_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"
    assert dfa.derive_seed(1, 0) != dfa.derive_seed(1, 1)
