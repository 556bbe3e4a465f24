import csv
import os
import subprocess

import numpy as np
import pytest

import zeroclust as zc
from zeroclust import pyembed, zseb


def manifest(labels, prefix="img"):
    return [
        {"image_id": f"{prefix}_{i:04d}", "species": f"sp_{l}", "taxon_class": "Aves",
         "source_code": "syn", "location_id": None if i % 2 else f"loc{i % 3}", "validated": True}
        for i, l in enumerate(labels)
    ]


def test_pipeline_recovers_blobs():
    x, truth = zc.make_blobs(n_blobs=4, per_blob=40, dim=16, seed=1)
    coords, diag = zc.reduce(x, "pca", standardize=True)
    assert coords.shape == (160, 2)
    assert diag["series"]["explained_variance_ratio"][0] > 0
    labels, k, _ = zc.cluster(coords, "hdbscan", {"min_cluster_size": 10, "min_samples": 5})
    assert k == 4
    report = zc.evaluate(labels, truth, coords)
    assert report["v_measure"] == pytest.approx(1.0)
    assert report["silhouette"] > 0.5


def test_ward_and_gmm_agree_on_easy_data():
    x, truth = zc.make_blobs(n_blobs=3, per_blob=30, dim=8, seed=2)
    for method in ("ward", "gmm"):
        labels, k, _ = zc.cluster(x, method, {"k": 3})
        assert k == 3
        assert zc.evaluate(labels, truth)["ari"] == pytest.approx(1.0)


def test_errors_are_typed():
    x, _ = zc.make_blobs(n_blobs=2, per_blob=10, dim=4, seed=0)
    with pytest.raises(zc.ParameterError):
        zc.cluster(x, "ward", {"k": 0})
    with pytest.raises(zc.ZeroclustError):
        zc.reduce(x, "lle")
    with pytest.raises(zc.ParameterError):
        zc.auto_epsilon(x[:5], 5)


def test_scalar_helpers():
    assert zc.v_measure_from(0.95, 0.5) == pytest.approx(0.655, abs=5e-4)
    a, b = zc.fit_ab(1.0, 0.1)
    assert a == pytest.approx(1.5769, abs=1e-3)
    assert b == pytest.approx(0.8951, abs=1e-3)
    assert zc.default_grid_size() == (13800, 600)


def test_python_and_core_writers_agree(tmp_path):
    rng = np.random.default_rng(0)
    values = rng.normal(size=(12, 5)).astype(np.float32)
    records = manifest(rng.integers(0, 3, 12))
    zseb.write_bank(tmp_path / "py", values, records)
    zc.write_bank(str(tmp_path / "core"), values.astype(np.float64), records)
    for name in (zseb.EMBEDDINGS_FILE, zseb.MANIFEST_FILE):
        assert (tmp_path / "py" / name).read_bytes() == (tmp_path / "core" / name).read_bytes()

    back, meta, _ = zc.read_bank(str(tmp_path / "py"))
    np.testing.assert_array_equal(back, values.astype(np.float64))
    assert meta == records
    assert zc.validate_bank(str(tmp_path / "py"))["ok"]


def test_verify_format(tmp_path):
    values = np.arange(12, dtype=np.float32).reshape(4, 3)
    bank = zseb.write_bank(tmp_path / "ok", values, manifest([0, 0, 1, 1]))
    assert zc.verify_format(bank)

    raw = (bank / zseb.EMBEDDINGS_FILE).read_bytes()
    cases = {
        "truncated": raw[:-4],
        "version": raw[:4] + b"\x02\x00" + raw[6:],
        "magic": b"ZSEX" + raw[4:],
        "nan": raw[:-4] + np.float32(np.nan).tobytes(),
        "short": raw[:10],
    }
    for name, data in cases.items():
        bad = tmp_path / name
        bad.mkdir()
        (bad / zseb.EMBEDDINGS_FILE).write_bytes(data)
        (bad / zseb.MANIFEST_FILE).write_bytes((bank / zseb.MANIFEST_FILE).read_bytes())
        assert not zc.verify_format(bad), name
    assert not zc.verify_format(tmp_path / "missing")

    with pytest.raises(zc.FormatError):
        zc.read_bank(str(tmp_path / "truncated"))
    with pytest.raises(zc.ValidationError):
        zc.read_bank(str(tmp_path / "nan"))


class StubEncoder:
    """Deterministic pixel statistics standing in for a checkpoint."""

    def __init__(self, dim):
        self.dim = dim
        self.preprocessing = {"resize": [8, 8], "mode": "RGB"}

    def __call__(self, images):
        out = []
        for im in images:
            px = np.asarray(im.resize((8, 8)), dtype=np.float32).reshape(-1) / 255.0
            out.append(np.resize(px, self.dim))
        return np.stack(out)


def make_crops(root, n=6):
    from PIL import Image

    root.mkdir()
    rows = []
    for i in range(n):
        name = f"crop_{i}.png"
        Image.new("RGB", (16, 12), (40 * i, 255 - 30 * i, 7 * i)).save(root / name)
        rows.append([name, f"id_{n - i:02d}", f"sp_{i % 2}", "Mammalia", "cam", "", "true"])
    (root / "broken.jpg").write_bytes(b"not an image")
    rows.append(["broken.jpg", "id_99", "sp_0", "Mammalia", "cam", "L1", "false"])
    labels = root / "labels.csv"
    with open(labels, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(pyembed.CSV_COLUMNS)
        w.writerows(rows)
    return labels


def test_extract_with_stub_encoder(tmp_path):
    labels = make_crops(tmp_path / "crops")
    job = pyembed.ExtractionJob("stub", tmp_path / "crops", labels, tmp_path / "bank", batch_size=4,
                                expected_dim=24, encoder_factory=lambda j: StubEncoder(24))
    out = pyembed.extract(job)
    assert zc.verify_format(out)
    summary = zc.validate_bank(str(out))
    assert summary["ok"] and summary["n_rows"] == 6 and summary["dim"] == 24
    _, records, tag = zc.read_bank(str(out))
    assert [r["image_id"] for r in records] == sorted(r["image_id"] for r in records)
    assert tag == "stub"
    assert "id_99" in (out / pyembed.SKIPPED_FILE).read_text()

    first = (out / zseb.EMBEDDINGS_FILE).read_bytes()
    pyembed.extract(job)
    assert (out / zseb.EMBEDDINGS_FILE).read_bytes() == first

    job.expected_dim = 768
    with pytest.raises(pyembed.ExtractionError):
        pyembed.extract(job)


def test_duplicate_ids_rejected(tmp_path):
    labels = make_crops(tmp_path / "crops")
    text = labels.read_text().replace("id_01", "id_02")
    labels.write_text(text)
    with pytest.raises(pyembed.ExtractionError):
        pyembed.read_labels(labels)


@pytest.mark.skipif("ZEROCLUST_CLI" not in os.environ, reason="CLI path not provided")
def test_cli_validates_python_bank(tmp_path):
    x, truth = zc.make_blobs(n_blobs=3, per_blob=10, dim=6, seed=4)
    zseb.write_bank(tmp_path / "bank", x, manifest(truth))
    r = subprocess.run([os.environ["ZEROCLUST_CLI"], "validate", str(tmp_path / "bank"), "--json"],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert '"n_species": 3' in r.stdout
