import json
import os
import pickle

import numpy as np
import pytest
import scipy.sparse as sp

from bundle_converter import (
    ChecksumError,
    ConvertJob,
    convert_from_directory,
    load_raw,
    make_split,
)
from bundle_converter.cli import main
from bundle_converter.fetch import fetch_dataset, sha256_of

TABLE8 = {
    "cora": (2708, 1433, 7),
    "citeseer": (3327, 3703, 6),
    "pubmed": (19717, 500, 3),
}


def write_mini_planetoid(directory, dataset="cora", gap=False):
    """Tiny raw dataset in the planetoid file layout.

    Nine allx nodes plus three test nodes (two plus an isolated gap node when
    gap=True, exercising the CiteSeer padding path). test.index is permuted
    to exercise the reorder.
    """
    os.makedirs(directory, exist_ok=True)
    d, c = 4, 3
    rng = np.random.default_rng(0)
    allx = sp.lil_matrix(np.arange(9 * d, dtype=np.float64).reshape(9, d) / 10.0)
    ally = np.eye(c, dtype=np.int64)[rng.integers(0, c, size=9)]
    if gap:
        tx = sp.lil_matrix(np.array([[9.0, 9.1, 9.2, 9.3], [11.0, 11.1, 11.2, 11.3]]))
        ty = np.eye(c, dtype=np.int64)[[1, 2]]
        test_index = [9, 11]  # node 10 is isolated: absent from tx/ty
    else:
        tx = sp.lil_matrix(
            np.array(
                [[9.0, 9.1, 9.2, 9.3], [10.0, 10.1, 10.2, 10.3], [11.0, 11.1, 11.2, 11.3]]
            )
        )
        ty = np.eye(c, dtype=np.int64)[[1, 2, 0]]
        test_index = [10, 9, 11]  # permuted on purpose
    x, y = allx[:2], ally[:2]
    graph = {i: [] for i in range(12)}
    graph[0] = [1, 2, 0, 2]  # self-loop and duplicate must be canonicalized away
    graph[1] = [0, 3]
    graph[2] = [0, 0]
    graph[3] = [1, 4]
    graph[4] = [3, 5]
    graph[5] = [4, 9]
    graph[9] = [5]
    graph[6] = [7]
    graph[7] = [6, 8]
    graph[8] = [7, 10]
    graph[10] = [8]
    graph[11] = [6]
    graph[6].append(11)

    for suffix, obj in (
        ("x", x), ("y", y), ("tx", tx), ("ty", ty),
        ("allx", allx), ("ally", ally), ("graph", graph),
    ):
        with open(os.path.join(directory, f"ind.{dataset}.{suffix}"), "wb") as fh:
            pickle.dump(obj, fh)
    with open(os.path.join(directory, f"ind.{dataset}.test.index"), "w") as fh:
        fh.write("\n".join(str(i) for i in test_index) + "\n")


class TestLoadRaw:
    def test_assembly_and_canonical_edges(self, tmp_path):
        write_mini_planetoid(str(tmp_path))
        raw = load_raw("cora", str(tmp_path))
        assert raw.features.shape == (12, 4)
        assert raw.num_classes == 3
        # test rows permuted back into graph order
        np.testing.assert_allclose(raw.features[10], [9.0, 9.1, 9.2, 9.3])
        np.testing.assert_allclose(raw.features[9], [10.0, 10.1, 10.2, 10.3])
        np.testing.assert_allclose(raw.features[11], [11.0, 11.1, 11.2, 11.3])
        # self-loop and duplicates collapsed, u < v canonical
        edges = set(map(tuple, raw.edges.tolist()))
        assert (0, 0) not in edges
        assert (0, 2) in edges and (2, 0) not in edges
        assert all(u < v for u, v in edges)

    def test_citeseer_gap_padding(self, tmp_path):
        write_mini_planetoid(str(tmp_path), dataset="citeseer", gap=True)
        raw = load_raw("citeseer", str(tmp_path))
        assert raw.features.shape == (12, 4)
        np.testing.assert_allclose(raw.features[10], 0.0)  # padded isolated node
        assert raw.labels[10] == 0


class TestConvert:
    def test_bundle_passes_primary_validation(self, tmp_path):
        raw_dir = tmp_path / "raw"
        write_mini_planetoid(str(raw_dir))
        out = tmp_path / "bundle"
        job = ConvertJob(dataset_name="cora", output_dir=str(out), seed=3)
        convert_from_directory(job, str(raw_dir))

        from graphscrub import load_bundle  # the file format is the contract

        bundle = load_bundle(str(out))
        assert bundle.num_nodes == 12
        assert bundle.feature_dim == 4
        assert bundle.num_classes == 3
        with open(out / "meta.json") as fh:
            meta = json.load(fh)
        assert meta["split_seed"] == 3
        assert meta["train_fraction"] == 0.9

    def test_split_fraction_and_determinism(self, tmp_path):
        raw_dir = tmp_path / "raw"
        write_mini_planetoid(str(raw_dir))
        out_a, out_b, out_c = (tmp_path / n for n in ("a", "b", "c"))
        for out, seed in ((out_a, 5), (out_b, 5), (out_c, 6)):
            convert_from_directory(
                ConvertJob(dataset_name="cora", output_dir=str(out), seed=seed), str(raw_dir)
            )
        splits_a = (out_a / "splits.csv").read_bytes()
        assert splits_a == (out_b / "splits.csv").read_bytes()
        assert splits_a != (out_c / "splits.csv").read_bytes()
        n_train = splits_a.decode().split().count("train")
        assert n_train == int(0.9 * 12)

    def test_make_split_fraction_general(self):
        for n in (10, 100, 2708):
            mask = make_split(n, 0.9, seed=0)
            assert abs(int(mask.sum()) - int(0.9 * n)) <= 1

    def test_invalid_job_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            ConvertJob(dataset_name="ogbn-arxiv", output_dir=str(tmp_path)).validate()
        with pytest.raises(ValueError):
            ConvertJob(
                dataset_name="cora", output_dir=str(tmp_path), train_fraction=1.0
            ).validate()


class TestChecksums:
    def test_mismatch_is_hard_error(self, tmp_path):
        cache = tmp_path / "cache"
        write_mini_planetoid(str(cache / "cora"))
        bad = {"ind.cora.x": "0" * 64}
        with pytest.raises(ChecksumError):
            fetch_dataset("cora", cache_dir=str(cache), checksums=bad)

    def test_matching_manifest_accepted(self, tmp_path, capsys):
        cache = tmp_path / "cache"
        write_mini_planetoid(str(cache / "cora"))
        digest = sha256_of(str(cache / "cora" / "ind.cora.x"))
        out = fetch_dataset("cora", cache_dir=str(cache), checksums={"ind.cora.x": digest})
        assert out == str(cache / "cora")
        observed = json.loads(capsys.readouterr().err)
        assert observed["sha256"]["ind.cora.x"] == digest


class TestCli:
    def test_offline_conversion(self, tmp_path, capsys):
        raw_dir = tmp_path / "raw"
        write_mini_planetoid(str(raw_dir))
        out = tmp_path / "bundle"
        code = main(
            ["--dataset", "cora", "--out", str(out), "--seed", "1", "--raw-dir", str(raw_dir)]
        )
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["dataset"] == "cora"
        assert os.path.exists(out / "edges.tsv")

    def test_checksum_failure_exit_code(self, tmp_path, capsys):
        cache = tmp_path / "cache"
        write_mini_planetoid(str(cache / "cora"))
        manifest = tmp_path / "sums.json"
        manifest.write_text(json.dumps({"ind.cora.graph": "f" * 64}))
        code = main(
            ["--dataset", "cora", "--out", str(tmp_path / "b"),
             "--cache-dir", str(cache), "--checksums", str(manifest)]
        )
        assert code == 2
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["error"] == "checksum"

    def test_missing_dataset_flag(self, capsys):
        assert main(["--out", "x"]) == 1
        capsys.readouterr()

    def test_download_failure_exit_code(self, tmp_path, capsys):
        code = main(
            ["--dataset", "cora", "--out", str(tmp_path / "b"),
             "--cache-dir", str(tmp_path / "empty-cache"),
             "--mirror", "http://invalid.invalid/data"]
        )
        assert code == 3
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["error"] == "download" and err["retriable"] is True


def _cached_real_dataset(name):
    cache = os.environ.get(
        "GRAPHBUNDLE_CACHE",
        os.path.join(os.path.expanduser("~"), ".cache", "graphbundle-converter"),
    )
    directory = os.path.join(cache, name)
    from bundle_converter.planetoid import file_names

    if all(os.path.exists(os.path.join(directory, f)) for f in file_names(name)):
        return directory
    return None


@pytest.mark.parametrize("name", ["cora", "citeseer", "pubmed"])
def test_real_dataset_fidelity(name, tmp_path):
    """[SECONDARY acceptance] exact node/feature/class counts vs the benchmark
    statistics; runs only when the raw files are already cached locally."""
    raw_dir = _cached_real_dataset(name)
    if raw_dir is None:
        pytest.skip(f"raw {name} files not cached and no network in this environment")
    out = tmp_path / name
    convert_from_directory(ConvertJob(dataset_name=name, output_dir=str(out)), raw_dir)
    from graphscrub import load_bundle

    bundle = load_bundle(str(out))
    nodes, feats, classes = TABLE8[name]
    assert bundle.num_nodes == nodes
    assert bundle.feature_dim == feats
    assert bundle.num_classes == classes
