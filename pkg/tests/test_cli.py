import json

import numpy as np
import pytest

from hiersearch.cli import main
from hiersearch.store import EmbeddingSet, save_embeddings
from hiersearch.synthetic import SynthConfig, generate, write_dataset


@pytest.fixture()
def workdir(tmp_path):
    config = SynthConfig(seed=8, dim=8, groups=3, classes_per_group=2,
                         samples_per_class=60, queries_per_class=2,
                         query_noise_std=0.5)
    write_dataset(tmp_path / "data", *generate(config))
    return tmp_path


def run(args):
    return main([str(a) for a in args])


def fit_and_index(workdir):
    assert run(["fit", "--train", workdir / "data/train.hfv",
                "--out", workdir / "model.bin", "--threshold", "0.3"]) == 0
    assert run(["index", "--model", workdir / "model.bin",
                "--database", workdir / "data/database.hfv",
                "--out", workdir / "index.bin"]) == 0


class TestSynthCommand:
    def test_creates_four_files(self, tmp_path):
        assert run(["synth", "--out-dir", tmp_path / "out", "--seed", 5,
                    "--groups", 2, "--classes-per-group", 2,
                    "--samples-per-class", 10]) == 0
        names = sorted(p.name for p in (tmp_path / "out").iterdir())
        assert names == ["database.hfv", "queries.hfv", "train.hfv",
                         "truth.json"]

    def test_same_seed_twice_is_byte_identical(self, tmp_path):
        for sub in ("a", "b"):
            assert run(["synth", "--out-dir", tmp_path / sub, "--seed", 12,
                        "--groups", 2, "--classes-per-group", 2,
                        "--samples-per-class", 10]) == 0
        for name in ("train.hfv", "database.hfv", "queries.hfv", "truth.json"):
            assert (tmp_path / "a" / name).read_bytes() == \
                (tmp_path / "b" / name).read_bytes()

    def test_record_count_matches_config(self, tmp_path):
        from hiersearch.store import load_embeddings
        assert run(["synth", "--out-dir", tmp_path / "out", "--seed", 1,
                    "--groups", 3, "--classes-per-group", 4,
                    "--samples-per-class", 7]) == 0
        train = load_embeddings(tmp_path / "out/train.hfv")
        assert len(train) == 3 * 4 * 7

    def test_bad_config_exits_2(self, tmp_path, capsys):
        assert run(["synth", "--out-dir", tmp_path / "out", "--seed", 1,
                    "--class-std", "0"]) == 2
        assert "error" in capsys.readouterr().err


class TestFitCommand:
    def test_three_class_model_reports_five_nodes(self, tmp_path, capsys):
        rng = np.random.default_rng(99)
        data = EmbeddingSet(
            dim=1,
            ids=np.arange(1500, dtype=np.int64),
            labels=np.repeat([0, 1, 2], 500).astype(np.int64),
            vectors=np.concatenate([
                rng.normal(0.0, 0.1, (500, 1)),
                rng.normal(0.1, 0.1, (500, 1)),
                rng.normal(10.0, 0.1, (500, 1)),
            ]).astype(np.float32),
        )
        save_embeddings(data, tmp_path / "train.hfv")
        assert run(["fit", "--train", tmp_path / "train.hfv",
                    "--out", tmp_path / "model.bin",
                    "--threshold", "0.3"]) == 0
        out = capsys.readouterr().out
        assert "tree nodes: 5" in out

    def test_single_class_warns(self, tmp_path, capsys):
        rng = np.random.default_rng(3)
        data = EmbeddingSet(
            dim=2,
            ids=np.arange(40, dtype=np.int64),
            labels=np.zeros(40, dtype=np.int64),
            vectors=rng.normal(size=(40, 2)).astype(np.float32),
        )
        save_embeddings(data, tmp_path / "train.hfv")
        assert run(["fit", "--train", tmp_path / "train.hfv",
                    "--out", tmp_path / "model.bin"]) == 0
        assert "single class" in capsys.readouterr().err

    def test_unlabeled_train_exits_2(self, tmp_path, capsys):
        rng = np.random.default_rng(3)
        data = EmbeddingSet(
            dim=2,
            ids=np.arange(10, dtype=np.int64),
            labels=np.full(10, -1, dtype=np.int64),
            vectors=rng.normal(size=(10, 2)).astype(np.float32),
        )
        save_embeddings(data, tmp_path / "train.hfv")
        assert run(["fit", "--train", tmp_path / "train.hfv",
                    "--out", tmp_path / "model.bin"]) == 2
        assert "labeled" in capsys.readouterr().err

    def test_missing_file_exits_2(self, tmp_path):
        assert run(["fit", "--train", tmp_path / "nope.hfv",
                    "--out", tmp_path / "model.bin"]) == 2


class TestIndexCommand:
    def test_histogram_sums_to_n(self, workdir, capsys):
        fit_and_index(workdir)
        out = capsys.readouterr().out
        leaf_lines = [l for l in out.splitlines() if l.startswith("leaf ")]
        total = sum(int(l.split(":")[1]) for l in leaf_lines)
        assert total == 360

    def test_rerun_is_byte_identical(self, workdir):
        fit_and_index(workdir)
        first = (workdir / "index.bin").read_bytes()
        assert run(["index", "--model", workdir / "model.bin",
                    "--database", workdir / "data/database.hfv",
                    "--out", workdir / "index2.bin"]) == 0
        assert (workdir / "index2.bin").read_bytes() == first

    def test_empty_database_is_valid(self, workdir, capsys):
        fit_and_index(workdir)
        empty = EmbeddingSet(
            dim=8,
            ids=np.empty(0, dtype=np.int64),
            labels=np.empty(0, dtype=np.int64),
            vectors=np.empty((0, 8), dtype=np.float32),
        )
        save_embeddings(empty, workdir / "empty.hfv")
        assert run(["index", "--model", workdir / "model.bin",
                    "--database", workdir / "empty.hfv",
                    "--out", workdir / "empty_index.bin"]) == 0
        assert "records indexed: 0" in capsys.readouterr().out


class TestQueryCommand:
    def test_text_output_row_count(self, workdir, capsys):
        fit_and_index(workdir)
        assert run(["query", "--index", workdir / "index.bin",
                    "--queries", workdir / "data/queries.hfv",
                    "--k", 4, "--alpha", "2"]) == 0
        out = capsys.readouterr().out
        rows = [l for l in out.splitlines() if l.startswith("query ")]
        assert len(rows) == 12 * 4  # 12 queries, k rows each

    def test_k_zero_is_empty_success(self, workdir, capsys):
        fit_and_index(workdir)
        assert run(["query", "--index", workdir / "index.bin",
                    "--queries", workdir / "data/queries.hfv",
                    "--k", 0]) == 0
        out = capsys.readouterr().out
        assert not [l for l in out.splitlines() if l.startswith("query ")]

    def test_json_output_carries_distance_parts(self, workdir, capsys):
        fit_and_index(workdir)
        capsys.readouterr()
        assert run(["query", "--index", workdir / "index.bin",
                    "--queries", workdir / "data/queries.hfv",
                    "--k", 3, "--alpha", "3", "--output", "json"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["alpha"] == 3.0
        first = doc["queries"][0]["results"][0]
        assert set(first) == {"record_id", "combined", "cosine",
                              "hierarchical", "leaf"}
        assert first["combined"] == pytest.approx(
            first["cosine"] + 3.0 * first["hierarchical"], abs=1e-12
        )

    def test_alpha_zero_matches_cosine_ranking(self, workdir, capsys):
        fit_and_index(workdir)
        capsys.readouterr()
        assert run(["query", "--index", workdir / "index.bin",
                    "--queries", workdir / "data/queries.hfv",
                    "--k", 8, "--alpha", "0", "--output", "json"]) == 0
        doc = json.loads(capsys.readouterr().out)
        for entry in doc["queries"]:
            cosines = [r["cosine"] for r in entry["results"]]
            assert cosines == sorted(cosines)


class TestEvalCommand:
    def test_eval_writes_curve(self, workdir, capsys):
        fit_and_index(workdir)
        csv_path = workdir / "curve.csv"
        assert run(["eval", "--index", workdir / "index.bin",
                    "--queries", workdir / "data/queries.hfv",
                    "--ks", "1,5,10", "--alpha", "3",
                    "--csv-out", csv_path]) == 0
        out = capsys.readouterr().out
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0] == "k,map"
        assert len(lines) == 4
        for line in lines[1:]:
            k, value = line.split(",")
            assert f"MAP@{k} = {value}" in out

    def test_self_retrieval_map1_is_one(self, tmp_path, capsys):
        rng = np.random.default_rng(2)
        data = EmbeddingSet(
            dim=4,
            ids=np.arange(6, dtype=np.int64),
            labels=np.arange(6, dtype=np.int64),
            vectors=rng.normal(0, 5, (6, 4)).astype(np.float32),
        )
        save_embeddings(data, tmp_path / "train.hfv")
        assert run(["fit", "--train", tmp_path / "train.hfv",
                    "--out", tmp_path / "model.bin"]) == 0
        assert run(["index", "--model", tmp_path / "model.bin",
                    "--database", tmp_path / "train.hfv",
                    "--out", tmp_path / "index.bin"]) == 0
        capsys.readouterr()
        assert run(["eval", "--index", tmp_path / "index.bin",
                    "--queries", tmp_path / "train.hfv",
                    "--ks", "1", "--csv-out", tmp_path / "c.csv"]) == 0
        assert "MAP@1 = 1.000000" in capsys.readouterr().out

    def test_all_queries_excluded_exits_3(self, workdir, capsys):
        fit_and_index(workdir)
        from hiersearch.store import load_embeddings
        queries = load_embeddings(workdir / "data/queries.hfv")
        hopeless = EmbeddingSet(
            dim=queries.dim,
            ids=queries.ids.copy(),
            labels=np.full(len(queries), 5000, dtype=np.int64),
            vectors=queries.vectors.copy(),
        )
        save_embeddings(hopeless, workdir / "hopeless.hfv")
        assert run(["eval", "--index", workdir / "index.bin",
                    "--queries", workdir / "hopeless.hfv",
                    "--ks", "1", "--csv-out", workdir / "c.csv"]) == 3

    def test_profile_sets_alpha(self, workdir, capsys):
        fit_and_index(workdir)
        csv_a = workdir / "a.csv"
        csv_b = workdir / "b.csv"
        assert run(["eval", "--index", workdir / "index.bin",
                    "--queries", workdir / "data/queries.hfv",
                    "--ks", "5", "--profile", "cifar",
                    "--csv-out", csv_a]) == 0
        assert run(["eval", "--index", workdir / "index.bin",
                    "--queries", workdir / "data/queries.hfv",
                    "--ks", "5", "--alpha", "5",
                    "--csv-out", csv_b]) == 0
        assert csv_a.read_text() == csv_b.read_text()
