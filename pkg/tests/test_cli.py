"""Command-line interface: exit codes, artifacts, determinism."""

import json

import pytest

from conftest import EX
from tabsema import synthetic
from tabsema.cli import EXIT_MISMATCH, EXIT_OK, EXIT_PARSE_ERROR, main
from tabsema.kb import KBSnapshot, EntityRecord, Triple, TripleObject, \
    load_snapshot, save_snapshot
from tabsema.p2vec import load_properties, mine_candidate_properties
from tabsema.tables import ClassCatalog, save_catalog, save_gold_labels, \
    save_table_json

RUN_INI = """\
hidden = 6
attn_size = 4
t_len = 4
epochs = 2
batch_size = 8
learning_rate = 0.01
base_epochs = 50
seed = 0
"""


def write_embeddings(data, path):
    with open(path, "w", encoding="utf-8") as f:
        for c in range(2):
            for j in range(8):
                word = "c%dw%d" % (c, j)
                vec = data.embedding.lookup(word)
                f.write(word + " " + " ".join(repr(float(x)) for x in vec) + "\n")


@pytest.fixture(scope="module")
def world(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = synthetic.generate(seed=0, n_classes=2, entities_per_class=8,
                              n_columns=10, rows_per_column=5,
                              words_per_class=8, d_w=6)
    tables_dir = root / "tables"
    tables_dir.mkdir()
    for table in data.tables.values():
        save_table_json(table, tables_dir / (table.id + ".json"))
    save_gold_labels(data.gold, root / "gold.csv")
    save_catalog(data.catalog, root / "catalog.json")
    write_embeddings(data, root / "emb.txt")
    save_snapshot(data.snapshot, root / "snapshot.json")
    (root / "run.ini").write_text(RUN_INI, encoding="utf-8")

    env = {"root": root, "data": data,
           "tables": str(tables_dir), "gold": str(root / "gold.csv"),
           "catalog": str(root / "catalog.json"),
           "emb": str(root / "emb.txt"),
           "kb": "snapshot:" + str(root / "snapshot.json"),
           "config": str(root / "run.ini")}

    assert main(["mine-properties", "--catalog", env["catalog"],
                 "--out", str(root / "props.json"), "--kb", env["kb"],
                 "--config", env["config"]]) == EXIT_OK
    env["props"] = str(root / "props.json")

    model_dir = root / "model"
    assert main(["train", "--tables", env["tables"], "--gold", env["gold"],
                 "--catalog", env["catalog"], "--embeddings", env["emb"],
                 "--out", str(model_dir), "--config", env["config"],
                 "--properties", env["props"], "--kb", env["kb"]]) == EXIT_OK
    env["model"] = str(model_dir)
    return env


class TestSnapshotBuild:
    def test_valid_file(self, tmp_path, capsys):
        nt = tmp_path / "kb.nt"
        nt.write_text(
            '<%se1> <%slabel> "one"@en .\n'
            '<%se1> <%scount> "3"^^<http://www.w3.org/2001/XMLSchema#integer> .\n'
            % (EX, EX, EX, EX), encoding="utf-8")
        out = tmp_path / "snap.json"
        assert main(["snapshot-build", str(nt), str(out)]) == EXIT_OK
        snap = load_snapshot(out)
        assert EX + "e1" in snap.entities

    def test_malformed_file(self, tmp_path, capsys):
        nt = tmp_path / "kb.nt"
        nt.write_text("<http://a> <http://b> <http://c> .\nnot a triple\n",
                      encoding="utf-8")
        assert main(["snapshot-build", str(nt),
                     str(tmp_path / "snap.json")]) == EXIT_PARSE_ERROR
        assert "line 2" in capsys.readouterr().err

    def test_empty_file(self, tmp_path):
        nt = tmp_path / "kb.nt"
        nt.write_text("", encoding="utf-8")
        out = tmp_path / "snap.json"
        assert main(["snapshot-build", str(nt), str(out)]) == EXIT_OK
        assert load_snapshot(out).entities == {}


class TestMineProperties:
    def test_prints_d1_matching_oracle(self, world, capsys, tmp_path):
        out = tmp_path / "props.json"
        assert main(["mine-properties", "--catalog", world["catalog"],
                     "--out", str(out), "--kb", world["kb"],
                     "--config", world["config"]]) == EXIT_OK
        printed = int(capsys.readouterr().out.strip().splitlines()[-1])
        snapshot = load_snapshot(world["kb"][len("snapshot:"):])
        catalog = world["data"].catalog
        expected = mine_candidate_properties(catalog, 0.005, snapshot)
        assert printed == expected.d1
        assert tuple(load_properties(out).properties) == expected.properties

    def test_rerun_is_byte_identical(self, world, tmp_path):
        out1, out2 = tmp_path / "p1.json", tmp_path / "p2.json"
        for out in (out1, out2):
            assert main(["mine-properties", "--catalog", world["catalog"],
                         "--out", str(out), "--kb", world["kb"]]) == EXIT_OK
        assert out1.read_bytes() == out2.read_bytes()

    def test_sigma_one_with_no_universal_property(self, tmp_path, capsys):
        # hand-built snapshot: two entities of one class, disjoint properties
        entities = {
            EX + "e1": EntityRecord(EX + "e1", ["one"], {EX + "C"}),
            EX + "e2": EntityRecord(EX + "e2", ["two"], {EX + "C"}),
        }
        triples = {
            EX + "e1": [Triple(EX + "e1", EX + "pA",
                               TripleObject("text", "x"))],
            EX + "e2": [Triple(EX + "e2", EX + "pB",
                               TripleObject("text", "y"))],
        }
        snap = KBSnapshot(entities, triples,
                          {EX + "C": sorted(entities)})
        snap_path = tmp_path / "snap.json"
        save_snapshot(snap, snap_path)
        cat_path = tmp_path / "cat.json"
        save_catalog(ClassCatalog([("C", EX + "C")]), cat_path)
        out = tmp_path / "props.json"
        assert main(["mine-properties", "--catalog", str(cat_path),
                     "--out", str(out), "--kb", "snapshot:" + str(snap_path),
                     "--sigma", "1.0"]) == EXIT_OK
        assert capsys.readouterr().out.strip().splitlines()[-1] == "0"
        assert load_properties(out).properties == ()


class TestTrain:
    def test_artifacts_written(self, world):
        root = world["root"]
        model = root / "model"
        for name in ("hnn.ckpt", "losses.json", "meta.json",
                     "properties.json", "base_p2vec.npz", "ensemble1.npz",
                     "ensemble2.npz"):
            assert (model / name).exists(), name
        meta = json.loads((model / "meta.json").read_text(encoding="utf-8"))
        assert set(meta["scorers"]) == {"hnn", "p2vec", "ensemble1",
                                        "ensemble2"}
        assert meta["fingerprint"]
        losses = json.loads((model / "losses.json").read_text())
        assert len(losses) == 2

    def test_unknown_gold_class_exits_mismatch(self, world, tmp_path):
        bad_gold = tmp_path / "gold.csv"
        bad_gold.write_text("t000,0,Nope\n", encoding="utf-8")
        assert main(["train", "--tables", world["tables"],
                     "--gold", str(bad_gold), "--catalog", world["catalog"],
                     "--embeddings", world["emb"],
                     "--out", str(tmp_path / "m"),
                     "--config", world["config"]]) == EXIT_MISMATCH


class TestPredict:
    def test_each_scorer_runs(self, world, tmp_path):
        for scorer in ("hnn", "p2vec", "ensemble1", "ensemble2",
                       "lookup-vote"):
            out = tmp_path / ("preds_%s.csv" % scorer)
            assert main(["predict", "--model", world["model"],
                         "--tables", world["tables"],
                         "--targets", world["gold"], "--out", str(out),
                         "--embeddings", world["emb"], "--kb", world["kb"],
                         "--scorer", scorer]) == EXIT_OK, scorer
            assert out.exists()

    def test_rerun_is_byte_identical(self, world, tmp_path):
        outs = [tmp_path / "p1.csv", tmp_path / "p2.csv"]
        for out in outs:
            assert main(["predict", "--model", world["model"],
                         "--tables", world["tables"],
                         "--targets", world["gold"], "--out", str(out),
                         "--embeddings", world["emb"]]) == EXIT_OK
        assert outs[0].read_bytes() == outs[1].read_bytes()

    def test_missing_checkpoint_exits_mismatch(self, world, tmp_path):
        broken = tmp_path / "model"
        broken.mkdir()
        meta = json.loads(
            (world["root"] / "model" / "meta.json").read_text())
        (broken / "meta.json").write_text(json.dumps(meta), encoding="utf-8")
        assert main(["predict", "--model", str(broken),
                     "--tables", world["tables"], "--targets", world["gold"],
                     "--out", str(tmp_path / "p.csv"),
                     "--embeddings", world["emb"]]) == EXIT_MISMATCH

    def test_catalog_mismatch_exits_mismatch(self, world, tmp_path):
        tampered = tmp_path / "model"
        tampered.mkdir()
        model_dir = world["root"] / "model"
        for name in ("hnn.ckpt",):
            (tampered / name).write_bytes((model_dir / name).read_bytes())
        meta = json.loads((model_dir / "meta.json").read_text())
        meta["catalog"] = [["Other", EX + "Other"], ["X", EX + "X"]]
        (tampered / "meta.json").write_text(json.dumps(meta),
                                            encoding="utf-8")
        assert main(["predict", "--model", str(tampered),
                     "--tables", world["tables"], "--targets", world["gold"],
                     "--out", str(tmp_path / "p.csv"),
                     "--embeddings", world["emb"]]) == EXIT_MISMATCH


@pytest.fixture(scope="module")
def predictions(world, tmp_path_factory):
    out = tmp_path_factory.mktemp("eval") / "preds.csv"
    assert main(["predict", "--model", world["model"],
                 "--tables", world["tables"], "--targets", world["gold"],
                 "--out", str(out), "--embeddings", world["emb"]]) == EXIT_OK
    return str(out)


class TestEvaluate:
    def test_report_written(self, world, predictions, tmp_path, capsys):
        out = tmp_path / "report.json"
        assert main(["evaluate", "--predictions", predictions,
                     "--gold", world["gold"], "--out", str(out),
                     "--config", world["config"]]) == EXIT_OK
        assert "accuracy:" in capsys.readouterr().out
        report = json.loads(out.read_text(encoding="utf-8"))
        assert 0.0 <= report["accuracy"] <= 1.0
        assert report["n_columns"] == 10

    def test_fingerprint_mismatch_requires_force(self, world, predictions,
                                                 tmp_path):
        args = ["evaluate", "--predictions", predictions,
                "--gold", world["gold"], "--config", world["config"],
                "--seed", "999"]
        assert main(args) == EXIT_MISMATCH
        assert main(args + ["--force"]) == EXIT_OK


def test_unknown_kb_spec_rejected(world, tmp_path):
    with pytest.raises(ValueError):
        main(["mine-properties", "--catalog", world["catalog"],
              "--out", str(tmp_path / "p.json"), "--kb", "bogus:thing"])
