import json
import shutil

import pytest

from cosgraph import cli
from cosgraph.datasets import read_augmented, write_tudataset
from cosgraph.training import DivergenceError
from toy_data import triangle_corpus

TINY = ["--hidden", "8", "--layers", "1", "--epochs", "3", "--patience", "2", "--folds", "3", "--workers", "1"]


@pytest.fixture
def toy_dir(tmp_path):
    ds = triangle_corpus(per_class=6, seed=1)
    write_tudataset(ds.graphs, tmp_path / "TOY", "TOY")
    return tmp_path / "TOY"


def test_augment_writes_sidecar_deterministically(toy_dir, tmp_path, capsys):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    assert cli.main(["augment", "--data", str(toy_dir), "--out", str(a), "--workers", "1"]) == 0
    assert cli.main(["augment", "--data", str(toy_dir), "--out", str(b), "--workers", "1"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(read_augmented(a)[1]) == 12
    out = capsys.readouterr().out
    assert "global_eff" in out and "triangles" in out


def test_augment_mutag(mutag_dir, tmp_path):
    out = tmp_path / "m.txt"
    assert cli.main(["augment", "--data", str(mutag_dir), "--out", str(out), "--workers", "1"]) == 0
    assert sum(line.startswith("graph ") for line in out.read_text().splitlines()) == 188


def test_missing_dataset(tmp_path, capsys):
    assert cli.main(["augment", "--data", str(tmp_path / "NOPE")]) == 2
    assert "NOPE" in capsys.readouterr().err


def test_missing_file_named(toy_dir, capsys):
    (toy_dir / "TOY_graph_indicator.txt").unlink()
    assert cli.main(["augment", "--data", str(toy_dir)]) == 2
    assert "TOY_graph_indicator.txt" in capsys.readouterr().err


def test_data_root_fallback(toy_dir, tmp_path, monkeypatch):
    monkeypatch.setenv("COSGRAPH_DATA_ROOT", str(toy_dir.parent))
    monkeypatch.chdir(tmp_path)
    assert cli.main(["augment", "--data", "TOY", "--workers", "1"]) == 0
    assert (tmp_path / "TOY.aug.txt").is_file()


def test_feature_timeout(toy_dir, capsys):
    assert cli.main(["augment", "--data", str(toy_dir), "--budget", "1", "--workers", "1"]) == 3
    assert "graph 0" in capsys.readouterr().err


def test_train_from_sidecar(toy_dir, tmp_path, capsys):
    side = tmp_path / "s.txt"
    cli.main(["augment", "--data", str(toy_dir), "--out", str(side), "--workers", "1"])
    report = tmp_path / "r.json"
    rc = cli.main(["train", "--data", str(toy_dir), "--sidecar", str(side), "--out", str(report),
                   "--backbone", "cos-gin", "--lr", "0.01", *TINY])
    assert rc == 0
    out = capsys.readouterr().out
    config = json.loads(out.split("config: ", 1)[1].splitlines()[0])
    assert config["backbone"] == "cos-gin" and config["lr"] == 0.01
    assert "±" in out
    data = json.loads(report.read_text())
    assert len(data["folds"]) == 3
    assert data["config"]["seed"] == 42


def test_train_needs_sidecar(toy_dir, tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert cli.main(["train", "--data", str(toy_dir), *TINY]) == 2
    assert "--augment-inline" in capsys.readouterr().err


def test_train_rejects_wrong_sidecar(toy_dir, mutag_dir, tmp_path):
    side = tmp_path / "m.txt"
    cli.main(["augment", "--data", str(mutag_dir), "--out", str(side), "--workers", "1"])
    assert cli.main(["train", "--data", str(toy_dir), "--sidecar", str(side), *TINY]) == 2


@pytest.mark.parametrize("flags", [["--layers", "0"], ["--patience", "5", "--epochs", "5"], ["--lr", "-1"]])
def test_train_config_errors(toy_dir, flags):
    assert cli.main(["train", "--data", str(toy_dir), "--augment-inline", *TINY, *flags]) == 5


def test_train_divergence(toy_dir, tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise DivergenceError("non-finite training loss at epoch 1", 1)

    monkeypatch.setattr("cosgraph.training.train_fold", boom)
    rc = cli.main(["train", "--data", str(toy_dir), "--augment-inline", "--out", str(tmp_path / "r.json"), *TINY])
    assert rc == 4


def test_bad_choice_exits_usage(toy_dir):
    with pytest.raises(SystemExit) as info:
        cli.main(["train", "--data", str(toy_dir), "--backbone", "gat"])
    assert info.value.code == 2


def test_wl_demo_pairs(capsys):
    assert cli.main(["wl-demo"]) == 0
    out = capsys.readouterr().out
    assert out.count("WL: indistinguishable / features: distinguished") == 2
    assert cli.main(["wl-demo", "--pair", "rook-shrikhande"]) == 0
    assert "witness: max_clique_size: 4 vs 3" in capsys.readouterr().out
    assert cli.main(["wl-demo", "--pair", "c6-2c3"]) == 0
    assert "witness: triangle_total: 0 vs 2" in capsys.readouterr().out


def test_wl_demo_mismatch(monkeypatch):
    from cosgraph.graph import cycle_graph
    from cosgraph.wl import GraphPair

    pair = GraphPair("same", cycle_graph(4), cycle_graph(4), "C4", "C4", "identical")
    monkeypatch.setattr(cli, "builtin_pairs", lambda: {"same": pair})
    assert cli.main(["wl-demo", "--pair", "all"]) == 6


def test_bench(toy_dir, tmp_path, capsys):
    out = tmp_path / "b.csv"
    assert cli.main(["bench", "--data", str(toy_dir), "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 2 + 12
    assert "total" in capsys.readouterr().out
