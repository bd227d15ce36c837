import json

import pytest

from aurascreen.cli import main
from aurascreen.fingerprint import read_cache

TEACHER = {"d_single": 8, "d_pair": 4, "n_heads": 2, "head_dim": 4, "opm_dim": 2, "n_blocks": 1,
           "head_hidden": 8, "n_protein_tokens": 4}


@pytest.fixture(scope="module")
def world(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--out-dir", str(d), "--size", "400", "--seed", "2"]) == 0
    return d


def test_synth_outputs(world):
    assert {p.name for p in world.iterdir()} >= {"library.smi", "protein.emb", "activities.csv",
                                                 "actives.smi", "campaign.json"}
    assert len((world / "library.smi").read_text().splitlines()) == 400
    assert len((world / "actives.smi").read_text().splitlines()) == 4
    config = json.loads((world / "campaign.json").read_text())
    assert (config["stage1_keep"], config["stage2_keep"], config["shortlist_size"]) == (40, 8, 2)


def test_parse(capsys, tmp_path):
    assert main(["parse", "--smiles", "CCO", "c1ccccc1"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert [r["atoms"] for r in rows] == [3, 6]
    assert rows[0]["descriptors"]["mw"] == pytest.approx(46.069, abs=0.01)
    out = tmp_path / "p.json"
    assert main(["parse", "--smiles", "C1CC", "O(C)(C)C", "--out", str(out)]) == 1
    bad = json.loads(out.read_text())
    assert [r["valid"] for r in bad] == [False, False]
    assert bad[1]["error"].startswith("ValenceViolation")


def test_fp(capsys, tmp_path, world):
    assert main(["fp", "--smiles", "CCO", "--width", "256"]) == 0
    cid, hexfp = capsys.readouterr().out.strip().split("\t")
    assert cid == "mol1" and len(hexfp) == 64
    cache = tmp_path / "fps.afp"
    assert main(["fp", "--library", str(world / "library.smi"), "--cache", str(cache)]) == 0
    assert len(read_cache(cache)) == 400
    assert main(["fp", "--smiles", "C1CC"]) == 1


def test_cluster(tmp_path, world):
    out = tmp_path / "clusters.json"
    prior = tmp_path / "prior.tsv"
    assert main(["cluster", "--library", str(world / "library.smi"), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert sum(len(c["members"]) for c in doc["clusters"]) == 400
    assert main(["cluster", "--library", str(world / "library.smi"), "--prior-index", str(prior),
                 "--protein-embedding", str(world / "protein.emb"),
                 "--compounds-per-center", "100", "--out", str(out)]) == 0
    assert prior.read_text().splitlines()[0] == "dim=16 count=4"
    assert main(["cluster", "--library", str(world / "library.smi"), "--prior-index", str(prior)]) == 2


def test_campaign_and_report(tmp_path, world, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["campaign", "--config", str(world / "campaign.json"), "--out", str(a)]) == 0
    assert main(["screen", "--config", str(world / "campaign.json"), "--out", str(b), "--workers", "2"]) == 0
    for name in ("report.json", "shortlist.csv", "score_distribution.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert json.loads((a / "timings.json").read_text())["total"] > 0
    capsys.readouterr()
    assert main(["report", "--report", str(a / "report.json"), "--top", "1"]) == 0
    text = capsys.readouterr().out
    assert "stage 1 kept      40" in text and "stage 2 kept      8" in text


def test_campaign_error_writes_nothing(tmp_path, world):
    config = json.loads((world / "campaign.json").read_text())
    config.update(library_path=str(world / "missing.smi"), protein_embedding_path=str(world / "protein.emb"),
                  known_actives_path=None)
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(config))
    out = tmp_path / "out"
    assert main(["campaign", "--config", str(path), "--out", str(out)]) == 2
    assert not out.exists()
    config.update(library_path=str(world / "library.smi"), stage1_keep=1, stage2_keep=5)
    path.write_text(json.dumps(config))
    assert main(["campaign", "--config", str(path), "--out", str(out)]) == 2
    assert not out.exists()


def test_eval(tmp_path, capsys):
    scores = tmp_path / "s.csv"
    labels = tmp_path / "l.csv"
    scores.write_text("id,score\n" + "".join(f"c{i},{s}\n" for i, s in enumerate([0.9, 0.8, 0.7, 0.6, 0.5, 0.4])))
    labels.write_text("".join(f"c{i},{y}\n" for i, y in enumerate([1, 0, 1, 1, 0, 0])) + "extra,1\n")
    assert main(["eval", "--scores", str(scores), "--labels", str(labels), "--fractions", "0.5"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["auroc"] == pytest.approx(7 / 9) and doc["unmatched_ids"] == 1
    assert doc["ef_0.5"] == pytest.approx((2 / 3) / 0.5)


def test_train_commands(tmp_path, world, capsys):
    student = tmp_path / "student.json"
    student.write_text(json.dumps({"world": {"seed": 1, "size": 40}, "epochs": 1, "teacher": TEACHER,
                                   "student": {"width": 8, "n_heads": 2, "n_blocks": 1},
                                   "output_dir": "stu"}))
    assert main(["train-student", "--config", str(student)]) == 0
    assert (tmp_path / "stu" / "student.auro").exists()
    head = tmp_path / "head.json"
    head.write_text(json.dumps({"library_path": str(world / "library.smi"),
                                "activities_path": str(world / "activities.csv"),
                                "protein_embedding_path": str(world / "protein.emb"),
                                "target_id": "SYN", "epochs": 1, "teacher": TEACHER}))
    capsys.readouterr()
    assert main(["train-head", "--config", str(head), "--out", str(tmp_path / "head")]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert "baseline_probability" in doc and (tmp_path / "head" / "manifest.json").exists()
