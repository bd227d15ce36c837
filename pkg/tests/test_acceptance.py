"""End-to-end acceptance suite; each test prints one PASS/FAIL line."""

import itertools
import json
import math
import random
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aurascreen.chem import compute_descriptors, parse_smiles, random_smiles
from aurascreen.cli import main
from aurascreen.cluster import CentroidIndex
from aurascreen.fingerprint import Fingerprint, ecfp, fingerprint_matrix, tanimoto
from aurascreen.harness import generate_world, run_enrichment_experiment
from aurascreen.losses import (
    DistillPair,
    RankingGroup,
    SftBatch,
    distill_loss,
    dpo_loss,
    plackett_luce_prob,
    sft_loss,
)
from aurascreen.metrics import enrichment_factor, hit_rate
from aurascreen.model import (
    StudentConfig,
    TokenReps,
    affinity_head,
    as_vars,
    gradcheck,
    init_student_params,
    init_teacher_params,
    teacher_forward,
    token_weights,
)
from aurascreen.sampler import (
    ActivityRecord,
    DistillCandidate,
    curate,
    distill_accept,
    group_batches,
    potency_bin,
)
from aurascreen.scoring import student_scores
from aurascreen.screening import CampaignConfig, property_filter, recheck_reasons, run_campaign
from test_chem import REFERENCE
from test_losses import direct_pl
from test_metrics import brute_ef
from test_model import SMALL_T, head_gradcheck, random_params, random_reps, student_gradcheck

SEEDS = range(5)


# 1 ---------------------------------------------------------------------------------

def _loss_gradchecks(seed):
    rng = np.random.default_rng(seed)
    yt, sig, norms = rng.normal(size=6), rng.uniform(0.5, 2, 6), rng.uniform(0, 2, 6)

    def sft(p):
        return sft_loss(SftBatch(p["y"], yt, sig, norms, lam=0.01))

    e_sft, _ = gradcheck(lambda p: sft(p)[0], lambda p: {"y": sft(p)[1]}, {"y": rng.normal(size=6)})

    ks = [int(k) for k in rng.integers(1, 6, size=4)]
    orders = [tuple(rng.permutation(k)) for k in ks]
    conf = rng.random(4)

    def groups(p):
        return [RankingGroup(p[f"g{i}"], orders[i], 0.1, conf[i]) for i in range(4)]

    e_dpo, _ = gradcheck(lambda p: dpo_loss(groups(p))[0],
                         lambda p: dict(zip((f"g{i}" for i in range(4)), dpo_loss(groups(p))[1])),
                         {f"g{i}": rng.normal(size=k) for i, k in enumerate(ks)})

    h_main, y_true = rng.normal(size=5), rng.normal()

    def dist(p):
        return distill_loss(DistillPair(p["h"], h_main, p["y"][0], y_true, 1.0, 1.0))

    e_dist, _ = gradcheck(lambda p: dist(p)[0], lambda p: {"h": dist(p)[1], "y": np.array([dist(p)[2]])},
                          {"h": rng.normal(size=5), "y": np.array([y_true + 0.5])})
    return {"sft_loss": e_sft, "dpo_loss": e_dpo, "distill_loss": e_dist}


def test_criterion_01_gradients(criterion):
    with criterion(1, "analytic gradients match central differences") as notes:
        t0 = time.perf_counter()
        worst = {}
        for seed in SEEDS:
            errs = _loss_gradchecks(seed)
            errs["affinity_head"] = head_gradcheck(seed)[0]
            errs["aurofast_forward"] = student_gradcheck(seed)[0]
            for k, v in errs.items():
                worst[k] = max(worst.get(k, 0.0), v)
        elapsed = time.perf_counter() - t0
        notes.append(f"max rel err {max(worst.values()):.1e}, {elapsed:.1f}s")
        assert all(v < 1e-4 for v in worst.values()), worst
        assert elapsed < 60


# 2 ---------------------------------------------------------------------------------

def test_criterion_02_plackett_luce(criterion):
    with criterion(2, "Plackett-Luce permutation sum and shift invariance"):
        rng = np.random.default_rng(2)
        for k in (2, 3, 4, 5):
            for tau in (0.1, 1.0):
                scores = rng.normal(size=k)
                probs = [plackett_luce_prob(RankingGroup(scores, p, tau))
                         for p in itertools.permutations(range(k))]
                assert abs(sum(probs) - 1.0) <= 1e-9
                order = tuple(rng.permutation(k))
                base = plackett_luce_prob(RankingGroup(scores, order, tau))
                assert base == pytest.approx(direct_pl(scores, order, tau), rel=1e-9)
                for shift in (-50.0, 3.7, 1e3):
                    moved = plackett_luce_prob(RankingGroup(scores + shift, order, tau))
                    assert abs(moved - base) <= 1e-9


# 3 ---------------------------------------------------------------------------------

def test_criterion_03_affinity_head(criterion):
    with criterion(3, "ligand weighting, protein-pair exclusion, permutation equivariance"):
        for n_prot, n_lig in [(1, 1), (2, 3), (5, 2), (8, 11)]:
            reps = random_reps(n_prot + n_lig, n=n_prot + n_lig, n_lig=n_lig)
            raw, norm = token_weights(reps, SMALL_T)
            lig = reps.is_ligand[0]
            assert raw[0][lig].sum() == 2 * raw[0][~lig].sum()
            assert abs(norm.sum() - 1.0) <= 1e-6
        for seed in SEEDS:
            reps = random_reps(seed, n=7, n_lig=3)
            P = as_vars(random_params(init_teacher_params, SMALL_T, seed))
            base = affinity_head(reps, P, SMALL_T)
            z = reps.z.copy()
            z[0, :4, :4] = np.random.default_rng(seed).normal(0, 100, size=(4, 4, SMALL_T.d_pair))
            moved = affinity_head(reps.with_features(reps.s, z), P, SMALL_T)
            assert np.array_equal(base.per_token_affinity, moved.per_token_affinity)
            perm = np.random.default_rng(seed + 7).permutation(7)
            shuffled = TokenReps(reps.s[:, perm], reps.z[:, perm][:, :, perm], reps.single_mask[:, perm],
                                 reps.pair_mask[:, perm][:, :, perm], reps.is_ligand[:, perm])
            a, _ = teacher_forward(reps, P, SMALL_T)
            b, _ = teacher_forward(shuffled, P, SMALL_T)
            assert abs(a.affinity[0] - b.affinity[0]) <= 1e-8


# 4 ---------------------------------------------------------------------------------

def test_criterion_04_enrichment_factor(criterion):
    with criterion(4, "EF counting oracle, null mean, N=200 fixture") as notes:
        rng = np.random.default_rng(4)
        checked = 0
        while checked < 1000:
            n = int(rng.integers(1, 300))
            labels = rng.random(n) < rng.uniform(0.01, 0.5)
            if not labels.any():
                continue
            scores = rng.integers(0, 20, size=n) / 4.0  # coarse grid forces ties
            fraction = float(rng.choice([0.01, 0.02, 0.05, 0.1, 0.5, 1.0]))
            assert enrichment_factor(scores, labels, fraction) == pytest.approx(
                brute_ef(scores.tolist(), labels.tolist(), fraction), rel=1e-12)
            checked += 1
        null = []
        for _ in range(10_000):
            labels = np.zeros(1000, bool)
            labels[rng.choice(1000, 10, replace=False)] = True
            null.append(enrichment_factor(rng.random(1000), labels, 0.01))
        notes.append(f"null mean EF1% {np.mean(null):.3f}")
        assert 0.9 <= np.mean(null) <= 1.1
        labels = np.zeros(200, bool)
        labels[[0, 1, 50, 150]] = True
        assert enrichment_factor(np.linspace(1, 0, 200), labels, 0.01) == 50.0


# 5 ---------------------------------------------------------------------------------

@settings(max_examples=10_000, deadline=None, database=None)
@given(st.integers(0, 2**128 - 1), st.integers(0, 2**128 - 1))
def _tanimoto_property(x, y):
    a, b = Fingerprint(x, 128), Fingerprint(y, 128)
    t = tanimoto(a, b)
    assert t == tanimoto(b, a) and 0.0 <= t <= 1.0
    union = bin(x | y).count("1")
    assert t == (bin(x & y).count("1") / union if union else 1.0)


def test_criterion_05_fingerprint_invariance(criterion):
    with criterion(5, "ECFP4 respelling invariance, Tanimoto properties") as notes:
        smiles = generate_world(55, 100).smiles
        rng = random.Random(5)
        spellings = 0
        for smi in smiles:
            mol = parse_smiles(smi)
            ref = ecfp(mol)
            for _ in range(10):
                alt = random_smiles(mol, rng)
                assert ecfp(parse_smiles(alt)) == ref
                spellings += 1
        _tanimoto_property()
        notes.append(f"{spellings} respellings")


# 6 ---------------------------------------------------------------------------------

def test_criterion_06_descriptors(criterion):
    with criterion(6, "descriptor panel and aspirin MW filter") as notes:
        for name, ref in sorted(REFERENCE.items()):
            d = compute_descriptors(parse_smiles(ref["smiles"]))
            assert abs(d.mw - ref["mw"]) <= 0.02, name
            assert (d.hbd, d.hba, d.rotatable_bonds, d.rings) == (
                ref["hbd"], ref["hba"], ref["rotatable_bonds"], ref["rings"]), name
            assert abs(d.clogp - ref["clogp"]) <= 0.3, name
            assert abs(d.esol - ref["esol"]) <= 0.3, name
        notes.append(f"{len(REFERENCE)} molecules")
        assert len(REFERENCE) >= 20
        verdict = property_filter(parse_smiles("CC(=O)Oc1ccccc1C(=O)O"))
        assert not verdict.passed and "mw_below_min" in verdict.reasons


# 7 ---------------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_07_campaign_determinism(criterion, tmp_path):
    with criterion(7, "10k campaign: byte-identical over reruns and workers 1/4/8") as notes:
        world = tmp_path / "world"
        assert main(["synth", "--out-dir", str(world), "--size", "10000", "--seed", "7"]) == 0
        config = CampaignConfig.load(world / "campaign.json")
        assert (config.stage1_keep, config.stage2_keep, config.shortlist_size) == (1000, 200, 50)
        outputs, times = [], []
        for run, workers in enumerate((1, 4, 8, 1)):
            config.worker_count = workers
            t0 = time.perf_counter()
            report = run_campaign(config)
            times.append(time.perf_counter() - t0)
            files = report.write(tmp_path / f"run{run}")
            outputs.append({n: open(files[n], "rb").read()
                            for n in ("report.json", "shortlist.csv", "score_distribution.csv")})
        notes.append("runs " + ", ".join(f"{t:.0f}s" for t in times))
        assert all(o == outputs[0] for o in outputs[1:])
        assert max(times) < 120
        doc = json.loads(outputs[0]["report.json"])
        lib_ids = {line.split("\t")[1] for line in (world / "library.smi").read_text().splitlines()}
        s1 = [e["id"] for e in doc["stage1"]]
        s2 = [e["id"] for e in doc["stage2"]]
        survivors = [f["id"] for f in doc["filters"] if f["passed"]]
        short = [r["id"] for r in doc["shortlist"]]
        assert len(s1) == min(1000, doc["metadata"]["parsed"]) and len(s2) == min(200, len(s1))
        assert set(short) <= set(survivors) <= set(s2) <= set(s1) <= lib_ids
        for stage in ("stage1", "stage2"):
            scores = [e["score"] for e in doc[stage]]
            assert all(a >= b for a, b in zip(scores, scores[1:]))
        th = config.thresholds
        for f in doc["filters"]:
            assert f["passed"] == (not f["reasons"])
            if f["descriptors"] is not None:
                prop = [r for r in f["reasons"] if r not in ("novelty", "not_in_allowlist")]
                assert recheck_reasons(f["descriptors"], th, f["fragment_count"]) == prop


# 8 ---------------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_08_stage1_throughput(criterion):
    with criterion(8, "stage-1 scoring >= 500 compounds/s/core on 100k") as notes:
        world = generate_world(8, 100_000)
        fpm = fingerprint_matrix(world.fps)
        cfg = StudentConfig(d_prot=world.protein.size)
        params = init_student_params(cfg, 0)
        rng = np.random.default_rng(8)
        picks = sorted(rng.choice(len(world), 100, replace=False).tolist())
        index = CentroidIndex([world.ids[i] for i in picks], [world.fps[i] for i in picks],
                              rng.normal(size=(100, cfg.d_prior)), 100)
        t0 = time.perf_counter()
        scores = student_scores(fpm, world.protein, params, cfg, index, workers=1)
        rate = len(scores) / (time.perf_counter() - t0)
        notes.append(f"{rate:,.0f} compounds/s on one core")
        assert len(scores) == 100_000 and np.all(np.isfinite(scores))
        assert rate >= 500


# 9 ---------------------------------------------------------------------------------

def _adversarial_records():
    recs = []
    recs += [ActivityRecord("T9", f"n{i}", 6.0 + 0.01 * i) for i in range(9)]  # one short of the floor
    recs += [ActivityRecord("T10", f"t{i}", 6.0) for i in range(10)]  # exactly at the floor
    edge, x = [], 5.0
    for k in range(8):  # labels accumulated by float addition, sitting on bin edges
        edge += [ActivityRecord("EDGE", f"e{k}-{j}", x) for j in range(7)]
        x += 0.15
    recs += edge
    recs += [ActivityRecord("DENSE", f"d{i}", 7.0 + 0.149 * (i % 2)) for i in range(40)]
    return recs


def test_criterion_09_sampler(criterion):
    with criterion(9, "curate filter/cap, single-target batches, distill boundary table"):
        data = _adversarial_records()
        for seed in range(5):
            out = curate(data, seed=seed)
            targets = {r.target_id for r in out}
            assert "T9" not in targets and "T10" in targets
            for t in targets:
                anchor = min(r.potency for r in data if r.target_id == t)
                bins = {}
                for r in out:
                    if r.target_id == t:
                        k = potency_bin(r.potency, anchor)
                        bins[k] = bins.get(k, 0) + 1
                assert max(bins.values()) <= 5
            assert sum(1 for r in out if r.target_id == "EDGE") == 8 * 5
            assert sum(1 for r in out if r.target_id == "DENSE") == 5
            for batch in group_batches(out, 4, seed):
                assert len({r.target_id for r in batch}) == 1
        table = [
            ((0.9, 0.6, 80, 0.3, 500), True),
            ((0.9, 0.6, 80, 0.3, 50), False),
            ((0.79, 0.6, 80, 0.3, 500), False),
            ((0.9, 0.5, 80, 0.3, 500), False),
            ((0.9, 0.6, 70, 0.3, 500), False),
            ((0.9, 0.6, 80, 0.6, 100), True),
        ]
        assert [distill_accept(DistillCandidate(*f)) for f, _ in table] == [e for _, e in table]


# 10 --------------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_10_end_to_end_enrichment(criterion, tmp_path):
    with criterion(10, "100k synthetic world: EF1% >= 5, AUPR >= 5x base rate") as notes:
        t0 = time.perf_counter()
        summary = run_enrichment_experiment(out_dir=tmp_path)
        elapsed = time.perf_counter() - t0
        m = summary["metrics"]
        notes.append(f"EF1% {m['ef1']:.1f}, AUPR {m['aupr']:.3f}, base rate {m['base_rate']:.4f}, "
                     f"{elapsed:.0f}s")
        assert m["ef1"] >= 5
        assert m["aupr"] >= 5 * m["base_rate"]
        assert elapsed < 600
        assert (tmp_path / "manifest.json").exists()


# 11 --------------------------------------------------------------------------------

def test_criterion_11_hit_rate(criterion):
    with criterion(11, "hit-rate arithmetic"):
        assert round(hit_rate(23, 33), 3) == 0.697
        assert round(hit_rate(2, 30), 3) == 0.067
        assert math.isclose(hit_rate(23, 33), 23 / 33)
