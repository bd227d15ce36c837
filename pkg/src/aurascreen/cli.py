"""Command-line entry point: ``aurascreen <command> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .chem import SmilesError, compute_descriptors, parse_smiles, read_library, write_library
from .cluster import cluster_library, write_prior_index
from .fingerprint import ecfp, write_cache


def _records(args):
    if args.smiles:
        return [(f"mol{i + 1}", s) for i, s in enumerate(args.smiles)]
    return read_library(args.library)


def _emit(doc, out):
    text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_parse(args):
    rows = []
    for cid, smi in _records(args):
        row = {"id": cid, "smiles": smi}
        try:
            mol = parse_smiles(smi)
        except SmilesError as exc:
            row.update(valid=False, error=f"{type(exc).__name__}: {exc}")
            rows.append(row)
            continue
        row.update(valid=mol.valid, atoms=len(mol.atoms), bonds=len(mol.bonds),
                   fragments=mol.fragment_count)
        if mol.valid:
            row["descriptors"] = compute_descriptors(mol).as_dict()
        else:
            row["error"] = f"ValenceViolation at atom {mol.valence_error}"
        rows.append(row)
    _emit(rows, args.out)
    return 0 if all(r["valid"] for r in rows) else 1


def cmd_fp(args):
    items, failed = [], 0
    for cid, smi in _records(args):
        try:
            mol = parse_smiles(smi)
            fp = ecfp(mol, args.radius, args.width)
        except (SmilesError, ValueError) as exc:
            print(f"{cid}\terror: {exc}", file=sys.stderr)
            failed += 1
            continue
        items.append((cid, fp))
    if args.cache:
        write_cache(args.cache, items)
    else:
        for cid, fp in items:
            print(f"{cid}\t{fp.to_hex()}")
    return 1 if failed else 0


def cmd_cluster(args):
    from .scoring import build_library_index, parse_library
    from .model import TeacherConfig, init_teacher_params, load_checkpoint, read_protein_embedding

    lib = parse_library(read_library(args.library))
    fps = dict(zip(lib.ids, lib.fps))
    if args.prior_index:
        if not args.protein_embedding:
            print("--prior-index needs --protein-embedding", file=sys.stderr)
            return 2
        protein = read_protein_embedding(args.protein_embedding)
        tcfg = TeacherConfig()
        tparams = load_checkpoint(args.teacher_checkpoint) if args.teacher_checkpoint \
            else init_teacher_params(tcfg, args.seed)
        index, clusters = build_library_index(lib, protein, tparams, tcfg, args.threshold,
                                              args.compounds_per_center, args.max_size, args.seed)
        write_prior_index(args.prior_index, index)
    else:
        clusters = cluster_library(fps, args.threshold, args.max_size, args.seed)
    doc = {"threshold": args.threshold, "compounds": len(fps),
           "skipped": [{"id": c, "reason": r} for c, r in lib.rejected],
           "clusters": [{"centroid": c.centroid_id, "seed": c.seed_id, "members": list(c.member_ids)}
                        for c in clusters]}
    _emit(doc, args.out)
    return 0


def _load_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _out_dir(args, config, base, default):
    """``--out`` is relative to the cwd; a config ``output_dir`` to the config file."""
    if args.out:
        return args.out
    return os.path.join(base, config.get("output_dir") or default)


def cmd_train_student(args):
    from .harness import run_train_student
    config = _load_json(args.config)
    base = os.path.dirname(os.path.abspath(args.config))
    result, files = run_train_student(config, _out_dir(args, config, base, "train_student_out"), base)
    print(json.dumps({"final_loss": result.loss_curve[-1] if result.loss_curve else None,
                      "outputs": files}, indent=1, sort_keys=True))
    return 0


def cmd_train_head(args):
    from .harness import run_train_head
    config = _load_json(args.config)
    base = os.path.dirname(os.path.abspath(args.config))
    result, files = run_train_head(config, _out_dir(args, config, base, "train_head_out"), base)
    print(json.dumps({"final_loss": result.loss_curve[-1] if result.loss_curve else None,
                      **result.extra, "outputs": files}, indent=1, sort_keys=True))
    return 0


def cmd_campaign(args):
    from .screening import CampaignConfig, run_campaign
    config = CampaignConfig.load(args.config)
    if args.workers:
        config.worker_count = args.workers
    out = args.out or config.output_dir or "campaign_out"
    report = run_campaign(config)
    files = report.write(out)
    print(json.dumps({"shortlist": len(report.shortlist), "outputs": files}, indent=1, sort_keys=True))
    return 0


def _read_two_col(path, convert):
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if rows and rows[0] and rows[0][0].strip().lower() in ("id", "compound_id"):
        rows = rows[1:]
    for row in rows:
        if len(row) >= 2 and row[0].strip():
            out[row[0].strip()] = convert(row[1].strip())
    return out


def _label(text):
    t = text.lower()
    if t in ("1", "true", "active", "yes"):
        return True
    if t in ("0", "false", "inactive", "no"):
        return False
    raise ValueError(f"unrecognised label {text!r}")


def cmd_eval(args):
    from .metrics import evaluate
    scores = _read_two_col(args.scores, float)
    labels = _read_two_col(args.labels, _label)
    ids = sorted(set(scores) & set(labels))
    missing = len(set(scores) ^ set(labels))
    fractions = tuple(float(x) for x in args.fractions.split(","))
    doc = evaluate([scores[i] for i in ids], [labels[i] for i in ids], fractions)
    doc["unmatched_ids"] = missing
    _emit(doc, args.out)
    return 0


def cmd_report(args):
    doc = _load_json(args.report)
    meta = doc["metadata"]
    lines = [
        f"target            {meta['target_id']}",
        f"config hash       {meta['config_hash'][:16]}",
        f"library / parsed  {meta['library_size']} / {meta['parsed']}",
        f"stage 1 kept      {len(doc['stage1'])}",
        f"stage 2 kept      {len(doc['stage2'])}",
        f"filter survivors  {sum(1 for f in doc['filters'] if f['passed'])}",
        f"shortlist         {len(doc['shortlist'])}",
    ]
    reasons = {}
    for f in doc["filters"]:
        for r in f["reasons"]:
            reasons[r] = reasons.get(r, 0) + 1
    for r in sorted(reasons):
        lines.append(f"  rejected: {r:<18}{reasons[r]}")
    lines.append("")
    lines.append(f"{'rank':>4}  {'id':<20}{'stage2':>10}{'stage1':>10}  smiles")
    for k, row in enumerate(doc["shortlist"][:args.top], 1):
        lines.append(f"{k:>4}  {row['id']:<20}{row['stage2_score']:>10.4f}{row['stage1_score']:>10.4f}  {row['smiles']}")
    print("\n".join(lines))
    return 0


def cmd_synth(args):
    """Write a synthetic library, activity table, protein embedding and campaign config."""
    from .harness import generate_world
    from .model import write_protein_embedding
    from .sampler import ActivityRecord, write_activity_csv
    world = generate_world(args.seed, args.size, args.noise)
    os.makedirs(args.out_dir, exist_ok=True)
    write_library(os.path.join(args.out_dir, "library.smi"), zip(world.ids, world.smiles))
    write_protein_embedding(os.path.join(args.out_dir, "protein.emb"), world.protein)
    recs = [ActivityRecord("SYN", cid, float(round(5.0 + y, 4)))
            for cid, y in zip(world.ids, world.labels)]
    write_activity_csv(os.path.join(args.out_dir, "activities.csv"), recs)
    active = world.actives(0.01)
    with open(os.path.join(args.out_dir, "actives.smi"), "w", encoding="utf-8") as fh:
        for cid, smi, a in zip(world.ids, world.smiles, active):
            if a:
                fh.write(f"{smi}\t{cid}\n")
    n = len(world)
    config = {"target_id": "SYN", "protein_embedding_path": "protein.emb",
              "library_path": "library.smi", "known_actives_path": "actives.smi",
              "stage1_keep": max(1, min(10000, n // 10)), "stage2_keep": max(1, min(500, n // 50)),
              "shortlist_size": max(1, min(50, n // 200)), "seed": args.seed,
              "output_dir": "campaign_out"}
    with open(os.path.join(args.out_dir, "campaign.json"), "w", encoding="utf-8") as fh:
        json.dump(config, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"wrote {n} compounds to {args.out_dir}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="aurascreen", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def add_input(sp):
        g = sp.add_mutually_exclusive_group(required=True)
        g.add_argument("--smiles", nargs="+", help="one or more SMILES strings")
        g.add_argument("--library", help="library file (<SMILES><TAB><id> per line)")

    sp = sub.add_parser("parse", help="parse SMILES and print descriptors as JSON")
    add_input(sp)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_parse)

    sp = sub.add_parser("fp", help="ECFP fingerprints as hex, or an AFP1 cache")
    add_input(sp)
    sp.add_argument("--radius", type=int, default=2)
    sp.add_argument("--width", type=int, default=1024)
    sp.add_argument("--cache", help="write an AFP1 binary cache instead of hex lines")
    sp.set_defaults(func=cmd_fp)

    sp = sub.add_parser("cluster", help="Butina clustering, optionally with a prior index")
    sp.add_argument("--library", required=True)
    sp.add_argument("--threshold", type=float, default=0.6)
    sp.add_argument("--max-size", type=int, default=200_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--prior-index", help="also write a prior-index file here")
    sp.add_argument("--protein-embedding")
    sp.add_argument("--teacher-checkpoint")
    sp.add_argument("--compounds-per-center", type=int, default=100_000)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_cluster)

    for name, func in (("train-student", cmd_train_student), ("train-head", cmd_train_head)):
        sp = sub.add_parser(name, help=f"{name.replace('-', ' ')} from a JSON config")
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", help="output directory (overrides output_dir)")
        sp.set_defaults(func=func)

    for name in ("campaign", "screen"):
        sp = sub.add_parser(name, help="run the two-stage screening campaign")
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", help="output directory (overrides output_dir)")
        sp.add_argument("--workers", type=int, help="override worker_count")
        sp.set_defaults(func=cmd_campaign)

    sp = sub.add_parser("eval", help="enrichment / AUPR / ROC-AUC from score and label CSVs")
    sp.add_argument("--scores", required=True, help="CSV: id,score")
    sp.add_argument("--labels", required=True, help="CSV: id,label")
    sp.add_argument("--fractions", default="0.01,0.05")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("report", help="summarize a campaign report.json")
    sp.add_argument("--report", required=True)
    sp.add_argument("--top", type=int, default=20)
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("synth", help="write a synthetic library and campaign inputs")
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--size", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--noise", type=float, default=0.1)
    sp.set_defaults(func=cmd_synth)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"aurascreen: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
