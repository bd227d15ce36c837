"""Dataset curation, group-aware batching, ranking groups and labeling rules."""

from __future__ import annotations

import csv
import enum
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

MIN_RECORDS_PER_TARGET = 10
BIN_WIDTH = 0.15
MAX_PER_BIN = 5
DEFAULT_DPO_WINDOW = 1.0
INACTIVE_NM = 20000.0
INACTIVE_PCHEMBL = 4.5
ACTIVE_NM = 10000.0
BIN_EPS = 1e-9  # absorbs float error so 5.15 - 5.00 lands in bin 1, not 0

ACTIVITY_HEADER = ("target_id", "compound_id", "pxc50", "activity_value_nm", "pchembl", "assay_kind")


class EmptyClass(ValueError):
    pass


class AssayKind(str, enum.Enum):
    DOSE_RESPONSE = "dose_response"
    SCREENING = "screening"


class Activity(str, enum.Enum):
    ACTIVE = "active"
    INACTIVE = "inactive"
    UNLABELED = "unlabeled"


@dataclass(frozen=True)
class ActivityRecord:
    target_id: str
    compound_id: str
    pxc50: float = None
    activity_value_nm: float = None
    pchembl: float = None
    assay_kind: AssayKind = AssayKind.DOSE_RESPONSE

    def __post_init__(self):
        if self.pxc50 is None and self.activity_value_nm is None and self.pchembl is None:
            raise ValueError(f"{self.compound_id}: no activity value present")
        object.__setattr__(self, "assay_kind", AssayKind(self.assay_kind))

    @property
    def potency(self):
        """Log-scale label: pxc50, else pchembl, else -log10 of the molar value."""
        if self.pxc50 is not None:
            return self.pxc50
        if self.pchembl is not None:
            return self.pchembl
        return 9.0 - math.log10(self.activity_value_nm)

    @property
    def potency_nm(self):
        if self.activity_value_nm is not None:
            return self.activity_value_nm
        return 10.0 ** (9.0 - self.potency)


def _by_target(records):
    groups = defaultdict(list)
    for rec in records:
        groups[rec.target_id].append(rec)
    return {t: groups[t] for t in sorted(groups)}


def potency_bin(value, anchor, width=BIN_WIDTH):
    """Index of the half-open bin ``[anchor + k*width, anchor + (k+1)*width)``."""
    return math.floor((value - anchor) / width + BIN_EPS)


def curate(records, seed=0, min_records=MIN_RECORDS_PER_TARGET, width=BIN_WIDTH,
           max_per_bin=MAX_PER_BIN):
    """Target filter, then a per-bin cap with seeded uniform selection.

    Survivors keep their input order.
    """
    records = list(records)
    rng = np.random.default_rng(seed)
    keep = set()
    for target, recs in _by_target(records).items():
        if len(recs) < min_records:
            continue
        anchor = min(r.potency for r in recs)
        bins = defaultdict(list)
        for r in recs:
            bins[potency_bin(r.potency, anchor, width)].append(r)
        for k in sorted(bins):
            members = bins[k]
            if len(members) > max_per_bin:
                picked = rng.choice(len(members), size=max_per_bin, replace=False)
                members = [members[i] for i in sorted(picked.tolist())]
            keep.update(id(r) for r in members)
    return [r for r in records if id(r) in keep]


def group_batches(records, batch_size, seed=0):
    """Single-target batches; target order and member order shuffled by ``seed``."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    rng = np.random.default_rng(seed)
    groups = list(_by_target(records).values())
    batches = []
    for g in rng.permutation(len(groups)).tolist():
        recs = groups[g]
        order = rng.permutation(len(recs)).tolist()
        shuffled = [recs[i] for i in order]
        for start in range(0, len(shuffled), batch_size):
            batches.append(shuffled[start:start + batch_size])
    return batches


@dataclass(frozen=True)
class DpoGroup:
    """K records of one target; ``true_order`` indexes ``records`` best-first."""

    target_id: str
    records: tuple
    true_order: tuple


def _ranking(records):
    return tuple(sorted(range(len(records)),
                        key=lambda i: (-records[i].potency, records[i].compound_id)))


def build_dpo_groups(records, group_size, window=DEFAULT_DPO_WINDOW):
    """Windowed groups of ``group_size`` records with a label span <= ``window``.

    Records of a target are sorted by label and scanned greedily: a window
    starting at the current record becomes a group when its span fits,
    otherwise the scan moves on by one record.
    """
    if group_size < 2:
        raise ValueError("group_size must be >= 2")
    out = []
    for target, recs in _by_target(records).items():
        recs = sorted(recs, key=lambda r: (r.potency, r.compound_id))
        i = 0
        while i + group_size <= len(recs):
            chunk = recs[i:i + group_size]
            if chunk[-1].potency - chunk[0].potency <= window + 1e-12:
                members = tuple(sorted(chunk, key=lambda r: r.compound_id))
                out.append(DpoGroup(target, members, _ranking(members)))
                i += group_size
            else:
                i += 1
    return out


def label_activity(rec):
    """Active / inactive / unlabeled by the potency thresholds."""
    if (rec.activity_value_nm is not None and rec.activity_value_nm > INACTIVE_NM) or \
            (rec.pchembl is not None and rec.pchembl < INACTIVE_PCHEMBL):
        return Activity.INACTIVE
    if rec.assay_kind == AssayKind.DOSE_RESPONSE and rec.potency_nm <= ACTIVE_NM:
        return Activity.ACTIVE
    return Activity.UNLABELED


@dataclass(frozen=True)
class DistillCandidate:
    iptm: float
    ligand_ptm: float
    protein_plddt: float
    max_seq_identity_to_holdout: float
    ic50_nm: float

    def __post_init__(self):
        vals = (self.iptm, self.ligand_ptm, self.protein_plddt,
                self.max_seq_identity_to_holdout, self.ic50_nm)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("distillation scores must be finite")
        if not 0 <= self.max_seq_identity_to_holdout <= 1:
            raise ValueError("sequence identity must lie in [0, 1]")


def distill_accept(c):
    """Quality gate for self-distillation pairs."""
    return (c.ic50_nm >= 100 and c.iptm > 0.8 and c.ligand_ptm > 0.5
            and c.protein_plddt > 70 and c.max_seq_identity_to_holdout <= 0.6)


def upsample_minority(items, labels, seed=0):
    """Duplicate minority-class items (with replacement) until classes balance.

    Returns ``(items, labels)``; originals come first, duplicates are appended.
    """
    items = list(items)
    labels = [bool(x) for x in labels]
    if len(items) != len(labels):
        raise ValueError("items and labels differ in length")
    pos = [i for i, y in enumerate(labels) if y]
    neg = [i for i, y in enumerate(labels) if not y]
    if not pos or not neg:
        raise EmptyClass("both classes need at least one example")
    minority, majority = (pos, neg) if len(pos) < len(neg) else (neg, pos)
    extra = len(majority) - len(minority)
    rng = np.random.default_rng(seed)
    picks = rng.choice(minority, size=extra, replace=True).tolist() if extra else []
    return items + [items[i] for i in picks], labels + [labels[i] for i in picks]


# --- activity table ---------------------------------------------------------------

def _opt_float(text):
    text = text.strip()
    return float(text) if text else None


def read_activity_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != ACTIVITY_HEADER:
            raise ValueError(f"{path}: header must be {','.join(ACTIVITY_HEADER)}")
        return [ActivityRecord(row["target_id"], row["compound_id"], _opt_float(row["pxc50"]),
                               _opt_float(row["activity_value_nm"]), _opt_float(row["pchembl"]),
                               row["assay_kind"].strip() or AssayKind.DOSE_RESPONSE)
                for row in reader]


def _fmt(x):
    return "" if x is None else repr(float(x))


def write_activity_csv(path, records):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ACTIVITY_HEADER)
        for r in records:
            w.writerow([r.target_id, r.compound_id, _fmt(r.pxc50), _fmt(r.activity_value_nm),
                        _fmt(r.pchembl), r.assay_kind.value])
