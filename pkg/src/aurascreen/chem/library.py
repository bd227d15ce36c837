"""Compound library files: ``<SMILES><TAB><compound-id>`` per line."""

from __future__ import annotations


class LibraryFormatError(ValueError):
    pass


class DuplicateId(LibraryFormatError):
    pass


def read_library(path):
    """Return ``[(compound_id, smiles), ...]`` in file order.

    Blank lines and lines starting with ``#`` are skipped.
    """
    records = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise LibraryFormatError(f"{path}:{lineno}: expected '<SMILES>\\t<id>'")
            smiles, cid = parts[0].strip(), parts[1].strip()
            if cid in seen:
                raise DuplicateId(f"{path}:{lineno}: duplicate compound id {cid!r}")
            seen.add(cid)
            records.append((cid, smiles))
    return records


def write_library(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for cid, smiles in records:
            fh.write(f"{smiles}\t{cid}\n")
