"""Structure ingestion: PDB C-alpha parsing, corpus loading, synthetic corpora.

A domain is an ordered list of C-alpha positions plus a structural-class
label. Domains travel between pipeline stages in a canonical line-delimited
JSON format so parsing concerns stay out of the numeric stages.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import DynpsnError

log = logging.getLogger(__name__)

MIN_LENGTH_DEFAULT = 30
CLASS_FLOOR_DEFAULT = 30

THREE_TO_ONE = {
    "ALA": "A", "ARG": "R", "ASN": "N", "ASP": "D", "CYS": "C",
    "GLN": "Q", "GLU": "E", "GLY": "G", "HIS": "H", "ILE": "I",
    "LEU": "L", "LYS": "K", "MET": "M", "PHE": "F", "PRO": "P",
    "SER": "S", "THR": "T", "TRP": "W", "TYR": "Y", "VAL": "V",
}


class ParseError(DynpsnError):
    pass


class EmptyDomainError(DynpsnError):
    pass


class CorpusError(DynpsnError):
    pass


@dataclass(frozen=True)
class Residue:
    index: int          # 1-based, contiguous after renumbering
    aa: str             # one-letter code, 'X' if unknown
    x: float
    y: float
    z: float


@dataclass
class ProteinDomain:
    id: str
    label: str
    residues: list[Residue]

    def __len__(self) -> int:
        return len(self.residues)

    def coords(self) -> np.ndarray:
        return np.array([[r.x, r.y, r.z] for r in self.residues], dtype=np.float64)


@dataclass
class ManifestEntry:
    id: str
    label: str
    path: str | None = None
    chain: str | None = None
    range: tuple[int, int] | None = None
    residues: list[dict] | None = None  # inline coordinates


@dataclass
class CorpusManifest:
    entries: list[ManifestEntry] = field(default_factory=list)
    base_dir: Path = Path(".")

    def validate(self) -> None:
        seen = set()
        for e in self.entries:
            if not e.id or any(c.isspace() for c in e.id):
                raise CorpusError(f"invalid domain id {e.id!r}")
            if e.id in seen:
                raise CorpusError(f"duplicate domain id {e.id!r} in manifest")
            seen.add(e.id)
            if not e.label:
                raise CorpusError(f"empty label for domain {e.id!r}")
            if e.residues is None:
                if not e.path:
                    raise CorpusError(f"entry {e.id!r} has neither path nor inline residues")
                p = self.base_dir / e.path
                if not p.exists():
                    raise CorpusError(f"missing structure file: {p}")


def _aa_one(resname: str) -> str:
    return THREE_TO_ONE.get(resname.strip().upper(), "X")


def parse_pdb_calpha(raw_text: str, chain: str, rng: tuple[int, int] | None = None) -> list[Residue]:
    """Extract one C-alpha Residue per residue of a chain from PDB ATOM records.

    Fixed-column parsing (PDB v3.3): atom name 13-16, altloc 17, chain 22,
    residue number 23-26, insertion code 27, coordinates 31-54, occupancy
    55-60. Alternate locations resolve to altloc ' '/'A' first, then highest
    occupancy, then first occurrence; insertion-coded residues are kept as
    distinct residues in file order. Output indices are renumbered 1..n.
    """
    # candidate: (preferred_altloc, occupancy, file_position, aa, x, y, z)
    groups: dict[tuple[int, str], list[tuple]] = {}
    order: list[tuple[int, str]] = []
    for lineno, line in enumerate(raw_text.splitlines(), start=1):
        if not line.startswith("ATOM"):
            continue
        if len(line) < 54:
            raise ParseError(f"line {lineno}: ATOM record shorter than coordinate columns")
        if line[12:16].strip() != "CA":
            continue
        if (line[21] if len(line) > 21 else " ") != chain:
            continue
        altloc = line[16]
        try:
            resseq = int(line[22:26])
            x = float(line[30:38])
            y = float(line[38:46])
            z = float(line[46:54])
        except ValueError as exc:
            raise ParseError(f"line {lineno}: malformed fixed-column field ({exc})") from None
        if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(z)):
            raise ParseError(f"line {lineno}: non-finite coordinate")
        occ = 1.0
        occ_field = line[54:60].strip()
        if occ_field:
            try:
                occ = float(occ_field)
            except ValueError:
                raise ParseError(f"line {lineno}: malformed occupancy field") from None
        if rng is not None and not (rng[0] <= resseq <= rng[1]):
            continue
        icode = line[26] if len(line) > 26 else " "
        key = (resseq, icode)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append((altloc in (" ", "A"), occ, lineno, _aa_one(line[17:20]), x, y, z))

    residues: list[Residue] = []
    for idx, key in enumerate(order, start=1):
        cands = groups[key]
        preferred = [c for c in cands if c[0]] or cands
        best = min(preferred, key=lambda c: (-c[1], c[2]))  # occupancy desc, file order asc
        _, _, _, aa, x, y, z = best
        residues.append(Residue(index=idx, aa=aa, x=x, y=y, z=z))
    if not residues:
        raise EmptyDomainError(f"no C-alpha atoms for chain {chain!r} in selection")
    return residues


# ---------------------------------------------------------------------------
# canonical domain records (one JSON object per line)

def domain_to_json(domain: ProteinDomain) -> str:
    obj = {
        "id": domain.id,
        "label": domain.label,
        "residues": [
            {"index": r.index, "aa": r.aa, "x": r.x, "y": r.y, "z": r.z}
            for r in domain.residues
        ],
    }
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def domain_from_json(line: str) -> ProteinDomain:
    try:
        obj = json.loads(line)
        residues = [
            Residue(index=int(r["index"]), aa=str(r["aa"]),
                    x=float(r["x"]), y=float(r["y"]), z=float(r["z"]))
            for r in obj["residues"]
        ]
        dom = ProteinDomain(id=str(obj["id"]), label=str(obj["label"]), residues=residues)
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise ParseError(f"bad canonical domain record: {exc}") from None
    _check_domain(dom)
    return dom


def _check_domain(dom: ProteinDomain) -> None:
    if not dom.id or any(c.isspace() for c in dom.id):
        raise ParseError(f"invalid domain id {dom.id!r}")
    if not dom.label:
        raise ParseError(f"domain {dom.id}: empty label")
    for i, r in enumerate(dom.residues, start=1):
        if r.index != i:
            raise ParseError(f"domain {dom.id}: residue indices not contiguous from 1")
        if not all(math.isfinite(v) for v in (r.x, r.y, r.z)):
            raise ParseError(f"domain {dom.id}: non-finite coordinate at residue {i}")


def write_domains(domains: list[ProteinDomain], path: str | Path) -> None:
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        for d in domains:
            fh.write(domain_to_json(d))
            fh.write("\n")
    os.replace(tmp, path)


def read_domains(path: str | Path) -> list[ProteinDomain]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(domain_from_json(line))
    return out


# ---------------------------------------------------------------------------
# manifest

def read_manifest(path: str | Path) -> CorpusManifest:
    p = Path(path)
    try:
        obj = json.loads(p.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CorpusError(f"cannot read manifest {p}: {exc}") from None
    entries = []
    for raw in obj.get("entries", []):
        entries.append(ManifestEntry(
            id=str(raw["id"]),
            label=str(raw["label"]),
            path=raw.get("path"),
            chain=raw.get("chain"),
            range=tuple(raw["range"]) if raw.get("range") else None,
            residues=raw.get("residues"),
        ))
    man = CorpusManifest(entries=entries, base_dir=p.parent)
    man.validate()
    return man


def write_manifest(man: CorpusManifest, path: str | Path) -> None:
    entries = []
    for e in man.entries:
        d: dict = {"id": e.id, "label": e.label}
        if e.residues is not None:
            d["residues"] = e.residues
        else:
            d["path"] = e.path
            d["chain"] = e.chain
            if e.range:
                d["range"] = list(e.range)
        entries.append(d)
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(json.dumps({"entries": entries}, separators=(",", ":")) + "\n",
                   encoding="utf-8")
    os.replace(tmp, path)


def _entry_to_domain(entry: ManifestEntry, base_dir: Path) -> ProteinDomain:
    if entry.residues is not None:
        residues = [
            Residue(index=int(r["index"]), aa=str(r.get("aa", "X")),
                    x=float(r["x"]), y=float(r["y"]), z=float(r["z"]))
            for r in entry.residues
        ]
        dom = ProteinDomain(id=entry.id, label=entry.label, residues=residues)
        _check_domain(dom)
        return dom
    text = (base_dir / entry.path).read_text(encoding="utf-8", errors="replace")
    residues = parse_pdb_calpha(text, chain=entry.chain or "A", rng=entry.range)
    return ProteinDomain(id=entry.id, label=entry.label, residues=residues)


def load_corpus(manifest: CorpusManifest,
                min_length: int = MIN_LENGTH_DEFAULT,
                class_floor: int = CLASS_FLOOR_DEFAULT) -> list[ProteinDomain]:
    """Load, validate and filter a corpus.

    Domains shorter than min_length are dropped, then classes left with
    fewer than class_floor members are dropped entirely; both removals are
    logged. An empty result is fatal. Output is sorted by domain id.
    """
    manifest.validate()
    domains = []
    for entry in manifest.entries:
        dom = _entry_to_domain(entry, manifest.base_dir)
        if len(dom) < min_length:
            log.warning("dropping domain %s: length %d < %d", dom.id, len(dom), min_length)
            continue
        domains.append(dom)
    counts: dict[str, int] = {}
    for d in domains:
        counts[d.label] = counts.get(d.label, 0) + 1
    kept = []
    for d in domains:
        if counts[d.label] < class_floor:
            continue
        kept.append(d)
    for label, c in sorted(counts.items()):
        if c < class_floor:
            log.warning("dropping class %s: only %d domains < floor %d", label, c, class_floor)
    if not kept:
        raise CorpusError("corpus empty after length and class-size filtering")
    kept.sort(key=lambda d: d.id)
    return kept


# ---------------------------------------------------------------------------
# synthetic corpus

_FAMILIES = ("extended", "helix", "zigzag")


def _backbone(family: str, length: int) -> np.ndarray:
    i = np.arange(length, dtype=np.float64)
    if family == "extended":
        # straight chain, 3.8 A between consecutive residues
        return np.stack([3.8 * i, np.zeros(length), np.zeros(length)], axis=1)
    if family == "helix":
        # tight coil: ~3.8 A consecutive spacing, contacts out to |i-j| = 3
        omega = math.radians(100.0)
        return np.stack([2.3 * np.cos(omega * i), 2.3 * np.sin(omega * i), 1.5 * i], axis=1)
    if family == "zigzag":
        # planar zigzag: contacts at |i-j| <= 2
        return np.stack([2.75 * i, 2.62 * (i % 2), np.zeros(length)], axis=1)
    raise ValueError(f"unknown backbone family {family!r}")


def generate_synthetic_corpus(seed: int, classes: int, per_class: int,
                              length_range: tuple[int, int],
                              class_floor: int = CLASS_FLOOR_DEFAULT) -> list[ProteinDomain]:
    """Deterministic corpus with classes separable by contact topology.

    Each class uses a distinct backbone family (extended chain, tight coil,
    planar zigzag) plus a small coordinate jitter; coordinates are rounded
    to millistrom precision to match the canonical record format.
    """
    if classes < 2:
        raise CorpusError("need at least 2 classes")
    if classes > len(_FAMILIES):
        raise CorpusError(f"at most {len(_FAMILIES)} synthetic families are available")
    if per_class < class_floor:
        raise CorpusError(f"per_class {per_class} below class floor {class_floor}")
    lo, hi = length_range
    if not (1 <= lo <= hi):
        raise CorpusError(f"bad length range {length_range}")
    rng = np.random.default_rng(seed)
    domains = []
    for ci in range(classes):
        family = _FAMILIES[ci]
        for di in range(per_class):
            length = int(rng.integers(lo, hi + 1))
            pts = _backbone(family, length) + rng.normal(0.0, 0.08, size=(length, 3))
            pts = np.round(pts, 3)
            residues = [
                Residue(index=j + 1, aa="A", x=float(pts[j, 0]), y=float(pts[j, 1]),
                        z=float(pts[j, 2]))
                for j in range(length)
            ]
            domains.append(ProteinDomain(id=f"{family}-{di:03d}", label=family,
                                         residues=residues))
    domains.sort(key=lambda d: d.id)
    return domains


def corpus_to_manifest(domains: list[ProteinDomain]) -> CorpusManifest:
    """Inline-coordinate manifest wrapping an in-memory corpus."""
    entries = []
    for d in domains:
        entries.append(ManifestEntry(
            id=d.id, label=d.label,
            residues=[{"index": r.index, "aa": r.aa, "x": r.x, "y": r.y, "z": r.z}
                      for r in d.residues],
        ))
    return CorpusManifest(entries=entries)
