"""Dataset manifests and the descriptor cache.

A manifest is a two-column CSV ``filename,label``. The descriptor cache is
JSON-lines, one shape per line with keys ``name, kind, p, values`` (decimal
values at 17 significant digits) plus the mesh content hash used for
invalidation: a cached entry is reused only when (hash, kind, p) all match.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import re

import numpy as np

from ._ioutil import atomic_write_text, fmt17
from .errors import MissingDescriptors
from .evaluation import LabeledDataset
from .spectral import SpectralDescriptor


def read_manifest(path):
    """Load ``filename,label`` rows, skipping blank lines."""
    rows = []
    with open(path, newline="", encoding="utf-8") as handle:
        for lineno, row in enumerate(csv.reader(handle), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'filename,label', got {row!r}")
            rows.append((row[0].strip(), row[1].strip()))
    if not rows:
        raise ValueError(f"{path}: empty manifest")
    return rows


def write_manifest(path, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for filename, label in rows:
        writer.writerow([filename, label])
    atomic_write_text(path, buf.getvalue())


def _natural_key(name):
    return [int(tok) if tok.isdigit() else tok for tok in re.split(r"(\d+)", name)]


def consecutive_manifest(filenames, group_size, label_prefix="class"):
    """Assign labels to naturally sorted filenames in consecutive groups.

    Datasets whose numbering encodes the class (every ``group_size``
    consecutive shapes form one class) get labels ``class000, class001, ...``.
    """
    if group_size < 1:
        raise ValueError(f"group size must be >= 1, got {group_size}")
    ordered = sorted(filenames, key=_natural_key)
    return [
        (name, f"{label_prefix}{idx // group_size:03d}")
        for idx, name in enumerate(ordered)
    ]


def file_sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def descriptor_cache_line(descriptor, mesh_sha=""):
    """One JSONL cache line; values at 17 significant digits."""
    values = ",".join(fmt17(v) for v in descriptor.values)
    name = json.dumps(descriptor.shape_name)
    kind = json.dumps(descriptor.kind)
    sha = json.dumps(mesh_sha)
    return (
        f'{{"name": {name}, "kind": {kind}, "p": {descriptor.p}, '
        f'"values": [{values}], "meshSha256": {sha}}}'
    )


def parse_cache_line(line):
    doc = json.loads(line)
    descriptor = SpectralDescriptor(
        values=np.asarray(doc["values"], dtype=np.float64),
        kind=doc["kind"],
        shape_name=doc["name"],
    )
    if descriptor.p != int(doc["p"]):
        raise ValueError(f"cache entry {doc['name']!r}: p={doc['p']} but {descriptor.p} values")
    return descriptor, doc.get("meshSha256", "")


def read_descriptor_cache(path):
    """name → (descriptor, mesh hash) for every cache line."""
    entries = {}
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            descriptor, sha = parse_cache_line(line)
            entries[descriptor.shape_name] = (descriptor, sha)
    return entries


def write_descriptor_cache(path, entries):
    """Write cache lines in the given order (list of (descriptor, sha))."""
    lines = [descriptor_cache_line(d, sha) for d, sha in entries]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def dataset_from_cache(entries, manifest, kind, p):
    """Assemble a :class:`LabeledDataset` in manifest order.

    Raises :class:`MissingDescriptors` naming every manifest shape without a
    matching (kind, p) cache entry.
    """
    missing = []
    columns = []
    labels = []
    names = []
    for filename, label in manifest:
        found = entries.get(filename)
        if found is None or found[0].kind != kind or found[0].p != p:
            missing.append(filename)
            continue
        columns.append(found[0].values)
        labels.append(label)
        names.append(filename)
    if missing:
        raise MissingDescriptors(missing)
    return LabeledDataset(
        descriptors=np.stack(columns, axis=1),
        labels=tuple(labels),
        names=tuple(names),
        descriptor_kind=kind,
    )


def mesh_path(mesh_dir, filename):
    return os.path.join(mesh_dir, filename)
