"""Dataset ingestion: raw event files to a checksummed binary bundle.

A bundle is one array container (src, dst, t, and the destination
partition for bipartite graphs) plus a JSON sidecar holding counts and
the container's sha256. Ingestion is deterministic, so re-running it on
the same input reproduces the identical file, byte for byte.
"""

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .array_io import load_arrays, save_arrays
from .store import GraphMeta, validate_edges

META_SUFFIX = ".meta.json"


def _sniff_rows(path):
    """Yield (src, dst, t) string triples from a comma- or space-separated file."""
    with open(path, newline="") as f:
        first = f.readline()
        f.seek(0)
        if "," in first:
            reader = csv.reader(f)
            rows = ([c.strip() for c in row] for row in reader if row)
        else:
            rows = (line.split() for line in f if line.strip())
        for row in rows:
            if len(row) < 3:
                raise ValueError(f"{path}: need at least 3 columns, got {row}")
            yield row[0], row[1], row[2]


def _is_number(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def ingest(input_path, out_path, bipartite=False):
    """Convert a raw event file into a bundle at out_path.

    Node ids may be arbitrary strings; they are densified in order of
    first appearance. On bipartite graphs sources and destinations get
    disjoint id ranges even when the raw names coincide. Events are
    sorted by timestamp with the input order breaking ties.
    """
    rows = list(_sniff_rows(input_path))
    if rows and not _is_number(rows[0][2]):
        rows = rows[1:]  # header line
    if not rows:
        raise ValueError(f"{input_path}: no event rows")

    ids = {}

    def remap(name, role):
        key = (role, name) if bipartite else name
        if key not in ids:
            ids[key] = len(ids)
        return ids[key]

    m = len(rows)
    src = np.empty(m, dtype=np.int64)
    dst = np.empty(m, dtype=np.int64)
    t = np.empty(m, dtype=np.float64)
    for i, (s, d, tt) in enumerate(rows):
        src[i] = remap(s, "s")
        dst[i] = remap(d, "d")
        t[i] = float(tt)

    order = np.argsort(t, kind="stable")
    src, dst, t = src[order], dst[order], t[order]
    num_nodes = len(ids)
    validate_edges(src, dst, t, num_nodes)

    arrays = {"src": src, "dst": dst, "t": t}
    if bipartite:
        arrays["dst_nodes"] = np.unique(dst)
    core = {"num_nodes": num_nodes, "bipartite": bool(bipartite), "m": m}
    save_arrays(out_path, arrays, meta=core)

    digest = hashlib.sha256(Path(out_path).read_bytes()).hexdigest()
    sidecar = dict(core, sha256=digest)
    with open(str(out_path) + META_SUFFIX, "w") as f:
        json.dump(sidecar, f, sort_keys=True, indent=2)
        f.write("\n")
    return sidecar


def load_bundle(path, verify=True):
    """Read a bundle back: (src, dst, t, GraphMeta).

    With verify on (the default), the sidecar checksum must match the
    file content; a corrupted or tampered bundle raises instead of
    feeding garbage into a run.
    """
    sidecar_path = str(path) + META_SUFFIX
    with open(sidecar_path) as f:
        sidecar = json.load(f)
    if verify:
        digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
        if digest != sidecar["sha256"]:
            raise ValueError(
                f"{path}: checksum mismatch (bundle corrupted or edited)"
            )
    arrays, core = load_arrays(path)
    meta = GraphMeta(
        num_nodes=core["num_nodes"],
        bipartite=core["bipartite"],
        dst_nodes=arrays.get("dst_nodes"),
    )
    return arrays["src"], arrays["dst"], arrays["t"], meta
