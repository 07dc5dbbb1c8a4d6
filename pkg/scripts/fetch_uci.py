#!/usr/bin/env python3
"""Fetch the college messaging log used by the real-data acceptance checks.

The dataset is a public directed temporal edge list (sender, receiver,
unix timestamp; one message per line) of about 59835 events between 1899
users. This script downloads it, decompresses it, and drops it at
data/uci.csv where the test suite and CLI examples expect it.

Needs network access; run it once on a connected machine, or copy the
file in by hand and skip the script entirely.
"""

import gzip
import shutil
import sys
import urllib.request
from pathlib import Path

URL = "https://snap.stanford.edu/data/CollegeMsg.txt.gz"
DEST = Path(__file__).resolve().parents[1] / "data" / "uci.csv"


def main():
    if DEST.exists():
        print(f"{DEST} already present, nothing to do")
        return 0
    DEST.parent.mkdir(parents=True, exist_ok=True)
    tmp = DEST.with_suffix(".gz.part")
    print(f"downloading {URL} ...")
    try:
        urllib.request.urlretrieve(URL, tmp)
    except OSError as e:
        print(f"download failed: {e}", file=sys.stderr)
        print("fetch the file manually and place the decompressed edge "
              f"list at {DEST}", file=sys.stderr)
        return 1
    with gzip.open(tmp, "rb") as f_in, open(DEST, "wb") as f_out:
        shutil.copyfileobj(f_in, f_out)
    tmp.unlink()
    n = sum(1 for _ in open(DEST))
    print(f"wrote {DEST}: {n} events")
    print("next: tempolink ingest --input data/uci.csv --out data/uci.bin")
    return 0


if __name__ == "__main__":
    sys.exit(main())
