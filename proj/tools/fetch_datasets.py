#!/usr/bin/env python3
"""Download the regression benchmarks into data/ as plain numeric CSV files.

    python3 tools/fetch_datasets.py [--out data] [--only boston abalone]

Every source carries a sha256 pin. A source without a known pin is only used
with --allow-unpinned, and its hash is printed so it can be recorded.
"""

import argparse
import csv
import hashlib
import io
import sys
import tarfile
import urllib.request
from pathlib import Path

PYDATASET_SDIST = (
    "https://files.pythonhosted.org/packages/4f/15/"
    "548792a1bb9caf6a3affd61c64d306b08c63c8a5a49e2c2d931b67ec2108/pydataset-0.2.0.tar.gz"
)
PYDATASET_SHA256 = "e12a7b8a21fea3fc50ef93f13bd0819f820826d4078f791c2abe40fe8be04c0b"
BOSTON_MEMBER = "resources/rdata/csv/MASS/Boston.csv"
BOSTON_SHA256 = "a73bba75b82b2ffea542da3752edb63ea583620842d09810f0780fa2e8da9011"

UCI = "https://archive.ics.uci.edu/ml/machine-learning-databases"
ABALONE_URL = UCI + "/abalone/abalone.data"
ABALONE_SHA256 = None  # no verified copy was reachable when this script was written
ABALONE_COLUMNS = [
    "length", "diameter", "height", "whole_weight",
    "shucked_weight", "viscera_weight", "shell_weight", "rings",
]


class FetchError(Exception):
    pass


def sha256(data):
    return hashlib.sha256(data).hexdigest()


def download(url, timeout=60):
    try:
        with urllib.request.urlopen(url, timeout=timeout) as r:
            return r.read()
    except Exception as e:  # network errors come in many types
        raise FetchError(f"{url}: {e}") from e


def verify(name, data, pin, allow_unpinned):
    digest = sha256(data)
    if pin is None:
        if not allow_unpinned:
            raise FetchError(f"{name}: no pinned sha256 (got {digest}); rerun with --allow-unpinned")
        print(f"warning: {name} is unpinned, sha256 {digest}", file=sys.stderr)
    elif digest != pin:
        raise FetchError(f"{name}: sha256 mismatch, expected {pin}, got {digest}")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    print(f"wrote {path} ({len(rows)} rows)")


def fetch_boston(out, allow_unpinned):
    sdist = download(PYDATASET_SDIST)
    verify("pydataset sdist", sdist, PYDATASET_SHA256, allow_unpinned)
    with tarfile.open(fileobj=io.BytesIO(sdist)) as outer:
        inner_member = next(m for m in outer.getmembers() if m.name.endswith("resources.tar.gz"))
        inner = outer.extractfile(inner_member).read()
    with tarfile.open(fileobj=io.BytesIO(inner)) as res:
        raw = res.extractfile(BOSTON_MEMBER).read()
    verify("Boston.csv", raw, BOSTON_SHA256, allow_unpinned)
    reader = csv.reader(io.StringIO(raw.decode("utf-8")))
    header = next(reader)
    # The first column holds R row names.
    rows = [row[1:] for row in reader if row]
    write_csv(out / "boston.csv", header[1:], rows)


def fetch_abalone(out, allow_unpinned):
    raw = download(ABALONE_URL)
    verify("abalone.data", raw, ABALONE_SHA256, allow_unpinned)
    rows = []
    for line in raw.decode("ascii").splitlines():
        if not line.strip():
            continue
        sex, *rest = line.split(",")
        # Sex is categorical (M, F, I); one indicator column per level.
        rows.append([int(sex == "M"), int(sex == "F"), int(sex == "I")] + rest)
    write_csv(out / "abalone.csv", ["sex_m", "sex_f", "sex_i"] + ABALONE_COLUMNS, rows)


FETCHERS = {"boston": fetch_boston, "abalone": fetch_abalone}


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "data")
    p.add_argument("--only", nargs="+", choices=sorted(FETCHERS), default=sorted(FETCHERS))
    p.add_argument("--allow-unpinned", action="store_true")
    args = p.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    failed = 0
    for name in args.only:
        try:
            FETCHERS[name](args.out, args.allow_unpinned)
        except FetchError as e:
            print(f"error: {name}: {e}", file=sys.stderr)
            failed += 1
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
