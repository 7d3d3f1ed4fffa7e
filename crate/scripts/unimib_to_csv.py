#!/usr/bin/env python3
"""Convert the UniMiB SHAR accelerometer data to fallkit's canonical CSV.

Reads ``acc_data.mat`` (one row per record: 151 x samples, then 151 y, then
151 z, in m/s^2), ``acc_labels.mat`` (activity index, subject, trial) and
``acc_names.mat`` (activity names) from the dataset's ``data`` directory, and
writes ``id,activity_label,binary_label,fs,ax,ay,az`` rows plus a sidecar
``<out>.json`` manifest.

Every fall activity maps to FALL and every other activity to ADL: a name
containing "fall" counts as a fall, as do Syncope and HittingObstacle.

usage: unimib_to_csv.py DATA_DIR OUT.csv
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np
from scipy.io import loadmat

FS = 50.0
FALLS_WITHOUT_KEYWORD = {"syncope", "hitting obstacle", "hittingobstacle"}


def binary_label(activity: str) -> str:
    lower = activity.strip().lower()
    return "FALL" if "fall" in lower or lower in FALLS_WITHOUT_KEYWORD else "ADL"


def activity_names(path: Path) -> list[str]:
    names = loadmat(path)["acc_names"]
    # A 2 x N cell array: names in the first row, descriptions in the second.
    return [str(np.asarray(cell).ravel()[0]) for cell in names[0]]


def fmt(v: float) -> str:
    # repr gives the shortest string that parses back to the same double.
    return repr(float(v))


def convert(data_dir: Path, out: Path) -> int:
    data = loadmat(data_dir / "acc_data.mat")["acc_data"]
    labels = loadmat(data_dir / "acc_labels.mat")["acc_labels"]
    names = activity_names(data_dir / "acc_names.mat")
    if data.shape[0] != labels.shape[0]:
        raise SystemExit(f"{data.shape[0]} data rows but {labels.shape[0]} label rows")
    if data.shape[1] % 3:
        raise SystemExit(f"row length {data.shape[1]} is not three equal axes")
    n = data.shape[1] // 3

    with out.open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", "activity_label", "binary_label", "fs", "ax", "ay", "az"])
        for i, (row, (activity, subject, trial)) in enumerate(zip(data, labels[:, :3].astype(int))):
            name = names[activity - 1]
            axes = [";".join(fmt(v) for v in row[k * n:(k + 1) * n]) for k in range(3)]
            rid = f"unimib-{i:05d}-s{subject:02d}-t{trial:02d}"
            w.writerow([rid, name, binary_label(name), fmt(FS), *axes])

    manifest = {"name": "UniMiB SHAR", "expected_length": n, "units": "m/s^2"}
    Path(str(out) + ".json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return data.shape[0]


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("data_dir", type=Path, help="directory holding acc_data.mat, acc_labels.mat, acc_names.mat")
    p.add_argument("out", type=Path, help="canonical CSV to write")
    a = p.parse_args()
    count = convert(a.data_dir, a.out)
    print(f"wrote {count} records to {a.out}", file=sys.stderr)


if __name__ == "__main__":
    main()
