#!/usr/bin/env python3
"""Fetch the ADULT and COMPAS benchmark tables and write them as headed CSVs.

The raw files are taken from the `responsibly` wheel, which bundles verbatim
copies of the UCI adult.data/adult.test files and ProPublica's
compas-scores-two-years.csv. Only pip access is needed.

Usage: tools/fetch_data.py [--out DIR]   (default: <repo>/data)
"""
import argparse
import csv
import io
import pathlib
import subprocess
import sys
import tempfile
import zipfile

ADULT_COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education-num",
    "marital-status", "occupation", "relationship", "race", "sex",
    "capital-gain", "capital-loss", "hours-per-week", "native-country",
    "income",
]

COMPAS_COLUMNS = [
    "sex", "age", "age_cat", "race", "juv_fel_count", "juv_misd_count",
    "juv_other_count", "priors_count", "c_charge_degree", "decile_score",
    "score_text", "two_year_recid",
]


def fetch_wheel(workdir: pathlib.Path) -> pathlib.Path:
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "--quiet",
         "-d", str(workdir), "responsibly==0.1.2"],
        check=True)
    wheels = sorted(workdir.glob("responsibly-*.whl"))
    if not wheels:
        sys.exit("responsibly wheel not found after download")
    return wheels[0]


def write_adult(z: zipfile.ZipFile, out: pathlib.Path) -> int:
    rows = []
    for member in ("adult.data", "adult.test"):
        text = z.read(f"responsibly/dataset/adult/{member}").decode("utf-8")
        for line in text.splitlines():
            if not line.strip() or line.startswith("|"):
                continue
            fields = [f.strip() for f in line.split(",")]
            if len(fields) != len(ADULT_COLUMNS):
                continue
            fields[-1] = fields[-1].rstrip(".")
            rows.append(fields)
    with open(out, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(ADULT_COLUMNS)
        w.writerows(rows)
    return len(rows)


def write_compas(z: zipfile.ZipFile, out: pathlib.Path) -> int:
    text = z.read(
        "responsibly/dataset/compas/compas-scores-two-years.csv").decode("utf-8")
    reader = csv.DictReader(io.StringIO(text))
    n = 0
    with open(out, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(COMPAS_COLUMNS)
        for row in reader:
            w.writerow([row[c] for c in COMPAS_COLUMNS])
            n += 1
    return n


def main() -> None:
    repo = pathlib.Path(__file__).resolve().parent.parent
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", type=pathlib.Path, default=repo / "data")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        wheel = fetch_wheel(pathlib.Path(tmp))
        with zipfile.ZipFile(wheel) as z:
            n_adult = write_adult(z, args.out / "adult.csv")
            n_compas = write_compas(z, args.out / "compas.csv")
    print(f"adult.csv: {n_adult} rows (before missing-value filtering)")
    print(f"compas.csv: {n_compas} rows")


if __name__ == "__main__":
    main()
