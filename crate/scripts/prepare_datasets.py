#!/usr/bin/env python3
"""Rebuild the benchmark CSVs under data/ from wheels available on PyPI.

    pip download keel-ds orange3 mlxtend --no-deps -d /tmp/wheels
    python3 scripts/prepare_datasets.py /tmp/wheels data

Sources:
  diabetes.csv   Pima Indians diabetes (768 rows), keel-ds wheel
  spambase.csv   UCI Spambase (4597 rows, KEEL copy), keel-ds wheel
  heart.csv      UCI Heart Disease, Cleveland subset (303 rows), orange3 wheel
  mnist_5k.csv.gz  5000-image MNIST subset (500 per digit), mlxtend wheel;
                   intensities rescaled to [0, 1]
"""
import csv
import glob
import gzip
import io
import os
import sys
import zipfile


def wheel(wheels, prefix):
    hits = sorted(glob.glob(os.path.join(wheels, prefix + "*.whl")))
    if not hits:
        sys.exit(f"no {prefix}*.whl under {wheels}")
    return zipfile.ZipFile(hits[-1])


def keel_rows(zf, name):
    text = zf.read(f"keel_ds/data/balanced/raw/{name}.dat").decode()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("@"):
            yield [c.strip() for c in line.split(",")]


def num(s):
    f = float(s)
    return str(int(f)) if f == int(f) else s


SPAM_WORDS = (
    "make address all 3d our over remove internet order mail receive will people report "
    "addresses free business email you credit your font 000 money hp hpl george 650 lab labs "
    "telnet 857 data 415 85 technology 1999 parts pm direct cs meeting original project re "
    "edu table conference"
).split()
SPAM_CHARS = ["semicolon", "paren", "bracket", "exclamation", "dollar", "hash"]
SPAM_HEADER = (
    [f"word_freq_{w}" for w in SPAM_WORDS]
    + [f"char_freq_{c}" for c in SPAM_CHARS]
    + ["capital_run_length_average", "capital_run_length_longest", "capital_run_length_total", "Type"]
)

PIMA_HEADER = [
    "Pregnancies", "Glucose", "BloodPressure", "SkinThickness", "Insulin", "BMI",
    "DiabetesPedigreeFunction", "Age", "Diabetes",
]

HEART_HEADER = [
    "Age", "Sex", "Cp", "Trestbps", "Chol", "Fbs", "Restecg", "Thalach", "Exang",
    "Oldpeak", "Slope", "Ca", "Thal", "HeartDisease",
]
HEART_CODES = {
    "gender": {"male": "1", "female": "0"},
    "chest pain": {"typical ang": "1", "atypical ang": "2", "non-anginal": "3", "asymptomatic": "4"},
    "rest ECG": {"normal": "0", "ST-T abnormal": "1", "left vent hypertrophy": "2"},
    "slope peak exc ST": {"upsloping": "1", "flat": "2", "downsloping": "3"},
    "thal": {"normal": "3", "fixed defect": "6", "reversable defect": "7"},
}


def write(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def main(wheels, out):
    os.makedirs(out, exist_ok=True)
    keel = wheel(wheels, "keel_ds")

    rows = []
    for r in keel_rows(keel, "pima"):
        rows.append([num(v) for v in r[:-1]] + ["Yes" if r[-1] == "tested_positive" else "No"])
    write(os.path.join(out, "diabetes.csv"), PIMA_HEADER, rows)

    rows = []
    for r in keel_rows(keel, "spambase"):
        rows.append([num(v) for v in r[:-1]] + ["Spam" if r[-1] == "1" else "NoSpam"])
    write(os.path.join(out, "spambase.csv"), SPAM_HEADER, rows)

    orange = wheel(wheels, "orange3")
    tab = orange.read("Orange/datasets/heart_disease.tab").decode().splitlines()
    names = tab[0].split("\t")
    rows = []
    for line in tab[3:]:
        cells = line.split("\t")
        row = []
        for name, cell in zip(names, cells):
            cell = cell.strip()
            if cell in ("", "?"):
                row.append("?")
            elif name in HEART_CODES:
                row.append(HEART_CODES[name][cell])
            elif name == "diameter narrowing":
                row.append("Yes" if cell == "1" else "No")
            else:
                row.append(num(cell))
        rows.append(row)
    write(os.path.join(out, "heart.csv"), HEART_HEADER, rows)

    mlx = wheel(wheels, "mlxtend")
    raw = gzip.decompress(mlx.read("mlxtend/data/data/mnist_5k.csv.gz")).decode()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"pixel{i}" for i in range(784)] + ["Digit"])
    for line in raw.splitlines():
        if line.strip():
            cells = line.strip().split(",")
            w.writerow([intensity(c) for c in cells[:-1]] + [cells[-1]])
    with gzip.GzipFile(os.path.join(out, "mnist_5k.csv.gz"), "wb", mtime=0) as f:
        f.write(buf.getvalue().encode())


def intensity(cell):
    """Grey level 0..255 as a decimal in [0, 1] with at most four places."""
    v = round(int(cell) / 255, 4)
    return "0" if v == 0 else ("1" if v == 1 else f"{v:.4f}".rstrip("0"))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "/tmp/wheels", sys.argv[2] if len(sys.argv) > 2 else "data")
