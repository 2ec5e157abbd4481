"""Shared fixtures: a heart-disease-shaped benchmark CSV.

The file mimics the pooled 920-row cardiology dataset this kind of tooling
is usually demonstrated on: 13 mixed-type features with a fixed, realistic
per-feature missing-cell count (dominated by the vessel-count and stress
measurements).  Counts are exact so ingestion tests can assert fractions
tightly.
"""

import csv

import numpy as np
import pytest

N_ROWS = 920

# feature -> (generator kind, missing cell count)
HEART_MISSING_COUNTS = {
    "age": 0,
    "sex": 0,
    "cp": 0,
    "trestbps": 59,
    "chol": 30,
    "fbs": 90,
    "restecg": 2,
    "thalch": 55,
    "exang": 55,
    "oldpeak": 62,
    "slope": 309,
    "ca": 611,
    "thal": 486,
}


def _heart_rows(rng):
    age = rng.integers(29, 78, N_ROWS)
    sex = rng.choice(["Male", "Female"], N_ROWS, p=[0.79, 0.21])
    cp = rng.choice(
        ["typical angina", "atypical angina", "non-anginal", "asymptomatic"],
        N_ROWS,
    )
    trestbps = np.round(rng.normal(132, 18, N_ROWS), 1)
    chol = np.round(rng.normal(200, 110, N_ROWS), 1)
    fbs = rng.choice(["TRUE", "FALSE"], N_ROWS, p=[0.16, 0.84])
    restecg = rng.choice(["normal", "st-t abnormality", "lv hypertrophy"],
                         N_ROWS)
    thalch = np.round(rng.normal(138, 26, N_ROWS), 1)
    exang = rng.choice(["TRUE", "FALSE"], N_ROWS, p=[0.39, 0.61])
    oldpeak = np.round(rng.normal(0.9, 1.1, N_ROWS), 1)
    slope = rng.choice(["upsloping", "flat", "downsloping"], N_ROWS)
    ca = rng.integers(0, 4, N_ROWS)
    thal = rng.choice(["normal", "fixed defect", "reversable defect"],
                      N_ROWS)
    return {
        "age": [str(v) for v in age],
        "sex": list(sex),
        "cp": list(cp),
        "trestbps": [f"{v:g}" for v in trestbps],
        "chol": [f"{v:g}" for v in chol],
        "fbs": list(fbs),
        "restecg": list(restecg),
        "thalch": [f"{v:g}" for v in thalch],
        "exang": list(exang),
        "oldpeak": [f"{v:g}" for v in oldpeak],
        "slope": list(slope),
        "ca": [str(v) for v in ca],
        "thal": list(thal),
    }


@pytest.fixture(scope="session")
def heart_csv(tmp_path_factory):
    """Path to the benchmark CSV with exact per-feature missing counts."""
    rng = np.random.default_rng(920)
    columns = _heart_rows(rng)
    for name, count in HEART_MISSING_COUNTS.items():
        if count == 0:
            continue
        holes = rng.choice(N_ROWS, size=count, replace=False)
        col = columns[name]
        for i in holes:
            col[i] = ""
    path = tmp_path_factory.mktemp("data") / "heart.csv"
    names = list(HEART_MISSING_COUNTS)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(N_ROWS):
            writer.writerow([columns[n][i] for n in names])
    return str(path)
