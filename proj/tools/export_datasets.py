#!/usr/bin/env python3
"""Write the bundled CSV corpus under data/.

Real datasets come from the copies shipped with scikit-learn (no download).
housing_synth is a deterministic synthetic regression set shaped like a
small house-price table: 8 features, targets in units of 100k.
"""
import pathlib

import numpy as np
from sklearn import datasets

OUT = pathlib.Path(__file__).resolve().parent.parent / "data"


def write(name, X, y, feature_names, label_fmt):
    OUT.mkdir(exist_ok=True)
    header = ",".join(list(feature_names) + ["y"])
    with open(OUT / f"{name}.csv", "w") as fh:
        fh.write(header + "\n")
        for row, label in zip(X, y):
            cells = [repr(float(v)) for v in row]
            cells.append(label_fmt(label))
            fh.write(",".join(cells) + "\n")


def clean(names):
    return [n.replace(" ", "_").replace(",", "") for n in names]


def main():
    bc = datasets.load_breast_cancer()
    write("breast_cancer", bc.data, bc.target, clean(bc.feature_names), lambda v: str(int(v)))

    wine = datasets.load_wine()
    write("wine", wine.data, wine.target, clean(wine.feature_names), lambda v: str(int(v)))

    # targets in hundreds
    dia = datasets.load_diabetes()
    write("diabetes", dia.data, dia.target / 100.0, clean(dia.feature_names),
          lambda v: repr(float(v)))

    rng = np.random.default_rng(20240601)
    n = 2000
    income = rng.gamma(4.0, 1.0, n)
    age = rng.integers(1, 53, n).astype(float)
    rooms = np.round(rng.normal(5.0, 1.2, n), 2)
    bedrooms = np.round(rooms * rng.uniform(0.15, 0.3, n), 2)
    population = rng.integers(50, 5000, n).astype(float)
    occupancy = np.round(rng.uniform(1.5, 4.5, n), 2)
    lat = np.round(rng.uniform(32.5, 42.0, n), 2)
    lon = np.round(rng.uniform(-124.3, -114.3, n), 2)
    coast = np.exp(-np.abs(lon + 122.0) / 2.0)
    y = 0.45 * income + 0.8 * coast + 0.01 * age - 0.1 * occupancy + 0.05 * rooms
    y += rng.normal(0.0, 0.3, n)
    y = np.clip(y, 0.15, 5.0)
    X = np.column_stack([income, age, rooms, bedrooms, population, occupancy, lat, lon])
    names = ["med_inc", "house_age", "ave_rooms", "ave_bedrms", "population", "ave_occup",
             "latitude", "longitude"]
    write("housing_synth", X, y, names, lambda v: repr(float(v)))


if __name__ == "__main__":
    main()
