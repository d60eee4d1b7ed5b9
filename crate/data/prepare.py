"""Rebuild the acceptance CSVs in this directory.

Sources:
  * wisconsin.csv - UCI Breast Cancer Wisconsin (Diagnostic), 569 x 30, as
    shipped inside scikit-learn (sklearn/datasets/data/breast_cancer.csv).
  * diabetes.csv  - Pima Indians Diabetes, 768 x 8, KEEL copy.
  * glass.csv     - UCI Glass Identification, 214 x 9, six classes. KEEL only
    publishes one-vs-rest splits (glass0..glass6); the multi-class labels are
    recovered by matching feature rows across those splits (KEEL's
    copy carries its own perturbed feature values).
  * yeast.csv     - UCI Yeast, 1484 x 8, ten classes, recovered the same way
    from KEEL's yeast one-vs-rest and pairwise splits. This 8-feature set
    stands in for the 103-feature multi-label Yeast variant.

Usage: python3 prepare.py <extracted keel_ds package dir>
(the keel_ds wheel from PyPI, unzipped)
"""

import collections
import csv
import os
import sys

import sklearn


def read_dat(path):
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("@"):
                continue
            parts = [p.strip() for p in line.split(",")]
            rows.append((tuple(parts[:-1]), parts[-1]))
    return rows


def read_dat_numeric(path, width=None, base=None):
    """Rows keyed by rounded floats; files that drop one attribute are lifted
    back to full width by matching against the projections of ``base``."""
    rows = [(tuple(round(float(v), 4) for v in x), y) for x, y in read_dat(path)]
    if base is None or len(rows[0][0]) == width:
        return rows
    for drop in range(width):
        proj = collections.defaultdict(list)
        for full in base:
            proj[full[:drop] + full[drop + 1:]].append(full)
        if all(x in proj for x, _ in rows):
            return [(proj[x][0], y) for x, y in rows]
    raise ValueError("cannot lift %s to %d columns" % (path, width))
    return rows


def positives(rows):
    return collections.Counter(x for x, y in rows if y == "positive")


def negatives(rows):
    return collections.Counter(x for x, y in rows if y == "negative")


def assign(base, groups):
    """base: list of feature tuples; groups: ordered (name, Counter) pairs.

    Each row takes the first group that still has remaining multiplicity for
    its feature tuple; rows matching nothing fall into the caller's default.
    """
    out = []
    for x in base:
        label = None
        for name, counter in groups:
            if counter[x] > 0:
                counter[x] -= 1
                label = name
                break
        out.append(label)
    return out


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def main(keel_root):
    here = os.path.dirname(os.path.abspath(__file__))
    imb = os.path.join(keel_root, "data", "imbalanced", "raw")

    # Wisconsin diagnostic
    src = os.path.join(os.path.dirname(sklearn.__file__), "datasets", "data", "breast_cancer.csv")
    with open(src) as fh:
        r = csv.reader(fh)
        meta = next(r)
        names = meta[2:]
        rows = [row for row in r]
    header = ["f%02d" % i for i in range(30)] + ["diagnosis"]
    write_csv(
        os.path.join(here, "wisconsin.csv"),
        header,
        [row[:30] + [names[int(row[30])]] for row in rows],
    )

    # Pima diabetes
    pima = read_dat(os.path.join(imb, "pima.dat"))
    header = ["preg", "plas", "pres", "skin", "insu", "mass", "pedi", "age", "class"]
    write_csv(
        os.path.join(here, "diabetes.csv"),
        header,
        [list(x) + ["tested_" + y] for x, y in pima],
    )

    # Glass: glass0=1, glass1=2, glass4=5, glass5=6, glass6=7
    base = [x for x, _ in read_dat(os.path.join(imb, "glass0.dat"))]
    groups = [
        (name, positives(read_dat(os.path.join(imb, f + ".dat"))))
        for f, name in [
            ("glass0", "building_float"),
            ("glass1", "building_nonfloat"),
            ("glass4", "containers"),
            ("glass5", "tableware"),
            ("glass6", "headlamps"),
        ]
    ]
    # glass2 ships unperturbed feature values, so class 3 is the residual
    labels = [l or "vehicle_float" for l in assign(base, groups)]
    header = ["RI", "Na", "Mg", "Al", "Si", "K", "Ca", "Ba", "Fe", "type"]
    write_csv(os.path.join(here, "glass.csv"), header, [list(x) + [l] for x, l in zip(base, labels)])

    # Yeast: MIT is the residual class. One feature vector is shared across
    # classes, so CYT/MIT counts can be off by one versus UCI (463/244).
    base = [x for x, _ in read_dat_numeric(os.path.join(imb, "yeast1.dat"))]
    y = lambda f: read_dat_numeric(os.path.join(imb, f + ".dat"), 8, base)
    vac = positives(y("yeast-1_vs_7"))
    pox = positives(y("yeast-2_vs_8"))
    me3 = positives(y("yeast3"))
    erl = positives(y("yeast-0-2-5-6_vs_3-7-8-9")) - me3 - vac - pox
    groups = [
        ("NUC", positives(y("yeast1"))),
        ("ME3", me3),
        ("ME2", positives(y("yeast4"))),
        ("ME1", positives(y("yeast5"))),
        ("EXC", positives(y("yeast6"))),
        ("VAC", vac),
        ("POX", pox),
        ("CYT", negatives(y("yeast-2_vs_8"))),
        ("ERL", erl),
    ]
    labels = [l or "MIT" for l in assign(base, groups)]
    header = ["mcg", "gvh", "alm", "mit", "erl", "pox", "vac", "nuc", "site"]
    fmt = lambda x: ["%.2f" % v for v in x]
    write_csv(os.path.join(here, "yeast.csv"), header, [fmt(x) + [l] for x, l in zip(base, labels)])


if __name__ == "__main__":
    main(sys.argv[1])
