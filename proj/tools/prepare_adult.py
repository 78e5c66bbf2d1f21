#!/usr/bin/env python3
"""Convert the raw UCI Adult files (adult.data / adult.test) into headered CSV.

Whitespace after separators is stripped and the trailing '.' on adult.test
labels is removed. '?' missing-value tokens are kept; the loader drops them.
"""
import sys

COLUMNS = ["age", "workclass", "fnlwgt", "education", "education-num",
           "marital-status", "occupation", "relationship", "race", "sex",
           "capital-gain", "capital-loss", "hours-per-week", "native-country",
           "income"]


def convert(src, dst):
    rows = [",".join(COLUMNS)]
    with open(src) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("|"):
                continue
            fields = [x.strip() for x in line.split(",")]
            fields[-1] = fields[-1].rstrip(".")
            rows.append(",".join(fields))
    with open(dst, "w") as f:
        f.write("\n".join(rows) + "\n")


if __name__ == "__main__":
    if len(sys.argv) != 3:
        sys.exit("usage: prepare_adult.py <adult.data|adult.test> <out.csv>")
    convert(sys.argv[1], sys.argv[2])
