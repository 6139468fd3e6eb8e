"""Regenerate the bundled CSV files in src/flowoct/data."""
import csv
from pathlib import Path

from flowoct.datasets import balance_rows, monk_rows

OUT = Path(__file__).resolve().parents[1] / "src" / "flowoct" / "data"


def write(name, header, rows, labels):
    with (OUT / f"{name}.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r, y in zip(rows, labels):
            w.writerow([*r, y])


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for p in (1, 2, 3):
        rows, labels = monk_rows(p)
        write(f"monk{p}", ["a1", "a2", "a3", "a4", "a5", "a6", "class"], rows, labels)
    rows, labels = balance_rows()
    write("balance-scale", ["left_weight", "left_distance", "right_weight", "right_distance",
                            "class"], rows, labels)


if __name__ == "__main__":
    main()
