"""Convert KEEL-format .dat files (as shipped in the `common-datasets` PyPI
package) into the plain CSV layout the `awdf` loader reads.

Usage: python3 scripts/keel_to_csv.py <input.dat> <output.csv> [--insert-zero-column INDEX NAME]

The KEEL copy of Ionosphere drops the second UCI attribute, which is constant
zero in the original file; `--insert-zero-column 1 Pulse2` restores it so the
column count matches the UCI table (34).
"""
import csv
import sys


def main(argv):
    src, dst = argv[1], argv[2]
    insert = None
    if len(argv) > 3 and argv[3] == "--insert-zero-column":
        insert = (int(argv[4]), argv[5])
    header, rows = [], []
    with open(src) as fh:
        in_data = False
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if in_data:
                rows.append([c.strip() for c in line.split(",")])
            elif line.lower().startswith("@attribute"):
                header.append(line.split()[1].split("{")[0].split("[")[0])
            elif line.lower().startswith("@data"):
                in_data = True
    if insert is not None:
        idx, name = insert
        header.insert(idx, name)
        for r in rows:
            r.insert(idx, "0")
    with open(dst, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


if __name__ == "__main__":
    main(sys.argv)
