"""Regenerate src/mpu/data/tw1.csv from the Painleve II solution.

Run once after changing the grid; the table is committed with the package.
"""
from pathlib import Path

from mpu.tracy_widom import check_table, generate_table

OUT = Path(__file__).resolve().parents[1] / "src" / "mpu" / "data" / "tw1.csv"

if __name__ == "__main__":
    table = generate_table()
    table.to_csv(OUT)
    report = check_table(table)
    print(f"wrote {len(table.s)} rows to {OUT}")
    for key, value in report.items():
        print(f"  {key}: {value}")
