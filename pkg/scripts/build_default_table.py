#!/usr/bin/env python3
"""Regenerate the bundled calibration table on the standard layered phantom.

Runs the penalty search for every (mode, norm) pair at the default twelve
CR targets and merges the per-pair results into
src/speckless/data/default-table.txt. Partial results land in calib_work/
so an interrupted run resumes where it left off.
"""

import pathlib
import sys
import time
import warnings

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from speckless.calibration import CalibrationTable, calibrate
from speckless.phantom import layered_phantom_spec, make_phantom
from speckless.prox import SpNorm

WORK = pathlib.Path(__file__).resolve().parents[1] / "calib_work"
OUT = (
    pathlib.Path(__file__).resolve().parents[1]
    / "src"
    / "speckless"
    / "data"
    / "default-table.txt"
)


def main() -> None:
    WORK.mkdir(exist_ok=True)
    _, noisy = make_phantom(layered_phantom_spec())
    for mode in ("tt", "ml"):
        for norm in SpNorm:
            part = WORK / f"{mode}_{norm.value}.txt"
            if part.exists():
                print(f"[skip] {part.name} exists", flush=True)
                continue
            t0 = time.time()
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                table = calibrate([noisy], mode, norm)
            for w in caught:
                print(f"[warn] {mode}/{norm.value}: {w.message}", flush=True)
            table.save(part)
            knots = len(table.samples(mode, norm))
            print(
                f"[done] {mode}/{norm.value}: {knots} knots in "
                f"{time.time() - t0:.0f}s",
                flush=True,
            )
    merged = CalibrationTable()
    for part in sorted(WORK.glob("*.txt")):
        sub = CalibrationTable.load(part)
        for mode, norm, samples in sub.entries():
            merged.add(mode, norm, samples)
    OUT.parent.mkdir(parents=True, exist_ok=True)
    merged.save(OUT)
    print(f"[merged] {OUT}", flush=True)


if __name__ == "__main__":
    main()
