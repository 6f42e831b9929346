"""Regenerate the frozen reference fixtures under tests/golden/.

Run from the repository root:

    python3 tools/generate_reference.py

Values come from the dense oracle only. They are committed so the test
suite never depends on floating-point drift in a regeneration.
"""

import json
from pathlib import Path

import numpy as np

from ddqmc import chi_av_quadrature
from ddqmc.lattice import ModelParams, build_lattice
from ddqmc import oracle

GOLDEN = Path(__file__).resolve().parent.parent / "tests" / "golden"

BENCH = dict(Jx=0.225, Jy=0.335, Jz=0.25, gamma=1.0)


def benchmark_2x2():
    lat = build_lattice(2, 2, periodic=True)
    rec = oracle.golden_record(ModelParams(**BENCH), lat)
    with open(GOLDEN / "bench_2x2.json", "w") as f:
        json.dump(rec, f, indent=2)
        f.write("\n")
    print("bench_2x2:", rec["M_z"])


def dark_2x2():
    lat = build_lattice(2, 2, periodic=True)
    rec = oracle.golden_record(ModelParams(Jx=0.225, Jy=0.225, Jz=0.25), lat)
    with open(GOLDEN / "dark_2x2.json", "w") as f:
        json.dump(rec, f, indent=2)
        f.write("\n")
    print("dark_2x2:", rec["M_z"])


def sweep_2x2():
    lat = build_lattice(2, 2, periodic=True)
    rows = []
    for jy in np.linspace(0.2, 1.0, 20):
        rec = oracle.golden_record(ModelParams(Jx=0.225, Jy=float(jy), Jz=0.25), lat)
        rows.append({"Jy": float(jy), "M_z": rec["M_z"], "residual": rec["residual"]})
    with open(GOLDEN / "sweep_2x2.json", "w") as f:
        json.dump(rows, f, indent=2)
        f.write("\n")
    print("sweep_2x2:", rows[0]["M_z"], "...", rows[-1]["M_z"])


def chi_2x2():
    lat = build_lattice(2, 2, periodic=True)
    out = []
    for jy in (0.25, 0.335, 0.5):
        model = ModelParams(Jx=0.225, Jy=jy, Jz=0.25)
        chi = oracle.finite_difference_susceptibility(model, lat)
        out.append({
            "Jy": jy,
            "chi": np.asarray(chi).tolist(),
            "chi_av": chi_av_quadrature(chi),
        })
    with open(GOLDEN / "chi_2x2.json", "w") as f:
        json.dump(out, f, indent=2)
        f.write("\n")
    print("chi_2x2:", [r["chi_av"] for r in out])


if __name__ == "__main__":
    GOLDEN.mkdir(parents=True, exist_ok=True)
    benchmark_2x2()
    dark_2x2()
    sweep_2x2()
    chi_2x2()
