"""End-to-end acceptance battery.

Each test covers one numbered capability of the package and prints a
single PASS/FAIL line (visible with -s or on failure; pytest -v adds its
own verdict per test). The expensive full-scale runs are shared through
module fixtures. Total runtime is a couple of hours single-threaded.
"""
import copy
import csv
import json
import math
import time

import numpy as np
import pytest

from ddqmc import oracle
from ddqmc.cli import main
from ddqmc.engine import EngineParams, Population, WalkerEngine, run
from ddqmc.estimators import (build_observables, initiator_extrapolate,
                              ratio_estimate, susceptibility)
from ddqmc.lattice import ModelParams, build_lattice
from ddqmc.liouvillian import (ConfigPair, ImportanceScheme, connections,
                               diagonal_element, stability_bound)
from ddqmc.samplers import binomial, multinomial, rng_stream, stochastic_round

BENCH = dict(Jx=0.225, Jy=0.335, Jz=0.25, gamma=1.0)

with open(__file__.rsplit("/", 1)[0] + "/golden/bench_2x2.json") as f:
    GOLD_BENCH = json.load(f)
with open(__file__.rsplit("/", 1)[0] + "/golden/chi_2x2.json") as f:
    GOLD_CHI = json.load(f)


def report(num, ok, detail):
    print(f"criterion {num:02d}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {num}: {detail}"


# --- shared full-scale runs -------------------------------------------------

CRIT4_CFG = {
    "lattice": {"rows": 2, "cols": 2, "periodic": True},
    "model": {"Jx": 0.225, "Jy": 0.335, "Jz": 0.25, "gamma": 1.0},
    "engine": {
        "dt": 0.01,
        "target_population": 1e5,
        "n0": 20000,
        "equilibration_steps": 5000,
        "measurement_steps": 200000,
        "seed": 21,
    },
    "observables": ["mz"],
}


def cli_run(tmp, cfg, sub):
    out = tmp / sub
    cfg_path = tmp / f"{sub}.json"
    cfg_path.write_text(json.dumps(cfg))
    t0 = time.perf_counter()
    rc = main(["run", "--config", str(cfg_path), "--out", str(out)])
    elapsed = time.perf_counter() - t0
    assert rc == 0
    summary = json.loads((out / "summary.json").read_text())
    return out / "run.csv", summary, elapsed


@pytest.fixture(scope="module")
def crit4(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("crit4")
    csv_path, summary, elapsed = cli_run(tmp, CRIT4_CFG, "base")
    return {"tmp": tmp, "csv": csv_path, "summary": summary, "elapsed": elapsed}


# --- criteria ----------------------------------------------------------------

def test_criterion_01_oracle_physicality():
    lat = build_lattice(2, 2, periodic=True)
    t0 = time.perf_counter()
    worst_res = worst_tr = worst_dev = 0.0
    worst_eig = 0.0
    for Jy in np.linspace(0.2, 1.0, 20):
        model = ModelParams(Jx=0.225, Jy=float(Jy), Jz=0.25, gamma=1.0)
        liouv = oracle.build_dense(model, lat)
        ss = oracle.steady_state(liouv)
        dt = 0.4 * stability_bound(model, lat)
        r_eu = oracle.relax(liouv, dt=dt, method="euler", tol=1e-10)
        r_rk = oracle.relax(liouv, dt=dt, method="rk4", tol=1e-10)
        worst_res = max(worst_res, ss.residual)
        worst_tr = max(worst_tr, ss.trace_error)
        worst_eig = min(worst_eig, ss.min_eigenvalue)
        worst_dev = max(
            worst_dev,
            np.abs(r_eu - ss.rho).max(),
            np.abs(r_rk - ss.rho).max(),
            np.abs(r_eu - r_rk).max(),
        )
    elapsed = time.perf_counter() - t0
    ok = (worst_res < 1e-9 and worst_tr < 1e-12 and worst_eig > -1e-8
          and worst_dev < 1e-6 and elapsed < 60.0)
    report(1, ok, f"20 points: residual<={worst_res:.1e}, trace<={worst_tr:.1e}, "
                  f"min_eig>={worst_eig:.1e}, route dev<={worst_dev:.1e}, {elapsed:.0f}s")


def test_criterion_02_superoperator_equivalence():
    rng = rng_stream(42)
    lattices = {
        1: build_lattice(1, 1, periodic=False),
        2: build_lattice(1, 2, periodic=True),
        4: build_lattice(2, 2, periodic=True),
    }
    thetas = [0.0, math.pi / 2, 1.0]
    worst = 0.0
    t0 = time.perf_counter()
    for k in range(10):
        n = (1, 2, 4)[k % 3]
        lat = lattices[n]
        model = ModelParams(
            Jx=float(rng.uniform(-1, 1)),
            Jy=float(rng.uniform(-1, 1)),
            Jz=float(rng.uniform(-1, 1)),
            gamma=float(rng.uniform(0.3, 1.5)),
            h=float(rng.uniform(0.1, 0.8)),
            theta=thetas[k % 3],
        )
        dim = 2 ** n
        dense = oracle.build_dense(model, lat).matrix
        built = np.zeros_like(dense)
        for r in range(dim):
            for c in range(dim):
                pair = ConfigPair(r, c)
                src = r * dim + c
                built[src, src] = diagonal_element(pair, model, lat)
                for conn in connections(pair, model, lat):
                    tgt = conn.target.row * dim + conn.target.col
                    built[tgt, src] += conn.amplitude
        worst = max(worst, float(np.abs(built - dense).max()))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-14
    report(2, ok, f"10 random models, N in (1,2,4): max element dev {worst:.2e}, {elapsed:.1f}s")


def test_criterion_03_one_step_unbiasedness():
    model = ModelParams(Jx=0.9, Jy=0.4, Jz=1.0, gamma=1.0, h=0.3, theta=0.7)
    lat = build_lattice(1, 2, periodic=True)
    dim = 4
    shift = -0.3
    dt = 0.02
    init = {(0, 0): (20000, 0), (1, 2): (15000, -9000), (3, 3): (12000, 0),
            (2, 1): (0, 7000)}
    codes = np.array(sorted((r << 2) | c for r, c in init), dtype=np.uint64)
    re = np.array([init[(int(c) >> 2, int(c) & 3)][0] for c in codes], np.int64)
    im = np.array([init[(int(c) >> 2, int(c) & 3)][1] for c in codes], np.int64)
    L = oracle.build_dense(model, lat).matrix
    v0 = np.zeros(dim * dim, dtype=complex)
    for (r, c), (a, b) in init.items():
        v0[r * dim + c] = a + 1j * b
    v_exact = v0 + dt * (L @ v0 - shift * v0)

    nseeds = 10000
    t0 = time.perf_counter()
    acc = np.zeros((nseeds, dim * dim), dtype=complex)
    for s in range(nseeds):
        params = EngineParams(dt=dt, target_population=1e9, seed=s, s_init=shift)
        eng = WalkerEngine(model, lat, params)
        pop = Population(2, codes.copy(), re.copy(), im.copy(),
                         np.ones(codes.size, bool), shift)
        out = eng.step(pop)
        rr = out.rows().astype(int)
        cc = out.cols().astype(int)
        acc[s, rr * dim + cc] = out.re + 1j * out.im
    elapsed = time.perf_counter() - t0
    mean = acc.mean(axis=0)
    se = acc.std(axis=0, ddof=1) / math.sqrt(nseeds)
    resid = np.abs(mean.real - v_exact.real) + 1j * np.abs(mean.imag - v_exact.imag)
    band = 5 * np.maximum(se, 1e-12)
    ok_re = np.all(resid.real <= np.maximum(band, 1e-9))
    ok_im = np.all(resid.imag <= np.maximum(band, 1e-9))
    worst = float(np.max((resid.real + resid.imag) / np.maximum(band, 1e-9)))
    ok = ok_re and ok_im and elapsed < 300.0
    report(3, ok, f"1e4 seeds, worst component at {worst:.2f} of the 5-SE band, {elapsed:.0f}s")


def test_criterion_04_ddqmc_vs_oracle(crit4):
    summary = crit4["summary"]
    est = summary["estimates"]["mz"]
    gold = GOLD_BENCH["M_z"]
    bias = est["value"] - gold
    shift_last_half = summary["mean_shift_last_half"]
    ok = (abs(bias) <= 3 * est["error"] and abs(bias) < 0.01
          and abs(shift_last_half) < 0.05 and crit4["elapsed"] < 900.0)
    report(4, ok, f"mz={est['value']:.6f}+-{est['error']:.1e} vs {gold:.6f} "
                  f"(bias {bias:+.1e}, {bias/est['error']:+.2f} sigma), "
                  f"|S| last half {abs(shift_last_half):.4f}, {crit4['elapsed']:.0f}s")


def test_criterion_05_dark_state():
    model = ModelParams(Jx=0.225, Jy=0.225, Jz=0.25, gamma=1.0)
    lat = build_lattice(2, 2, periodic=True)
    params = EngineParams(dt=0.01, target_population=1e4, n0=2000,
                          equilibration_steps=2000, measurement_steps=20000,
                          seed=5)
    t0 = time.perf_counter()
    res = run(model, lat, params, observables=build_observables(["mz"]))
    elapsed = time.perf_counter() - t0
    est = ratio_estimate(res, "mz")
    ok = (abs(est.value + 1.0) <= 3 * est.error and est.error < 0.005
          and elapsed < 300.0)
    report(5, ok, f"mz={est.value:.8f}+-{est.error:.1e} (target -1), {elapsed:.0f}s")


def test_criterion_06_importance_invariance(crit4, tmp_path):
    base = crit4["summary"]["estimates"]["mz"]
    occ = {0.0: crit4["summary"]["mean_occupied"]}
    ests = {0.0: (base["value"], base["error"])}
    for p in (1.5, 2.5):
        cfg = copy.deepcopy(CRIT4_CFG)
        cfg["engine"]["importance_p"] = p
        cfg["engine"]["seed"] = 21 + int(10 * p)
        _, summary, _ = cli_run(tmp_path, cfg, f"p{p}")
        e = summary["estimates"]["mz"]
        ests[p] = (e["value"], e["error"])
        occ[p] = summary["mean_occupied"]
    pulls = {}
    for a, b in ((0.0, 1.5), (0.0, 2.5), (1.5, 2.5)):
        d = ests[a][0] - ests[b][0]
        s = math.hypot(ests[a][1], ests[b][1])
        pulls[(a, b)] = d / s
    ok = all(abs(v) <= 3 for v in pulls.values())
    ok = ok and occ[0.0] > occ[1.5] > occ[2.5]
    detail = ", ".join(f"p{a}-p{b}: {v:+.2f}s" for (a, b), v in pulls.items())
    report(6, ok, f"{detail}; occupied {occ[0.0]:.0f} > {occ[1.5]:.0f} > {occ[2.5]:.0f}")


def test_criterion_07_initiator_extrapolation():
    model = ModelParams(**BENCH)
    lat = build_lattice(2, 2, periodic=True)
    gold = GOLD_BENCH["M_z"]
    points = []
    raw_pulls = []
    t0 = time.perf_counter()
    for idx, i_limit in enumerate((5.0, 15.0, 25.0, 75.0)):
        params = EngineParams(dt=0.01, target_population=1e4, n0=2000,
                              equilibration_steps=3000, measurement_steps=30000,
                              i_limit=i_limit, importance_p=2.5, seed=301 + idx)
        res = run(model, lat, params, observables=build_observables(["mz"]))
        est = ratio_estimate(res, "mz")
        points.append((i_limit, est.value, est.error))
        raw_pulls.append((est.value - gold) / est.error)
    elapsed = time.perf_counter() - t0
    intercept, err = initiator_extrapolate(points[:3])
    pull = (intercept - gold) / err
    ok = abs(pull) <= 3 and any(abs(p) > 3 for p in raw_pulls)
    report(7, ok, f"raw pulls {['%+.1f' % p for p in raw_pulls]}, "
                  f"intercept {intercept:.6f}+-{err:.1e} ({pull:+.2f} sigma), {elapsed:.0f}s")


def test_criterion_08_susceptibility_pipeline():
    lat = build_lattice(2, 2, periodic=True)
    fields = (0.0025, 0.005, 0.0075)
    av = {}
    t0 = time.perf_counter()
    for k, rec in enumerate(GOLD_CHI):
        jy = rec["Jy"]
        model = ModelParams(Jx=0.225, Jy=jy, Jz=0.25, gamma=1.0)
        params = EngineParams(dt=0.01, target_population=4000, n0=1500,
                              equilibration_steps=3000, measurement_steps=30000,
                              seed=810 + 7 * k)
        res = susceptibility(model, lat, params, fields=fields, n_bootstrap=4000)
        av[jy] = (res.chi_av, res.chi_av_err, rec["chi_av"])
    elapsed = time.perf_counter() - t0
    pulls = {jy: (v - g) / e for jy, (v, e, g) in av.items()}
    jys = sorted(av)
    vals = [av[j][0] for j in jys]
    single_max = vals[1] > vals[0] and vals[1] > vals[2]
    ok = all(abs(p) <= 3 for p in pulls.values()) and single_max and elapsed < 7200.0
    detail = ", ".join(f"Jy={j}: {av[j][0]:.4f}+-{av[j][1]:.4f} ({pulls[j]:+.2f}s)"
                       for j in jys)
    report(8, ok, f"{detail}; interior max {single_max}, {elapsed:.0f}s")


def test_criterion_09_sampler_statistics():
    rng = rng_stream(2024)
    n, q, draws = 100, 0.3, 100000
    xs = np.array([binomial(n, q, rng) for _ in range(draws)], dtype=np.float64)
    mean_ok = abs(xs.mean() - n * q) < 5 * math.sqrt(n * q * (1 - q) / draws)
    var = n * q * (1 - q)
    excess = (1 - 6 * q * (1 - q)) / var
    se_var = var * math.sqrt((2 + excess) / draws) * math.sqrt(2)
    var_ok = abs(xs.var(ddof=1) - var) < 5 * se_var

    import scipy.stats
    n2, q2 = 20, 0.37
    counts = np.bincount(
        np.array([binomial(n2, q2, rng) for _ in range(draws)]), minlength=n2 + 1
    ).astype(np.float64)
    expected = draws * scipy.stats.binom.pmf(np.arange(n2 + 1), n2, q2)
    keep = expected >= 5
    obs = np.append(counts[keep], counts[~keep].sum())
    exp = np.append(expected[keep], expected[~keep].sum())
    chi2 = ((obs - exp) ** 2 / exp).sum()
    pval = float(scipy.stats.chi2.sf(chi2, obs.size - 1))
    gof_ok = pval > 1e-3

    probs = np.array([0.2, 0.3, 0.5])
    cnt = np.zeros(3)
    trials = 20000
    for _ in range(trials):
        c = multinomial(50, probs, rng)
        cnt += c
    marg = cnt / (50.0 * trials)
    se = np.sqrt(probs * (1 - probs) / (50.0 * trials))
    marg_ok = bool(np.all(np.abs(marg - probs) <= 5 * se))

    vals = np.full(200000, 2.7)
    mean_sr = float(np.mean(stochastic_round(vals, rng)))
    sr_ok = abs(mean_sr - 2.7) < 5 * math.sqrt(0.7 * 0.3 / 200000)

    ok = mean_ok and var_ok and gof_ok and marg_ok and sr_ok
    report(9, ok, f"binomial mean/var ok={mean_ok}/{var_ok}, chi2 p={pval:.3f}, "
                  f"multinomial marginals ok={marg_ok}, rounding ok={sr_ok}")


def test_criterion_10_determinism(crit4):
    tmp = crit4["tmp"]
    csv_a, _, _ = cli_run(tmp, CRIT4_CFG, "repeat")
    same_base = csv_a.read_bytes() == crit4["csv"].read_bytes()

    cfg = copy.deepcopy(CRIT4_CFG)
    cfg["engine"]["shards"] = 4
    csv_s1, _, _ = cli_run(tmp, cfg, "shards_a")
    csv_s2, _, _ = cli_run(tmp, cfg, "shards_b")
    same_shards = csv_s1.read_bytes() == csv_s2.read_bytes()
    differs = csv_s1.read_bytes() != crit4["csv"].read_bytes()

    ok = same_base and same_shards
    report(10, ok, f"seed repeat identical={same_base}, 4-shard pair identical={same_shards} "
                   f"(shard stream differs from 1-shard: {differs})")


def test_criterion_11_scale_smoke():
    model = ModelParams(**BENCH)
    lat = build_lattice(3, 3, periodic=True)
    results = []
    t0 = time.perf_counter()
    for seed in (71, 72):
        params = EngineParams(dt=0.01, target_population=1e6, n0=100000,
                              equilibration_steps=2000, measurement_steps=8000,
                              importance_p=2.0, seed=seed)
        res = run(model, lat, params, observables=build_observables(["mz"]))
        est = ratio_estimate(res, "mz")
        n = res.step.size
        shift_meas = res.mean_shift()
        shift_last = float(res.shift[n // 2:].mean())
        results.append((est.value, est.error, shift_meas, shift_last))
    elapsed = time.perf_counter() - t0
    (v1, e1, s1, l1), (v2, e2, s2, l2) = results
    mutual = abs(v1 - v2) / math.hypot(e1, e2)
    in_band = -1.0 <= v1 <= 0.0 and -1.0 <= v2 <= 0.0
    shifts_ok = max(abs(s1), abs(s2), abs(l1), abs(l2)) < 0.1
    ok = in_band and shifts_ok and mutual <= 3 and elapsed < 7200.0
    report(11, ok, f"mz {v1:.5f}+-{e1:.1e} / {v2:.5f}+-{e2:.1e} "
                   f"(mutual {mutual:.2f} sigma), |S| max {max(abs(s1), abs(s2)):.4f}, "
                   f"{elapsed:.0f}s")
