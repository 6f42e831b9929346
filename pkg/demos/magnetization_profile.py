"""Magnetization across the anisotropy axis, walkers vs dense reference.

Scans Jy at fixed Jx, Jz on the 2x2 torus. At Jy = Jx the steady state
is the all-down dark state (M_z = -1 exactly); moving away from that
point the dissipative phase melts and M_z rises.
"""
import dataclasses

from ddqmc import EngineParams, ModelParams, build_lattice, build_observables
from ddqmc import ratio_estimate, run
from ddqmc import oracle

lat = build_lattice(2, 2, periodic=True)
params = EngineParams(dt=0.01, target_population=1e4, n0=3000,
                      equilibration_steps=2000, measurement_steps=10000,
                      seed=40)

print("   Jy     M_z exact     M_z walkers        pull")
for idx, jy in enumerate([0.225, 0.25, 0.30, 0.335, 0.40, 0.60, 0.90]):
    model = ModelParams(Jx=0.225, Jy=jy, Jz=0.25, gamma=1.0)
    exact = oracle.steady_magnetizations(model, lat)[2]
    prm = dataclasses.replace(params, seed=params.seed + idx)
    res = run(model, lat, prm, observables=build_observables(["mz"]))
    est = ratio_estimate(res, "mz")
    pull = 0.0 if est.error == 0 else (est.value - exact) / est.error
    print(f"  {jy:.3f}  {exact:+.8f}  {est.value:+.6f} +- {est.error:.1e}  {pull:+5.2f}")
