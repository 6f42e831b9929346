"""Signed-walker evolution of the density operator over pair space.

The population lives on basis operators |row><col| as integer real and
imaginary walker counts. One explicit Euler step of the shifted
generator is realized stochastically: off-site elements spawn children
(binomial total, multinomial placement), the on-site element clones or
kills walkers through stochastic rounding, and opposite-signed arrivals
on the same pair annihilate by plain signed addition.

All per-step randomness is drawn from a stream keyed by
(seed, step, shard), so a run is bit-reproducible for a fixed
(seed, shard count), independent of how shards are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .liouvillian import ConnectionTable
from .samplers import rng_stream


class SimulationDied(RuntimeError):
    """Walker population lost (or never grew); the run cannot continue."""


class PopulationExplosion(RuntimeError):
    """Total walker weight blew past the configured hard cap."""


class TimeStepTooLarge(RuntimeError):
    """A death factor 1 + Re(D) went negative; reduce dt."""


_HASH_MULT = np.uint64(0x9E3779B97F4A7C15)
_ONE = np.uint64(1)


@dataclass
class EngineParams:
    dt: float
    target_population: float
    equilibration_steps: int = 0
    measurement_steps: int = 0
    delta: float = 0.05
    shift_update_interval: int = 10
    s_init: float = -0.5
    i_limit: float = 0.0
    importance_p: float = 0.0
    seed: int = 1
    n0: int = 1000
    hard_cap: float = 1e8
    nw_mode: str = "abs"
    shards: int = 1
    max_growth_steps: int = 1_000_000

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be > 0")
        if self.target_population <= 0:
            raise ValueError("target_population must be > 0")
        if self.equilibration_steps < 0 or self.measurement_steps < 0:
            raise ValueError("step counts must be >= 0")
        if self.delta <= 0.0:
            raise ValueError("shift damping delta must be > 0")
        if self.shift_update_interval < 1:
            raise ValueError("shift_update_interval must be >= 1")
        if self.i_limit < 0.0:
            raise ValueError("i_limit must be >= 0 (0 disables the initiator filter)")
        if self.importance_p < 0.0:
            raise ValueError("importance_p must be >= 0")
        if self.n0 < 1:
            raise ValueError("n0 must be >= 1")
        if self.hard_cap <= 0:
            raise ValueError("hard_cap must be > 0")
        if self.nw_mode not in ("abs", "net"):
            raise ValueError("nw_mode must be 'abs' or 'net'")
        if not 1 <= self.shards <= 65535:
            raise ValueError("shards must be in [1, 65535]")
        if self.max_growth_steps < 1:
            raise ValueError("max_growth_steps must be >= 1")


@dataclass
class WalkerCell:
    re: int
    im: int
    initiator: bool


class Population:
    """Sorted sparse table code -> (re, im, initiator), plus shift and clock."""

    def __init__(self, nbits, codes, re, im, flags, shift, step=0):
        self.nbits = nbits
        self.codes = codes
        self.re = re
        self.im = im
        self.flags = flags
        self.shift = shift
        self.step = step

    @classmethod
    def start(cls, nbits, row, col, n0, shift):
        code = np.array([(row << nbits) | col], dtype=np.uint64)
        return cls(
            nbits,
            code,
            np.array([n0], dtype=np.int64),
            np.array([0], dtype=np.int64),
            np.array([True]),
            shift,
        )

    @property
    def size(self):
        return self.codes.size

    def rows(self):
        return self.codes >> np.uint64(self.nbits)

    def cols(self):
        return self.codes & ((_ONE << np.uint64(self.nbits)) - _ONE)

    def diagonal_mask(self):
        return self.rows() == self.cols()

    def diag_weight(self, mode="abs"):
        d = self.diagonal_mask()
        return int(np.abs(self.re[d]).sum()) if mode == "abs" else int(self.re[d].sum())

    def total_weight(self):
        return int(np.abs(self.re).sum() + np.abs(self.im).sum())

    def cell(self, row, col):
        code = np.uint64((row << self.nbits) | col)
        pos = int(np.searchsorted(self.codes, code))
        if pos < self.size and self.codes[pos] == code:
            return WalkerCell(int(self.re[pos]), int(self.im[pos]), bool(self.flags[pos]))
        return None

    def as_dict(self):
        rows, cols = self.rows(), self.cols()
        return {
            (int(r), int(c)): (int(a), int(b))
            for r, c, a, b in zip(rows, cols, self.re, self.im)
        }


def update_shift(shift, n_w, n_w_prev, params):
    """Damped log-population feedback, applied once per update interval."""
    if n_w <= 0 or n_w_prev <= 0:
        raise SimulationDied("diagonal walker weight vanished during shift update")
    rate = params.delta / (params.shift_update_interval * params.dt)
    return shift + rate * math.log(n_w / n_w_prev)


def _stochastic_round(mag, rng):
    lo = np.floor(mag)
    return (lo + (rng.random(mag.shape) < (mag - lo))).astype(np.int64)


class WalkerEngine:
    def __init__(self, model, lattice, params):
        if 2 * lattice.nsites > 63:
            raise ValueError("pair codes limited to 63 bits (31 sites)")
        self.model = model
        self.lattice = lattice
        self.params = params
        self.table = ConnectionTable(model, lattice, p=params.importance_p)
        self.nbits = lattice.nsites

    def initial_population(self):
        """All real walkers on the all-down diagonal pair."""
        return Population.start(self.nbits, 0, 0, self.params.n0, self.params.s_init)

    def _spawn_species(self, rng, parents, psign, ptot, cdf, tcodes, amp_re, amp_im, swap):
        """Children of one parent species (real walkers, or imaginary if swap).

        Returns (targets, d_re, d_im, source_index). Total attempts are
        n*floor(P) deterministic rounds plus a Binomial(n, frac(P)) round;
        each child picks a slot from the per-pair CDF over the 2C slots
        (real parts first, then imaginary parts).
        """
        n_ch = tcodes.shape[1]
        full = np.floor(ptot)
        extra = rng.binomial(parents, ptot - full)
        total = parents * full.astype(np.int64) + extra
        src = np.repeat(np.arange(parents.size), total)
        if src.size == 0:
            empty = np.empty(0, dtype=np.uint64)
            zero = np.empty(0, dtype=np.int64)
            return empty, zero, zero, np.empty(0, dtype=np.intp)
        u = rng.random(src.size) * ptot[src]
        slot = (cdf[src] <= u[:, None]).sum(axis=1)
        np.minimum(slot, 2 * n_ch - 1, out=slot)  # u==ptot float edge
        imag_slot = slot >= n_ch
        ch = slot - n_ch * imag_slot
        tgt = tcodes[src, ch]
        sgn_re = np.sign(amp_re[src, ch])
        sgn_im = np.sign(amp_im[src, ch])
        ps = psign[src]
        if not swap:
            # real parents: real child from Re A, imaginary child from Im A
            d_re = np.where(~imag_slot, ps * sgn_re, 0.0)
            d_im = np.where(imag_slot, ps * sgn_im, 0.0)
        else:
            # imaginary parents: the i*i=-1 puts a minus on the real child
            d_re = np.where(imag_slot, -ps * sgn_im, 0.0)
            d_im = np.where(~imag_slot, ps * sgn_re, 0.0)
        return tgt, d_re.astype(np.int64), d_im.astype(np.int64), src

    def step(self, pop):
        """One Euler step: spawn, clone/kill, annihilate by signed merge."""
        par = self.params
        if pop.size == 0:
            return Population(
                pop.nbits, pop.codes, pop.re, pop.im, pop.flags, pop.shift, pop.step + 1
            )
        nbits = np.uint64(self.nbits)
        col_mask = (_ONE << nbits) - _ONE

        out_codes = []
        out_re = []
        out_im = []
        out_parent_flag = []

        if par.shards == 1:
            shard_of = None
        else:
            shard_of = ((pop.codes * _HASH_MULT) >> np.uint64(40)) % np.uint64(par.shards)

        for shard in range(par.shards):
            if shard_of is None:
                codes = pop.codes
                re = pop.re
                im = pop.im
                flags = pop.flags
            else:
                sel = shard_of == np.uint64(shard)
                codes = pop.codes[sel]
                re = pop.re[sel]
                im = pop.im[sel]
                flags = pop.flags[sel]
            if codes.size == 0:
                continue
            rng = rng_stream(par.seed, (np.uint64(pop.step) << np.uint64(16)) | np.uint64(shard))
            rows = codes >> nbits
            cols = codes & col_mask

            tcodes, amp_re, amp_im = self.table.build(rows, cols)
            mag = np.concatenate([np.abs(amp_re), np.abs(amp_im)], axis=1) * par.dt
            cdf = np.cumsum(mag, axis=1)
            ptot = cdf[:, -1] if cdf.shape[1] else np.zeros(codes.size)

            for swap, vals in ((False, re), (True, im)):
                parents = np.abs(vals)
                if not parents.any():
                    continue
                tgt, d_re, d_im, src = self._spawn_species(
                    rng, parents, np.sign(vals), ptot, cdf, tcodes, amp_re, amp_im, swap
                )
                out_codes.append(tgt)
                out_re.append(d_re)
                out_im.append(d_im)
                out_parent_flag.append(flags[src])

            # on-site clone/death from the diagonal element D = (diag - S) * dt
            loss, d_imag = self.table.diagonal_parts(rows, cols)
            dr = (loss - pop.shift) * par.dt
            di = d_imag * par.dt
            if np.any(dr < -1.0):
                raise TimeStepTooLarge(
                    "death factor 1 + Re(D) went negative; reduce dt"
                )
            abs_re = np.abs(re).astype(np.float64)
            abs_im = np.abs(im).astype(np.float64)
            sgn_dr = np.sign(dr).astype(np.int64)
            sgn_di = np.sign(di).astype(np.int64)
            sgn_re = np.sign(re)
            sgn_im = np.sign(im)
            new_re = re + sgn_re * sgn_dr * _stochastic_round(abs_re * np.abs(dr), rng)
            new_re -= sgn_im * sgn_di * _stochastic_round(abs_im * np.abs(di), rng)
            new_im = im + sgn_im * sgn_dr * _stochastic_round(abs_im * np.abs(dr), rng)
            new_im += sgn_re * sgn_di * _stochastic_round(abs_re * np.abs(di), rng)
            out_codes.append(codes)
            out_re.append(new_re)
            out_im.append(new_im)
            # parents never pass the initiator filter test; mark them exempt
            out_parent_flag.append(np.ones(codes.size, dtype=bool))

        all_codes = np.concatenate(out_codes)
        all_re = np.concatenate(out_re)
        all_im = np.concatenate(out_im)

        if par.i_limit > 0.0:
            all_flag = np.concatenate(out_parent_flag)
            need_check = ~all_flag
            if need_check.any():
                tgt = all_codes[need_check]
                t_diag = (tgt >> nbits) == (tgt & col_mask)
                pos = np.searchsorted(pop.codes, tgt)
                pos_c = np.minimum(pos, pop.size - 1)
                occupied = pop.codes[pos_c] == tgt
                keep = np.ones(all_codes.size, dtype=bool)
                keep[need_check] = t_diag | occupied
                all_codes = all_codes[keep]
                all_re = all_re[keep]
                all_im = all_im[keep]

        uniq, inv = np.unique(all_codes, return_inverse=True)
        acc_re = np.bincount(inv, weights=all_re, minlength=uniq.size).astype(np.int64)
        acc_im = np.bincount(inv, weights=all_im, minlength=uniq.size).astype(np.int64)
        alive = (acc_re != 0) | (acc_im != 0)
        uniq = uniq[alive]
        acc_re = acc_re[alive]
        acc_im = acc_im[alive]

        if par.i_limit > 0.0:
            new_flags = (uniq >> nbits) == (uniq & col_mask)
            new_flags |= (np.abs(acc_re) + np.abs(acc_im)) > par.i_limit
            # flags stick while a cell stays occupied and drop when it empties
            pos = np.searchsorted(pop.codes, uniq)
            pos_c = np.minimum(pos, max(pop.size - 1, 0))
            was_there = (pop.codes[pos_c] == uniq) if pop.size else np.zeros(uniq.size, bool)
            carried = np.zeros(uniq.size, dtype=bool)
            carried[was_there] = pop.flags[pos_c[was_there]]
            new_flags |= carried
        else:
            new_flags = np.ones(uniq.size, dtype=bool)

        return Population(pop.nbits, uniq, acc_re, acc_im, new_flags, pop.shift, pop.step + 1)


@dataclass
class RunResult:
    model: object
    lattice: object
    params: EngineParams
    observable_names: list
    step: np.ndarray
    time: np.ndarray
    shift: np.ndarray
    n_diag: np.ndarray
    n_total: np.ndarray
    n_occupied: np.ndarray
    obs_num_re: dict
    obs_num_im: dict
    obs_den: dict
    growth_steps: int
    measure_start: int
    final_population: Population

    @property
    def measurement_slice(self):
        return slice(self.measure_start, self.step.size)

    def mean_shift(self):
        s = self.shift[self.measurement_slice]
        return float(s.mean()) if s.size else float("nan")

    def mean_occupied(self):
        s = self.n_occupied[self.measurement_slice]
        return float(s.mean()) if s.size else float("nan")


def _observable_row(pop, observables, importance_p):
    """Per-step estimator contributions: {name: (num_re, num_im, den)}."""
    rows = pop.rows()
    cols = pop.cols()
    diag = rows == cols
    amp = pop.re + 1j * pop.im
    if importance_p != 0.0:
        amp = amp * np.where(diag, 1.0, math.exp(importance_p))
    den = float(pop.re[diag].sum())
    out = {}
    for name, obs in observables:
        vals = obs.element_values(rows, cols, pop.nbits)
        num = complex((amp * vals).sum())
        out[name] = (num.real, num.imag, den)
    return out


def run(model, lattice, params, observables=(), on_record=None):
    """Growth, equilibration and measurement phases of one full run.

    The growth phase holds the shift at s_init until the diagonal walker
    weight reaches target_population; after that the shift controller
    engages and stays engaged. Every completed step emits one record.
    `observables` is a list of (name, observable) pairs; records carry
    their per-step numerator and denominator contributions.
    """
    eng = WalkerEngine(model, lattice, params)
    pop = eng.initial_population()
    names = [name for name, _ in observables]

    col_step, col_time, col_shift = [], [], []
    col_ndiag, col_ntotal, col_nocc = [], [], []
    col_num_re = {n: [] for n in names}
    col_num_im = {n: [] for n in names}
    col_den = {n: [] for n in names}

    def emit(pop):
        col_step.append(pop.step)
        col_time.append(pop.step * params.dt)
        col_shift.append(pop.shift)
        nd = pop.diag_weight("abs")
        nt = pop.total_weight()
        col_ndiag.append(nd)
        col_ntotal.append(nt)
        col_nocc.append(pop.size)
        obs_row = _observable_row(pop, observables, params.importance_p)
        for n in names:
            r, i, d = obs_row[n]
            col_num_re[n].append(r)
            col_num_im[n].append(i)
            col_den[n].append(d)
        if on_record is not None:
            on_record(pop.step, pop.step * params.dt, pop.shift, nd, nt, obs_row)
        if nt > params.hard_cap:
            raise PopulationExplosion(
                f"total walker weight {nt} exceeded hard cap {params.hard_cap:g}"
            )

    # growth phase: free amplification at fixed shift
    growth_steps = 0
    while pop.diag_weight(params.nw_mode) < params.target_population:
        if pop.size == 0:
            raise SimulationDied("population died during growth")
        if growth_steps >= params.max_growth_steps:
            raise SimulationDied("growth phase stalled; raise s_init or n0")
        pop = eng.step(pop)
        growth_steps += 1
        emit(pop)

    engage_step = pop.step
    n_w_prev = pop.diag_weight(params.nw_mode)

    for k in range(params.equilibration_steps + params.measurement_steps):
        if pop.size == 0:
            raise SimulationDied("population died")
        pop = eng.step(pop)
        if (pop.step - engage_step) % params.shift_update_interval == 0:
            n_w = pop.diag_weight(params.nw_mode)
            pop.shift = update_shift(pop.shift, n_w, n_w_prev, params)
            n_w_prev = n_w
        emit(pop)

    return RunResult(
        model=model,
        lattice=lattice,
        params=params,
        observable_names=names,
        step=np.array(col_step, dtype=np.int64),
        time=np.array(col_time),
        shift=np.array(col_shift),
        n_diag=np.array(col_ndiag, dtype=np.int64),
        n_total=np.array(col_ntotal, dtype=np.int64),
        n_occupied=np.array(col_nocc, dtype=np.int64),
        obs_num_re={n: np.array(v) for n, v in col_num_re.items()},
        obs_num_im={n: np.array(v) for n, v in col_num_im.items()},
        obs_den={n: np.array(v) for n, v in col_den.items()},
        growth_steps=growth_steps,
        measure_start=growth_steps + params.equilibration_steps,
        final_population=pop,
    )
