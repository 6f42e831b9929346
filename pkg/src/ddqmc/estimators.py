"""Observable estimation from walker populations and error analysis.

Expectation values come from the ratio estimator: the numerator sums
walker amplitudes times operator elements (un-weighting any importance
factor on off-site pairs), the denominator sums real walkers on
on-site pairs. Errors come from reblocking with a jackknife over
blocks, which absorbs the serial correlation of the walker dynamics.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .engine import _observable_row, run
from .samplers import rng_stream


class MagnetizationZ:
    """Mean single-site z polarization; lives on on-site pairs only."""

    name = "mz"

    def element_values(self, rows, cols, nbits):
        pc = np.bitwise_count(rows).astype(np.float64)
        vals = (2.0 * pc - nbits) / nbits
        return np.where(rows == cols, vals, 0.0)


class MagnetizationX:
    """Mean single-site x polarization; pairs one single-site flip apart."""

    name = "mx"

    def element_values(self, rows, cols, nbits):
        x = rows ^ cols
        single = (x != 0) & ((x & (x - 1)) == 0)
        return np.where(single, 1.0 / nbits, 0.0)


class MagnetizationY:
    """Mean single-site y polarization; complex elements on flip pairs."""

    name = "my"

    def element_values(self, rows, cols, nbits):
        x = rows ^ cols
        single = (x != 0) & ((x & (x - 1)) == 0)
        vals = np.where((cols & x) != 0, -1j, 1j) / nbits
        return np.where(single, vals, 0.0j)


OBSERVABLES = {"mz": MagnetizationZ, "mx": MagnetizationX, "my": MagnetizationY}


def build_observables(names):
    out = []
    for name in names:
        if name not in OBSERVABLES:
            raise ValueError(f"unknown observable {name!r}; supported: {sorted(OBSERVABLES)}")
        out.append((name, OBSERVABLES[name]()))
    return out


def measure(pop, observable, importance_p=0.0):
    """One population snapshot's estimator contribution (numerator, denominator)."""
    row = _observable_row(pop, [("o", observable)], importance_p)
    r, i, d = row["o"]
    return complex(r, i), d


def magnetization_z(pop, importance_p=0.0):
    num, den = measure(pop, MagnetizationZ(), importance_p)
    if den == 0.0:
        raise ValueError("no real walkers on on-site pairs; estimator undefined")
    return num.real / den


def _block_levels(x, min_blocks=32):
    """Successive pairwise sums; level k holds sums over 2^k consecutive samples."""
    levels = []
    cur = np.asarray(x, dtype=np.float64)
    while cur.size >= min_blocks:
        levels.append(cur)
        cur = cur[: (cur.size // 2) * 2].reshape(-1, 2).sum(axis=1)
    return levels


def _plateau(errors, nblocks):
    """First level whose error the later levels no longer exceed beyond noise."""
    for k in range(len(errors)):
        ok = True
        for j in range(k + 1, len(errors)):
            rel = 1.0 / math.sqrt(2.0 * (nblocks[j] - 1))
            if errors[j] > errors[k] * (1.0 + 2.0 * rel):
                ok = False
                break
        if ok:
            return k
    return len(errors) - 1


def blocking_error(series):
    """Standard error of the mean of a correlated series by reblocking."""
    x = np.asarray(series, dtype=np.float64)
    if x.size < 64:
        raise ValueError("need at least 64 samples for a blocking analysis")
    ses = []
    nblocks = []
    for k, sums in enumerate(_block_levels(x)):
        width = 2 ** k
        means = sums / width
        ses.append(float(means.std(ddof=1) / math.sqrt(means.size)))
        nblocks.append(means.size)
    return ses[_plateau(ses, nblocks)]


def ratio_error(num, den):
    """Blocking + jackknife-over-blocks standard error of sum(num)/sum(den)."""
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    if num.size != den.size:
        raise ValueError("numerator and denominator histories differ in length")
    if num.size < 64:
        raise ValueError("need at least 64 samples for a blocking analysis")
    ses = []
    nblocks = []
    for nsum, dsum in zip(_block_levels(num), _block_levels(den)):
        tn, td = nsum.sum(), dsum.sum()
        b = nsum.size
        theta = (tn - nsum) / (td - dsum)
        se = math.sqrt((b - 1) / b * np.sum((theta - theta.mean()) ** 2))
        ses.append(se)
        nblocks.append(b)
    return ses[_plateau(ses, nblocks)]


@dataclass
class RatioEstimate:
    value: float
    error: float
    value_im: float  # consistency diagnostic; should sit at zero within noise
    n_samples: int


def ratio_estimate(result, name):
    """Blocked estimate of one observable over a run's measurement phase."""
    sl = result.measurement_slice
    num_re = result.obs_num_re[name][sl]
    num_im = result.obs_num_im[name][sl]
    den = result.obs_den[name][sl]
    tot_den = den.sum()
    if tot_den <= 0:
        raise ValueError("non-positive denominator over the measurement phase")
    value = num_re.sum() / tot_den
    value_im = num_im.sum() / tot_den
    return RatioEstimate(
        value=float(value),
        error=ratio_error(num_re, den),
        value_im=float(value_im),
        n_samples=int(num_re.size),
    )


def initiator_extrapolate(points):
    """Weighted least-squares line through (threshold, estimate) points.

    Returns the intercept at threshold zero and its propagated error.
    Each point is (i_limit, estimate, error).
    """
    pts = list(points)
    if len(pts) < 2:
        raise ValueError("need at least two initiator thresholds to extrapolate")
    x = np.array([p[0] for p in pts], dtype=np.float64)
    y = np.array([p[1] for p in pts], dtype=np.float64)
    s = np.array([p[2] for p in pts], dtype=np.float64)
    if np.unique(x).size < 2:
        raise ValueError("degenerate abscissae: need at least two distinct thresholds")
    w = 1.0 / np.maximum(s, 1e-12) ** 2
    sw = w.sum()
    sx = (w * x).sum()
    sxx = (w * x * x).sum()
    sy = (w * y).sum()
    sxy = (w * x * y).sum()
    delta = sw * sxx - sx * sx
    if delta <= 0.0:
        raise ValueError("degenerate design matrix in extrapolation fit")
    intercept = (sxx * sy - sx * sxy) / delta
    err = math.sqrt(sxx / delta)
    return float(intercept), float(err)


def chi_av_quadrature(chi, nodes=720):
    """Angular average of the in-plane response norm by trapezoidal rule.

    chi is the 2x2 tensor of slopes d m_alpha / d h_beta; the integrand
    is the euclidean norm of chi applied to the field direction.
    """
    chi = np.asarray(chi, dtype=np.float64)
    th = np.linspace(0.0, 2.0 * np.pi, nodes + 1)
    c, s = np.cos(th), np.sin(th)
    vx = chi[0, 0] * c + chi[0, 1] * s
    vy = chi[1, 0] * c + chi[1, 1] * s
    return float(np.trapezoid(np.hypot(vx, vy), th) / (2.0 * np.pi))


@dataclass
class SusceptibilityResult:
    chi: np.ndarray        # [[xx, xy], [yx, yy]], alpha = response, beta = field axis
    chi_err: np.ndarray
    chi_av: float
    chi_av_err: float
    fields: tuple
    runs: list

    def to_dict(self):
        return {
            "chi": self.chi.tolist(),
            "chi_err": self.chi_err.tolist(),
            "chi_av": self.chi_av,
            "chi_av_err": self.chi_av_err,
            "fields": list(self.fields),
            "runs": self.runs,
        }


def _constrained_slope(h, y, sig, y0, sig0):
    """WLS slope of a line pinned at (0, y0), with y0's error propagated."""
    w = 1.0 / np.maximum(sig, 1e-12) ** 2
    swhh = (w * h * h).sum()
    swh = (w * h).sum()
    slope = (w * h * (y - y0)).sum() / swhh
    var = 1.0 / swhh + (sig0 * swh / swhh) ** 2
    return slope, math.sqrt(var)


def susceptibility(model, lattice, params, fields=(0.05, 0.10, 0.15),
                   n_bootstrap=4000, n_threads=1):
    """Linear-response tensor from the 3+3+1 applied-field protocol.

    Three runs with the field along x, three along y, one at zero field
    (seven in total, seeds offset by job index). Slopes are fitted
    through the measured zero-field point; the angular average and its
    error come from a parametric bootstrap over the run estimates.
    """
    h = np.asarray(fields, dtype=np.float64)
    if h.size != 3:
        raise ValueError("protocol needs exactly three nonzero field values")
    if not (0.0 < h[0] < h[1] < h[2]):
        raise ValueError("field values must be strictly increasing and positive")

    jobs = [(0.0, float(hk)) for hk in h]
    jobs += [(math.pi / 2.0, float(hk)) for hk in h]
    jobs += [(0.0, 0.0)]

    obs = build_observables(("mx", "my"))

    def one(idx):
        theta, hk = jobs[idx]
        mdl = dataclasses.replace(model, h=hk, theta=theta)
        prm = dataclasses.replace(params, seed=params.seed + idx)
        res = run(mdl, lattice, prm, observables=obs)
        return ratio_estimate(res, "mx"), ratio_estimate(res, "my"), res.mean_shift(), prm.seed

    if n_threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            results = list(pool.map(one, range(7)))
    else:
        results = [one(i) for i in range(7)]

    run_rows = []
    est = np.empty((7, 2))   # job, (mx, my)
    err = np.empty((7, 2))
    for idx, (ex, ey, mean_shift, seed) in enumerate(results):
        theta, hk = jobs[idx]
        est[idx] = (ex.value, ey.value)
        err[idx] = (ex.error, ey.error)
        run_rows.append({
            "theta": theta, "h": hk, "seed": int(seed),
            "mx": ex.value, "mx_err": ex.error,
            "my": ey.value, "my_err": ey.error,
            "mean_shift": mean_shift,
        })

    # alpha = response component (0: x, 1: y), beta = field axis (0: x, 1: y)
    chi = np.empty((2, 2))
    chi_err = np.empty((2, 2))
    y0 = est[6]
    s0 = err[6]
    for beta in (0, 1):
        rows = slice(3 * beta, 3 * beta + 3)
        for alpha in (0, 1):
            chi[alpha, beta], chi_err[alpha, beta] = _constrained_slope(
                h, est[rows, alpha], err[rows, alpha], y0[alpha], s0[alpha]
            )
    chi_av = chi_av_quadrature(chi)

    # parametric bootstrap sharing the zero-field draw across all slopes
    rng = rng_stream(params.seed, 977)
    w = 1.0 / np.maximum(err[:6].reshape(2, 3, 2), 1e-12) ** 2  # [beta, k, alpha]
    swhh = (w * (h * h)[None, :, None]).sum(axis=1)             # [beta, alpha]
    yb = est[:6].reshape(2, 3, 2) + err[:6].reshape(2, 3, 2) * rng.standard_normal(
        (n_bootstrap, 2, 3, 2)
    )
    y0b = y0 + s0 * rng.standard_normal((n_bootstrap, 2))
    numer = (w * h[None, :, None] * (yb - y0b[:, None, None, :])).sum(axis=2)
    slopes = numer / swhh                                        # [rep, beta, alpha]
    th = np.linspace(0.0, 2.0 * np.pi, 721)
    c, s = np.cos(th), np.sin(th)
    vx = slopes[:, 0, 0, None] * c + slopes[:, 1, 0, None] * s
    vy = slopes[:, 0, 1, None] * c + slopes[:, 1, 1, None] * s
    cavs = np.trapezoid(np.hypot(vx, vy), th, axis=1) / (2.0 * np.pi)
    chi_av_err = float(cavs.std(ddof=1))

    return SusceptibilityResult(
        chi=chi, chi_err=chi_err, chi_av=chi_av, chi_av_err=chi_av_err,
        fields=tuple(float(v) for v in h), runs=run_rows,
    )
