"""Dense brute-force reference for small lattices.

Builds the full Lindblad superoperator as an explicit matrix over
operator-pair space (basis index = row_config * 2^N + col_config, row
major), solves for the steady state by direct linear algebra, and
integrates the master equation in time. Everything here is meant to be
slow, obvious and independent of the stochastic solver, so the two can
be checked against each other element by element.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .lattice import build_lattice, hamiltonian_diagonal, n_up  # noqa: F401

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
# basis order per site is (down, up); <up|sigma_y|down> = -i sits at [1, 0]
SIGMA_Y = np.array([[0.0, 1.0j], [-1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=complex)
LOWER = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # S^- : up -> down

MAX_ORACLE_SITES = 6  # 4096-dim superoperator; anything bigger is hopeless dense


def site_operator(op, site, nsites):
    """Embed a 2x2 operator at one site; bit k of the basis index is site k."""
    out = np.array([[1.0 + 0.0j]])
    for k in range(nsites):
        out = np.kron(op, out) if k == site else np.kron(np.eye(2, dtype=complex), out)
    return out


def dense_sigma(axis, site, nsites):
    op = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}[axis]
    return site_operator(op, site, nsites)


def dense_magnetization(axis, nsites):
    """Per-site averaged magnetization operator along x, y or z."""
    dim = 2**nsites
    out = np.zeros((dim, dim), dtype=complex)
    for k in range(nsites):
        out += dense_sigma(axis, k, nsites)
    return out / nsites


def build_dense_hamiltonian(model, lattice):
    """XYZ exchange over bonds (S = sigma/2) plus the in-plane field."""
    n = lattice.nsites
    dim = 2**n
    ham = np.zeros((dim, dim), dtype=complex)
    for a, b in lattice.bonds:
        for coupling, op in ((model.Jx, SIGMA_X), (model.Jy, SIGMA_Y), (model.Jz, SIGMA_Z)):
            if coupling != 0.0:
                ham += 0.25 * coupling * site_operator(op, a, n) @ site_operator(op, b, n)
    if model.h > 0.0:
        hx = model.h * np.cos(model.theta)
        hy = model.h * np.sin(model.theta)
        for k in range(n):
            if hx != 0.0:
                ham += hx * dense_sigma("x", k, n)
            if hy != 0.0:
                ham += hy * dense_sigma("y", k, n)
    return ham


class DenseLiouvillian:
    """Full generator matrix with its ingredients kept around for reuse."""

    def __init__(self, matrix, model, lattice, shift, hamiltonian):
        self.matrix = matrix
        self.model = model
        self.lattice = lattice
        self.shift = shift
        self.hamiltonian = hamiltonian
        self.hilbert_dim = hamiltonian.shape[0]

    @property
    def dim(self):
        return self.matrix.shape[0]


def build_dense(model, lattice, shift=0.0):
    """Assemble the shifted generator over pair space.

    With basis index row*2^N + col the superposition of maps A.rho.B
    becomes kron(A, B^T), so the generator reads
        -i (H x 1 - 1 x H^T) - shift
        + gamma * sum_k [ F_k x F_k^* - (F_k^+ F_k x 1 + 1 x (F_k^+ F_k)^T)/2 ]
    with F_k the lowering operator at site k.
    """
    n = lattice.nsites
    if n > MAX_ORACLE_SITES:
        raise ValueError(f"dense reference limited to {MAX_ORACLE_SITES} sites, got {n}")
    ham = build_dense_hamiltonian(model, lattice)
    dim = ham.shape[0]
    eye = np.eye(dim, dtype=complex)
    sup = -1.0j * (np.kron(ham, eye) - np.kron(eye, ham.T))
    for k in range(n):
        f = site_operator(LOWER, k, n)
        ff = f.conj().T @ f
        sup += model.gamma * (
            np.kron(f, f.conj())
            - 0.5 * np.kron(ff, eye)
            - 0.5 * np.kron(eye, ff.T)
        )
    if shift != 0.0:
        sup -= shift * np.eye(dim * dim, dtype=complex)
    return DenseLiouvillian(sup, model, lattice, shift, ham)


class SteadyState:
    def __init__(self, rho, residual, trace_error, min_eigenvalue):
        self.rho = rho
        self.residual = residual
        self.trace_error = trace_error
        self.min_eigenvalue = min_eigenvalue


def steady_state(liouv, check_unique=True):
    """Null vector of the generator, normalized to a physical density matrix.

    Solves L x = 0 with one row replaced by the trace condition; falls
    back to the SVD null vector if the replaced system is ill behaved.
    """
    if liouv.shift != 0.0:
        raise ValueError("steady state is defined for the unshifted generator")
    mat = liouv.matrix
    dim = liouv.hilbert_dim
    sup_dim = mat.shape[0]
    diag_idx = np.arange(dim) * dim + np.arange(dim)

    constrained = mat.copy()
    constrained[0, :] = 0.0
    constrained[0, diag_idx] = 1.0
    rhs = np.zeros(sup_dim, dtype=complex)
    rhs[0] = 1.0
    try:
        vec = scipy.linalg.solve(constrained, rhs)
    except scipy.linalg.LinAlgError:
        vec = None
    if vec is None or not np.all(np.isfinite(vec)) or np.linalg.norm(mat @ vec) > 1e-6:
        # degenerate or unlucky row replacement: take the smallest singular vector
        _, svals, vh = np.linalg.svd(mat)
        vec = vh[-1].conj()
        tr = vec[diag_idx].sum()
        if abs(tr) < 1e-12:
            raise ValueError("null vector is traceless; no physical steady state")
        vec = vec / tr

    if check_unique and sup_dim <= 4096:
        svals = np.linalg.svd(mat, compute_uv=False)
        if svals[-2] < 1e-10 * max(svals[0], 1.0):
            raise ValueError("degenerate null space: steady state is not unique")

    rho = vec.reshape(dim, dim)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    residual = float(np.linalg.norm(mat @ rho.reshape(-1)))
    trace_error = abs(np.trace(rho) - 1.0)
    min_eig = float(np.linalg.eigvalsh(rho).min())
    return SteadyState(rho, residual, trace_error, min_eig)


def _apply(liouv, rho):
    return (liouv.matrix @ rho.reshape(-1)).reshape(rho.shape)


def integrate(liouv, rho0, dt, steps, method="rk4"):
    """March d(rho)/dt = L(rho) forward with fixed-step Euler or RK4."""
    if method not in ("euler", "rk4"):
        raise ValueError(f"unknown integrator {method!r}")
    if dt <= 0:
        raise ValueError("dt must be positive")
    rho = np.array(rho0, dtype=complex)
    ceiling = 1e6 * max(1.0, float(np.abs(rho).max()))
    for _ in range(steps):
        if method == "euler":
            rho = rho + dt * _apply(liouv, rho)
        else:
            k1 = _apply(liouv, rho)
            k2 = _apply(liouv, rho + 0.5 * dt * k1)
            k3 = _apply(liouv, rho + 0.5 * dt * k2)
            k4 = _apply(liouv, rho + dt * k3)
            rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if np.abs(rho).max() > ceiling:
            raise RuntimeError("integration diverged; reduce dt")
    return rho


def relax(liouv, dt=0.02, method="rk4", tol=1e-10, chunk_time=25.0, max_chunks=40, rho0=None):
    """Integrate until the state stops moving; returns the relaxed rho."""
    dim = liouv.hilbert_dim
    if rho0 is None:
        rho = np.eye(dim, dtype=complex) / dim
    else:
        rho = np.array(rho0, dtype=complex)
    steps = max(1, int(round(chunk_time / dt)))
    for _ in range(max_chunks):
        new = integrate(liouv, rho, dt, steps, method=method)
        delta = np.abs(new - rho).max()
        rho = new
        if delta < tol:
            return rho
    raise RuntimeError("relaxation did not converge; gap too small or dt too large")


def exact_expectation(rho, operator):
    """Tr(O rho) / Tr(rho), real part."""
    return float(np.real(np.trace(operator @ rho) / np.trace(rho)))


def golden_record(model, lattice):
    """Steady-state observables in the JSON layout used for frozen fixtures."""
    liouv = build_dense(model, lattice)
    ss = steady_state(liouv)
    n = lattice.nsites
    rec = {
        "lattice": {"rows": lattice.rows, "cols": lattice.cols, "periodic": lattice.periodic},
        "model": {
            "Jx": model.Jx,
            "Jy": model.Jy,
            "Jz": model.Jz,
            "gamma": model.gamma,
            "h": model.h,
            "theta": model.theta,
        },
        "M_z": exact_expectation(ss.rho, dense_magnetization("z", n)),
        "sigma_x": exact_expectation(ss.rho, dense_magnetization("x", n)),
        "sigma_y": exact_expectation(ss.rho, dense_magnetization("y", n)),
        "residual": ss.residual,
    }
    return rec


def steady_magnetizations(model, lattice):
    """(M_x, M_y, M_z) of the exact steady state."""
    ss = steady_state(build_dense(model, lattice))
    n = lattice.nsites
    return tuple(
        exact_expectation(ss.rho, dense_magnetization(ax, n)) for ax in ("x", "y", "z")
    )


def finite_difference_susceptibility(model, lattice, eps=1e-3):
    """Zero-field susceptibility tensor by central differences.

    The field amplitude is kept non-negative; the negative displacement
    is realized by rotating the field angle by pi.
    """
    from dataclasses import replace

    chi = np.zeros((2, 2))
    angles = {"x": 0.0, "y": 0.5 * np.pi}
    for j, beta in enumerate(("x", "y")):
        plus = steady_magnetizations(replace(model, h=eps, theta=angles[beta]), lattice)
        minus = steady_magnetizations(replace(model, h=eps, theta=angles[beta] + np.pi), lattice)
        chi[0, j] = (plus[0] - minus[0]) / (2.0 * eps)
        chi[1, j] = (plus[1] - minus[1]) / (2.0 * eps)
    return chi
