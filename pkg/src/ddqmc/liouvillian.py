"""Matrix elements of the shifted generator over operator-pair space.

A pair (row, col) addresses the basis operator |row><col|. The element
rules come in three families: Hamiltonian moves acting on the row index
(amplitude -i*A), Hamiltonian moves on the column index (+i*conj(A)),
and quantum jumps lowering the same site on both sides (amplitude
gamma). The anticommutator and shift parts are diagonal.

Two implementations live here on purpose. `connections` builds one
pair's targets from the scalar lattice helpers; `ConnectionTable` builds
the same amplitudes for a whole batch of pairs with vectorized bit
arithmetic. They are tested against each other and against the dense
reference matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import (
    hamiltonian_diagonal,
    hamiltonian_offdiagonal,
    jump_targets,
    n_up,
)


@dataclass(frozen=True)
class ConfigPair:
    row: int
    col: int

    @property
    def is_diagonal(self):
        return self.row == self.col


@dataclass(frozen=True)
class Connection:
    target: ConfigPair
    amplitude: complex


class ImportanceScheme:
    """Similarity transform weights: w = exp(-p) off diagonal, 1 on it."""

    def __init__(self, p=0.0):
        if p < 0:
            raise ValueError("importance exponent p must be >= 0")
        self.p = float(p)

    def weight(self, row, col):
        return 1.0 if row == col else math.exp(-self.p)

    def weight_ratio(self, src, tgt):
        """w(target) / w(source); multiplies every transformed amplitude."""
        src_off = src.row != src.col
        tgt_off = tgt.row != tgt.col
        return math.exp(self.p * (src_off - tgt_off))


def diagonal_element(pair, model, lattice, shift=0.0):
    """On-site element: -i(H_rr - H_cc) - shift - (gamma/2)(n_up(r) + n_up(c))."""
    h_rr = hamiltonian_diagonal(pair.row, model, lattice)
    h_cc = hamiltonian_diagonal(pair.col, model, lattice)
    real = -shift - 0.5 * model.gamma * (n_up(pair.row) + n_up(pair.col))
    return complex(real, -(h_rr - h_cc))


def connections(pair, model, lattice, importance=None):
    """All off-site targets reachable from pair, with transformed amplitudes."""
    imp = importance or ImportanceScheme(0.0)
    out = []
    for row2, amp in hamiltonian_offdiagonal(pair.row, model, lattice):
        tgt = ConfigPair(row2, pair.col)
        out.append(Connection(tgt, -1j * amp * imp.weight_ratio(pair, tgt)))
    for col2, amp in hamiltonian_offdiagonal(pair.col, model, lattice):
        tgt = ConfigPair(pair.row, col2)
        out.append(Connection(tgt, 1j * amp.conjugate() * imp.weight_ratio(pair, tgt)))
    for site, row2 in jump_targets(pair.row, lattice.nsites):
        if (pair.col >> site) & 1:
            tgt = ConfigPair(row2, pair.col ^ (1 << site))
            out.append(Connection(tgt, model.gamma * imp.weight_ratio(pair, tgt)))
    return out


def stability_bound(model, lattice):
    """Rough largest safe time step: 1 / max row sum over extremal pairs.

    Samples the all-up diagonal pair (largest loss terms) and the
    maximal-coherence pairs. Diagnostic only; returns +inf when the
    generator vanishes.
    """
    up = (1 << lattice.nsites) - 1
    down = 0
    widest = 0.0
    for pair in (
        ConfigPair(up, up),
        ConfigPair(up, down),
        ConfigPair(down, up),
        ConfigPair(down, down),
    ):
        row_sum = abs(diagonal_element(pair, model, lattice, shift=0.0))
        row_sum += sum(abs(c.amplitude) for c in connections(pair, model, lattice))
        widest = max(widest, row_sum)
    return math.inf if widest == 0.0 else 1.0 / widest


class ConnectionTable:
    """Vectorized connection amplitudes for a batch of pairs.

    Given row/col code arrays of shape (n,), exposes target pair codes
    and the real/imaginary amplitude parts as (n, C) matrices, where C
    runs over the fixed channel list of the model:

        per bond:      one row-exchange and one col-exchange channel
        per site, h>0: one row-flip and one col-flip field channel
        per site:      one jump channel (amplitude zero unless the site
                       is up in both row and col)

    Amplitudes already include the importance weight ratio. Channels
    whose amplitude vanishes for a given pair keep their slot with
    amplitude zero; they draw no spawns.
    """

    def __init__(self, model, lattice, p=0.0):
        self.model = model
        self.lattice = lattice
        self.p = float(p)
        self.nbits = lattice.nsites
        bonds = np.asarray(lattice.bonds, dtype=np.uint64).reshape(-1, 2)
        self._bond_a = bonds[:, 0]
        self._bond_b = bonds[:, 1]
        self._bond_mask = (np.uint64(1) << self._bond_a) | (np.uint64(1) << self._bond_b)
        self._site_mask = np.uint64(1) << np.arange(self.nbits, dtype=np.uint64)
        self._flip_flop = 0.25 * (model.Jx + model.Jy)
        self._double_flip = 0.25 * (model.Jx - model.Jy)
        self._hc = model.h * math.cos(model.theta)
        self._hs = model.h * math.sin(model.theta)
        self._with_field = model.h > 0.0

    def _exchange_amp(self, configs):
        """(n, B) signed exchange element for flipping each bond in configs."""
        c = configs[:, None]
        differ = ((c >> self._bond_a) ^ (c >> self._bond_b)) & np.uint64(1)
        return np.where(differ.astype(bool), self._flip_flop, self._double_flip)

    def build(self, rows, cols):
        """Returns (target_codes, amp_re, amp_im), each of shape (n, C)."""
        rows = np.asarray(rows, dtype=np.uint64)
        cols = np.asarray(cols, dtype=np.uint64)
        n = rows.shape[0]
        one = np.uint64(1)

        t_rows, t_cols, amp_re, amp_im = [], [], [], []

        # Hamiltonian exchange moves: -i*A on the row, +i*A on the column
        # (A is real for exchange terms).
        ex_row = self._exchange_amp(rows)
        t_rows.append(rows[:, None] ^ self._bond_mask)
        t_cols.append(np.broadcast_to(cols[:, None], ex_row.shape))
        amp_re.append(np.zeros_like(ex_row))
        amp_im.append(-ex_row)

        ex_col = self._exchange_amp(cols)
        t_rows.append(np.broadcast_to(rows[:, None], ex_col.shape))
        t_cols.append(cols[:, None] ^ self._bond_mask)
        amp_re.append(np.zeros_like(ex_col))
        amp_im.append(ex_col)

        if self._with_field:
            # single-spin flips; raising picks amplitude hc - i*hs, and the
            # -i / +i*conj prefactors turn that into the parts below
            up_row = ((rows[:, None] >> np.arange(self.nbits, dtype=np.uint64)) & one).astype(bool)
            t_rows.append(rows[:, None] ^ self._site_mask)
            t_cols.append(np.broadcast_to(cols[:, None], up_row.shape))
            amp_re.append(np.where(up_row, self._hs, -self._hs))
            amp_im.append(np.full(up_row.shape, -self._hc))

            up_col = ((cols[:, None] >> np.arange(self.nbits, dtype=np.uint64)) & one).astype(bool)
            t_rows.append(np.broadcast_to(rows[:, None], up_col.shape))
            t_cols.append(cols[:, None] ^ self._site_mask)
            amp_re.append(np.where(up_col, self._hs, -self._hs))
            amp_im.append(np.full(up_col.shape, self._hc))

        # jump channels: lower site k on both sides when up on both sides
        shifts = np.arange(self.nbits, dtype=np.uint64)
        both_up = ((rows[:, None] >> shifts) & (cols[:, None] >> shifts) & one).astype(bool)
        t_rows.append(rows[:, None] ^ (self._site_mask * both_up.astype(np.uint64)))
        t_cols.append(cols[:, None] ^ (self._site_mask * both_up.astype(np.uint64)))
        amp_re.append(np.where(both_up, self.model.gamma, 0.0))
        amp_im.append(np.zeros(both_up.shape))

        t_rows = np.concatenate(t_rows, axis=1)
        t_cols = np.concatenate(t_cols, axis=1)
        amp_re = np.concatenate(amp_re, axis=1)
        amp_im = np.concatenate(amp_im, axis=1)

        if self.p != 0.0:
            src_off = (rows != cols).astype(np.float64)
            tgt_off = (t_rows != t_cols).astype(np.float64)
            factor = np.exp(self.p * (src_off[:, None] - tgt_off))
            amp_re = amp_re * factor
            amp_im = amp_im * factor

        codes = (t_rows << np.uint64(self.nbits)) | t_cols
        return codes, amp_re, amp_im

    def diagonal_parts(self, rows, cols):
        """Shift-free diagonal element split into (real, imag) arrays.

        The caller subtracts the current shift from the real part. The
        imaginary part is -(H_rr - H_cc); the real part is the loss term
        -(gamma/2)(n_up(row) + n_up(col)).
        """
        rows = np.asarray(rows, dtype=np.uint64)
        cols = np.asarray(cols, dtype=np.uint64)
        loss = -0.5 * self.model.gamma * (
            np.bitwise_count(rows).astype(np.float64)
            + np.bitwise_count(cols).astype(np.float64)
        )
        c_r = rows[:, None]
        c_c = cols[:, None]
        differ_r = ((c_r >> self._bond_a) ^ (c_r >> self._bond_b)) & np.uint64(1)
        differ_c = ((c_c >> self._bond_a) ^ (c_c >> self._bond_b)) & np.uint64(1)
        # (Jz/4) * s_a * s_b summed over bonds, with s_a s_b = 1 - 2*differ
        jz4 = 0.25 * self.model.Jz
        h_rr = jz4 * (len(self._bond_a) - 2.0 * differ_r.sum(axis=1).astype(np.float64))
        h_cc = jz4 * (len(self._bond_a) - 2.0 * differ_c.sum(axis=1).astype(np.float64))
        return loss, -(h_rr - h_cc)
