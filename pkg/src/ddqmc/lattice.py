"""Rectangular spin-1/2 lattice and anisotropic XYZ Hamiltonian matrix elements.

Spin configurations are plain integers: bit k set means site k is up,
sites numbered row-major (site = r * cols + c). Exchange couplings use
spin operators S = sigma/2, so every exchange element carries a 1/4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class Lattice:
    rows: int
    cols: int
    periodic: bool
    bonds: tuple = field(default_factory=tuple)

    @property
    def nsites(self):
        return self.rows * self.cols


@dataclass(frozen=True)
class ModelParams:
    """XYZ couplings, loss rate and in-plane field, all in units of gamma."""

    Jx: float
    Jy: float
    Jz: float
    gamma: float = 1.0
    h: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.h < 0:
            raise ValueError("h must be >= 0")


def build_lattice(rows, cols, periodic=True, dedupe_bonds=False):
    """Enumerate nearest-neighbour bonds of a rows x cols lattice.

    Periodic lattices emit one +x and one +y bond per site, so a 2x2
    torus has 8 bonds with every pair doubled; dedupe_bonds collapses
    duplicates. Bonds that would join a site to itself (wrap in a
    dimension of size 1) are dropped.
    """
    if rows < 1 or cols < 1:
        raise ValueError("lattice dimensions must be >= 1")
    if periodic and rows < 2 and cols < 2:
        raise ValueError("periodic lattice needs rows >= 2 or cols >= 2")
    bonds = []
    for r in range(rows):
        for c in range(cols):
            site = r * cols + c
            if periodic:
                if cols >= 2:
                    bonds.append((site, r * cols + (c + 1) % cols))
                if rows >= 2:
                    bonds.append((site, ((r + 1) % rows) * cols + c))
            else:
                if c + 1 < cols:
                    bonds.append((site, r * cols + c + 1))
                if r + 1 < rows:
                    bonds.append((site, (r + 1) * cols + c))
    if dedupe_bonds:
        seen = set()
        unique = []
        for a, b in bonds:
            key = (min(a, b), max(a, b))
            if key not in seen:
                seen.add(key)
                unique.append((a, b))
        bonds = unique
    return Lattice(rows=rows, cols=cols, periodic=periodic, bonds=tuple(bonds))


def bit(config, site):
    return (config >> site) & 1


def spin_sign(config, site):
    """+1 for up, -1 for down."""
    return 2 * bit(config, site) - 1


def n_up(config):
    return int(config).bit_count()


def hamiltonian_diagonal(config, model, lattice):
    """<c|H|c>: Ising part, sum of (Jz/4) s_a s_b over bonds."""
    total = 0.0
    for a, b in lattice.bonds:
        sa = 2 * ((config >> a) & 1) - 1
        sb = 2 * ((config >> b) & 1) - 1
        total += 0.25 * model.Jz * sa * sb
    return total


def hamiltonian_offdiagonal(config, model, lattice):
    """All configurations reachable from config by one Hamiltonian term.

    Returns (target, amplitude) with amplitude = <target|H|config>.
    Exchange: both bond bits flip; (Jx+Jy)/4 if they differed (flip-flop),
    (Jx-Jy)/4 if equal (double flip). Field: single flips with amplitude
    h*(cos(theta) -+ i*sin(theta)); raising a spin picks the -i branch
    because <up|sigma_y|down> = -i.
    """
    out = []
    flip_flop = 0.25 * (model.Jx + model.Jy)
    double_flip = 0.25 * (model.Jx - model.Jy)
    for a, b in lattice.bonds:
        differ = ((config >> a) ^ (config >> b)) & 1
        amp = flip_flop if differ else double_flip
        if amp != 0.0:
            out.append((config ^ ((1 << a) | (1 << b)), complex(amp)))
    if model.h > 0.0:
        hc = model.h * math.cos(model.theta)
        hs = model.h * math.sin(model.theta)
        for k in range(lattice.nsites):
            target = config ^ (1 << k)
            if (config >> k) & 1:
                amp = complex(hc, hs)   # lowering: <down|...|up>
            else:
                amp = complex(hc, -hs)  # raising: <up|...|down>
            out.append((target, amp))
    return out


def jump_targets(config, nsites):
    """Configurations reached by one quantum jump (lowering an up spin)."""
    return [(k, config ^ (1 << k)) for k in range(nsites) if (config >> k) & 1]
