"""Deterministic, addressable Gaussian noise for the stochastic propagator.

Every Wiener increment consumed by an ensemble run has a fixed address
(seed, trajectory, step, term, bin).  Values are produced by the
counter-based Philox generator, so two runs that share a seed see
bit-identical increments regardless of worker count, chunking, or
evaluation order.  This is what makes "reference" and "target" runs of the
variance-reduction workflow noise-matched, and what makes observable CSVs
byte-reproducible.

Layout
------
For a grid of ``n_bins`` bins there are ``N_TERMS`` = 6 real unit-normal
draws per (trajectory, step, bin):

===== ==========================================================
term  role in the mixing step
===== ==========================================================
1     signal/idler pair noise, real part of the complex increment
2     signal/idler pair noise, imaginary part
3     daggered signal/idler pair noise, real part
4     daggered signal/idler pair noise, imaginary part
5     pump noise
6     daggered pump noise
===== ==========================================================

Terms 1+2 (and 3+4) are combined by the propagator into one complex
increment that drives the signal equation directly and the idler equation
conjugated, which realises the exact cross-correlation of the pair-creation
process while leaving each field's own noise second moment zero.  Terms 5
and 6 enter the two pump equations individually.

Within one (seed, step) stream, trajectory ``t`` owns the word range
``[t*W, (t+1)*W)`` with ``W = N_TERMS*n_bins``, so a chunk of trajectories
can be generated in one vectorised call by advancing the counter, and a
single-key draw can be reproduced in isolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox

N_TERMS = 6

TERM_LABELS = {
    1: "pair_re",
    2: "pair_im",
    3: "pair_dagger_re",
    4: "pair_dagger_im",
    5: "pump",
    6: "pump_dagger",
}

# Second Philox key word; fixed so the seed -> stream mapping is stable.
_KEY_SALT = 0x9E3779B97F4A7C15


@dataclass(frozen=True)
class NoiseKey:
    """Address of a single real Gaussian increment."""

    seed: int
    trajectory_index: int
    step_index: int
    term_index: int
    bin_index: int

    def validate(self, n_bins: int) -> None:
        if not 1 <= self.term_index <= N_TERMS:
            raise ValueError(f"term_index must be in 1..{N_TERMS}, got {self.term_index}")
        if not 0 <= self.bin_index < n_bins:
            raise ValueError(f"bin_index {self.bin_index} outside grid of {n_bins} bins")
        if self.trajectory_index < 0 or self.step_index < 0:
            raise ValueError("trajectory_index and step_index must be >= 0")


@dataclass(frozen=True)
class NoiseDraw:
    """One real Gaussian sample with variance equal to the step length."""

    value: float


def _box_muller(u: np.ndarray) -> np.ndarray:
    """Transform consecutive uniform pairs into unit normals (fixed word use).

    Pairing is positional: words (2j, 2j+1) produce normals (2j, 2j+1).
    Positional pairing (rather than the variable-consumption ziggurat) is
    what keeps every draw addressable.  This stays in NumPy on every
    install, so the noise a key maps to never depends on the compiled
    extension being present.
    """
    pairs = u.reshape(-1, 2)
    r = np.sqrt(-2.0 * np.log1p(-pairs[:, 0]))
    theta = (2.0 * np.pi) * pairs[:, 1]
    out = np.empty_like(pairs)
    out[:, 0] = r * np.cos(theta)
    out[:, 1] = r * np.sin(theta)
    return out.reshape(u.shape)


class NoiseStream:
    """Counter-based unit-normal source for one ensemble run.

    Stateless between calls: every block is regenerated from its address,
    so any worker may request any (step, trajectory range) at any time.
    """

    def __init__(self, seed: int, n_bins: int):
        if n_bins < 1:
            raise ValueError("n_bins must be >= 1")
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.n_bins = int(n_bins)
        self.words_per_traj = N_TERMS * self.n_bins

    def _bitgen(self, step: int, word_offset: int) -> Philox:
        bg = Philox(key=[self.seed, _KEY_SALT], counter=[0, 0, int(step), 0])
        if word_offset:
            bg.advance(word_offset)
        return bg

    def unit_block(self, step: int, traj_start: int, n_traj: int) -> np.ndarray:
        """Unit normals of shape (n_traj, N_TERMS, n_bins) for one step."""
        w = self.words_per_traj
        gen = Generator(self._bitgen(step, traj_start * w))
        u = gen.random(n_traj * w, dtype=np.float64)
        return _box_muller(u).reshape(n_traj, N_TERMS, self.n_bins)

    def draw(self, key: NoiseKey, dz: float) -> NoiseDraw:
        """Single increment at ``key``; marginal distribution N(0, dz)."""
        if dz <= 0:
            raise ValueError("dz must be > 0")
        if key.seed != self.seed:
            raise ValueError("key.seed does not match this stream")
        key.validate(self.n_bins)
        word = (key.term_index - 1) * self.n_bins + key.bin_index
        pair_base = key.trajectory_index * self.words_per_traj + (word & ~1)
        gen = Generator(self._bitgen(key.step_index, pair_base))
        u = gen.random(2, dtype=np.float64)
        z = _box_muller(u)
        return NoiseDraw(float(np.sqrt(dz)) * float(z[word & 1]))
