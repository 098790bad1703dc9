"""Slow-detector readings, visibility, and ensemble statistics.

Detectors are slow compared with the bin duration, so a reading sums m
adjacent bin amplitudes coherently (normalised by m**-0.5) before the
ensemble average.  This window sum is what re-exposes correlations that
walk-off has pushed into neighbouring bins.

The module also carries the mergeable moment accumulator used by the
parallel runner and the matched-noise background/reference/target
estimator that cancels shared sampling error between runs with identical
noise streams.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .fields import GridSpec

DEFAULT_OFFSET_FRACTION = 5e-4


@dataclass(frozen=True)
class DetectionConfig:
    """Detector window length in bins and the visibility offset fraction."""

    avg_bins_m: int = 1
    offset_fraction: float = DEFAULT_OFFSET_FRACTION

    def __post_init__(self):
        if self.avg_bins_m < 1:
            raise ValueError("avg_bins_m must be >= 1")
        if self.offset_fraction < 0:
            raise ValueError("offset_fraction must be >= 0")


def window_times(spec: GridSpec, m: int) -> np.ndarray:
    """Centre times of the tiled m-bin windows (trailing partial dropped)."""
    k = spec.n_bins // m
    return spec.t0_ps + (np.arange(k) * m + 0.5 * m) * spec.dt_ps


def detector_average(a: np.ndarray, ad: np.ndarray, m: int) -> np.ndarray:
    """Per-window reading contributions: (sum ad / sqrt(m)) * (sum a / sqrt(m)).

    Accepts (..., n_bins) arrays and returns (..., n_windows) complex
    contributions; the ensemble mean of the real part is the detected
    photon reading per window.  m = 1 reproduces the raw per-bin flux.
    """
    n = a.shape[-1]
    if m < 1:
        raise ValueError("m must be >= 1")
    if m > n:
        raise ValueError(f"window of {m} bins exceeds the {n}-bin grid")
    k = n // m
    asum = a[..., : k * m].reshape(*a.shape[:-1], k, m).sum(axis=-1)
    adsum = ad[..., : k * m].reshape(*ad.shape[:-1], k, m).sum(axis=-1)
    return adsum * asum / m


def visibility(
    n_a: np.ndarray, n_b: np.ndarray, offset_fraction: float = DEFAULT_OFFSET_FRACTION
) -> np.ndarray:
    """|n_A - n_B| / (n_A + n_B + eps) with eps a fraction of the peak sum.

    The offset suppresses sampling artifacts in the pulse wings.  A series
    with an all-zero denominator is degenerate; zeros are returned and a
    warning raised.
    """
    n_a = np.asarray(n_a, dtype=float)
    n_b = np.asarray(n_b, dtype=float)
    if n_a.shape != n_b.shape:
        raise ValueError("detector series must have equal lengths")
    s = n_a + n_b
    peak = np.max(s) if s.size else 0.0
    eps = offset_fraction * peak
    if peak == 0.0 and eps == 0.0:
        if np.all(s == 0.0):
            warnings.warn("degenerate visibility: all-zero detector sums", stacklevel=2)
            return np.zeros_like(s)
    denom = s + eps
    out = np.zeros_like(s)
    ok = denom != 0.0
    out[ok] = np.abs(n_a - n_b)[ok] / denom[ok]
    return out


def visibility_error(
    n_a: np.ndarray,
    n_b: np.ndarray,
    var_a: np.ndarray,
    var_b: np.ndarray,
    cov_ab: np.ndarray,
    n_samples: int,
    offset_fraction: float = DEFAULT_OFFSET_FRACTION,
) -> np.ndarray:
    """First-order (delta-method) standard error of the visibility series."""
    n_a = np.asarray(n_a, float)
    n_b = np.asarray(n_b, float)
    s = n_a + n_b
    eps = offset_fraction * (np.max(s) if s.size else 0.0)
    denom = s + eps
    denom = np.where(denom == 0.0, np.inf, denom)
    sign = np.sign(n_a - n_b)
    da = (sign * denom - np.abs(n_a - n_b)) / denom**2
    db = (-sign * denom - np.abs(n_a - n_b)) / denom**2
    var = (da**2 * var_a + db**2 * var_b + 2.0 * da * db * cov_ab) / n_samples
    return np.sqrt(np.maximum(var, 0.0))


class EnsembleAccumulator:
    """Mergeable running moments of named per-trajectory observables.

    Per chunk the sums are plain vectorised reductions; chunk partials are
    merged with compensated (Kahan) addition in a fixed order by the
    runner, so means are independent of the worker partition to well below
    1e-12 and byte-identical for a fixed chunk layout.
    """

    def __init__(self):
        self.count = 0
        self.sum_re: dict[str, np.ndarray] = {}
        self.sum_sq: dict[str, np.ndarray] = {}
        self.sum_im: dict[str, np.ndarray] = {}
        self.sum_cross: dict[tuple[str, str], np.ndarray] = {}
        self._comp: dict = {}

    def add_samples(self, name: str, values: np.ndarray) -> None:
        """Accumulate complex per-trajectory samples of shape (n_traj, ...)."""
        re = np.real(values)
        self.sum_re[name] = self.sum_re.get(name, 0.0) + re.sum(axis=0)
        self.sum_sq[name] = self.sum_sq.get(name, 0.0) + (re * re).sum(axis=0)
        self.sum_im[name] = self.sum_im.get(name, 0.0) + np.imag(values).sum(axis=0)

    def add_cross(self, name_x: str, name_y: str, x: np.ndarray, y: np.ndarray) -> None:
        key = (name_x, name_y)
        prod = (np.real(x) * np.real(y)).sum(axis=0)
        self.sum_cross[key] = self.sum_cross.get(key, 0.0) + prod

    def set_count(self, n: int) -> None:
        self.count = n

    def merge(self, other: "EnsembleAccumulator") -> None:
        """In-place compensated merge of another accumulator's partials."""
        self.count += other.count
        for attr in ("sum_re", "sum_sq", "sum_im"):
            mine: dict = getattr(self, attr)
            theirs: dict = getattr(other, attr)
            for key, val in theirs.items():
                self._compensated(mine, (attr, key), val)
        for key, val in other.sum_cross.items():
            self._compensated(self.sum_cross, ("sum_cross", key), val)

    def _compensated(self, table: dict, comp_key, value) -> None:
        key = comp_key[1]
        if key not in table:
            table[key] = np.array(value, dtype=float, copy=True)
            self._comp[comp_key] = np.zeros_like(table[key])
            return
        comp = self._comp.setdefault(comp_key, np.zeros_like(np.asarray(table[key], float)))
        y = np.asarray(value, float) - comp
        t = table[key] + y
        comp[...] = (t - table[key]) - y
        table[key] = t

    def mean(self, name: str) -> np.ndarray:
        return self.sum_re[name] / self.count

    def imag_mean(self, name: str) -> np.ndarray:
        return self.sum_im[name] / self.count

    def var(self, name: str) -> np.ndarray:
        m = self.mean(name)
        v = self.sum_sq[name] / self.count - m * m
        return np.maximum(v, 0.0) * self.count / max(self.count - 1, 1)

    def se(self, name: str) -> np.ndarray:
        return np.sqrt(self.var(name) / self.count)

    def cov(self, name_x: str, name_y: str) -> np.ndarray:
        c = self.sum_cross[(name_x, name_y)] / self.count
        v = c - self.mean(name_x) * self.mean(name_y)
        return v * self.count / max(self.count - 1, 1)

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_comp"] = {}
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)


class EstimatorContractError(ValueError):
    """Reference and target runs are not noise-matched."""


@dataclass(frozen=True)
class EnsembleSummary:
    """Mean/variance summary of one observable over one ensemble."""

    count: int
    mean: np.ndarray
    var: np.ndarray
    seed: int


@dataclass(frozen=True)
class EstimatorTriple:
    """Background, reference, and target summaries for one observable.

    The reference shares parameters with the background; the target shares
    the noise stream (seed and trajectory indexing) with the reference.
    ``diff_var`` is the per-trajectory variance of (target - reference),
    which the matched noise makes far smaller than either variance alone.
    """

    background: EnsembleSummary
    reference: EnsembleSummary
    target: EnsembleSummary
    diff_var: np.ndarray | float = 0.0


@dataclass(frozen=True)
class MatchedEstimate:
    corrected: np.ndarray
    corrected_err: np.ndarray
    naive: np.ndarray
    naive_err: np.ndarray
    cost_factor: float


def matched_estimate(triple: EstimatorTriple) -> MatchedEstimate:
    """Background/reference/target correction of a sampled mean.

        corrected = <n>_target - <n>_reference + <n>_background

    With identical target and reference parameters the first two terms
    cancel bit-exactly and the background mean is returned unchanged.
    """
    bg, ref, tgt = triple.background, triple.reference, triple.target
    if ref.count != tgt.count:
        raise EstimatorContractError(
            f"reference ensemble size {ref.count} != target size {tgt.count}"
        )
    if ref.seed != tgt.seed:
        raise EstimatorContractError(
            f"reference seed {ref.seed} != target seed {tgt.seed}; "
            "runs are not noise-matched"
        )
    corrected = tgt.mean - ref.mean + bg.mean
    corrected_err = np.sqrt(
        np.asarray(triple.diff_var) / ref.count + bg.var / bg.count
    )
    naive_err = np.sqrt(tgt.var / tgt.count)
    return MatchedEstimate(
        corrected=corrected,
        corrected_err=corrected_err,
        naive=tgt.mean,
        naive_err=naive_err,
        cost_factor=bg.count / ref.count,
    )


class CorrelationProbe:
    """Accumulates occupation and pair-correlation moments of a stage output.

    Collects per-bin <ad_s a_s> and <ad_i a_i> plus the two-time pair
    moment <a_s(t_p) a_i(t_q)> on a configurable sub-grid of bins.
    """

    def __init__(self, sub_indices: np.ndarray):
        self.idx = np.asarray(sub_indices, dtype=int)
        self.count = 0
        k = len(self.idx)
        self.sum_ns = np.zeros(k, dtype=np.complex128)
        self.sum_ni = np.zeros(k, dtype=np.complex128)
        self.sum_w = np.zeros((k, k), dtype=np.complex128)

    def add(self, as_: np.ndarray, ads: np.ndarray, ai: np.ndarray, adi: np.ndarray) -> None:
        s = as_[:, self.idx]
        sd = ads[:, self.idx]
        i = ai[:, self.idx]
        id_ = adi[:, self.idx]
        self.sum_ns += (sd * s).sum(axis=0)
        self.sum_ni += (id_ * i).sum(axis=0)
        self.sum_w += np.einsum("tp,tq->pq", s, i)
        self.count += s.shape[0]

    def merge(self, other: "CorrelationProbe") -> None:
        self.sum_ns += other.sum_ns
        self.sum_ni += other.sum_ni
        self.sum_w += other.sum_w
        self.count += other.count

    def moments(self) -> dict:
        n = max(self.count, 1)
        return {
            "bin_indices": self.idx,
            "n_s": np.real(self.sum_ns) / n,
            "n_i": np.real(self.sum_ni) / n,
            "pair": self.sum_w / n,
        }
