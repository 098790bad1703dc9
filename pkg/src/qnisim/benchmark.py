"""Kernel benchmark: compiled extension vs pure-NumPy fallback.

Run as ``python -m qnisim.benchmark``.  Times the hot mixing-step kernel
under both implementations, plus the (shared, NumPy-only) keyed noise
generation for context, and prints the compiled speedup when available.
"""

from __future__ import annotations

import time

import numpy as np

from . import _kernels_py
from .noise import NoiseStream

try:
    from . import _kernels as _compiled
except ImportError:  # pragma: no cover
    _compiled = None


def _time(fn, repeats: int = 5) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _bench_fwm(impl, n_traj: int, n_bins: int) -> float:
    rng = np.random.default_rng(3)
    arrs = [
        (rng.standard_normal((n_traj, n_bins)) + 1j * rng.standard_normal((n_traj, n_bins)))
        * 0.01
        for _ in range(6)
    ]
    arrs[4] += 10.0
    arrs[5] += 10.0
    xi = rng.standard_normal((n_traj, 6, n_bins))
    return _time(
        lambda: impl.fwm_step(*arrs, xi, complex(3e-3), 0.004, 0.004, 0.004, 0.01)
    )


def main() -> int:
    n_traj, n_bins = 4096, 64
    n_words = n_traj * 6 * n_bins
    print(f"workload: {n_traj} trajectories x {n_bins} bins "
          f"({n_traj * n_bins / 1e6:.2f}M bin-steps per step)")
    rows = []
    for name, impl in (("python", _kernels_py),) + (
        (("compiled", _compiled),) if _compiled else ()
    ):
        t_fwm = _bench_fwm(impl, n_traj, n_bins)
        rows.append((name, t_fwm))
        print(
            f"fwm_step [{name:8s}] {t_fwm * 1e3:8.1f} ms "
            f"({n_traj * n_bins / t_fwm / 1e6:6.1f} M bin-steps/s)"
        )
    stream = NoiseStream(seed=1, n_bins=n_bins)
    t_noise = _time(lambda: stream.unit_block(0, 0, n_traj))
    print(
        f"noise block [shared ] {t_noise * 1e3:8.1f} ms "
        f"({n_words / t_noise / 1e6:6.1f} M draws/s)"
    )
    if len(rows) == 2:
        print(f"compiled fwm_step speedup: {rows[0][1] / rows[1][1]:.1f}x")
    else:
        print("compiled extension not available; showing fallback only")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
