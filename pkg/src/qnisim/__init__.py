"""Ensemble stochastic simulator for pulsed quantum nonlinear interferometry.

Propagates doubled (a, ad) field amplitudes of a pump, signal, and idler
through two four-wave-mixing stages with dispersion, an imaged object, a
beamsplitter, and slow detectors, and reduces trajectory ensembles to
detector observables, visibilities, and matched-noise corrected estimates.
"""

__version__ = "0.1.0"

from .bench import (
    BenchLayout,
    DetectorRecord,
    ObjectSpec,
    apply_beamsplitter,
    apply_dynamic_object,
    apply_phase_object,
    apply_reflective_object,
    run_bench,
)
from .config import ConfigError, Scenario, load_scenario, scenario_from_dict
from .detection import (
    DetectionConfig,
    EnsembleAccumulator,
    EstimatorTriple,
    matched_estimate,
    visibility,
)
from .fields import (
    AmplitudePair,
    FieldGrid,
    GridSpec,
    TrajectoryState,
    make_coherent_pulse,
    make_flat_field,
    make_vacuum,
    shift_grid,
)
from .kernels import COMPILED
from .noise import NoiseKey, NoiseStream
from .propagate import (
    FieldEnsemble,
    FwmDivergenceError,
    MaterialParams,
    StepPlan,
    chi_from_fiber,
    propagate_segment,
)
