"""Randomized CP decomposition of dense tensors.

CP-ALS, its sampled variant, and the mixed (FJLT-style) variants, with
sampled-fit stopping, coherence diagnostics and a synthetic benchmark.
"""
from .als import SolveOptions, TraceRecord, cp_als, exact_fit, init_hosvd, init_random
from .errors import ConfigError, NumericalConsistencyError
from .ktensor import KruskalModel, model_entry, model_entries, normalize_columns
from .mixing import cprand_mix, cprand_premix, make_mixing_operator, mix_tensor
from .randomized import FitEstimator, SampleSet, cprand, default_sample_count, estimate_fit
from .synthetic import SynthParams, gen_problem, score
from .tensor import DenseTensor, fold, matricize

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DenseTensor",
    "FitEstimator",
    "KruskalModel",
    "NumericalConsistencyError",
    "SampleSet",
    "SolveOptions",
    "SynthParams",
    "TraceRecord",
    "cp_als",
    "cprand",
    "cprand_mix",
    "cprand_premix",
    "default_sample_count",
    "estimate_fit",
    "exact_fit",
    "fold",
    "gen_problem",
    "init_hosvd",
    "init_random",
    "make_mixing_operator",
    "matricize",
    "mix_tensor",
    "model_entries",
    "model_entry",
    "normalize_columns",
    "score",
]
