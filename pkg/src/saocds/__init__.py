"""Bit-exact simulator of a sparsity-aware streaming SNN accelerator.

Conv layers run a COO weight schedule with Normal, Empty and Extra
iterations; FC layers gate fetches with an input-and-weight mask. A dense
sliding-window engine serves as functional oracle and cost baseline.
"""

__version__ = "0.1.0"

from .compare import Comparison, Mismatch, compare_engines, first_difference
from .compression import apply_density_profile, prune_l1, quantize_w
from .core import (ConvDims, CostCounters, IterKind, IterationSchedule, NeuronParams, SaocdsError,
                   SparseKernelCOO, SpikeTensor, build_schedule, coo_decode, coo_encode)
from .encoding import gen_bernoulli_input, sigma_delta_encode
from .formats import load_model, load_trace, save_model, save_trace
from .metrics import accumulation_ratio, fom, latency_model, storage_report
from .network import NetworkSpec, default_network, fig3_example
from .pipeline import PipelineDeadlock, saocds_network_run
from .reference import sw_network_run

__all__ = [
    "Comparison", "ConvDims", "CostCounters", "IterKind", "IterationSchedule", "Mismatch",
    "NetworkSpec", "NeuronParams", "PipelineDeadlock", "SaocdsError", "SparseKernelCOO",
    "SpikeTensor", "accumulation_ratio", "apply_density_profile", "build_schedule",
    "compare_engines", "coo_decode", "coo_encode", "default_network", "fig3_example",
    "first_difference", "fom", "gen_bernoulli_input", "latency_model", "load_model", "load_trace",
    "prune_l1", "quantize_w", "save_model", "save_trace", "sigma_delta_encode", "storage_report",
    "saocds_network_run", "sw_network_run",
]
