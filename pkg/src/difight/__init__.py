"""Diffusion-based distributed iterative hard thresholding on simulated networks."""
from .analysis import (BoundContext, check_lemma3, deterministic_bound, is_irreducible,
                       randomized_bound, spectral_radius)
from .cost import (CurvatureBounds, LeastSquaresCost, check_lemma1, contraction_factor,
                   restricted_curvature)
from .engine import Algorithm, AlgorithmSpec, RunTrace, run
from .network import Network, generate_connected_network
from .signals import SparseSignal, hard_threshold, restrict, top_k_gradient_norm
from .strategies import SelectionStrategy, expected_comms, participation_probability

__version__ = "0.1.0"
