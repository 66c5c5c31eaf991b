"""Two-dimensional discrete Gaussian free field toolkit.

Exact Green-function linear algebra, exact field samplers, extreme-value
statistics, branching-random-walk comparisons, Gaussian multiplicative
chaos, electric networks, and random walks among field conductances.
"""

from .green import (G_CONST, GreenOperator, conformal_radius,
                    dirichlet_laplacian, green_matrix, green_via_kernel,
                    harmonic_measure, potential_kernel)
from .lattice import (LatticeDomain, discretize, make_box, make_centered_box,
                      make_disc, parse_domain)
from .sampler import (Field, concentric_decompose, gibbs_markov_split,
                      hierarchical_sample, sample_batch, sample_field,
                      seed_stream)

__version__ = "0.1.0"

__all__ = [
    "G_CONST", "GreenOperator", "conformal_radius", "dirichlet_laplacian",
    "green_matrix", "green_via_kernel", "harmonic_measure",
    "potential_kernel", "LatticeDomain", "discretize", "make_box",
    "make_centered_box", "make_disc", "parse_domain", "Field",
    "concentric_decompose", "gibbs_markov_split", "hierarchical_sample",
    "sample_batch", "sample_field", "seed_stream", "__version__",
]
