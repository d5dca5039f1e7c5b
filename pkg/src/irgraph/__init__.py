"""Inhomogeneous random graphs: kernels on type spaces, graph sampling,
graph statistics and the branching-process theory that predicts them."""

__version__ = "0.1.0"

from .spaces import TypeSpace, VertexAssignment, make_finite_space, make_interval_space, sample_types
from .kernels import DiscreteKernel, discretize, parse_kernel
from .graphgen import TypedGraph, generate
from .branching import operator_norm, solve_survival
from .rank1 import rank1_solve

__all__ = ["TypeSpace", "VertexAssignment", "make_finite_space", "make_interval_space",
           "sample_types", "DiscreteKernel", "discretize", "parse_kernel", "TypedGraph",
           "generate", "operator_norm", "solve_survival", "rank1_solve", "__version__"]
