"""Coupled double-well energies on signed graphs: minima, branches, certificates."""

__version__ = "0.1.0"

from .certify import Box, Certificate, certify_box, certify_minimum, pd_certify, pm_certify, persistence_kappa, shelf_check
from .continuation import Branch, continue_branch, locate_bifurcation, trace_all
from .energy import CriticalPoint, Energy, bounding_radius, classify
from .landscape import (MinimaSet, SweepRecord, descend, enumerate_minima, global_minimum_check,
                        nonmonotonicity_index, sweep_counts)
from .potential import Potential, make_preset, piecewise, validate_class
from .signed_graph import Balanced, SignedGraph, Unbalanced, harary_partition, l_norm, laplacian, spectral_bound

__all__ = [
    "Balanced", "Box", "Branch", "Certificate", "CriticalPoint", "Energy", "MinimaSet", "Potential",
    "SignedGraph", "SweepRecord", "Unbalanced", "bounding_radius", "certify_box", "certify_minimum",
    "classify", "continue_branch", "descend", "enumerate_minima", "global_minimum_check",
    "harary_partition", "l_norm", "laplacian", "locate_bifurcation", "make_preset",
    "nonmonotonicity_index", "pd_certify", "persistence_kappa", "piecewise", "pm_certify",
    "shelf_check", "spectral_bound", "sweep_counts", "trace_all", "validate_class",
]
