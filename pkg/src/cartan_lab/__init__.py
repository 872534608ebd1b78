"""Numerical laboratory for Cartan-type lower bounds, Remez inequalities on
Ahlfors-regular sets and BMO / reverse Hoelder estimates for log-potentials."""
from .cartan import BallCover, Power, cartan_cover, gorin_cover, tau, verify_cartan
from .errors import CartanLabError
from .functions import (Constant, DiscreteMeasure, LogAbsPolynomial, Potential, evaluate,
                        function_from_dict, sup_on_ball)
from .geometry import DSet, certify, generate_ifs_set, moran_dimension
from .multidim import HolomorphicMapSample, ellipticity_probe, envelope_check, gallery, multidim_cartan
from .trace import bmo_norm, distribution_check, remez_gap, reverse_holder

__version__ = "0.1.0"

__all__ = [
    "BallCover", "CartanLabError", "Constant", "DSet", "DiscreteMeasure", "HolomorphicMapSample",
    "LogAbsPolynomial", "Potential", "Power", "bmo_norm", "cartan_cover", "certify",
    "distribution_check", "ellipticity_probe", "envelope_check", "evaluate", "function_from_dict",
    "gallery", "generate_ifs_set", "gorin_cover", "moran_dimension", "multidim_cartan",
    "remez_gap", "reverse_holder", "sup_on_ball", "tau", "verify_cartan",
]
