"""Finite-alphabet rate-distortion-perception toolkit.

Solve the information rate function as a convex program, then achieve it
operationally with a shared-randomness variable-length code.
"""
from .probcore import (
    KL,
    TV,
    Channel,
    Distortion,
    DistortionMatrix,
    DivergenceKind,
    MarginalDivergence,
    Pmf,
    entropy,
    mutual_information,
)
from .irf import IrfProblem, IrfSolution, Status, brute_force_irf, rdpf, solve_irf
from .pfr import CommonRandomness, PfrEncoding, decode, encode_index

__all__ = [
    "KL", "TV", "Channel", "Distortion", "DistortionMatrix", "DivergenceKind", "MarginalDivergence", "Pmf",
    "entropy", "mutual_information", "IrfProblem", "IrfSolution", "Status", "brute_force_irf", "rdpf",
    "solve_irf", "CommonRandomness", "PfrEncoding", "decode", "encode_index",
]
__version__ = "0.1.0"
