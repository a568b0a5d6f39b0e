"""Pulse-level simulator and analysis toolkit for mid-circuit operations.

Simulates the spin-motion dynamics of clock-transition control on
optical/metastable/ground (omg) qubits in a neutral-atom tweezer array, and
bundles the statistical machinery used to characterize such a system:
randomized benchmarking under measured noise, maximum-likelihood process
tomography, readout and thermometry estimators, and error-budget ledgers.
"""

from . import benchmarking, budget, drive, hilbert, readout, shelving, tomography
from .drive import DriveParams, PulseSegment, PulseSequence
from .hilbert import FockSpace, Operator, SpinMotionState

__all__ = [
    "benchmarking",
    "budget",
    "drive",
    "hilbert",
    "readout",
    "shelving",
    "tomography",
    "FockSpace",
    "Operator",
    "SpinMotionState",
    "DriveParams",
    "PulseSegment",
    "PulseSequence",
]

__version__ = "0.1.0"
