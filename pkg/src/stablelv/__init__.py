"""Simulation and numerical analytics for stable-kernel voter / Lotka-Volterra models on Z^d."""

from stablelv.estimates import Estimate
from stablelv.kernels import FractionalMoment, StepKernel, make_kernel

__all__ = ["Estimate", "FractionalMoment", "StepKernel", "make_kernel"]
__version__ = "0.1.0"
