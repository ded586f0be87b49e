"""Phase-field minimisation of the confined liquid-drop energy.

Perimeter (through a Modica-Mortola relaxation) plus a spectral Riesz
repulsion and an optional confining potential are minimised over sampled
fields with values in [0, 1] and fixed mass. Companion modules supply
quadrature ground truth for disks, critical masses and the linear
stability of balls.
"""
from .energy import (DEFAULT_KAPPA_W, EnergyBreakdown, EnergyParams, SpectralKernel, make_model,
                     total_energy, total_gradient)
from .grid import Field, GridSpec, Spectrum, analyze, omega_mask, synthesize
from .optimizer import OptimizerConfig, initialize, multistart, optimize, project_feasible
from .shapes import ShapeReport, shape_report

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_KAPPA_W", "EnergyBreakdown", "EnergyParams", "SpectralKernel", "make_model",
    "total_energy", "total_gradient", "Field", "GridSpec", "Spectrum", "analyze", "omega_mask",
    "synthesize", "OptimizerConfig", "initialize", "multistart", "optimize", "project_feasible",
    "ShapeReport", "shape_report",
]
