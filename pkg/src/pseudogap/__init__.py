"""Pseudogaps in the spectral density of periodic Schroedinger operators with
Wigner-von Neumann perturbations: Floquet data, resonance constants, the
model problem and shooting-based spectral densities."""

from .floquet import (PeriodicBackground, BandStructure, BlochData, band_edges, bloch,
                      discriminant, fourier_bn_plus, monodromy, quasimomentum)
from .critical import (CriticalPoint, PowerLawQ1, WvNProblem, beta_phi_cr, critical_point,
                       eps_cr, eps_cr_inverse, locate_critical)
from .asymptotic import AsymptoticPrediction, a_cr, c_cr, c_cr_physical, c_mp, exponent_coefficient, predict
from .model import (ModelSpec, airy_matrix_solution, connection_matrix, phi_functional,
                    region_schedule, solve_model, verify_theorem42)
from .spectral import (DensitySample, estimate_alpha_cr, integrate_eigenfunction, jost_coefficient,
                       pseudogap_scan, spectral_density)
from .estimators import ModelProblem, PseudogapRegressor, SpectralDensity

__version__ = "0.1.0"
