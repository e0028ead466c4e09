"""Defocusing power-type NLS on rectangular 3-tori: solver, diagnostics and scans."""

from .checkpoint import load_checkpoint, save_checkpoint
from .data import annulus_data, band_packet, box_data, plane_wave, random_data, scale_to_energy
from .diagnostics import (
    ExponentTable,
    NormRecord,
    energy,
    energy_increment,
    exponents,
    fit_power_law,
    free_lq_norms,
    mass,
    modified_energy,
    norm_record,
    nu_of_q,
    sobolev_norm,
    spacetime_lq_norm,
    xsb_norm,
)
from .dynamics import IntegratorConfig, Trajectory, evolve, linear_flow, nonlinear_substep, strang_step
from .errors import BlowUpError, BudgetExceededError, InvalidInputError, PlanError, TorusNLSError
from .experiments import ExperimentPlan, RunArtifact, run_plan
from .geometry import ResonanceQuery, TorusSpec, diophantine_margin, resonant_lattice_count, sample_generic_torus
from .spectral import (
    Box,
    Grid,
    MultiplierSpec,
    SpectralField,
    analyze,
    apply_inverse_multiplier,
    apply_multiplier,
    box_project,
    d_symbol,
    lp_project,
    synthesize,
)

__version__ = "0.1.0"
