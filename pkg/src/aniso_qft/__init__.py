"""Particle creation of a massive scalar field in anisotropic Bianchi-I backgrounds."""

from .background import (BackgroundModel, DomainError, GeometryAtTime, Mode, ModelKind, OutsideTableError,
                         anisotropy_Q, couplings, direction_mass_mu, effective_frequency_K0, eval_scale_factors,
                         expansion_rates, mean_scale)
from .config import ConfigError, RunConfig, load_config, parse_config
from .integrator import StepSizeUnderflow, dopri5
from .kinetics import (BogoliubovState, KineticState, ModeBatch, OscillatorState, evolve_bogoliubov,
                       evolve_oscillator, evolve_suv, evolve_suv_batch, suv_from_bogoliubov, suv_rhs,
                       vacuum_initial_state)
from .stress_tensor import (MomentumGrid, QuadratureNotConverged, StressEnergy, assemble_series,
                            assemble_stress_energy, integrand_T00, integrand_Tii, integrand_trace, quadrature)

__version__ = "0.1.0"
