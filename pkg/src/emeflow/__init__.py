"""Electromagnetic energy flow lines behind N-slit gratings.

The package evaluates the paraxially diffracted field of a Ronchi-type
grating, builds the time-averaged Poynting vector, integrates its flow
lines and accumulates single-photon arrival histograms.
"""
from .spectrum import (
    DomainError,
    GratingSpec,
    SpectralAmplitude,
    aperture_field,
    default_kx_max,
    spectral_amplitude,
    verify_transform_pair,
)
from .wavefield import (
    FieldSample,
    QuadratureConfig,
    discrete_order_modes,
    evaluate_batch,
    evaluate_field,
    fresnel_oracle,
    grating_modes,
    paraxial_residual,
    plane_wave_modes,
)
from .poynting import (
    PhysicalConstants,
    Polarization,
    PoyntingSample,
    divergence_check,
    energy_density,
    poynting_vector,
)
from .flowline import (
    IntegratorConfig,
    Termination,
    Trajectory,
    flow_direction,
    integrate_trajectory,
    trajectory_bundle,
)
from .ensemble import (
    ArrivalHistogram,
    accumulate,
    density_reference,
    rayleigh_distance,
    sample_launches,
    tv_distance,
)
from .config import ConfigError, RunConfig, parse_config, serialize_config

__version__ = "0.1.0"
