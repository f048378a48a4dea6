"""Underwater optics and semi-analytic Monte Carlo photon transport."""
from .emission import EmittedPhotons, emit_photons
from .kernel import BACKEND, BatchTally, KernelParams, available_backends, rotate_chain, transport_batch
from .optics import (
    CLEAR_OCEAN,
    COASTAL_OCEAN,
    OCEAN_PRESETS,
    STRONG_OCEAN,
    WATER_PRESETS,
    WEAK_OCEAN,
    OceanTurbulence,
    RytovTable,
    WaterOptics,
    oceanic_spectrum,
    scintillation_moment,
    underwater_rytov,
)
from .photon import (
    Photon,
    Receiver,
    detection_probability,
    hg_density,
    rotate_direction,
    sample_hg_angle,
    sample_step,
)
from .transport import (
    ChannelResult,
    ChannelSetup,
    EmptyResultError,
    TransportTally,
    compose_scintillation,
    run_transport,
    single_leg_scintillation,
    trace_photons,
    transport,
    write_traces,
)
