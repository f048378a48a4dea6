"""Air-water interface: facet slopes, refraction and the theta_0 density."""
from .seasurface import (
    SeaSurfaceField,
    SurfaceConfigError,
    directional_spectrum,
    export_surface,
    export_theta0_curve,
    flat_surface,
    pierson_moskowitz,
    pm_significant_wave_height,
    read_surface,
    synthesize_sea_surface,
)
from .slopes import (
    CoxMunkParams,
    RefractionError,
    RefractionEvent,
    facet_normal,
    fresnel_transmittance,
    pitch_pdf,
    refract,
    refract_many,
    sample_pitch_angle,
)
from .theta0 import (
    Theta0Pdf,
    Theta0Sampler,
    branch_gaps,
    l1_distance,
    pdf_normalization,
    refracted_deviation_samples,
    sample_theta0,
    solid_angle_density_table,
    theta0_pdf,
)
