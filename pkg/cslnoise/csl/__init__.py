from .mass_models import Component, Composite, Cuboid, MassModel, Sphere, model_id, reference_geometry
from .form_factors import cuboid_form_factor, sphere_form_factor
from .force_noise import csl_force_psd, csl_force_psd_cubature, csl_force_psd_monte_carlo
from .exclusion import ExclusionCurve, ExclusionPoint, default_rc_grid, exclusion_curve

__all__ = [
    "Component",
    "Composite",
    "Cuboid",
    "MassModel",
    "Sphere",
    "model_id",
    "reference_geometry",
    "cuboid_form_factor",
    "sphere_form_factor",
    "csl_force_psd",
    "csl_force_psd_cubature",
    "csl_force_psd_monte_carlo",
    "ExclusionCurve",
    "ExclusionPoint",
    "default_rc_grid",
    "exclusion_curve",
]
