"""Thermoelastic energy decay: symbol spectrum, damped and distorted rays, transported
measures and a grid solver, driven by JSON scenarios."""

from ._core import (
    Error,
    Model,
    damped_weight,
    degeneracy_verdict,
    distorted_ray,
    make_preset,
    presets,
    run_compare,
    run_direct,
    run_rays,
    run_spectrum,
    run_transport,
    solve_spectrum,
    symbol,
    validate,
)

__all__ = [
    "Error",
    "Model",
    "damped_weight",
    "degeneracy_verdict",
    "distorted_ray",
    "make_preset",
    "presets",
    "run_compare",
    "run_direct",
    "run_rays",
    "run_spectrum",
    "run_transport",
    "solve_spectrum",
    "symbol",
    "validate",
]
