"""Bundled parameter sets and data files.

`reference` is the demonstrated single-atom cavity with its fitted
imperfections (detuning 0.39, detection error 1.3%, production loss 13.5%,
correctable downstream loss 25.1%).  `reference-g2` is the variant used for
coincidence predictions: cavity locked on resonance, Stark-shifted atomic
line at 6 (2*pi*MHz), no downstream homodyne losses.  `fiber` derives the
rates of a short fiber resonator from its geometry and mirror losses.
"""

from __future__ import annotations

from importlib import resources

from .cavity import CavityParams, fiber_params, read_config_file
from .distillation import DistillationConfig

REFERENCE_CAVITY = CavityParams(
    g=7.8, kappa=2.5, kappa_r=2.3, kappa_t=0.2, kappa_m=0.0, gamma=3.0,
    delta_a=0.0, delta_c=0.39,
)

FIBER_CAVITY = fiber_params(
    length_m=39e-6,
    parasitic_loss_per_mirror_ppm=13.5,
    outcoupler_transmission_ppm=1300.0,
    g=240.0,
    gamma=3.0,
)

PRESETS = {
    "reference": DistillationConfig(
        params=REFERENCE_CAVITY,
        detection_error=0.013,
        uncorrected_loss=0.135,
        downstream_loss=0.251,
    ),
    "reference-g2": DistillationConfig(
        params=REFERENCE_CAVITY.replace(delta_a=6.0, delta_c=0.0),
        detection_error=0.013,
        uncorrected_loss=0.135,
        downstream_loss=0.0,
    ),
    "fiber": DistillationConfig(params=FIBER_CAVITY),
}

# detector model that reproduces the published coincidence curve level
HBT_DEFAULTS = {
    "detector_efficiency": 0.05,
    "dark_count_rate": 20.0,
    "pulse_fwhm": 2.3e-6,
}

CONFIG_EXTRAS = ("detection_error", "uncorrected_loss", "downstream_loss")


def budget_csv_path():
    """Bundled propagation/detection loss budget."""
    return resources.files("photondistill.data") / "loss_budget.csv"


def config_from_file(path) -> DistillationConfig:
    """DistillationConfig from a flat key-value file.

    The file carries the eight cavity keys and optionally
    detection_error / uncorrected_loss / downstream_loss.
    """
    values = read_config_file(path)
    params = CavityParams.from_config(values)
    extras = {key: float(values[key]) for key in CONFIG_EXTRAS if key in values}
    return DistillationConfig(params=params, **extras)


def resolve_config(name_or_path: str) -> DistillationConfig:
    """Look up a named preset, else read a config file."""
    if name_or_path in PRESETS:
        return PRESETS[name_or_path]
    return config_from_file(name_or_path)
