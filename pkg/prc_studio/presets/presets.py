import json
import os
from dataclasses import dataclass

import numpy as np
from jsonschema import Draft202012Validator, validate

from prc_studio.bayes.sampler import PosteriorSamples
from prc_studio.domain.types import QualityScheme, Tau
from prc_studio.errors.errors import InvalidInputError
from prc_studio.parallel import stream
from prc_studio.simulation.base import SimConfig

current_directory = os.path.dirname(os.path.abspath(__file__))
schema_file = os.path.join(current_directory, "presets_schema.json")
default_presets_folder = os.path.join(current_directory, "default_presets")

default_presets_cache: list["Preset"] = []

# Quality grid for continuous presets without a published PRC table.
DEFAULT_CONTINUOUS_LABELS = [0.3, 0.4, 0.5]


@dataclass(frozen=True, eq=False)
class Preset:
    name: str
    database: str
    scheme: QualityScheme
    tau_mean: np.ndarray
    tau_sd: np.ndarray
    default_m: tuple[int, int]
    raw: dict

    @property
    def reference_prc(self) -> dict | None:
        return self.raw.get("reference_prc")

    @property
    def reference_design_w(self) -> dict | None:
        return self.raw.get("reference_design_w")

    @property
    def forensic_example(self) -> dict | None:
        return self.raw.get("forensic_example")

    @property
    def labels(self) -> list:
        if self.reference_prc:
            return self.reference_prc["labels"]
        return self.scheme.labels() if self.scheme.is_categorical else DEFAULT_CONTINUOUS_LABELS


def get_schema() -> dict:
    with open(schema_file, "r") as f:
        schema = json.loads(f.read())

    Draft202012Validator.check_schema(schema)
    return schema


def validate_preset(preset: dict):
    schema = get_schema()
    try:
        validate(instance=preset, schema=schema)
    except Exception as e:
        raise ValueError(f"Error validating preset: {e}")

    scheme = QualityScheme.parse(preset["scheme"])
    tau = preset["tau"]
    if tau["names"] != scheme.tau_names():
        raise ValueError(
            f"Preset {preset['name']} names {tau['names']} but scheme {scheme} needs {scheme.tau_names()}"
        )
    if not len(tau["mean"]) == len(tau["sd"]) == scheme.n_tau:
        raise ValueError(f"Preset {preset['name']} has mean/sd of the wrong length")


def get_default_presets() -> list[Preset]:
    global default_presets_cache
    if default_presets_cache:
        return default_presets_cache

    files = sorted(
        os.path.join(default_presets_folder, filename)
        for filename in os.listdir(default_presets_folder)
        if filename.endswith(".json")
    )

    presets = []
    for file in files:
        with open(file, "r") as f:
            preset = json.loads(f.read())
        try:
            validate_preset(preset)
        except ValueError as e:
            raise ValueError(f"Error validating file {file}: {e}")

        presets.append(_to_domain(preset))

    default_presets_cache = presets
    return presets


def get_preset(name: str) -> Preset:
    matches = [preset for preset in get_default_presets() if preset.name == name]
    if not matches:
        raise InvalidInputError(
            "preset",
            name,
            f"No preset named {name}; available: {', '.join(preset_names())}.",
        )
    return matches[0]


def preset_names() -> list[str]:
    return [preset.name for preset in get_default_presets()]


def preset_tau(name: str) -> Tau:
    preset = get_preset(name)
    return Tau.from_vector(preset.tau_mean, preset.scheme)


def samples_from_summary(name: str, R: int = 200, seed: int = 0) -> PosteriorSamples:
    """
    Independent normal draws around the published posterior means with the published SDs.
    Stands in for a posterior sample when the original data are unavailable.
    """
    if R < 1:
        raise InvalidInputError("R", R, "Need at least one draw.")
    preset = get_preset(name)
    rng = stream(seed, "preset", name)
    draws = preset.tau_mean + preset.tau_sd * rng.standard_normal((R, preset.tau_mean.size))
    return PosteriorSamples(
        draws=draws,
        weights_diagnostic=np.full(R, 1.0 / R),
        seed=seed,
        scheme=preset.scheme,
        ess=float(R),
        proposals=R,
    )


def sim_config(name: str, f: int = 50, l: int = 4, seed: int = 0) -> SimConfig:
    """Simulation settings at the preset's posterior means."""
    preset = get_preset(name)
    simulation = {
        key: value for key, value in preset.raw["simulation"].items() if key != "notes"
    }
    return SimConfig(
        tau_true=preset.tau_mean.tolist(),
        scheme=str(preset.scheme),
        f=f,
        l=l,
        seed=seed,
        **simulation,
    )


def _to_domain(preset: dict) -> Preset:
    return Preset(
        name=preset["name"],
        database=preset["database"],
        scheme=QualityScheme.parse(preset["scheme"]),
        tau_mean=np.asarray(preset["tau"]["mean"], dtype=float),
        tau_sd=np.asarray(preset["tau"]["sd"], dtype=float),
        default_m=tuple(preset["default_m"]),
        raw=preset,
    )
