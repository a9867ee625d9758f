"""Run configuration files: flat ``name = value`` lines, presets plus explicit overrides."""

import logging
from dataclasses import dataclass, field

from .kinetics import PARAMETER_NAMES, ModelParameters, ParameterError, read_key_values
from .mesh import GradedMeshSpec, MeshError
from .presets import PRESETS
from .solver import MODES, TimeSteppingConfig

log = logging.getLogger(__name__)

DESK_MESH = dict(mesh="graded", L=50.0, nx=32, fine_layers=2, coarse_levels=3)

_FLOAT_KEYS = {"T", "tau", "noise_eta", "noise_theta", "L", "psi", *PARAMETER_NAMES}
_INT_KEYS = {"seed", "snapshot_every", "nx", "fine_layers", "coarse_levels"}
_STR_KEYS = {"preset", "mesh", "mode", "increment_norm", "out", "formats"}
KNOWN_KEYS = _FLOAT_KEYS | _INT_KEYS | _STR_KEYS


class ConfigError(ValueError):
    pass


@dataclass
class MeshConfig:
    kind: str = "graded"
    L: float = 50.0
    nx: int = 32
    fine_layers: int = 2
    coarse_levels: int = 3

    def spec(self):
        if self.kind == "uniform":
            return GradedMeshSpec(L=self.L, nx=self.nx, fine_layers=self.nx, coarse_levels=0)
        return GradedMeshSpec(L=self.L, nx=self.nx, fine_layers=self.fine_layers, coarse_levels=self.coarse_levels)

    def describe(self):
        if self.kind == "uniform":
            return f"uniform L={self.L!r} nx={self.nx}"
        return f"graded L={self.L!r} nx={self.nx} fine_layers={self.fine_layers} coarse_levels={self.coarse_levels}"


@dataclass
class RunConfig:
    params: ModelParameters
    mesh: MeshConfig
    timestepping: TimeSteppingConfig
    mode: str = "both"
    out: str = None
    formats: tuple = ("csv", "vtk")
    preset: str = None
    provenance: dict = field(default_factory=dict)


def _convert(key, value, lineno):
    if key in _FLOAT_KEYS:
        if key == "D" and value.lower() == "auto":
            return None
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"line {lineno}: {key} expects a number, got {value!r}") from None
    if key in _INT_KEYS:
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"line {lineno}: {key} expects an integer, got {value!r}") from None
    return value


def parse_config(text):
    """Resolve config text into a validated :class:`RunConfig`."""
    raw = {}
    lines = {}
    try:
        entries = list(read_key_values(text))
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None
    for lineno, key, value in entries:
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = _convert(key, value, lineno)
        lines[key] = lineno

    preset = None
    if "preset" in raw:
        name = raw["preset"].upper()
        if name not in PRESETS:
            raise ConfigError(f"line {lines['preset']}: unknown preset {raw['preset']!r}")
        preset = PRESETS[name]
    elif not ({"B", "C"} & raw.keys()):
        raise ConfigError("missing preset or parameters")

    provenance = {}
    values = {}
    if preset is not None:
        for k, v in (("A2", preset.A2), ("B", preset.B), ("C", preset.C), ("gamma", preset.gamma),
                     ("psi_eta", preset.psi), ("psi_theta", preset.psi), ("T", preset.T), ("tau", preset.tau)):
            values[k] = v
            provenance[k] = f"preset {preset.name}"
    if "psi" in raw:
        raw.setdefault("psi_eta", raw["psi"])
        raw.setdefault("psi_theta", raw["psi"])
        lines.setdefault("psi_eta", lines["psi"])
        lines.setdefault("psi_theta", lines["psi"])
        del raw["psi"]
    for k, v in raw.items():
        if k in ("preset",):
            continue
        if k in values and values[k] != v:
            log.info("%s overridden: %g -> %g (line %d)", k, values[k], v, lines[k])
        values[k] = v
        provenance[k] = f"line {lines[k]}"

    for req in ("B", "C", "T", "tau"):
        if req not in values:
            raise ConfigError(f"missing required key {req!r}")

    pvals = {k: values[k] for k in PARAMETER_NAMES if k in values}
    try:
        params = ModelParameters(**pvals)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None

    mesh = MeshConfig(
        kind=values.get("mesh", DESK_MESH["mesh"]),
        L=values.get("L", DESK_MESH["L"]),
        nx=values.get("nx", DESK_MESH["nx"]),
        fine_layers=values.get("fine_layers", DESK_MESH["fine_layers"]),
        coarse_levels=values.get("coarse_levels", DESK_MESH["coarse_levels"]),
    )
    if mesh.kind not in ("graded", "uniform"):
        raise ConfigError(f"line {lines['mesh']}: mesh must be 'graded' or 'uniform'")
    try:
        mesh.spec().layer_heights()
    except MeshError as exc:
        raise ConfigError(f"invalid mesh: {exc}") from None

    try:
        ts = TimeSteppingConfig(
            tau=values["tau"],
            T=values["T"],
            snapshot_every=values.get("snapshot_every"),
            increment_norm=values.get("increment_norm", "L2"),
            seed=values.get("seed", 0),
            noise_eta=values.get("noise_eta", 1e-2),
            noise_theta=values.get("noise_theta", 1e-2),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    mode = values.get("mode", "both")
    if mode not in (*MODES, "both"):
        raise ConfigError(f"line {lines['mode']}: mode must be 3d, 2d or both")
    formats = tuple(s.strip() for s in values.get("formats", "csv,vtk").split(",") if s.strip())
    for f in formats:
        if f not in ("csv", "vtk"):
            raise ConfigError(f"line {lines['formats']}: unknown output format {f!r}")
    return RunConfig(params, mesh, ts, mode, values.get("out"), formats, preset.name if preset else None, provenance)


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())
