"""The eight experiment presets (T1-T4: Turing-region enlargement, D1-D4: morphology change)."""

from dataclasses import dataclass

from .kinetics import ModelParameters


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    A2: float
    B: float
    C: float
    gamma: float
    psi: float  # psi_eta = psi_theta
    T: float
    tau: float
    expected_pattern_3d: str
    expected_pattern_2d: str

    def parameters(self, **overrides):
        base = dict(A2=self.A2, B=self.B, C=self.C, gamma=self.gamma, psi_eta=self.psi, psi_theta=self.psi)
        base.update(overrides)
        return ModelParameters(**base)


_ROWS = [
    ("T1", 1, 50, 10, 0, 0.5, 200, 2e-3, "Thin worms", "homogeneous"),
    ("T2", 1, 75, 5, 0, 0.3, 200, 2e-3, "Stripes", "homogeneous"),
    ("T3", 1, 35, 15, 0, 0.5, 100, 5e-3, "Holes", "homogeneous"),
    ("T4", 1, 30, 20, 0, 0.5, 50, 5e-3, "homogeneous (different from 2D)", "homogeneous"),
    ("D1", 1, 66, 3, 0.2, 0.1, 200, 5e-3, "Holes and worms", "Labyrinth"),
    ("D2", 1, 66, 3, 0.2, 0.15, 50, 2e-3, "Holes and small worms", "Labyrinth"),
    ("D3", 1, 66, 3, 0.2, 0.2, 50, 2e-3, "Holes", "Labyrinth"),
    ("D4", 1, 3, 30, 0.2, 0.1, 200, 5e-3, "Holes", "Bigger Holes"),
]

PRESETS = {row[0]: ExperimentPreset(*row) for row in _ROWS}


def get_preset(name):
    try:
        return PRESETS[name.upper()]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
