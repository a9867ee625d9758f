import csv
from pathlib import Path

import pytest

from bsdib.kinetics import derived_D
from bsdib.presets import PRESETS, get_preset

GOLDEN = Path(__file__).parent / "data" / "table1.csv"


def golden_rows():
    with open(GOLDEN, newline="") as fh:
        return list(csv.DictReader(fh))


def test_golden_has_all_rows():
    assert [r["name"] for r in golden_rows()] == list(PRESETS) == ["T1", "T2", "T3", "T4", "D1", "D2", "D3", "D4"]


@pytest.mark.parametrize("row", golden_rows(), ids=lambda r: r["name"])
def test_preset_matches_golden(row):
    p = PRESETS[row["name"]]
    for key in ("A2", "B", "C", "gamma", "psi", "T", "tau"):
        assert getattr(p, key) == float(row[key]), key
    assert p.expected_pattern_3d == row["pattern_3d"]
    assert p.expected_pattern_2d == row["pattern_2d"]


def test_preset_parameters():
    mp = get_preset("d3").parameters()
    assert (mp.B, mp.C, mp.gamma, mp.psi_eta, mp.psi_theta) == (66, 3, 0.2, 0.2, 0.2)
    assert mp.D == derived_D(3, 0.5, 0.2)
    assert get_preset("T4").parameters(B=31).B == 31
    with pytest.raises(KeyError):
        get_preset("X9")
