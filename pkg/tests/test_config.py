from pathlib import Path

import pytest

from krylov_growth_lab.config import LabSettings
from krylov_growth_lab.errors import ConfigurationError


def test_defaults_without_environment(monkeypatch):
    for name in ("KRYLOV_LAB_SEED", "KRYLOV_LAB_KAPPA", "KRYLOV_LAB_N", "KRYLOV_LAB_DATA_DIR"):
        monkeypatch.delenv(name, raising=False)
    settings = LabSettings.from_env()
    assert settings.seed == 42
    assert settings.kappa == 0.5
    assert settings.grid_nodes == 257
    assert settings.data_dir == Path("data")


def test_environment_overrides(monkeypatch, tmp_path):
    monkeypatch.setenv("KRYLOV_LAB_SEED", "7")
    monkeypatch.setenv("KRYLOV_LAB_N", "2")
    monkeypatch.setenv("KRYLOV_LAB_LAMBDA_MAX", "3.0")
    monkeypatch.setenv("KRYLOV_LAB_DATA_DIR", str(tmp_path))
    settings = LabSettings.from_env()
    assert settings.seed == 7
    assert settings.N == 2
    assert settings.Lam == 3.0
    assert settings.grid_nodes == settings.grid_nodes_2d
    assert settings.data_dir == tmp_path


@pytest.mark.parametrize(
    "name, raw",
    [("KRYLOV_LAB_SEED", "seven"), ("KRYLOV_LAB_KAPPA", "1.5"), ("KRYLOV_LAB_N", "3"), ("KRYLOV_LAB_FRAMES", "1")],
)
def test_bad_environment_values(monkeypatch, name, raw):
    monkeypatch.setenv(name, raw)
    with pytest.raises(ConfigurationError):
        LabSettings.from_env()


def test_override_ignores_none_and_validates():
    settings = LabSettings()
    assert settings.override(seed=None, kappa=0.25).kappa == 0.25
    assert settings.override(seed=None).seed == 42
    with pytest.raises(ConfigurationError):
        settings.override(lam=2.0, Lam=1.0)


def test_as_dict_is_flat():
    record = LabSettings().as_dict()
    assert record["lambda"] == 1.0
    assert record["data_dir"] == "data"
