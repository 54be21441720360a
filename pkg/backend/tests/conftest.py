import numpy as np
import pytest

from config.settings import settings


@pytest.fixture(autouse=True)
def quiet_progress(monkeypatch):
    monkeypatch.setattr(settings, "progress", False)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def write_file(tmp_path):
    """Write text into tmp_path/name and return the path as a string."""

    def _write(name: str, text: str) -> str:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    return _write
