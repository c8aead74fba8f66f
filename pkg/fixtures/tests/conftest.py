import pytest

from crownfixtures.data import load_split
from crownfixtures.export import build_fixtures
from crownfixtures.specs import DEFAULT_SPECS


class Built:
    """Handle to one session-wide build: files on disk plus the live models."""

    def __init__(self, out_dir: str, data, manifest: dict, models: dict):
        self.out_dir = out_dir
        self.data = data
        self.manifest = manifest
        self.models = models
        self.entries = {e["name"]: e for e in manifest["fixtures"]}
        self.specs = {s.name: s for s in DEFAULT_SPECS}


@pytest.fixture(scope="session")
def built(tmp_path_factory):
    """Every default fixture trained, exported and golden-certified once."""
    out_dir = str(tmp_path_factory.mktemp("fixtures"))
    data = load_split()
    manifest, models = build_fixtures(out_dir, DEFAULT_SPECS, data, golden=True)
    return Built(out_dir, data, manifest, models)
