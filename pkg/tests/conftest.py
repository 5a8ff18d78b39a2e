import hypothesis
import pytest

hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=200, deadline=None)
hypothesis.settings.register_profile("default", max_examples=40, deadline=None)
hypothesis.settings.load_profile("default")


@pytest.fixture
def tmp_cwd(tmp_path, monkeypatch):
    """Run a test inside an empty working directory."""
    monkeypatch.chdir(tmp_path)
    return tmp_path
