import configparser
import logging

import pytest

from HypoKernel.quadrature import QuadratureConfig
from HypoKernel.utils import (
    APP_NAME,
    QUADRATURE_DEFAULTS,
    ConfigManager,
    LogManager,
    RuntimeSettings,
    default_settings_template,
)


@pytest.fixture
def settings_path(tmp_path):
    return str(tmp_path / "settings.ini")


def test_template_written_on_first_use(settings_path):
    cm = ConfigManager(settings_path)
    raw = configparser.ConfigParser()
    raw.read(settings_path, encoding="utf-8")
    assert dict(raw["quadrature"]) == QUADRATURE_DEFAULTS
    assert raw["runtime"]["log_level"] == "WARNING"
    assert cm.get_quadrature_config() == QuadratureConfig()


def test_empty_file_gets_template(tmp_path):
    path = tmp_path / "empty.ini"
    path.write_text("", encoding="utf-8")
    ConfigManager(str(path))
    assert "[quadrature]" in path.read_text(encoding="utf-8")


def test_template_matches_quadrature_defaults():
    template = default_settings_template()
    defaults = QuadratureConfig()
    for key, raw in template["quadrature"].items():
        assert float(raw) == float(getattr(defaults, key))


def test_quadrature_values_read_and_fallback(settings_path):
    cm = ConfigManager(settings_path)
    cm.set_option("quadrature", "gh_nodes", 24)
    cm.set_option("quadrature", "rel_tol", "not-a-number")
    quad = ConfigManager(settings_path).get_quadrature_config()
    assert quad.gh_nodes == 24
    assert quad.rel_tol == QuadratureConfig().rel_tol


def test_out_of_range_quadrature_falls_back(settings_path):
    cm = ConfigManager(settings_path)
    cm.set_option("quadrature", "gh_nodes", 0)
    assert cm.get_quadrature_config() == QuadratureConfig()


def test_runtime_settings(settings_path):
    cm = ConfigManager(settings_path)
    cm.set_option("runtime", "threads", 3)
    cm.set_option("runtime", "log_level", "debug")
    assert cm.get_runtime_settings() == RuntimeSettings(threads=3, log_level="DEBUG")
    cm.set_option("runtime", "threads", -2)
    assert cm.get_runtime_settings() == RuntimeSettings()


def test_set_option_creates_section(settings_path):
    cm = ConfigManager(settings_path)
    cm.set_option("extra", "note", "kept")
    assert ConfigManager(settings_path).get_raw().get("extra", "note") == "kept"


def test_log_manager_writes_file(tmp_path):
    log_file = tmp_path / "logs" / "run.log"
    root = logging.getLogger(APP_NAME)
    LogManager.shutdown()
    try:
        LogManager.setup(level=logging.INFO, log_file=str(log_file))
        LogManager.setup(level=logging.INFO, log_file=str(log_file))
        assert len(root.handlers) == 1
        LogManager.get("Test").info("hello from the test")
    finally:
        LogManager.shutdown()
    assert "hello from the test" in log_file.read_text(encoding="utf-8")
    assert not root.handlers
