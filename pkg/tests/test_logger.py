import logging

import pytest

from app.models.errors import ConfigurationError
from app.utils.logger import ROOT, set_log_level, setup_logger


@pytest.fixture(autouse=True)
def restore_level():
    level = logging.getLogger(ROOT).level
    yield
    logging.getLogger(ROOT).setLevel(level)


def test_module_loggers_share_the_package_handler():
    a = setup_logger("app.services.protocol_runner")
    b = setup_logger("__main__")
    assert b.name == "app.__main__"
    assert not a.handlers and not b.handlers
    assert len(logging.getLogger(ROOT).handlers) == 1


def test_run_wide_level_reaches_existing_and_new_loggers():
    existing = setup_logger("app.services.adversary")
    set_log_level("WARNING")
    fresh = setup_logger("app.services.some_new_module")
    assert existing.getEffectiveLevel() == logging.WARNING
    assert fresh.getEffectiveLevel() == logging.WARNING
    set_log_level("debug")
    assert existing.isEnabledFor(logging.DEBUG)


def test_per_logger_level_overrides_run_wide_level():
    quiet = setup_logger("app.tests.quiet", level="ERROR")
    set_log_level("DEBUG")
    assert quiet.getEffectiveLevel() == logging.ERROR
    quiet.setLevel(logging.NOTSET)


def test_unknown_level_rejected():
    with pytest.raises(ConfigurationError):
        set_log_level("LOUD")
