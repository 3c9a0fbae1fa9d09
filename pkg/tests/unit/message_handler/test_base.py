import numpy as np
import pytest

from prc_studio.configuration import GlobalConfiguration
from prc_studio.message_handler.base import MAX_LOG_MESSAGE_LENGTH, MessageHandler, warn
from prc_studio.message_handler.types import EventScope, EventType, LogEvent


@pytest.fixture
def mock_logger(mocker):
    return mocker.patch("prc_studio.message_handler.base.logger")


def test_debug_is_muted_unless_verbose(mock_logger):
    event = LogEvent("em_iteration", EventType.DEBUG, EventScope.EM, "iteration 3")

    MessageHandler(GlobalConfiguration()).send_message(event)
    mock_logger.debug.assert_not_called()

    MessageHandler(GlobalConfiguration(), verbose=True).send_message(event)
    mock_logger.debug.assert_called_once_with("[EM] iteration 3")


def test_disabled_info_scopes(mock_logger, monkeypatch):
    monkeypatch.setenv("PRC_DISABLE_INFO_LOGS_SCOPES", '["Data"]')
    handler = MessageHandler(GlobalConfiguration())

    handler.send_message(LogEvent("loaded", EventType.INFO, EventScope.DATA, "loaded"))
    handler.send_message(LogEvent("skipped", EventType.WARNING, EventScope.DATA, "skipped"))
    handler.send_message(LogEvent("fitted", EventType.INFO, EventScope.EM, "fitted"))

    mock_logger.info.assert_called_once_with("[EM] fitted")
    mock_logger.warning.assert_called_once_with("[Data] skipped")


def test_data_is_serialized(mock_logger):
    handler = MessageHandler(GlobalConfiguration())

    handler.send_message(
        LogEvent("fit", EventType.SUCCESS, EventScope.EM, "done", {"tau": np.array([1.0, 2.0])})
    )

    logged = mock_logger.success.call_args.args[0]
    assert logged.startswith("[EM] done")
    assert '{"tau": [1.0, 2.0]}' in logged


def test_long_messages_are_truncated(mock_logger):
    handler = MessageHandler(GlobalConfiguration())

    handler.send_message(LogEvent("x", EventType.ERROR, EventScope.CLI, "a" * (MAX_LOG_MESSAGE_LENGTH + 10)))

    logged = mock_logger.error.call_args.args[0]
    assert logged == "[CLI] " + "a" * MAX_LOG_MESSAGE_LENGTH + "..."


def test_warn(msg_handler):
    warn(msg_handler, EventScope.BAYES, "low_ess", "ESS is low", {"ess": 3.0})

    event = msg_handler.send_message.call_args.args[0]
    assert event.type == EventType.WARNING
    assert event.to_dict()["scope"] == "Bayes"
