import os
import json
import sys
from logging.config import dictConfig

from loguru import logger

from prc_studio.configuration import GlobalConfiguration
from prc_studio.message_handler.types import EventScope, EventType, LogEvent

MAX_LOG_MESSAGE_LENGTH = 3000

config_folder = os.path.join(os.path.dirname(os.path.abspath(__file__)), "config")

default_message_handler: "MessageHandler | None" = None


class MessageHandler:
    def __init__(self, config: GlobalConfiguration | None = None, verbose: bool = False):
        self.config = config or GlobalConfiguration()
        self.verbose = verbose
        setup_logging_config(self.config.get_logging_env(), verbose)

    def _is_muted(self, log_event: LogEvent) -> bool:
        if log_event.type == EventType.DEBUG and not self.verbose:
            return True
        return (
            log_event.type == EventType.INFO
            and log_event.scope.value in self.config.get_disabled_info_logs_scopes()
        )

    def _log_message(self, log_event: LogEvent):
        logging_status = log_event.type.value

        if not hasattr(logger, logging_status):
            logging_status = "info"

        log_method = getattr(logger, logging_status)

        message = (
            (log_event.message[:MAX_LOG_MESSAGE_LENGTH] + "...")
            if log_event.message is not None
            and len(log_event.message) > MAX_LOG_MESSAGE_LENGTH
            else log_event.message
        )

        log_message = f"[{log_event.scope.value}] {message}"
        gray = "\033[38;5;245m"
        reset = "\033[0m"

        if log_event.data:
            try:
                data_str = json.dumps(log_event.data, default=_to_jsonable)
                log_message += f" {gray}{data_str}{reset}"
            except (TypeError, ValueError) as e:
                log_message += (
                    f" {gray}{str(log_event.data)} (serialization error: {e}){reset}"
                )

        log_method(log_message)

    def send_message(self, log_event: LogEvent, log_to_terminal: bool = True):
        if log_to_terminal and not self._is_muted(log_event):
            self._log_message(log_event)


def _to_jsonable(o):
    if hasattr(o, "tolist"):
        return o.tolist()
    if hasattr(o, "to_dict"):
        return o.to_dict()
    return o.__dict__


def get_message_handler() -> MessageHandler:
    global default_message_handler
    if default_message_handler is None:
        default_message_handler = MessageHandler()
    return default_message_handler


def set_message_handler(msg_handler: MessageHandler):
    global default_message_handler
    default_message_handler = msg_handler


def warn(
    msg_handler: MessageHandler | None,
    scope: EventScope,
    name: str,
    message: str,
    data: dict | None = None,
):
    (msg_handler or get_message_handler()).send_message(
        LogEvent(name, EventType.WARNING, scope, message, data)
    )


def setup_logging_config(logging_env: str = "dev", verbose: bool = False):
    file_path = os.path.join(config_folder, f"logging.{logging_env}.json")
    with open(file_path, "r") as file:
        logging_config = json.load(file)
        dictConfig(logging_config)

    logger.remove()
    logger.add(
        sys.stderr,
        colorize=True,
        level="DEBUG" if verbose else "INFO",
        format="<level>{level: <8}</level> | {message}",
    )
