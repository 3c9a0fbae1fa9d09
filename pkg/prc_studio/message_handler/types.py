from enum import Enum
from dataclasses import dataclass


class EventType(Enum):
    DEBUG = "debug"
    INFO = "info"
    SUCCESS = "success"
    WARNING = "warning"
    ERROR = "error"


class EventScope(Enum):
    MODEL = "Model"
    LIKELIHOOD = "Likelihood"
    EM = "EM"
    BAYES = "Bayes"
    PRC = "PRC"
    MATCHER = "Matcher"
    DATA = "Data"
    SIMULATION = "Simulation"
    CLI = "CLI"


@dataclass
class LogEvent:
    name: str
    type: EventType
    scope: EventScope
    message: str
    data: dict | None = None

    def to_dict(self):
        return {
            "name": self.name,
            "type": self.type.value,
            "scope": self.scope.value,
            "message": self.message,
            "data": self.data,
        }
