# File: errors.py (Domain exceptions shared by crud, services and the CLI)

from typing import Optional

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_RUNTIME_INCONSISTENCY = 2


class SimulationError(Exception):
    """Base error. `detail` is the user-facing message, `exit_code` what the CLI returns."""

    exit_code: int = EXIT_RUNTIME_INCONSISTENCY

    def __init__(self, detail: str, *, context: Optional[str] = None):
        self.detail = detail
        self.context = context
        super().__init__(f"{context}: {detail}" if context else detail)


# --- Configuration / input errors (exit 1) ---

class ConfigError(SimulationError):
    exit_code = EXIT_CONFIG_ERROR


class MalformedDocument(ConfigError):
    pass


class DuplicateId(ConfigError):
    pass


class DanglingApplianceRef(ConfigError):
    pass


class OccupantInNonOffice(ConfigError):
    pass


class InsufficientCapacity(ConfigError):
    pass


class InvalidParams(ConfigError):
    pass


class OutOfRange(ConfigError):
    pass


class EmptyWindow(ConfigError):
    pass


class IncompleteFinalBin(ConfigError):
    pass


# --- Runtime inconsistencies (exit 2) ---

class RuntimeInconsistency(SimulationError):
    exit_code = EXIT_RUNTIME_INCONSISTENCY


class InconsistentState(RuntimeInconsistency):
    pass


class NotOwner(RuntimeInconsistency):
    pass


class MissingTimeline(RuntimeInconsistency):
    pass


class ReconstructionMismatch(RuntimeInconsistency):
    pass
