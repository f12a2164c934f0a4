from __future__ import annotations

import logging
import sys
from enum import IntEnum

from src.cli.documents import MatrixDocumentError
from src.core.canonical import CanonicalFormError, UnclassifiableStructure
from src.core.closure_graph import ClosureGraphError
from src.core.matrixcore import MatrixCoreError
from src.services.perturbation import PerturbationError

logger = logging.getLogger(__name__)


class ExitCode(IntEnum):
    OK = 0
    USAGE = 1
    UNCLASSIFIABLE = 2
    VIOLATION = 3


class UsageError(Exception):
    pass


class VerificationFailed(Exception):
    def __init__(self, suite: str, violations: int) -> None:
        self.suite = suite
        self.violations = violations
        super().__init__(f"suite {suite} recorded {violations} violation(s)")


_INPUT_ERRORS = (
    UsageError,
    MatrixDocumentError,
    MatrixCoreError,
    CanonicalFormError,
    ClosureGraphError,
    PerturbationError,
    ValueError,
    OSError,
)


def handle_cli_error(error: BaseException) -> int:
    """Log *error*, print a one-line message on stderr and return the exit code."""
    if isinstance(error, VerificationFailed):
        logger.warning("verification_failed suite=%s violations=%d", error.suite, error.violations)
        code = ExitCode.VIOLATION
    elif isinstance(error, UnclassifiableStructure):
        logger.warning("unclassifiable_input reason=%s", error)
        code = ExitCode.UNCLASSIFIABLE
    elif isinstance(error, _INPUT_ERRORS):
        logger.info("input_error type=%s", type(error).__name__)
        code = ExitCode.USAGE
    else:
        logger.exception("unhandled_cli_error type=%s", type(error).__name__, exc_info=error)
        code = ExitCode.USAGE

    print(f"congrua: error: {error}", file=sys.stderr)
    return int(code)
