from __future__ import annotations

import logging
from importlib.metadata import PackageNotFoundError, version

from src.cli.commands import run
from src.cli.error_handler import handle_cli_error
from src.config.settings import load_settings
from src.utils.logging import configure_logging

logger = logging.getLogger(__name__)


def main(argv: list[str] | None = None) -> int:
    try:
        settings = load_settings()
    except ValueError as error:
        return handle_cli_error(error)
    configure_logging(settings.log_level)

    try:
        app_version = version("congrua")
    except PackageNotFoundError:
        app_version = "unknown"

    logger.debug(
        "startup version=%s rank_tol=%g eig_tol=%g seed=%d trials=%d eps=%g condition_bound=%g",
        app_version,
        settings.rank_tol,
        settings.eig_tol,
        settings.seed,
        settings.trials,
        settings.epsilon,
        settings.condition_bound,
    )

    try:
        return run(settings, argv)
    except Exception as error:
        return handle_cli_error(error)


if __name__ == "__main__":
    raise SystemExit(main())
