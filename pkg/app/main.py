import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from app.cli.commands import EXIT_FAILED, EXIT_OK, EXIT_USAGE, build_parser, run
from app.core.config import settings
from app.core.exceptions import BudgetExceededError, CertificationError, GroupCodeError, InvalidInputError

logger = logging.getLogger(__name__)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Entry point for the groupcodes command line.

    Exit codes: 0 success, 1 a certificate or verification failed, 2 bad usage or input.
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    logging.basicConfig(
        level=(args.log_level or settings.LOG_LEVEL).upper(),
        format=settings.LOG_FORMAT,
        stream=sys.stderr,
    )
    logger.debug(f"Starting {settings.PROJECT_NAME} v{settings.VERSION}: {' '.join(argv)}")

    try:
        return run(args, argv)
    except CertificationError as e:
        logger.error(f"Certification failed: {str(e)}")
        return EXIT_FAILED
    except (InvalidInputError, BudgetExceededError) as e:
        logger.error(f"{type(e).__name__}: {str(e)}")
        return EXIT_USAGE
    except ValidationError as e:
        logger.error(f"Invalid parameters: {str(e)}")
        return EXIT_USAGE
    except GroupCodeError as e:
        logger.error(f"Error: {str(e)}")
        return EXIT_FAILED
    except KeyboardInterrupt:
        logger.info("Stopped by user")
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
