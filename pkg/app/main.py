import sys

from app.common.log_utils import setup_logging
from app.config import config
from app.surrogate.cli import run


def main() -> int:
    setup_logging(config.log_config)
    return run(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
