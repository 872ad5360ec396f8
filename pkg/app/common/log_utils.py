import json
import logging
import logging.config
from pathlib import Path

from app.common.tracing import ctx_command, ctx_run_id


# Adds additional ECS fields to the logger.
class ExtraFieldsFilter(logging.Filter):
    def filter(self, record):
        run_id = ctx_run_id.get("")
        command = ctx_command.get("")

        if run_id:
            record.trace = {"id": run_id}
        if command:
            record.event = {"action": command}
        return True


def setup_logging(path: str | Path) -> bool:
    """Configure logging from a dictConfig JSON file.

    Args:
        path: Path to a logging configuration such as ``logging.json``

    Returns:
        True when the file was found and applied, False when defaults were kept
    """
    config_path = Path(path)
    if not config_path.is_file():
        logging.basicConfig(
            level=logging.INFO, format="%(levelname)s - %(name)s - %(message)s"
        )
        logging.getLogger(__name__).warning(
            "Logging config %s not found, using basic configuration", config_path
        )
        return False

    with config_path.open(encoding="utf-8") as handle:
        logging.config.dictConfig(json.load(handle))
    return True
