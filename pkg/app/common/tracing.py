import contextvars
import uuid
from collections.abc import Iterator
from contextlib import contextmanager
from logging import getLogger

logger = getLogger(__name__)

ctx_run_id = contextvars.ContextVar("run_id")
ctx_command = contextvars.ContextVar("command")


# One run id per command invocation; log lines carry it.
@contextmanager
def run_context(command: str, run_id: str | None = None) -> Iterator[str]:
    """Bind a run id and command name to the current context.

    Args:
        command: Name of the CLI subcommand being executed
        run_id: Explicit run id; a random one is generated when omitted

    Yields:
        The run id bound for the duration of the block
    """
    run_id = run_id or uuid.uuid4().hex
    run_token = ctx_run_id.set(run_id)
    command_token = ctx_command.set(command)
    try:
        yield run_id
    finally:
        ctx_command.reset(command_token)
        ctx_run_id.reset(run_token)
