import hashlib
import time
from collections.abc import Iterator
from contextlib import contextmanager
from datetime import datetime, timezone
from logging import getLogger
from pathlib import Path
from typing import Any

from app import __version__
from app.surrogate.models import RunManifest

UTC = timezone.utc

logger = getLogger(__name__)

MANIFEST_NAME = "manifest.json"
_CHUNK = 1 << 20


def file_digest(path: str | Path) -> str:
    """sha256 hex digest of a file."""
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        while chunk := handle.read(_CHUNK):
            digest.update(chunk)
    return digest.hexdigest()


class PhaseTimer:
    """Wall-clock seconds per named phase of a run."""

    def __init__(self):
        self.timings: dict[str, float] = {}

    @contextmanager
    def phase(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            elapsed = time.perf_counter() - start
            self.timings[name] = self.timings.get(name, 0.0) + elapsed
            logger.info("Phase %s took %.3f s", name, elapsed)


def build_manifest(
    command: str,
    run_id: str,
    settings: dict[str, Any],
    inputs: list[Path],
    outputs: list[Path],
    seed: int | None,
    timer: PhaseTimer,
) -> RunManifest:
    return RunManifest(
        command=command,
        run_id=run_id,
        config=settings,
        inputs={str(path): file_digest(path) for path in inputs},
        outputs=[path.name for path in outputs],
        seed=seed,
        version=__version__,
        timings=timer.timings,
        timestamp=datetime.now(UTC).isoformat(),
    )
