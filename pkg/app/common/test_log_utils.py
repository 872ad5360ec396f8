import logging

from app.common.log_utils import ExtraFieldsFilter, setup_logging
from app.common.tracing import ctx_run_id, run_context


def make_record():
    return logging.LogRecord("test", logging.INFO, __file__, 1, "message", (), None)


def test_filter_without_run():
    record = make_record()
    assert ExtraFieldsFilter().filter(record)
    assert not hasattr(record, "trace")
    assert not hasattr(record, "event")


def test_filter_inside_run():
    with run_context("bootstrap", run_id="run-123") as run_id:
        record = make_record()
        ExtraFieldsFilter().filter(record)
    assert run_id == "run-123"
    assert record.trace == {"id": "run-123"}
    assert record.event == {"action": "bootstrap"}
    assert ctx_run_id.get("") == ""


def test_run_context_generates_ids():
    with run_context("fit") as first, run_context("fit") as second:
        assert first != second
        assert len(first) == 32


def test_setup_logging_without_file(tmp_path):
    assert not setup_logging(tmp_path / "missing.json")


def test_setup_logging_from_file(tmp_path):
    path = tmp_path / "logging.json"
    path.write_text(
        '{"version": 1, "disable_existing_loggers": false, '
        '"loggers": {"app.test": {"level": "DEBUG"}}}'
    )
    assert setup_logging(path)
    assert logging.getLogger("app.test").level == logging.DEBUG
