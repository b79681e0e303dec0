import json
import logging
import sys

from pkg.core.context.context_vars import clear_run_id, set_round, set_run_id
from pkg.core.logging.formatters import JSONFormatter


def _record(msg="hello", exc_info=None):
    return logging.LogRecord("pkg.test", logging.INFO, __file__, 1, msg, None, exc_info)


class TestJSONFormatter:
    def teardown_method(self):
        clear_run_id()
        set_round(None)

    def test_context_fields(self):
        set_run_id("run-1")
        set_round(3)
        payload = json.loads(JSONFormatter().format(_record()))
        assert payload["msg"] == "hello"
        assert payload["level"] == "info"
        assert payload["logger"] == "pkg.test"
        assert payload["run_id"] == "run-1"
        assert payload["round"] == 3

    def test_round_omitted_outside_training(self):
        payload = json.loads(JSONFormatter().format(_record()))
        assert "round" not in payload
        assert payload["run_id"] == ""

    def test_generated_run_id(self):
        run_id = set_run_id()
        assert len(run_id) == 12
        assert json.loads(JSONFormatter().format(_record()))["run_id"] == run_id

    def test_exception_and_extra_fields(self):
        try:
            raise ValueError("boom")
        except ValueError:
            record = _record(exc_info=sys.exc_info())
        record.extra_fields = {"clients": 6}
        payload = json.loads(JSONFormatter().format(record))
        assert "ValueError: boom" in payload["error"]
        assert payload["clients"] == 6
