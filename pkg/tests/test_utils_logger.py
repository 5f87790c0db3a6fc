import json
from unittest.mock import Mock
from projhead_lab.utils.logger import RunLogger, ConsoleLogger


def test_run_logger_methods():
    mock_logger = Mock()
    rlog = RunLogger(mock_logger)
    rlog.debug("1", "a dbg")
    rlog.info("2", "msg info")
    rlog.warning("3", "warn issue")
    rlog.error("4", "errzzz")
    assert mock_logger.debug.called
    assert mock_logger.info.called
    assert mock_logger.warning.called
    assert mock_logger.error.called


def test_run_logger_tags_run_id():
    mock_logger = Mock()
    RunLogger(mock_logger).info("run-7", "epoch 0")
    line = mock_logger.info.call_args[0][0]
    tag, message = line.split(" | ", 1)
    assert json.loads(tag) == {"run_id": "run-7"}
    assert message == "epoch 0"


def test_console_logger_info_and_error():
    mock_console = Mock()
    clog = ConsoleLogger(mock_console)
    clog.info("s", "see me?")
    clog.error("s", "errhf")
    assert mock_console.print.call_count >= 1
    assert mock_console.rule.call_count >= 1
