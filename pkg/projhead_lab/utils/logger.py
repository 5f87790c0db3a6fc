import json
import logging
from rich.console import Console
from rich.markdown import Markdown as M


class RunLogger:
    def __init__(self, logger: logging.Logger):
        self.logger = logger

    def debug(self, run_id: str, message: str):
        self.logger.debug(json.dumps({"run_id": str(run_id)}) + " | " + message)

    def info(self, run_id: str, message: str):
        self.logger.info(json.dumps({"run_id": str(run_id)}) + " | " + message)

    def warning(self, run_id: str, message: str):
        self.logger.warning(json.dumps({"run_id": str(run_id)}) + " | " + message)

    def error(self, run_id: str, message: str):
        self.logger.error(json.dumps({"run_id": str(run_id)}) + " | " + message)


class ConsoleLogger:

    def __init__(self, console: Console = None):
        self.console = console or Console()

    def debug(self, run_id: str, message: str):
        pass

    def info(self, run_id: str, message: str):
        self.console.print(M(message))

    def warning(self, run_id: str, message: str):
        self.console.print(f"[yellow]! {message}[/yellow]")

    def error(self, run_id: str, message: str):
        self.console.print(f"❌ {message}")
        self.console.rule(style="gray")
