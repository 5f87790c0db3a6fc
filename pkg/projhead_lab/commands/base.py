import argparse
import asyncio
from abc import ABC, abstractmethod
from pydantic import BaseModel, ValidationError
from ..constants import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK
from ..env import Env
from ..errors import LabError


class CommandReturn(BaseModel):
    exit_code: int = EXIT_OK
    message: str
    outputs: list[str] = []
    elapsed: float = 0.0

    @classmethod
    def error(cls, name: str, message: str, exit_code: int) -> "CommandReturn":
        return cls(exit_code=exit_code, message=f"Error on executing `{name}`: {message}")


class CommandDefine(BaseModel, ABC):
    name: str
    description: str

    @classmethod
    @abstractmethod
    def init(cls, **kwargs) -> "CommandDefine":
        raise NotImplementedError("Command must implement init method")

    @abstractmethod
    def add_arguments(self, parser: argparse.ArgumentParser):
        raise NotImplementedError("Command must implement add_arguments method")

    @abstractmethod
    async def _execute(self, env: Env, arguments: dict) -> CommandReturn:
        raise NotImplementedError("Command must implement _execute method")

    async def execute(self, env: Env, arguments: dict) -> CommandReturn:
        try:
            start_time = asyncio.get_event_loop().time()
            r = await self._execute(env, arguments)
            r.elapsed = asyncio.get_event_loop().time() - start_time
            return r
        except ValidationError as e:
            return CommandReturn.error(self.name, str(e), EXIT_CONFIG)
        except LabError as e:
            return CommandReturn.error(self.name, str(e), e.exit_code)
        except Exception as e:
            return CommandReturn.error(self.name, f"{type(e).__name__}: {e}", EXIT_NUMERICAL)
