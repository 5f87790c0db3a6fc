from .base import CommandDefine, CommandReturn
from ..env import Env, LOG


class CommandRegistry:
    def __init__(self):
        self.__commands: dict[str, CommandDefine] = {}

    def register(self, command: CommandDefine):
        self.__commands[command.name] = command

    def add_commands(self, commands: list[CommandDefine]):
        for command in commands:
            self.register(command)

    def get_all_commands(self):
        return list(self.__commands.values())

    def list_commands(self):
        return list(self.__commands.keys())

    def has_command(self, name: str):
        return name in self.__commands

    def get(self, name: str) -> CommandDefine:
        return self.__commands[name]

    async def execute(self, env: Env, name: str, arguments: dict) -> CommandReturn:
        r = await self.__commands[name].execute(env, arguments)
        LOG.debug(f"{name} finished with exit code {r.exit_code} in {r.elapsed:.1f}s")
        return r
