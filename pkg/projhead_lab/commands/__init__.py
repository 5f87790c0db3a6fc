from .base import CommandDefine, CommandReturn
from .registry import CommandRegistry
from .train import TrainCommand
from .diagnose import DiagnoseCommand
from .evaluate import EvaluateCommand
from .sweep import SweepCommand
from .export import ExportFeaturesCommand

COMMANDS = CommandRegistry()
COMMANDS.add_commands(
    [
        TrainCommand.init(),
        DiagnoseCommand.init(),
        EvaluateCommand.init(),
        SweepCommand.init(),
        ExportFeaturesCommand.init(),
    ]
)
