from .optim import OptimizerState, optimizer_step
from .steps import StepResult, joint_step, bilevel_step, encoder_step, batch_gradients
from .moving import pca_refresh, slow_single_epoch, slow_optimal_epoch
from .schedule import REGIMES, Regime, TrainSchedule, run_schedule
