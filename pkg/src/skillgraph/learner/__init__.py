from skillgraph.learner.checkpoint import CheckpointError, CheckpointVersionError, load_checkpoint, save_checkpoint
from skillgraph.learner.config import PROFILES, TrainerConfig, profile
from skillgraph.learner.networks import PolicyParams, forward_policy, init_params
from skillgraph.learner.ppo import compute_gae, ppo_loss_and_grad, ppo_update
from skillgraph.learner.trainer import TrainResult, run_policy, train

__all__ = [
    "CheckpointError", "CheckpointVersionError", "PROFILES", "PolicyParams", "TrainResult",
    "TrainerConfig", "compute_gae", "forward_policy", "init_params", "load_checkpoint",
    "ppo_loss_and_grad", "ppo_update", "profile", "run_policy", "save_checkpoint", "train",
]
