from .model import MODES, ConfigurationError, JointLossWeights, JointModel, joint_forward, param_count
from .training import init_joint_from_pretrained, train_joint_step1, train_joint_step2

__all__ = [
    "MODES",
    "ConfigurationError",
    "JointLossWeights",
    "JointModel",
    "init_joint_from_pretrained",
    "joint_forward",
    "param_count",
    "train_joint_step1",
    "train_joint_step2",
]
