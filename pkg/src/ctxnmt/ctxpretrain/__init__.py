from .fusion import ContextAttention, ContextFusionMode, explicit_context_attend, fuse_context, mean_pool
from .models import FinetuneModel, PretrainModel, finetune_forward, pretrain_forward
from .training import finetune, init_finetune_from_pretrained, pretrain, pretrain_name_mapping

__all__ = [
    "ContextAttention",
    "ContextFusionMode",
    "FinetuneModel",
    "PretrainModel",
    "explicit_context_attend",
    "finetune",
    "finetune_forward",
    "fuse_context",
    "init_finetune_from_pretrained",
    "mean_pool",
    "pretrain",
    "pretrain_forward",
    "pretrain_name_mapping",
]
