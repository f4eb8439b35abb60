"""Document-context neural machine translation on a numpy autodiff core.

Subpackages: ``numerics`` (tensors, autodiff, Adam), ``transformer``,
``corpus``, ``jointmt`` (joint context-prediction training), ``ctxpretrain``
(context-encoder pre-training and fine-tuning), ``decode_eval`` (beam search,
BLEU, bootstrap) and ``runtime`` (config, checkpoints, CLI).
"""

__version__ = "0.1.0"
