"""Multi-modal multi-task transformer for meme affect classification.

Frozen per-modality feature vectors in, five affect labels out: a
positional-embedding-free transformer encoder over the modality token set,
four CORAL ordinal heads plus one binary head, trained with Adam under a
triangular cyclical learning rate on oversampled epochs.
"""

from .data_io import (FeatureRecord, LabelSet, SplitStats, compute_stats,
                      generate_synthetic, oversample_indices,
                      read_feature_file, write_feature_file)
from .evaluation import (MetricsReport, aggregate, binarize_task_c,
                         evaluate_model, reference_tables, weighted_f1)
from .model import (HeadOutputs, MmmtModel, ModelConfig, forward, init_model,
                    load_model, multitask_loss, parameter_count, predict,
                    save_model)
from .ordinal import (CoralHead, coral_forward, coral_loss, coral_predict,
                      extend_labels)
from .rng import RngState
from .tensor_core import Parameter, grad_check
from .training import AdamState, TrainConfig, TrainResult, adam_step, lr_at, train

__version__ = "0.1.0"
