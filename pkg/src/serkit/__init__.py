"""Speech emotion recognition with frozen self-supervised encoders.

Pipeline: wav decode -> 16 kHz mono -> frozen transformer encoder ->
mean-pooled utterance embedding -> two-layer classifier head, evaluated
with stratified splits, k-fold runs, WA/UA, and confusion matrices.
"""

from .audio import AudioClip, decode_wav, encode_wav, normalize, read_wav, resample
from .datasets import (
    DATASETS,
    LABEL_SETS,
    ScanResult,
    UtteranceRecord,
    kfold,
    read_manifest,
    scan_dataset,
    stratified_split,
    write_manifest,
)
from .encoder import (
    EncoderManifest,
    EncoderModel,
    conv_feature_encoder,
    extract,
    load_archive,
    transformer_context,
)
from .evaluate import run_evaluation
from .head import (
    ClassifierHead,
    TrainConfig,
    forward,
    load_head,
    loss_and_grads,
    mean_pool,
    predict,
    save_head,
    train_head,
)
from .metrics import (
    ConfusionMatrix,
    EvalReport,
    FoldResult,
    aggregate,
    confusion,
    unweighted_accuracy,
    weighted_accuracy,
)

__version__ = "0.1.0"
