"""Six-axis evaluation of synthetic image datasets against real ones."""

from .augment import apply_transform, geometric_augment
from .classifier import (
    Classifier,
    EvalResult,
    TrainHyper,
    build_classifier,
    evaluate,
    forward,
    gradient_wrt_input,
    load_classifier,
    save_classifier,
    train,
)
from .data import (
    DatasetError,
    LabeledImageDataset,
    SplitRatios,
    load_image_dataset,
    resize_bilinear,
    save_image_dataset,
    stratified_split,
)
from .deepfool import AttackConfig, adversarial_accuracy, deepfool, run_attack
from .features import FeatureSet, fallback_features, read_embeddings, write_embeddings
from .fid import GaussianStats, fid, fid_from_features, gaussian_stats, matrix_sqrt_psd
from .genbench import GeneratorAdapter, benchmark_generator, sampling_speed
from .manifold import ManifoldModel, build_manifold, membership, precision, recall
from .pipeline import (
    ExperimentPlan,
    ExperimentVariant,
    MetricsRecord,
    build_training_set,
    run_experiment,
)
from .report import RadarRow, emit_tables, normalize_for_radar
from .ssim import PrivacyConfig, SsimParams, max_ssim, privacy_score, ssim

__version__ = "0.1.0"
