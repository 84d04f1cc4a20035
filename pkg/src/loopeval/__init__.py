"""loopeval: evaluation toolkit for one-bar drum-loop generation.

Pipeline: WAV corpus -> downbeat slicing -> tempo normalization to 2-second
bars -> 80x320 log-mel tensors -> model-based metrics (inception score,
Frechet distance over embeddings, statistically-different bins, and
Jensen-Shannon divergence over k-means bin occupancy).
"""

__version__ = "0.1.0"

from .audio_io import AudioClip, AudioDecodeError, read_wav, resample, write_wav
from .dsp import (
    MelSpectrogram,
    StftFrameSpec,
    mel_filterbank,
    mel_spectrogram,
    stft_magnitude,
    time_stretch,
)
from .prep import (
    BarRecord,
    DownbeatAnnotation,
    grid_slice,
    load_bar_records,
    normalize_bar,
    prepare_dataset,
    render_fixed_mel,
    slice_bars,
)
from .features import (
    Embedding,
    PosteriorSet,
    SoftmaxClassifier,
    load_embeddings,
    load_posteriors,
    melstat_embed,
    predict_posteriors,
    train_classifier,
)
from .metrics import (
    GaussianStats,
    IsResult,
    fit_gaussian,
    frechet_distance,
    inception_score,
    trace_sqrt_product,
)
from .diversity import (
    ClusterModel,
    DiversityResult,
    assign_bins,
    evaluate_diversity,
    jsd,
    kmeans_fit,
    ndb,
)
from .synthloop import KitSpec, PatternSpec, generate_set, synth_bar
from .tensorio import TensorFormatError, read_lten, write_lten

__all__ = [
    "__version__",
    "AudioClip",
    "AudioDecodeError",
    "read_wav",
    "write_wav",
    "resample",
    "MelSpectrogram",
    "StftFrameSpec",
    "stft_magnitude",
    "mel_filterbank",
    "mel_spectrogram",
    "time_stretch",
    "DownbeatAnnotation",
    "BarRecord",
    "slice_bars",
    "grid_slice",
    "normalize_bar",
    "render_fixed_mel",
    "prepare_dataset",
    "load_bar_records",
    "Embedding",
    "PosteriorSet",
    "SoftmaxClassifier",
    "melstat_embed",
    "train_classifier",
    "predict_posteriors",
    "load_embeddings",
    "load_posteriors",
    "GaussianStats",
    "IsResult",
    "fit_gaussian",
    "trace_sqrt_product",
    "frechet_distance",
    "inception_score",
    "ClusterModel",
    "DiversityResult",
    "kmeans_fit",
    "assign_bins",
    "ndb",
    "jsd",
    "evaluate_diversity",
    "KitSpec",
    "PatternSpec",
    "synth_bar",
    "generate_set",
    "read_lten",
    "write_lten",
    "TensorFormatError",
]
