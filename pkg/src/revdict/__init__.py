"""Reverse-dictionary engine: learn definition-to-embedding projections,
ensemble them, align embedding spaces across languages, evaluate with the
shared-task metric suite, and serve top-k nearest-word lookup."""

from .align import (
    AlignerAE,
    AlignmentPipeline,
    TrainedAligner,
    align_forward,
    crosslingual_predict,
    init_aligner,
    load_aligner,
    save_aligner,
    train_aligner,
)
from .checkpoint import CheckpointError
from .data import (
    AlignedPair,
    DataFormatError,
    DictEntry,
    DictionarySet,
    FeatureStore,
    MappedEntry,
    SupervisedSet,
    hashgram_encode,
    hashgram_store,
    join,
    load_dictionary,
    load_features,
    load_mapped_dictionary,
    split_set,
    write_dictionary,
    write_features,
)
from .ensemble import (
    Ensemble,
    SearchResult,
    SubsetRow,
    ensemble_predict,
    search_table_csv,
    subset_search,
)
from .metrics import EvalReport, evaluate, format_report, precision_at_k, report_to_json
from .nnet import (
    DenseLayer,
    FeedForwardStack,
    Gradients,
    backward,
    cosine,
    forward,
    mse_loss,
    mse_loss_grad,
)
from .optim import AdamWState, OneCycleConfig, TrainConfig, adamw_step, onecycle_lr
from .projection import (
    EpochStats,
    ProjectionHead,
    TrainedHead,
    fit_stack,
    init_head,
    load_head,
    predict,
    save_head,
    train_head,
)
from .retrieval import VocabIndex, batch_lookup, build_index, load_index, lookup, save_index

__version__ = "0.1.0"
