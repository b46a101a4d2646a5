"""scorpid: scorpion detection/classification pipeline toolkit.

Corpus management with deterministic splits, box-safe seeded augmentation,
evaluation metrics (confusion matrices, ROC/AUC, table reconstruction), a
deterministic reference inference backend, an HTTP triage service, and the
`scorpid` command line.
"""

from .corpus import (AnnotatedImage, BoundingBox, Corpus, SplitRatios,
                     corpus_stats, load_manifest, save_manifest, split_corpus)
from .infer import ClassScores, Detection, ReferenceBackend, RemoteBackend
from .metrics import (BinaryConfusion, MetricSet, MetricTargets, MultiConfusion,
                      RocCurve, metrics_from_binary, per_class_metrics,
                      reconstruct_confusion, reconstruct_multiclass,
                      roc_from_scores)

__version__ = "0.1.0"

__all__ = [
    "AnnotatedImage", "BoundingBox", "Corpus", "SplitRatios",
    "corpus_stats", "load_manifest", "save_manifest", "split_corpus",
    "ClassScores", "Detection", "ReferenceBackend", "RemoteBackend",
    "BinaryConfusion", "MetricSet", "MetricTargets", "MultiConfusion",
    "RocCurve", "metrics_from_binary", "per_class_metrics",
    "reconstruct_confusion", "reconstruct_multiclass", "roc_from_scores",
    "__version__",
]
