"""Selector-gated model fusion for generalized zero-shot classification."""

from .classifiers import (LinearModel, ModelError, ModelSet, SelectorModel, TrainHyper,
                          load_model, save_model, train_models, train_selector, train_softmax)
from .dataset import (ClassCatalog, DatasetError, GzslDataset, Split, SyntheticSpec,
                      make_synthetic_benchmark, read_container, write_container)
from .evaluation import (EvalReport, ProtocolError, cross_validate, harmonic_mean,
                         per_class_top1, run_gzsl_protocol, sigma_sweep)
from .fusion import FusionConfig, FusionConfigError, Strategy, fuse
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ClassCatalog", "DatasetError", "EvalReport", "FusionConfig",
    "FusionConfigError", "GzslDataset", "LinearModel", "ModelError", "ModelSet",
    "ProtocolError", "SelectorModel", "Split", "Strategy", "SyntheticSpec", "TrainHyper",
    "cross_validate", "fuse", "harmonic_mean", "load_model", "make_synthetic_benchmark",
    "per_class_top1", "read_container", "run_gzsl_protocol", "save_model", "sigma_sweep",
    "train_models", "train_selector", "train_softmax", "write_container",
]
