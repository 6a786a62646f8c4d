"""Adapter fine-tuning and inference service for snippet classification."""

from .model import (ByteTokenizer, CodeClassifier, LoraLinear, ModelConfig,
                    attach_adapters, init_base, load_base, load_checkpoint,
                    mark_trainable)
from .server import create_app, serve
from .train import TrainConfig, TrainResult, train

__version__ = "0.1.0"

__all__ = [
    "ByteTokenizer", "CodeClassifier", "LoraLinear", "ModelConfig",
    "TrainConfig", "TrainResult", "attach_adapters", "create_app",
    "init_base", "load_base", "load_checkpoint", "mark_trainable", "serve",
    "train",
]
