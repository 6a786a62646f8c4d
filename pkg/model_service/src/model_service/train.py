"""Adapter fine-tuning: cross-entropy sequence classification on frozen base
weights, with per-epoch train loss and validation F1 logging."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import torch
import torch.nn.functional as F

from .data import load_dataset
from .model import (ByteTokenizer, attach_adapters, load_base, mark_trainable,
                    save_adapter)


@dataclass
class TrainConfig:
    base_dir: str
    out_dir: str
    rank: int = 8
    alpha: float = 16.0
    targets: tuple[str, ...] = ("q_proj", "k_proj")
    epochs: int = 2
    batch_size: int = 8
    learning_rate: float = 1e-3
    seed: int = 0
    max_seq_len: int = 256

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class TrainResult:
    log: list[dict] = field(default_factory=list)
    trainable_params: list[str] = field(default_factory=list)
    checkpoint_dir: str = ""


def _f1(preds: list[int], truth: list[int]) -> float:
    tp = sum(1 for p, t in zip(preds, truth) if p == 1 and t == 1)
    fp = sum(1 for p, t in zip(preds, truth) if p == 1 and t == 0)
    fn = sum(1 for p, t in zip(preds, truth) if p == 0 and t == 1)
    if tp == 0:
        return 0.0
    pre = tp / (tp + fp)
    rec = tp / (tp + fn)
    return 2 * pre * rec / (pre + rec)


def _batches(n: int, batch_size: int, generator: torch.Generator):
    order = torch.randperm(n, generator=generator).tolist()
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def train(train_path: Path, val_path: Path, cfg: TrainConfig) -> TrainResult:
    """Fine-tune adapters on the training file; returns the epoch log.

    Only the Q/K adapter matrices and the classification head receive
    gradients; the audit list in the result names every trainable tensor.
    """
    train_codes, train_labels = load_dataset(train_path)
    val_codes, val_labels = load_dataset(val_path)

    torch.manual_seed(cfg.seed)
    model = load_base(Path(cfg.base_dir))
    model.cfg.max_len = max(model.cfg.max_len, cfg.max_seq_len)
    attach_adapters(model, rank=cfg.rank, alpha=cfg.alpha, targets=cfg.targets)
    trainable = mark_trainable(model)
    tokenizer = ByteTokenizer(min(cfg.max_seq_len, model.cfg.max_len))

    params = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.Adam(params, lr=cfg.learning_rate)
    generator = torch.Generator().manual_seed(cfg.seed)

    labels_t = torch.tensor(train_labels, dtype=torch.long)
    log: list[dict] = []
    for epoch in range(cfg.epochs):
        model.train()
        total_loss = 0.0
        seen = 0
        for batch_idx in _batches(len(train_codes), cfg.batch_size, generator):
            ids, mask = tokenizer.batch([train_codes[i] for i in batch_idx])
            logits = model(ids, mask)
            loss = F.cross_entropy(logits, labels_t[batch_idx])
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total_loss += loss.item() * len(batch_idx)
            seen += len(batch_idx)
        model.eval()
        with torch.no_grad():
            ids, mask = tokenizer.batch(val_codes)
            val_preds = model(ids, mask).argmax(dim=-1).tolist()
        entry = {
            "epoch": epoch + 1,
            "train_loss": total_loss / seen,
            "val_f1": _f1(val_preds, val_labels),
        }
        log.append(entry)
        print(f"epoch {entry['epoch']}: train_loss={entry['train_loss']:.4f} "
              f"val_f1={entry['val_f1']:.4f}")

    train_config = asdict(cfg)
    train_config["targets"] = list(cfg.targets)
    save_adapter(model, Path(cfg.out_dir), Path(cfg.base_dir), train_config, log)
    return TrainResult(log=log, trainable_params=trainable,
                       checkpoint_dir=str(cfg.out_dir))


def load_log(checkpoint_dir: Path) -> list[dict]:
    return json.loads((Path(checkpoint_dir) / "log.json").read_text(
        encoding="utf-8"))
