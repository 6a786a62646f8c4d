"""Byte-level transformer encoder classifier with low-rank Q/K adapters.

The base model is a small randomly initialized encoder saved to a checkpoint
directory and treated as frozen pretrained weights; fine-tuning touches only
the low-rank adapters on the query/key projections plus the classification
head. The classifier reads the final non-padding position of the sequence.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import torch
import torch.nn as nn
import torch.nn.functional as F

PAD_ID = 256


@dataclass
class ModelConfig:
    vocab_size: int = 257          # 256 byte values + padding
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 128
    max_len: int = 256
    n_classes: int = 2             # index 0 = good, 1 = bad
    pooling: str = "last"          # final non-padding position

    @classmethod
    def from_file(cls, path: Path) -> "ModelConfig":
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))


class ByteTokenizer:
    """UTF-8 bytes as token ids; deterministic and dependency-free."""

    def __init__(self, max_len: int):
        self.max_len = max_len

    def encode(self, text: str) -> list[int]:
        data = text.encode("utf-8")[: self.max_len]
        return list(data)

    def batch(self, texts: list[str]) -> tuple[torch.Tensor, torch.Tensor]:
        encoded = [self.encode(t) or [PAD_ID] for t in texts]
        width = max(len(e) for e in encoded)
        ids = torch.full((len(encoded), width), PAD_ID, dtype=torch.long)
        mask = torch.zeros((len(encoded), width), dtype=torch.bool)
        for i, e in enumerate(encoded):
            ids[i, : len(e)] = torch.tensor(e, dtype=torch.long)
            mask[i, : len(e)] = True
        return ids, mask


class SelfAttention(nn.Module):
    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        assert d_model % n_heads == 0
        self.n_heads = n_heads
        self.d_head = d_model // n_heads
        self.q_proj = nn.Linear(d_model, d_model)
        self.k_proj = nn.Linear(d_model, d_model)
        self.v_proj = nn.Linear(d_model, d_model)
        self.o_proj = nn.Linear(d_model, d_model)

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        b, t, d = x.shape

        def heads(proj):
            return proj(x).view(b, t, self.n_heads, self.d_head).transpose(1, 2)

        q, k, v = heads(self.q_proj), heads(self.k_proj), heads(self.v_proj)
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.d_head)
        scores = scores.masked_fill(~mask[:, None, None, :], float("-inf"))
        attn = torch.softmax(scores, dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, t, d)
        return self.o_proj(out)


class EncoderLayer(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.attn = SelfAttention(cfg.d_model, cfg.n_heads)
        self.norm1 = nn.LayerNorm(cfg.d_model)
        self.ff1 = nn.Linear(cfg.d_model, cfg.d_ff)
        self.ff2 = nn.Linear(cfg.d_ff, cfg.d_model)
        self.norm2 = nn.LayerNorm(cfg.d_model)

    def forward(self, x, mask):
        x = self.norm1(x + self.attn(x, mask))
        x = self.norm2(x + self.ff2(F.gelu(self.ff1(x))))
        return x


class CodeClassifier(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.token_embed = nn.Embedding(cfg.vocab_size, cfg.d_model)
        self.pos_embed = nn.Embedding(cfg.max_len, cfg.d_model)
        self.layers = nn.ModuleList(EncoderLayer(cfg) for _ in range(cfg.n_layers))
        self.final_norm = nn.LayerNorm(cfg.d_model)
        self.head = nn.Linear(cfg.d_model, cfg.n_classes)

    def forward(self, ids: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        positions = torch.arange(ids.shape[1], device=ids.device)
        x = self.token_embed(ids) + self.pos_embed(positions)[None, :, :]
        for layer in self.layers:
            x = layer(x, mask)
        x = self.final_norm(x)
        # final non-padding position per sequence
        last = mask.long().sum(dim=1) - 1
        pooled = x[torch.arange(ids.shape[0]), last]
        return self.head(pooled)


class LoraLinear(nn.Module):
    """Frozen linear layer plus a trainable low-rank update."""

    def __init__(self, base: nn.Linear, rank: int, alpha: float):
        super().__init__()
        self.base = base
        self.rank = rank
        self.scaling = alpha / rank
        self.lora_A = nn.Parameter(torch.zeros(rank, base.in_features))
        self.lora_B = nn.Parameter(torch.zeros(base.out_features, rank))
        nn.init.normal_(self.lora_A, std=0.02)
        # B starts at zero so the adapted model equals the base model

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.base(x) + self.scaling * F.linear(F.linear(x, self.lora_A),
                                                      self.lora_B)


def attach_adapters(model: CodeClassifier, rank: int, alpha: float,
                    targets: tuple[str, ...] = ("q_proj", "k_proj")) -> int:
    """Wrap the target attention projections with low-rank adapters."""
    wrapped = 0
    for layer in model.layers:
        for name in targets:
            base = getattr(layer.attn, name)
            if isinstance(base, LoraLinear):
                continue
            setattr(layer.attn, name, LoraLinear(base, rank, alpha))
            wrapped += 1
    return wrapped


def mark_trainable(model: CodeClassifier) -> list[str]:
    """Freeze everything except adapter matrices and the classification head;
    returns the trainable parameter names for auditing."""
    trainable = []
    for name, param in model.named_parameters():
        is_adapter = "lora_A" in name or "lora_B" in name
        is_head = name.startswith("head.")
        param.requires_grad = is_adapter or is_head
        if param.requires_grad:
            trainable.append(name)
    return trainable


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_base(model: CodeClassifier, out_dir: Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(json.dumps(asdict(model.cfg), indent=2),
                                         encoding="utf-8")
    torch.save(model.state_dict(), out_dir / "weights.pt")


def load_base(base_dir: Path) -> CodeClassifier:
    base_dir = Path(base_dir)
    cfg = ModelConfig.from_file(base_dir / "config.json")
    model = CodeClassifier(cfg)
    model.load_state_dict(torch.load(base_dir / "weights.pt",
                                     weights_only=True))
    return model


def init_base(out_dir: Path, cfg: ModelConfig | None = None,
              seed: int = 0) -> CodeClassifier:
    """Create and save a fresh base model (the stand-in for a pretrained
    checkpoint in offline environments)."""
    torch.manual_seed(seed)
    model = CodeClassifier(cfg or ModelConfig())
    save_base(model, out_dir)
    return model


def save_adapter(model: CodeClassifier, out_dir: Path, base_dir: Path,
                 train_config: dict, log: list[dict]) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(json.dumps(asdict(model.cfg), indent=2),
                                         encoding="utf-8")
    adapter_state = {name: tensor for name, tensor in model.state_dict().items()
                     if "lora_A" in name or "lora_B" in name
                     or name.startswith("head.")}
    torch.save(adapter_state, out_dir / "adapter.pt")
    meta = dict(train_config)
    meta["base_dir"] = str(Path(base_dir).resolve())
    (out_dir / "train_config.json").write_text(json.dumps(meta, indent=2),
                                               encoding="utf-8")
    (out_dir / "log.json").write_text(json.dumps(log, indent=2),
                                      encoding="utf-8")


def load_checkpoint(checkpoint_dir: Path) -> CodeClassifier:
    """Rebuild base + adapters + head from a fine-tuned checkpoint."""
    checkpoint_dir = Path(checkpoint_dir)
    meta = json.loads((checkpoint_dir / "train_config.json").read_text(
        encoding="utf-8"))
    model = load_base(Path(meta["base_dir"]))
    attach_adapters(model, rank=meta["rank"], alpha=meta["alpha"],
                    targets=tuple(meta["targets"]))
    adapter_state = torch.load(checkpoint_dir / "adapter.pt", weights_only=True)
    missing, unexpected = model.load_state_dict(adapter_state, strict=False)
    if unexpected:
        raise ValueError(f"unexpected adapter tensors: {unexpected}")
    model.eval()
    return model
