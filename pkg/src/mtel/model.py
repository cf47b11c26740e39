"""Shared-encoder / three-decoder sequence model.

One transformer encoder feeds three parameter-disjoint transformer
decoders: a generation decoder with a vocabulary projection tied to the
token embedding, a tagging decoder whose states feed a 2-way head, and
a pair-classification decoder whose final-position state feeds a scalar
head squashed to [0, 1]. A second 2-way tagging head reads encoder
states directly.

Linear layers are bias-free and layer norms non-affine, so the smallest
configs stay tiny enough for exhaustive finite-difference checks.
Positional information comes from fixed sinusoidal encodings.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, asdict

import torch
import torch.nn as nn
import torch.nn.functional as F


class ModelError(Exception):
    pass


class SequenceTooLong(ModelError):
    pass


class DecoderId(enum.Enum):
    EL = "el"
    MD = "md"
    MP = "mp"


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    model_dim: int = 64
    ffn_dim: int = 128
    num_heads: int = 4
    enc_layers: int = 2
    dec_layers: int = 2
    max_len: int = 128
    dropout: float = 0.0
    init_seed: int = 0

    def __post_init__(self):
        if min(self.vocab_size, self.model_dim, self.ffn_dim, self.num_heads,
               self.enc_layers, self.dec_layers, self.max_len) <= 0:
            raise ValueError("all ModelConfig dimensions must be positive")
        if self.model_dim % self.num_heads != 0:
            raise ValueError("model_dim must be divisible by num_heads")


def sinusoidal_positions(max_len: int, dim: int) -> torch.Tensor:
    pos = torch.arange(max_len, dtype=torch.float64).unsqueeze(1)
    half = (dim + 1) // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=torch.float64) / max(half, 1))
    angles = pos * freqs
    pe = torch.zeros(max_len, dim, dtype=torch.float64)
    pe[:, 0::2] = torch.sin(angles)[:, : pe[:, 0::2].shape[1]]
    pe[:, 1::2] = torch.cos(angles)[:, : pe[:, 1::2].shape[1]]
    return pe.float()


class Attention(nn.Module):
    def __init__(self, dim: int, heads: int, dropout: float):
        super().__init__()
        self.heads = heads
        self.head_dim = dim // heads
        self.q = nn.Linear(dim, dim, bias=False)
        self.k = nn.Linear(dim, dim, bias=False)
        self.v = nn.Linear(dim, dim, bias=False)
        self.o = nn.Linear(dim, dim, bias=False)
        self.drop = nn.Dropout(dropout)

    def forward(self, x, mem, attn_mask=None, key_padding_mask=None):
        # x: [B, T, D]; mem: [B, S, D]
        B, T, D = x.shape
        S = mem.shape[1]
        q = self.q(x).view(B, T, self.heads, self.head_dim).transpose(1, 2)
        k = self.k(mem).view(B, S, self.heads, self.head_dim).transpose(1, 2)
        v = self.v(mem).view(B, S, self.heads, self.head_dim).transpose(1, 2)
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        if attn_mask is not None:
            scores = scores.masked_fill(attn_mask, float("-inf"))
        if key_padding_mask is not None:
            scores = scores.masked_fill(key_padding_mask[:, None, None, :], float("-inf"))
        attn = self.drop(torch.softmax(scores, dim=-1))
        out = (attn @ v).transpose(1, 2).reshape(B, T, D)
        return self.o(out)


class FeedForward(nn.Module):
    def __init__(self, dim: int, ffn_dim: int, dropout: float):
        super().__init__()
        self.fc1 = nn.Linear(dim, ffn_dim, bias=False)
        self.fc2 = nn.Linear(ffn_dim, dim, bias=False)
        self.drop = nn.Dropout(dropout)

    def forward(self, x):
        return self.fc2(self.drop(F.gelu(self.fc1(x))))


def _norm(dim: int) -> nn.LayerNorm:
    return nn.LayerNorm(dim, elementwise_affine=False)


class EncoderLayer(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.self_attn = Attention(cfg.model_dim, cfg.num_heads, cfg.dropout)
        self.ffn = FeedForward(cfg.model_dim, cfg.ffn_dim, cfg.dropout)
        self.norm1 = _norm(cfg.model_dim)
        self.norm2 = _norm(cfg.model_dim)
        self.drop = nn.Dropout(cfg.dropout)

    def forward(self, x, key_padding_mask=None):
        h = self.norm1(x)
        x = x + self.drop(self.self_attn(h, h, key_padding_mask=key_padding_mask))
        x = x + self.drop(self.ffn(self.norm2(x)))
        return x


class DecoderLayer(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.self_attn = Attention(cfg.model_dim, cfg.num_heads, cfg.dropout)
        self.cross_attn = Attention(cfg.model_dim, cfg.num_heads, cfg.dropout)
        self.ffn = FeedForward(cfg.model_dim, cfg.ffn_dim, cfg.dropout)
        self.norm1 = _norm(cfg.model_dim)
        self.norm2 = _norm(cfg.model_dim)
        self.norm3 = _norm(cfg.model_dim)
        self.drop = nn.Dropout(cfg.dropout)

    def forward(self, x, mem, causal_mask, mem_padding_mask=None):
        h = self.norm1(x)
        x = x + self.drop(self.self_attn(h, h, attn_mask=causal_mask))
        h = self.norm2(x)
        x = x + self.drop(self.cross_attn(h, mem, key_padding_mask=mem_padding_mask))
        x = x + self.drop(self.ffn(self.norm3(x)))
        return x


class Decoder(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.layers = nn.ModuleList(DecoderLayer(cfg) for _ in range(cfg.dec_layers))
        self.final_norm = _norm(cfg.model_dim)

    def forward(self, x, mem, causal_mask, mem_padding_mask=None):
        for layer in self.layers:
            x = layer(x, mem, causal_mask, mem_padding_mask)
        return self.final_norm(x)


class MtlModel(nn.Module):
    """Encoder shared across tasks; decoders and heads are task-specific."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        gen = torch.Generator().manual_seed(cfg.init_seed)
        self.embed = nn.Embedding(cfg.vocab_size, cfg.model_dim)
        self.register_buffer("pos", sinusoidal_positions(cfg.max_len, cfg.model_dim))
        self.enc_layers = nn.ModuleList(EncoderLayer(cfg) for _ in range(cfg.enc_layers))
        self.enc_norm = _norm(cfg.model_dim)
        self.decoder_el = Decoder(cfg)
        self.decoder_md = Decoder(cfg)
        self.decoder_mp = Decoder(cfg)
        self.tag_head_src = nn.Linear(cfg.model_dim, 2)
        self.tag_head_tgt = nn.Linear(cfg.model_dim, 2)
        self.mp_head = nn.Linear(cfg.model_dim, 1)
        self.drop = nn.Dropout(cfg.dropout)
        self._init_parameters(gen)

    def _init_parameters(self, gen: torch.Generator):
        for name, p in self.named_parameters():
            if name.startswith("mp_head"):
                nn.init.zeros_(p)  # untrained MP score is exactly sigmoid(0) = 0.5
            elif p.dim() >= 2:
                fan_in = p.shape[1]
                bound = 1.0 / math.sqrt(fan_in)
                with torch.no_grad():
                    p.uniform_(-bound, bound, generator=gen)
            else:
                nn.init.zeros_(p)

    # -- parameter groups (for disjointness checks and ablations) ----------

    def parameter_groups(self) -> dict[str, list[str]]:
        groups = {"shared": [], "el": [], "md": [], "mp": []}
        for name, _ in self.named_parameters():
            if name.startswith("decoder_el"):
                groups["el"].append(name)
            elif name.startswith(("decoder_md", "tag_head_tgt")):
                groups["md"].append(name)
            elif name.startswith(("decoder_mp", "mp_head")):
                groups["mp"].append(name)
            else:
                groups["shared"].append(name)
        return groups

    # -- forward passes ----------------------------------------------------

    def _check_len(self, n: int):
        if n > self.cfg.max_len:
            raise SequenceTooLong(f"sequence length {n} exceeds max_len {self.cfg.max_len}")

    def _embed(self, ids: torch.Tensor) -> torch.Tensor:
        self._check_len(ids.shape[-1])
        scale = math.sqrt(self.cfg.model_dim)
        return self.drop(self.embed(ids) * scale + self.pos[: ids.shape[-1]].to(self.embed.weight.dtype))

    def encode(self, x: torch.Tensor, padding_mask: torch.Tensor | None = None) -> torch.Tensor:
        """Per-position encoder states. x: [B, S] int64; padding_mask:
        [B, S] bool, True at pad positions."""
        h = self._embed(x)
        for layer in self.enc_layers:
            h = layer(h, key_padding_mask=padding_mask)
        return self.enc_norm(h)

    def _decoder(self, which: DecoderId) -> Decoder:
        return {DecoderId.EL: self.decoder_el, DecoderId.MD: self.decoder_md,
                DecoderId.MP: self.decoder_mp}[which]

    def decode(self, which: DecoderId, prefix: torch.Tensor, enc_states: torch.Tensor,
               mem_padding_mask: torch.Tensor | None = None) -> torch.Tensor:
        """Teacher-forced decoder states for a full prefix [B, T]."""
        T = prefix.shape[-1]
        if T < 1:
            raise ValueError("prefix must be non-empty (starts with <bos>)")
        h = self._embed(prefix)
        causal = torch.triu(torch.ones(T, T, dtype=torch.bool, device=prefix.device), diagonal=1)
        return self._decoder(which)(h, enc_states, causal, mem_padding_mask)

    def el_logits(self, states: torch.Tensor) -> torch.Tensor:
        return F.linear(states, self.embed.weight)  # tied vocabulary projection

    def decode_step(self, which: DecoderId, prefix: torch.Tensor, enc_states: torch.Tensor,
                    mem_padding_mask: torch.Tensor | None = None) -> torch.Tensor:
        """Next-position output after ``prefix``.

        EL: probability distribution over the vocabulary; MD: probability
        distribution over (O, E); MP: the raw decoder state.
        """
        states = self.decode(which, prefix, enc_states, mem_padding_mask)[..., -1, :]
        if which is DecoderId.EL:
            return torch.softmax(self.el_logits(states), dim=-1)
        if which is DecoderId.MD:
            return torch.softmax(self.tag_head_tgt(states), dim=-1)
        return states

    def mp_probability(self, pair: torch.Tensor, enc_input: torch.Tensor | None = None,
                       pair_padding_mask: torch.Tensor | None = None,
                       enc_padding_mask: torch.Tensor | None = None) -> torch.Tensor:
        """Match probability in [0, 1] for a paired sequence [B, L].

        ``pair`` is ``<bos> x <sep> y <eos>``; the encoder sees the same
        pair unless a separate ``enc_input`` is given. The final
        non-pad decoder position feeds the scalar head.
        """
        if enc_input is None:
            enc_input = pair
            enc_padding_mask = pair_padding_mask
        enc_states = self.encode(enc_input, enc_padding_mask)
        states = self.decode(DecoderId.MP, pair, enc_states, enc_padding_mask)
        if pair_padding_mask is None:
            last = states[:, -1, :]
        else:
            lengths = (~pair_padding_mask).sum(dim=1) - 1
            last = states[torch.arange(states.shape[0], device=states.device), lengths]
        return torch.sigmoid(self.mp_head(last)).squeeze(-1)

    def num_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())


def make_model(cfg: ModelConfig, wide_precision: bool = False) -> MtlModel:
    """Build and seed a model; wide precision switches to float64 for
    finite-difference gradient checks."""
    model = MtlModel(cfg)
    if wide_precision:
        model = model.double()
    return model


def make_optimizer(model: nn.Module, lr: float = 3e-4, kind: str = "adam") -> torch.optim.Optimizer:
    if kind == "adam":
        return torch.optim.Adam(model.parameters(), lr=lr)
    if kind == "sgd":
        return torch.optim.SGD(model.parameters(), lr=lr, momentum=0.9)
    raise ValueError(f"unknown optimizer kind {kind!r}")


# ---------------------------------------------------------------------------
# checkpointing
# ---------------------------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_checkpoint(model: MtlModel, path, extra: dict | None = None) -> None:
    torch.save(
        {
            "version": CHECKPOINT_VERSION,
            "config": asdict(model.cfg),
            "state_dict": model.state_dict(),
            "extra": extra or {},
        },
        path,
    )


def load_checkpoint(path) -> tuple[MtlModel, dict]:
    blob = torch.load(path, map_location="cpu", weights_only=False)
    if blob.get("version") != CHECKPOINT_VERSION:
        raise ModelError(f"unsupported checkpoint version {blob.get('version')}")
    model = MtlModel(ModelConfig(**blob["config"]))
    model.load_state_dict(blob["state_dict"])
    model.eval()
    return model, blob["extra"]
