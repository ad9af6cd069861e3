"""Encoder-decoder dialog model over mode-specific context assemblies.

A from-scratch pre-norm transformer: residual branches wrap LayerNorm +
sublayer, and there is deliberately no final LayerNorm, so with all
non-embedding weights at zero the encoder output equals the summed input
embeddings exactly. That identity is load-bearing for verification.

Input embedding of a position is the sum of whichever of these apply:
token embedding, projected raw visual vector, absolute position, turn-index
embedding (index > 0 only), and in fv mode an image-index embedding on
object positions.
"""

import math

import torch
import torch.nn as nn
import torch.nn.functional as F

from .assembly import ContextAssembly
from .config import MODE_FV, ModelConfig
from .errors import EmptyTarget, ModeMismatch
from .vocab import BOS, EOS

NEG_INF = float("-inf")


class MultiHeadAttention(nn.Module):
    def __init__(self, d_model: int, heads: int):
        super().__init__()
        self.heads = heads
        self.d_head = d_model // heads
        self.q_proj = nn.Linear(d_model, d_model)
        self.k_proj = nn.Linear(d_model, d_model)
        self.v_proj = nn.Linear(d_model, d_model)
        self.out_proj = nn.Linear(d_model, d_model)

    def forward(self, query, keyvalue, key_valid, causal: bool = False):
        """query [B,Lq,D], keyvalue [B,Lk,D], key_valid bool [B,Lk]."""
        B, Lq, D = query.shape
        Lk = keyvalue.shape[1]
        q = self.q_proj(query).view(B, Lq, self.heads, self.d_head).transpose(1, 2)
        k = self.k_proj(keyvalue).view(B, Lk, self.heads, self.d_head).transpose(1, 2)
        v = self.v_proj(keyvalue).view(B, Lk, self.heads, self.d_head).transpose(1, 2)
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.d_head)
        scores = scores.masked_fill(~key_valid[:, None, None, :], NEG_INF)
        if causal:
            future = torch.triu(
                torch.ones(Lq, Lk, dtype=torch.bool, device=query.device), diagonal=1
            )
            scores = scores.masked_fill(future, NEG_INF)
        attn = torch.softmax(scores, dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(B, Lq, D)
        return self.out_proj(out)


class FeedForward(nn.Module):
    # GELU keeps the loss surface smooth, which the finite-difference
    # gradient verification relies on (ReLU kinks corrupt central diffs).
    def __init__(self, d_model: int, ffn_dim: int):
        super().__init__()
        self.up = nn.Linear(d_model, ffn_dim)
        self.down = nn.Linear(ffn_dim, d_model)

    def forward(self, x):
        return self.down(F.gelu(self.up(x)))


class EncoderLayer(nn.Module):
    def __init__(self, d_model, heads, ffn_dim, dropout):
        super().__init__()
        self.norm1 = nn.LayerNorm(d_model)
        self.attn = MultiHeadAttention(d_model, heads)
        self.norm2 = nn.LayerNorm(d_model)
        self.ffn = FeedForward(d_model, ffn_dim)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x, valid):
        h = self.norm1(x)
        x = x + self.dropout(self.attn(h, h, valid))
        x = x + self.dropout(self.ffn(self.norm2(x)))
        return x


class DecoderLayer(nn.Module):
    def __init__(self, d_model, heads, ffn_dim, dropout):
        super().__init__()
        self.norm1 = nn.LayerNorm(d_model)
        self.self_attn = MultiHeadAttention(d_model, heads)
        self.norm2 = nn.LayerNorm(d_model)
        self.cross_attn = MultiHeadAttention(d_model, heads)
        self.norm3 = nn.LayerNorm(d_model)
        self.ffn = FeedForward(d_model, ffn_dim)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x, tgt_valid, memory, mem_valid):
        h = self.norm1(x)
        x = x + self.dropout(self.self_attn(h, h, tgt_valid, causal=True))
        x = x + self.dropout(self.cross_attn(self.norm2(x), memory, mem_valid))
        x = x + self.dropout(self.ffn(self.norm3(x)))
        return x


class EncoderStack(nn.Module):
    def __init__(self, layers, d_model, heads, ffn_dim, dropout):
        super().__init__()
        self.layers = nn.ModuleList(
            EncoderLayer(d_model, heads, ffn_dim, dropout) for _ in range(layers)
        )

    def forward(self, x, valid):
        for layer in self.layers:
            x = layer(x, valid)
        return x


class DecoderStack(nn.Module):
    def __init__(self, layers, d_model, heads, ffn_dim, dropout):
        super().__init__()
        self.layers = nn.ModuleList(
            DecoderLayer(d_model, heads, ffn_dim, dropout) for _ in range(layers)
        )

    def forward(self, x, tgt_valid, memory, mem_valid):
        for layer in self.layers:
            x = layer(x, tgt_valid, memory, mem_valid)
        return x


def init_parameters(module: nn.Module, seed: int) -> None:
    """Deterministic re-initialization, independent of global RNG state."""
    gen = torch.Generator().manual_seed(seed)
    for m in module.modules():
        if isinstance(m, nn.Linear):
            bound = 1.0 / math.sqrt(m.weight.shape[1])
            with torch.no_grad():
                m.weight.uniform_(-bound, bound, generator=gen)
                if m.bias is not None:
                    m.bias.zero_()
        elif isinstance(m, nn.Embedding):
            # unit-scale embeddings keep LayerNorm away from its tiny-variance
            # regime, where curvature would defeat finite-difference checks
            with torch.no_grad():
                m.weight.normal_(0.0, 1.0, generator=gen)
        elif isinstance(m, nn.LayerNorm):
            with torch.no_grad():
                m.weight.fill_(1.0)
                m.bias.zero_()
    for name, p in module.named_parameters(recurse=False):
        with torch.no_grad():
            p.normal_(0.0, 1.0, generator=gen)


class DialogModel(nn.Module):
    """The forward model p(next turn | context assembly)."""

    def __init__(self, cfg: ModelConfig, seed: int = 0):
        super().__init__()
        self.cfg = cfg
        d = cfg.d_model
        self.tok_emb = nn.Embedding(cfg.vocab_size, d)
        self.src_pos_emb = nn.Embedding(cfg.max_src_len, d)
        self.tgt_pos_emb = nn.Embedding(cfg.max_tgt_len + 1, d)
        self.turn_emb = nn.Embedding(cfg.max_turns + 1, d)
        if cfg.mode == MODE_FV:
            self.img_pos_emb = nn.Embedding(cfg.max_turns + 2, d)
        if cfg.d_visual > 0:
            self.visual_proj = nn.Linear(cfg.d_visual, d, bias=False)
        self.emb_dropout = nn.Dropout(cfg.dropout)
        self.encoder = EncoderStack(cfg.enc_layers, d, cfg.heads, cfg.ffn_dim, cfg.dropout)
        self.decoder = DecoderStack(cfg.dec_layers, d, cfg.heads, cfg.ffn_dim, cfg.dropout)
        self.out_proj = nn.Linear(d, cfg.vocab_size)
        init_parameters(self, seed)

    # --- encoder ---------------------------------------------------------

    def _embed_positions(self, batch: "AssemblyBatch") -> torch.Tensor:
        dtype = self.tok_emb.weight.dtype
        B, L = batch.ids.shape
        x = torch.zeros(B, L, self.cfg.d_model, dtype=dtype)
        x = x + self.tok_emb(batch.ids) * batch.has_token[..., None].to(dtype)
        if batch.visual is not None:
            projected = self.visual_proj(batch.visual.to(dtype))
            x = x + projected * batch.has_visual[..., None].to(dtype)
        x = x + self.src_pos_emb(torch.arange(L))[None, :, :]
        x = x + self.turn_emb(batch.turn_index) * (batch.turn_index > 0)[..., None].to(dtype)
        if self.cfg.mode == MODE_FV:
            x = x + self.img_pos_emb(batch.image_index) * (batch.image_index > 0)[..., None].to(
                dtype
            )
        return self.emb_dropout(x)

    def encode_batch(self, batch: "AssemblyBatch") -> torch.Tensor:
        if batch.mode != self.cfg.mode:
            raise ModeMismatch(f"assembly mode {batch.mode!r} != model mode {self.cfg.mode!r}")
        x = self._embed_positions(batch)
        return self.encoder(x, batch.valid)

    def encode(self, assembly: ContextAssembly) -> torch.Tensor:
        """Encoder output rows for one assembly: [len(assembly), d_model]."""
        return self.encode_batch(AssemblyBatch([assembly]))[0]

    # --- decoder / loss ---------------------------------------------------

    def decoder_logits(self, memory, mem_valid, dec_ids, dec_valid=None) -> torch.Tensor:
        """Teacher-forced logits: dec_ids [B,T] -> [B,T,vocab]."""
        B, T = dec_ids.shape
        if dec_valid is None:
            dec_valid = torch.ones(B, T, dtype=torch.bool)
        dtype = self.tok_emb.weight.dtype
        x = self.tok_emb(dec_ids) + self.tgt_pos_emb(torch.arange(T))[None, :, :].to(dtype)
        x = self.emb_dropout(x)
        h = self.decoder(x, dec_valid, memory, mem_valid)
        return self.out_proj(h)

    def nll_batch(self, assemblies: list[ContextAssembly], targets: list[list[int]]):
        """Per-example mean per-token negative log-likelihood, shape [B].

        The decoder is teacher-forced on [BOS] + target and scored against
        target + [EOS]; the mean runs over the len(target)+1 positions.
        """
        for t in targets:
            if len(t) == 0:
                raise EmptyTarget("cannot score an empty target")
            if len(t) > self.cfg.max_tgt_len:
                raise ValueError(
                    f"target length {len(t)} exceeds max_tgt_len {self.cfg.max_tgt_len}"
                )
        batch = AssemblyBatch(assemblies)
        memory = self.encode_batch(batch)

        B = len(targets)
        T = max(len(t) for t in targets) + 1
        dec_in = torch.zeros(B, T, dtype=torch.long)
        gold = torch.zeros(B, T, dtype=torch.long)
        score_mask = torch.zeros(B, T, dtype=torch.bool)
        for i, t in enumerate(targets):
            dec_in[i, 0] = BOS
            dec_in[i, 1 : len(t) + 1] = torch.tensor(t, dtype=torch.long)
            gold[i, : len(t)] = torch.tensor(t, dtype=torch.long)
            gold[i, len(t)] = EOS
            score_mask[i, : len(t) + 1] = True

        logits = self.decoder_logits(memory, batch.valid, dec_in, score_mask)
        logprobs = F.log_softmax(logits, dim=-1)
        tok_lp = logprobs.gather(-1, gold[..., None])[..., 0]
        tok_lp = tok_lp.masked_fill(~score_mask, 0.0)
        return -(tok_lp.sum(dim=1) / score_mask.sum(dim=1))

    def sequence_nll(self, assembly: ContextAssembly, target_ids) -> torch.Tensor:
        """Mean per-token NLL (natural log) of one (context, target) pair."""
        return self.nll_batch([assembly], [list(target_ids)])[0]

    def step_logprobs(self, memory, mem_valid, prefixes: list[list[int]]) -> torch.Tensor:
        """Log-probabilities for the next token of each prefix: [B, vocab].

        ``memory``/``mem_valid`` must be pre-expanded to len(prefixes) rows.
        """
        B = len(prefixes)
        T = max(len(p) for p in prefixes) + 1
        dec_in = torch.zeros(B, T, dtype=torch.long)
        dec_valid = torch.zeros(B, T, dtype=torch.bool)
        last = []
        for i, p in enumerate(prefixes):
            dec_in[i, 0] = BOS
            dec_in[i, 1 : len(p) + 1] = torch.tensor(p, dtype=torch.long)
            dec_valid[i, : len(p) + 1] = True
            last.append(len(p))
        logits = self.decoder_logits(memory, mem_valid, dec_in, dec_valid)
        rows = logits[torch.arange(B), torch.tensor(last)]
        return F.log_softmax(rows, dim=-1)


class AssemblyBatch:
    """Same-mode assemblies padded to a common length."""

    def __init__(self, assemblies: list[ContextAssembly]):
        if not assemblies:
            raise ValueError("empty assembly batch")
        modes = {a.mode for a in assemblies}
        if len(modes) != 1:
            raise ModeMismatch(f"mixed assembly modes in one batch: {sorted(modes)}")
        self.mode = assemblies[0].mode
        B = len(assemblies)
        L = max(len(a) for a in assemblies)
        self.ids = torch.zeros(B, L, dtype=torch.long)
        self.has_token = torch.zeros(B, L, dtype=torch.bool)
        self.turn_index = torch.zeros(B, L, dtype=torch.long)
        self.image_index = torch.zeros(B, L, dtype=torch.long)
        self.valid = torch.zeros(B, L, dtype=torch.bool)
        self.visual = None
        if assemblies[0].visual is not None:
            d_visual = assemblies[0].visual.shape[1]
            self.visual = torch.zeros(B, L, d_visual)
        self.has_visual = torch.zeros(B, L, dtype=torch.bool)
        for i, a in enumerate(assemblies):
            n = len(a)
            self.ids[i, :n] = a.ids
            self.has_token[i, :n] = a.has_token
            self.turn_index[i, :n] = a.turn_index
            self.image_index[i, :n] = a.image_index
            self.valid[i, :n] = True
            if self.visual is not None:
                self.visual[i, :n] = a.visual
                self.has_visual[i, :n] = a.has_visual
