"""Graph convolution classifiers over padded, masked network snapshots.

The temporal model runs four stages: (i) two graph-convolution layers of
width 64 with symmetric degree normalization of A + I, layer norm,
rectifier and dropout 0.3; (ii) attention pooling whose two-layer scorer
(64 -> 64 tanh -> 1, 4225 parameters) softmax-weights unmasked nodes into a
64-dim snapshot embedding; (iii) a single bidirectional LSTM (hidden 64 per
direction) over the snapshot sequence, reading the last valid timestep from
both directions into a 128-vector; (iv) a 128 -> 32 -> classes head. The
static model reads only the final snapshot, pools by masked mean, routes
through a learned 64 -> 128 adapter, and shares the head; no temporal
stage.

Padded nodes carry zero adjacency, zero features and mask 0, and every
stage multiplies by the mask so they never influence the output. Node
features are either the count-matrix rows (graphlet initialization) or
zero-centered random draws scaled by sqrt(2 / fan_in) (default
initialization).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

HIDDEN = 64
DROPOUT = 0.3
HEAD_HIDDEN = 32
LSTM_HIDDEN = 64


@dataclass
class PaddedSnapshots:
    """T adjacency matrices padded to p x p with per-snapshot node masks."""
    adjacency: torch.Tensor     # (T, p, p) float32
    features: torch.Tensor      # (p, f) float32, zero on padded rows
    node_mask: torch.Tensor     # (T, p) float32, 1 for real nodes
    snapshot_mask: torch.Tensor  # (T,) float32, 1 for real snapshots

    def validate(self) -> None:
        bad = (1.0 - self.node_mask).unsqueeze(2) * self.adjacency
        if float(bad.abs().max()) != 0.0:
            raise ValueError("padded nodes must have zero adjacency rows")
        final_mask = self.node_mask[-1]
        if float((self.features * (1.0 - final_mask).unsqueeze(1)).abs().max()) != 0.0:
            raise ValueError("padded nodes must have zero features")


def pad_snapshots(adjacencies: list[np.ndarray], features: np.ndarray,
                  p: int | None = None) -> PaddedSnapshots:
    """Pad variable-size snapshot adjacencies and node features to p nodes."""
    sizes = [a.shape[0] for a in adjacencies]
    p = p or max(sizes)
    if p < max(sizes) or features.shape[0] > p:
        raise ValueError("padded size smaller than a snapshot")
    T = len(adjacencies)
    A = torch.zeros((T, p, p), dtype=torch.float32)
    mask = torch.zeros((T, p), dtype=torch.float32)
    for s, a in enumerate(adjacencies):
        k = a.shape[0]
        A[s, :k, :k] = torch.from_numpy(np.asarray(a, dtype=np.float32))
        mask[s, :k] = 1.0
    F = torch.zeros((p, features.shape[1]), dtype=torch.float32)
    F[:features.shape[0]] = torch.from_numpy(np.asarray(features, dtype=np.float32))
    return PaddedSnapshots(adjacency=A, features=F, node_mask=mask,
                           snapshot_mask=torch.ones(T, dtype=torch.float32))


def default_features(n: int, dim: int, seed: int) -> np.ndarray:
    """Zero-centered random node features scaled by sqrt(2 / fan_in)."""
    rng = np.random.default_rng(seed)
    return (rng.standard_normal((n, dim)) * np.sqrt(2.0 / dim)).astype(np.float32)


def normalize_adjacency(A: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Symmetric degree normalization of A + I on unmasked nodes only;
    padded rows and columns stay zero."""
    A_hat = A + torch.diag_embed(mask)
    deg = A_hat.sum(dim=-1)
    inv_sqrt = torch.where(deg > 0, deg.pow(-0.5), torch.zeros_like(deg))
    return A_hat * inv_sqrt.unsqueeze(-1) * inv_sqrt.unsqueeze(-2)


class GCNStage(nn.Module):
    """Two graph-convolution layers (input -> 64 -> 64) with layer norm,
    rectifier and dropout after each; masked throughout."""

    def __init__(self, in_dim: int):
        super().__init__()
        self.lin1 = nn.Linear(in_dim, HIDDEN)
        self.lin2 = nn.Linear(HIDDEN, HIDDEN)
        self.norm1 = nn.LayerNorm(HIDDEN)
        self.norm2 = nn.LayerNorm(HIDDEN)
        self.drop = nn.Dropout(DROPOUT)

    def forward(self, A: torch.Tensor, H: torch.Tensor,
                mask: torch.Tensor) -> torch.Tensor:
        A_hat = normalize_adjacency(A, mask)
        m = mask.unsqueeze(-1)
        H = self.drop(torch.relu(self.norm1(A_hat @ self.lin1(H)))) * m
        H = self.drop(torch.relu(self.norm2(A_hat @ self.lin2(H)))) * m
        return H


class AttentionPooling(nn.Module):
    """Softmax-weighted sum over unmasked node embeddings."""

    def __init__(self):
        super().__init__()
        self.score = nn.Sequential(nn.Linear(HIDDEN, HIDDEN), nn.Tanh(),
                                   nn.Linear(HIDDEN, 1))

    def weights(self, H: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        e = self.score(H).squeeze(-1)
        e = e.masked_fill(mask == 0, float("-inf"))
        return torch.softmax(e, dim=-1)

    def forward(self, H: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        return (self.weights(H, mask).unsqueeze(-1) * H).sum(dim=-2)


class ClassifierHead(nn.Module):
    def __init__(self, classes: int):
        super().__init__()
        self.net = nn.Sequential(nn.Linear(2 * LSTM_HIDDEN, HEAD_HIDDEN), nn.ReLU(),
                                 nn.Dropout(DROPOUT), nn.Linear(HEAD_HIDDEN, classes))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


class TemporalGraphClassifier(nn.Module):
    """Spatial convolution, attention pooling, temporal recurrence, head."""

    def __init__(self, in_dim: int, classes: int):
        super().__init__()
        self.gcn = GCNStage(in_dim)
        self.pool = AttentionPooling()
        self.lstm = nn.LSTM(input_size=HIDDEN, hidden_size=LSTM_HIDDEN,
                            num_layers=1, bidirectional=True)
        self.head = ClassifierHead(classes)

    def forward(self, batch: PaddedSnapshots) -> torch.Tensor:
        T = batch.adjacency.shape[0]
        H = batch.features.unsqueeze(0).expand(T, -1, -1)
        H = self.gcn(batch.adjacency, H, batch.node_mask)
        g = self.pool(H, batch.node_mask)                   # (T, 64)
        out, _ = self.lstm(g.unsqueeze(1))                  # (T, 1, 128)
        last = int(batch.snapshot_mask.nonzero().max())
        fwd = out[last, 0, :LSTM_HIDDEN]
        bwd = out[0, 0, LSTM_HIDDEN:]
        return self.head(torch.cat([fwd, bwd]))

    @torch.no_grad()
    def predict_proba(self, batch: PaddedSnapshots) -> torch.Tensor:
        return torch.softmax(self.forward(batch), dim=0)


class StaticGraphClassifier(nn.Module):
    """Final snapshot only: convolution, masked-mean pooling, a learned
    64 -> 128 adapter, and the shared head; no temporal stage."""

    def __init__(self, in_dim: int, classes: int):
        super().__init__()
        self.gcn = GCNStage(in_dim)
        self.adapter = nn.Linear(HIDDEN, 2 * LSTM_HIDDEN)
        self.head = ClassifierHead(classes)

    def forward(self, batch: PaddedSnapshots) -> torch.Tensor:
        A = batch.adjacency[-1].unsqueeze(0)
        mask = batch.node_mask[-1].unsqueeze(0)
        H = self.gcn(A, batch.features.unsqueeze(0), mask)
        denom = mask.sum(dim=-1, keepdim=True).clamp(min=1.0)
        pooled = (H * mask.unsqueeze(-1)).sum(dim=-2) / denom
        return self.head(self.adapter(pooled)).squeeze(0)

    @torch.no_grad()
    def predict_proba(self, batch: PaddedSnapshots) -> torch.Tensor:
        return torch.softmax(self.forward(batch), dim=0)


def build_dgcn(feature_init: str, in_dim: int, classes: int) -> TemporalGraphClassifier:
    if feature_init not in ("default", "graphlets"):
        raise ValueError(f"unknown feature initialization {feature_init!r}")
    return TemporalGraphClassifier(in_dim, classes)


def build_sgcn(in_dim: int, classes: int) -> StaticGraphClassifier:
    return StaticGraphClassifier(in_dim, classes)
