"""Convolution + bidirectional LSTM classifiers over per-domain count
matrices (rows follow the residue order, columns are orbit features).

Exactly four variants exist: (2 CNN, 3 LSTM), (3 CNN, 3 LSTM),
(3 CNN, 1 LSTM) under the rectifier, and (3 CNN, 1 LSTM) under the leaky
rectifier. Kernels span 5 consecutive rows across all feature columns with
stride 1 and same-length padding; layer widths are 56, 96 and (when
stacked three deep) 128, each followed by the activation and dropout 0.3.
The recurrent stack is bidirectional with hidden size 64 per direction,
forget-gate bias 1, dropout 0.3 between stacked layers, and the final
forward/backward states concatenate into a 128-vector feeding a linear
head with one output per class.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

KERNEL_ROWS = 5
DROPOUT = 0.3
CNN_CHANNELS = (56, 96, 128)
LSTM_HIDDEN = 64
LEAKY_SLOPE = 0.01


@dataclass(frozen=True)
class VariantSpec:
    cnn_layers: int
    lstm_layers: int
    activation: str  # "relu" | "leaky_relu"

    @property
    def name(self) -> str:
        suffix = "-leaky" if self.activation == "leaky_relu" else ""
        return f"cnn{self.cnn_layers}-lstm{self.lstm_layers}{suffix}"


VARIANTS = {
    "cnn2-lstm3": VariantSpec(2, 3, "relu"),
    "cnn3-lstm3": VariantSpec(3, 3, "relu"),
    "cnn3-lstm1": VariantSpec(3, 1, "relu"),
    "cnn3-lstm1-leaky": VariantSpec(3, 1, "leaky_relu"),
}


def _init_forget_gate_bias(lstm: nn.LSTM) -> None:
    """Zero all LSTM biases, then set the forget-gate block of bias_ih to 1."""
    h = lstm.hidden_size
    for name, param in lstm.named_parameters():
        if "bias" in name:
            with torch.no_grad():
                param.zero_()
                if name.startswith("bias_ih"):
                    param[h:2 * h].fill_(1.0)


class RegularVariant(nn.Module):
    def __init__(self, spec: VariantSpec, n_features: int, classes: int):
        super().__init__()
        if spec not in VARIANTS.values():
            raise ValueError(f"unsupported variant {spec}")
        self.spec = spec
        act = nn.ReLU() if spec.activation == "relu" else nn.LeakyReLU(LEAKY_SLOPE)
        convs = []
        in_ch = n_features
        for out_ch in CNN_CHANNELS[:spec.cnn_layers]:
            convs += [nn.Conv1d(in_ch, out_ch, KERNEL_ROWS, stride=1, padding="same"),
                      act, nn.Dropout(DROPOUT)]
            in_ch = out_ch
        self.cnn = nn.Sequential(*convs)
        self.lstm = nn.LSTM(input_size=in_ch, hidden_size=LSTM_HIDDEN,
                            num_layers=spec.lstm_layers, bidirectional=True,
                            dropout=DROPOUT if spec.lstm_layers > 1 else 0.0,
                            batch_first=True)
        _init_forget_gate_bias(self.lstm)
        self.head = nn.Linear(2 * LSTM_HIDDEN, classes)

    def cnn_features(self, x: torch.Tensor) -> torch.Tensor:
        """(n, f) -> (n, channels) feature matrix after the convolution stack."""
        return self.cnn(x.T.unsqueeze(0)).squeeze(0).T

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(n, f) count matrix -> (classes,) logits."""
        feats = self.cnn_features(x).unsqueeze(0)          # (1, n, channels)
        _, (h_n, _) = self.lstm(feats)
        final = torch.cat([h_n[-2], h_n[-1]], dim=1)       # (1, 128)
        return self.head(final).squeeze(0)

    @torch.no_grad()
    def predict_proba(self, x: torch.Tensor) -> torch.Tensor:
        return torch.softmax(self.forward(x), dim=0)


def build_variant(name_or_spec, n_features: int, classes: int) -> RegularVariant:
    spec = VARIANTS[name_or_spec] if isinstance(name_or_spec, str) else name_or_spec
    return RegularVariant(spec, n_features, classes)
