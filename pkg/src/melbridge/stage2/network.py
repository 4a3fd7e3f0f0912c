"""Config-conditioned U-Net operating on mel-spectrograms in the normalizing base."""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

COND_DIM = 8


class AdaptiveLinear(nn.Module):
    """Channel-mixing linear layer whose weight and bias are generated from the
    conditioning vector, followed by a PReLU.

    ``W = Hw C + cw`` (a ``channels x channels`` matrix per sample),
    ``b = Hb C + cb``, ``out = PReLU(W x + b)`` with ``W`` applied at every
    time-frequency position. Constant terms start at the identity, so a fresh
    layer is ``PReLU(x)``.
    """

    def __init__(self, channels: int, cond_dim: int = COND_DIM, hyper_init_std: float = 1e-3):
        super().__init__()
        self.channels = channels
        self.weight_gen = nn.Linear(cond_dim, channels * channels)
        self.bias_gen = nn.Linear(cond_dim, channels)
        self.prelu = nn.PReLU(num_parameters=1, init=0.25)
        with torch.no_grad():
            nn.init.normal_(self.weight_gen.weight, std=hyper_init_std)
            nn.init.normal_(self.bias_gen.weight, std=hyper_init_std)
            self.weight_gen.bias.copy_(torch.eye(channels).flatten())
            self.bias_gen.bias.zero_()

    def film_params(self, cond: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        w = self.weight_gen(cond).view(-1, self.channels, self.channels)
        return w, self.bias_gen(cond)

    def forward(self, x: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        if x.shape[1] != self.channels:
            raise ValueError(f"expected {self.channels} channels, got {x.shape[1]}")
        w, b = self.film_params(cond)
        y = torch.einsum("boc,bchw->bohw", w, x) + b[:, :, None, None]
        return self.prelu(y)


def film_apply(x: torch.Tensor, cond: torch.Tensor, layer: AdaptiveLinear) -> torch.Tensor:
    return layer(x, cond)


class AdaptiveConvBlock(nn.Module):
    """conv 3x3 -> batch norm -> adaptive linear (with its PReLU)."""

    def __init__(self, in_channels: int, out_channels: int, cond_dim: int = COND_DIM):
        super().__init__()
        self.conv = nn.Conv2d(in_channels, out_channels, 3, padding=1)
        self.norm = nn.BatchNorm2d(out_channels)
        self.film = AdaptiveLinear(out_channels, cond_dim)

    def forward(self, x, cond):
        return self.film(self.norm(self.conv(x)), cond)


def channel_plan(n_levels: int, base_channels: int) -> list[int]:
    return [base_channels * 2 ** i for i in range(n_levels)]


class ConditionedUNet(nn.Module):
    """U-Net with adaptive conv blocks, additive skips and a global residual.

    Input and output are ``(batch, frames, n_mels)`` tensors; the network predicts
    a correction that is added to its input. Frames (and mels, if needed) are
    edge-padded to a multiple of ``2 ** n_levels`` and cropped back.
    """

    def __init__(self, n_levels: int = 4, base_channels: int = 32, n_mels: int = 80,
                 cond_dim: int = COND_DIM):
        super().__init__()
        self.n_levels = n_levels
        self.base_channels = base_channels
        self.n_mels = n_mels
        self.cond_dim = cond_dim
        plan = channel_plan(n_levels, base_channels)
        self.in_proj = nn.Conv2d(1, base_channels, 3, padding=1)
        ins = [base_channels] + plan[:-1]
        self.encoder = nn.ModuleList(AdaptiveConvBlock(i, o, cond_dim) for i, o in zip(ins, plan))
        ups_in = plan[1:] + plan[-1:]  # decoder level i+1 feeds upsample i
        self.upsample = nn.ModuleList(nn.ConvTranspose2d(i, o, 2, stride=2)
                                      for i, o in zip(ups_in, plan))
        self.decoder = nn.ModuleList(AdaptiveConvBlock(c, c, cond_dim) for c in plan)
        self.out_proj = nn.Conv2d(base_channels, 1, 3, padding=1)

    @property
    def multiple(self) -> int:
        return 2 ** self.n_levels

    def zero_output_projection(self) -> None:
        with torch.no_grad():
            self.out_proj.weight.zero_()
            self.out_proj.bias.zero_()

    def _pad(self, x):
        m = self.multiple
        pad_t = (-x.shape[1]) % m
        pad_f = (-x.shape[2]) % m
        if pad_t or pad_f:
            x = F.pad(x[:, None], (0, pad_f, 0, pad_t), mode="replicate")[:, 0]
        return x

    def forward(self, mel: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        frames, mels = mel.shape[1], mel.shape[2]
        x = self._pad(mel)[:, None]
        h = self.in_proj(x)
        skips = []
        for block in self.encoder:
            h = block(h, cond)
            skips.append(h)
            h = F.max_pool2d(h, 2)
        for i in reversed(range(self.n_levels)):
            h = self.upsample[i](h) + skips[i]
            h = self.decoder[i](h, cond)
        out = x + self.out_proj(h)
        return out[:, 0, :frames, :mels]


def l1_loss(pred: torch.Tensor, target: torch.Tensor, mask: torch.Tensor | None = None) -> torch.Tensor:
    """Mean absolute error; with ``mask``, the mean over masked-in entries."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {tuple(pred.shape)} vs {tuple(target.shape)}")
    diff = (pred - target).abs()
    if mask is None:
        return diff.mean()
    mask = mask.to(diff.dtype).expand_as(diff)
    return (diff * mask).sum() / mask.sum().clamp_min(1.0)


def unet_forward(model: ConditionedUNet, mel_base: np.ndarray, cond: np.ndarray,
                 train: bool = False) -> np.ndarray:
    """Run one base-space mel ``(frames, n_mels)`` through the network.

    The network's correction ``y - x`` is added to the float64 input, so an
    identity network returns ``mel_base`` unchanged rather than rounded to the
    model's precision.
    """
    model.train(train)
    dtype = next(model.parameters()).dtype
    mel_base = np.asarray(mel_base, dtype=np.float64)
    with torch.set_grad_enabled(train):
        x = torch.as_tensor(mel_base, dtype=dtype)[None]
        c = torch.as_tensor(np.asarray(cond), dtype=dtype)[None]
        correction = (model(x, c) - x)[0]
    return mel_base + correction.detach().cpu().numpy().astype(np.float64)
