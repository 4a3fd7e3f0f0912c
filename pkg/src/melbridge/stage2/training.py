"""Data preparation and the training loop for the conditioned U-Net."""

from __future__ import annotations

import copy
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import torch

from ..config import (BUILTIN_CONFIGS, NORMALIZING_BASE, MelConfig, encode_config_features,
                      parse_config, sample_random_config, serialize_config)
from ..dsp import MelSpectrogram, extract_mel, resample
from ..normalizer import to_base
from ..stage1 import DEFAULT_GL_ITERS, mel_to_waveform
from .network import ConditionedUNet, l1_loss

logger = logging.getLogger(__name__)

TEST_CONFIGS = frozenset(BUILTIN_CONFIGS.values())


class TrainingDivergence(RuntimeError):
    pass


@dataclass
class TrainingConfig:
    epochs: int = 100
    batch_size: int = 32
    segment_frames: int = 200
    learning_rate: float = 1e-3
    halving_epochs: int = 50
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.01
    seed: int = 0
    validation_fraction: float = 0.1
    configs_per_epoch: int = 100
    n_levels: int = 4
    base_channels: int = 32

    def __post_init__(self):
        for name in ("epochs", "batch_size", "segment_frames", "learning_rate", "halving_epochs",
                     "configs_per_epoch", "n_levels", "base_channels"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in (0, 1)")


def lr_schedule(epoch: int, initial: float = 1e-3, halving_epochs: int = 50) -> float:
    """Step decay: halve the rate every ``halving_epochs`` (epochs count from 0)."""
    return initial * 0.5 ** (epoch // halving_epochs)


def make_optimizer(model: torch.nn.Module, tcfg: TrainingConfig) -> torch.optim.AdamW:
    return torch.optim.AdamW(model.parameters(), lr=tcfg.learning_rate, betas=tcfg.betas,
                             eps=tcfg.eps, weight_decay=tcfg.weight_decay)


def adamw_step(optimizer: torch.optim.Optimizer, lr: float) -> bool:
    """One AdamW update at learning rate ``lr``. Non-finite gradients skip the step
    (gradients are cleared) and return False."""
    params = [p for g in optimizer.param_groups for p in g["params"] if p.grad is not None]
    if not all(torch.isfinite(p.grad).all() for p in params):
        logger.warning("non-finite gradient; optimizer step skipped")
        optimizer.zero_grad(set_to_none=True)
        return False
    for group in optimizer.param_groups:
        group["lr"] = lr
    optimizer.step()
    return True


# ---------------------------------------------------------------------------
# Preparation: fixed source config per subset, Stage-1 intermediates.

@dataclass
class PreparedUtterance:
    name: str
    subset: int
    original: np.ndarray
    intermediate: np.ndarray


@dataclass
class PreparedSet:
    sample_rate: int
    subset_configs: list[MelConfig]
    utterances: list[PreparedUtterance] = field(default_factory=list)

    def manifest(self) -> dict:
        return {
            "sample_rate": self.sample_rate,
            "subsets": [{"id": i, "config": serialize_config(c)}
                        for i, c in enumerate(self.subset_configs)],
            "utterances": [{"index": i, "name": u.name, "subset": u.subset}
                           for i, u in enumerate(self.utterances)],
        }

    def save(self, directory) -> None:
        directory = Path(directory)
        (directory / "audio").mkdir(parents=True, exist_ok=True)
        for i, u in enumerate(self.utterances):
            np.save(directory / "audio" / f"{i:05d}_original.npy", u.original.astype(np.float32))
            np.save(directory / "audio" / f"{i:05d}_intermediate.npy",
                    u.intermediate.astype(np.float32))
        (directory / "manifest.json").write_text(json.dumps(self.manifest(), indent=1) + "\n")

    @classmethod
    def load(cls, directory) -> "PreparedSet":
        directory = Path(directory)
        manifest = json.loads((directory / "manifest.json").read_text())
        configs = [parse_config(s["config"]) for s in manifest["subsets"]]
        prepared = cls(manifest["sample_rate"], configs)
        for entry in manifest["utterances"]:
            i = entry["index"]
            prepared.utterances.append(PreparedUtterance(
                entry["name"], entry["subset"],
                np.load(directory / "audio" / f"{i:05d}_original.npy").astype(np.float64),
                np.load(directory / "audio" / f"{i:05d}_intermediate.npy").astype(np.float64)))
        return prepared


def stage1_intermediate(x: np.ndarray, cfg_src: MelConfig, sample_rate: int,
                        n_iter: int = DEFAULT_GL_ITERS) -> np.ndarray:
    """What Stage 1 reconstructs from ``x`` seen through ``cfg_src``."""
    y = mel_to_waveform(extract_mel(x, cfg_src, sample_rate), n_iter)
    return resample(y, cfg_src.sample_rate, sample_rate)


def prepare_training_set(waveforms: Sequence[np.ndarray], sample_rate: int, n_subsets: int = 100,
                         rng: np.random.Generator | int = 0, names: Sequence[str] | None = None,
                         exclude=TEST_CONFIGS, n_iter: int = DEFAULT_GL_ITERS) -> PreparedSet:
    if len(waveforms) == 0:
        raise ValueError("empty corpus")
    rng = np.random.default_rng(rng)
    names = list(names) if names is not None else [f"utt{i:05d}" for i in range(len(waveforms))]
    n_subsets = min(n_subsets, len(waveforms))
    groups = np.array_split(rng.permutation(len(waveforms)), n_subsets)
    subset_of = np.empty(len(waveforms), dtype=int)
    for k, idx in enumerate(groups):
        subset_of[idx] = k
    configs = [sample_random_config(rng, exclude, sample_rate=sample_rate) for _ in range(n_subsets)]
    prepared = PreparedSet(sample_rate, configs)
    for i, x in enumerate(waveforms):
        x = np.asarray(x, dtype=np.float64)
        k = int(subset_of[i])
        inter = stage1_intermediate(x, configs[k], sample_rate, n_iter)
        prepared.utterances.append(PreparedUtterance(names[i], k, x, inter))
    return prepared


# ---------------------------------------------------------------------------
# Examples and batches. Everything the network sees is in the normalizing base.

@dataclass
class Example:
    approx: np.ndarray   # Mel_tgt' in base space, (frames, n_mels)
    target: np.ndarray   # ground truth in base space
    cond: np.ndarray     # (8,)


def _base_values(m: MelSpectrogram) -> np.ndarray:
    b = to_base(m)
    assert b.config.normalizable == NORMALIZING_BASE
    return b.values


def make_example(utt: PreparedUtterance, cfg_tgt: MelConfig, sample_rate: int) -> Example:
    approx = _base_values(extract_mel(utt.intermediate, cfg_tgt, sample_rate))
    target = _base_values(extract_mel(utt.original, cfg_tgt, sample_rate))
    n = min(len(approx), len(target))
    return Example(approx[:n], target[:n], encode_config_features(cfg_tgt))


def _fit_length(a: np.ndarray, start: int, length: int) -> np.ndarray:
    seg = a[start:start + length]
    if len(seg) < length:
        seg = np.concatenate([seg, np.repeat(seg[-1:], length - len(seg), axis=0)])
    return seg


def collate(examples: Sequence[Example], length: int, rng: np.random.Generator | None):
    """Crop (random start when ``rng`` is given) or edge-pad to ``length`` frames.
    Padded frames are masked out of the loss."""
    xs, ys, cs, ms = [], [], [], []
    for ex in examples:
        n = len(ex.approx)
        start = int(rng.integers(0, n - length + 1)) if (rng is not None and n > length) else 0
        xs.append(_fit_length(ex.approx, start, length))
        ys.append(_fit_length(ex.target, start, length))
        mask = np.zeros((length, 1))
        mask[:min(length, n - start)] = 1.0
        ms.append(mask)
        cs.append(ex.cond)
    as_t = lambda v: torch.as_tensor(np.stack(v), dtype=torch.float32)
    return as_t(xs), as_t(ys), as_t(cs), as_t(ms)


# ---------------------------------------------------------------------------

@dataclass
class TrainingResult:
    model: ConditionedUNet
    log: list[dict]
    best_epoch: int


def write_training_log(path, records: Sequence[dict]) -> None:
    with open(path, "w") as f:
        for r in records:
            f.write(json.dumps(r, sort_keys=True) + "\n")


def evaluate(model: ConditionedUNet, examples: Sequence[Example], batch_size: int = 32) -> float:
    """Masked L1 over whole utterances, averaged over all valid entries."""
    model.eval()
    total, count = 0.0, 0.0
    with torch.no_grad():
        for i in range(0, len(examples), batch_size):
            chunk = examples[i:i + batch_size]
            length = max(len(e.approx) for e in chunk)
            x, y, c, m = collate(chunk, length, None)
            diff = (model(x, c) - y).abs() * m
            total += float(diff.sum())
            count += float(m.sum()) * y.shape[2]
    return total / max(count, 1.0)


def train(prepared: PreparedSet, tcfg: TrainingConfig,
          callback: Optional[Callable[[dict], None]] = None) -> TrainingResult:
    if not prepared.utterances:
        raise ValueError("prepared set is empty")
    seeds = np.random.SeedSequence(tcfg.seed).spawn(4)
    split_rng, cfg_rng, crop_rng, order_rng = (np.random.default_rng(s) for s in seeds)
    torch.manual_seed(tcfg.seed)
    sr = prepared.sample_rate

    n = len(prepared.utterances)
    perm = split_rng.permutation(n)
    n_val = max(1, int(round(tcfg.validation_fraction * n))) if n > 1 else 0
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    if len(train_idx) == 0:
        raise ValueError("no training utterances left after the validation split")
    val_examples = [make_example(prepared.utterances[i],
                                 sample_random_config(split_rng, TEST_CONFIGS, sample_rate=sr), sr)
                    for i in val_idx]

    n_mels = prepared.subset_configs[0].n_mels
    model = ConditionedUNet(tcfg.n_levels, tcfg.base_channels, n_mels)
    optimizer = make_optimizer(model, tcfg)
    log: list[dict] = []
    best_state, best_val, best_epoch = copy.deepcopy(model.state_dict()), math.inf, -1
    for epoch in range(tcfg.epochs):
        lr = lr_schedule(epoch, tcfg.learning_rate, tcfg.halving_epochs)
        pool = [sample_random_config(cfg_rng, TEST_CONFIGS, sample_rate=sr)
                for _ in range(tcfg.configs_per_epoch)]
        order = order_rng.permutation(train_idx)
        choice = cfg_rng.integers(0, len(pool), size=len(order))
        model.train()
        losses = []
        for b in range(0, len(order), tcfg.batch_size):
            batch = [make_example(prepared.utterances[i], pool[choice[b + j]], sr)
                     for j, i in enumerate(order[b:b + tcfg.batch_size])]
            x, y, c, m = collate(batch, tcfg.segment_frames, crop_rng)
            if x.shape[0] < 2:
                continue  # batch norm needs more than one sample
            optimizer.zero_grad(set_to_none=True)
            loss = l1_loss(model(x, c), y, m)
            if not torch.isfinite(loss):
                raise TrainingDivergence(f"non-finite loss at epoch {epoch}, batch {b // tcfg.batch_size}")
            loss.backward()
            if adamw_step(optimizer, lr):
                losses.append(loss.item())
        val = evaluate(model, val_examples) if val_examples else float("nan")
        record = {"epoch": epoch, "train_loss": float(np.mean(losses)) if losses else float("nan"),
                  "val_loss": val, "lr": lr}
        log.append(record)
        logger.info("epoch %d train %.4f val %.4f lr %.2e", epoch, record["train_loss"], val, lr)
        if callback is not None:
            callback(record)
        if val_examples and val < best_val:
            best_val, best_epoch = val, epoch
            best_state = copy.deepcopy(model.state_dict())
    if best_epoch >= 0:
        model.load_state_dict(best_state)
    else:
        best_epoch = tcfg.epochs - 1
    model.eval()
    return TrainingResult(model, log, best_epoch)
