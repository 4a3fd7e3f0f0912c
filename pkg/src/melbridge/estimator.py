"""scikit-learn style front ends.

``MelExtractor`` turns waveforms into mel-spectrograms for one configuration.
``UniversalAdaptor`` learns (``fit`` on a waveform corpus) and applies
(``transform`` on mel-spectrograms carrying their source config) the two-stage
conversion into ``target_config``.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_config, check_mels, check_waveforms
from .config import encode_config_features
from .dsp import MelSpectrogram, extract_mel
from .normalizer import from_base, to_base
from .stage1 import DEFAULT_GL_ITERS, approximate_convert
from .stage2 import (TrainingConfig, load_weights, prepare_training_set, save_weights, train,
                     unet_forward)


class MelExtractor(TransformerMixin, BaseEstimator):
    """Stateless extractor; ``fit`` only resolves and validates the config."""

    def __init__(self, config="cfg2", sample_rate=None):
        self.config = config
        self.sample_rate = sample_rate

    def fit(self, X=None, y=None):
        self.config_ = check_config(self.config)
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        return [extract_mel(x, self.config_, self.sample_rate) for x in check_waveforms(X)]


class UniversalAdaptor(BaseEstimator):
    """Convert mel-spectrograms from any source configuration into ``target_config``.

    ``stage=1`` applies only the analytic pseudo-inverse / Griffin-Lim / re-extraction
    path and needs no fitting. ``stage=2`` adds the conditioned U-Net and requires
    :meth:`fit` (or :meth:`load`).
    """

    def __init__(self, target_config="cfg2", stage=2, n_levels=4, base_channels=32, epochs=100,
                 batch_size=32, segment_frames=200, learning_rate=1e-3, halving_epochs=50,
                 weight_decay=0.01, validation_fraction=0.1, configs_per_epoch=100,
                 n_subsets=100, griffin_lim_iters=DEFAULT_GL_ITERS, random_state=0):
        self.target_config = target_config
        self.stage = stage
        self.n_levels = n_levels
        self.base_channels = base_channels
        self.epochs = epochs
        self.batch_size = batch_size
        self.segment_frames = segment_frames
        self.learning_rate = learning_rate
        self.halving_epochs = halving_epochs
        self.weight_decay = weight_decay
        self.validation_fraction = validation_fraction
        self.configs_per_epoch = configs_per_epoch
        self.n_subsets = n_subsets
        self.griffin_lim_iters = griffin_lim_iters
        self.random_state = random_state

    def training_config(self) -> TrainingConfig:
        return TrainingConfig(
            epochs=self.epochs, batch_size=self.batch_size, segment_frames=self.segment_frames,
            learning_rate=self.learning_rate, halving_epochs=self.halving_epochs,
            weight_decay=self.weight_decay, seed=self.random_state,
            validation_fraction=self.validation_fraction,
            configs_per_epoch=self.configs_per_epoch, n_levels=self.n_levels,
            base_channels=self.base_channels)

    def fit(self, X, y=None, sample_rate=22050):
        """Train the network on a corpus of waveforms (``y`` is ignored)."""
        X = check_waveforms(X)
        prepared = prepare_training_set(X, sample_rate, self.n_subsets, rng=self.random_state,
                                        n_iter=self.griffin_lim_iters)
        return self.fit_prepared(prepared)

    def fit_prepared(self, prepared):
        result = train(prepared, self.training_config())
        self.network_ = result.model
        self.training_log_ = result.log
        self.best_epoch_ = result.best_epoch
        return self

    def convert(self, m_src: MelSpectrogram, cfg_tgt=None) -> MelSpectrogram:
        cfg_tgt = check_config(self.target_config if cfg_tgt is None else cfg_tgt)
        approx = approximate_convert(m_src, cfg_tgt, self.griffin_lim_iters)
        if self.stage == 1:
            return approx
        if self.stage != 2:
            raise ValueError(f"stage must be 1 or 2, got {self.stage!r}")
        check_is_fitted(self, "network_")
        net = self.network_
        if net.n_mels != cfg_tgt.n_mels:
            raise ValueError(f"network expects {net.n_mels} mels, target has {cfg_tgt.n_mels}")
        base = to_base(approx)
        refined = unet_forward(net, base.values, encode_config_features(cfg_tgt))
        return from_base(base.with_values(refined), cfg_tgt.normalizable)

    def transform(self, X):
        mels, single = check_mels(X)
        out = [self.convert(m) for m in mels]
        return out[0] if single else out

    def save(self, path) -> None:
        check_is_fitted(self, "network_")
        save_weights(self.network_, path)

    @classmethod
    def load(cls, path, **params) -> "UniversalAdaptor":
        net = load_weights(path)
        est = cls(n_levels=net.n_levels, base_channels=net.base_channels, **params)
        est.network_ = net
        est.training_log_ = []
        return est

    def __sklearn_is_fitted__(self):
        return self.stage == 1 or hasattr(self, "network_")
