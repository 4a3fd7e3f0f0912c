import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from melbridge import MelExtractor, UniversalAdaptor, builtin_config, extract_mel
from melbridge.corpus import synthetic_corpus
from melbridge.stage1 import approximate_convert
from melbridge.stage2 import ConditionedUNet

from conftest import SR, sine


def test_extractor_params_and_transform():
    est = MelExtractor(config="cfg1")
    assert est.get_params() == {"config": "cfg1", "sample_rate": None}
    x = sine(440.0)
    out = est.fit().transform([x, x[:SR // 2]])
    assert len(out) == 2 and out[0].config == builtin_config("cfg1")
    assert np.array_equal(out[0].values, extract_mel(x, builtin_config("cfg1")).values)


def test_extractor_requires_fit():
    with pytest.raises(NotFittedError):
        MelExtractor().transform([sine(100.0)])


def test_extractor_input_validation():
    est = MelExtractor().fit()
    with pytest.raises(ValueError, match="mono"):
        est.transform([np.zeros((2, 100))])
    with pytest.raises(ValueError, match="non-finite"):
        est.transform([np.array([0.0, np.nan] * 600)])


def test_adaptor_clone_roundtrip():
    est = UniversalAdaptor(target_config="cfg3", n_levels=2, epochs=3)
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    assert twin.training_config().n_levels == 2


def test_stage1_adaptor_needs_no_fit():
    m = extract_mel(sine(220.0), builtin_config("cfg2"))
    est = UniversalAdaptor(target_config="cfg1", stage=1)
    out = est.transform(m)
    assert np.array_equal(out.values, approximate_convert(m, builtin_config("cfg1")).values)


def test_stage2_requires_fit():
    m = extract_mel(sine(220.0), builtin_config("cfg2"))
    with pytest.raises(NotFittedError):
        UniversalAdaptor(target_config="cfg1").transform(m)


def test_transform_rejects_untagged_arrays():
    with pytest.raises(TypeError):
        UniversalAdaptor(stage=1).transform(np.zeros((10, 80)))


def test_identity_network_reproduces_stage1():
    net = ConditionedUNet(n_levels=2, base_channels=8)
    net.zero_output_projection()
    est = UniversalAdaptor(target_config="cfg1")
    est.network_ = net
    m = extract_mel(sine(220.0), builtin_config("cfg2"))
    ref = approximate_convert(m, builtin_config("cfg1"))
    np.testing.assert_allclose(est.transform(m).values, ref.values, rtol=0, atol=1e-9)


def test_fit_save_load(tmp_path):
    clips = synthetic_corpus(6, seed=2, duration=0.5)
    est = UniversalAdaptor(target_config="cfg3", n_levels=2, base_channels=4, epochs=1,
                           batch_size=4, segment_frames=32, n_subsets=2, configs_per_epoch=3,
                           griffin_lim_iters=2, random_state=5)
    est.fit(clips, sample_rate=SR)
    assert len(est.training_log_) == 1
    path = tmp_path / "w.uaw"
    est.save(path)
    loaded = UniversalAdaptor.load(path, target_config="cfg3", griffin_lim_iters=2)
    assert loaded.n_levels == 2 and loaded.base_channels == 4
    m = extract_mel(clips[0], builtin_config("cfg4"))
    np.testing.assert_array_equal(loaded.transform([m])[0].values, est.transform([m])[0].values)
