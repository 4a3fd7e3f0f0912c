import numpy as np
import pytest
import torch

SR = 22050


def sine(freq, seconds=1.0, sr=SR, amp=0.5):
    t = np.arange(int(round(seconds * sr))) / sr
    return amp * np.sin(2 * np.pi * freq * t)


def harmonic_plus_noise(rng, seconds=1.0, sr=SR, f0=None):
    """Harmonic tone plus low-passed noise, used wherever a 'real' signal is needed."""
    from scipy import signal
    t = np.arange(int(round(seconds * sr))) / sr
    f0 = f0 if f0 is not None else rng.uniform(100, 250)
    x = sum(np.sin(2 * np.pi * f0 * k * t + rng.uniform(0, 6.28)) / k for k in range(1, 12))
    sos = signal.butter(4, rng.uniform(2000, 6000), fs=sr, output="sos")
    x = x + 0.3 * signal.sosfilt(sos, rng.standard_normal(t.size))
    return 0.8 * x / np.abs(x).max()


def central_difference_grad(f, params, eps=1e-6):
    """Central finite differences of scalar ``f()`` w.r.t. every entry of ``params``."""
    grads = []
    with torch.no_grad():
        for p in params:
            g = torch.zeros_like(p)
            flat, gflat = p.view(-1), g.view(-1)
            for i in range(flat.numel()):
                old = flat[i].item()
                flat[i] = old + eps
                up = f().item()
                flat[i] = old - eps
                down = f().item()
                flat[i] = old
                gflat[i] = (up - down) / (2 * eps)
            grads.append(g)
    return grads


def rel_err(a, b):
    return float((a - b).norm() / max(float(b.norm()), 1e-12))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# --- acceptance reporting -----------------------------------------------------

_ACCEPTANCE: dict[int, tuple[str, str, float]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call" and not report.failed:
        return
    number, title = marker.args[:2]
    if report.when == "call" or number not in _ACCEPTANCE:
        _ACCEPTANCE[number] = ("PASS" if report.passed else "FAIL", title, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        status, title, seconds = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {status}  {title}  ({seconds:.1f} s)")
