import numpy as np
import pytest

from weakflow import _accel
from weakflow.kernels import laplace_sum, pair_ratio_max, stokes_sum


@pytest.fixture
def backend(monkeypatch):
    def use(flag):
        monkeypatch.setenv("WEAKFLOW_NUMBA", flag)

    return use


@pytest.fixture(scope="module")
def cloud():
    rng = np.random.default_rng(0)
    src = rng.uniform(-1, 1, (500, 3))
    tgt = rng.uniform(2, 5, (40, 3))
    tgt[0] = src[3]  # a coincident pair is skipped by both backends
    return {
        "src": src,
        "tgt": tgt,
        "q": rng.normal(size=500),
        "dip": rng.normal(size=(500, 3)),
        "force": rng.normal(size=(500, 3)),
        "stress": rng.normal(size=(500, 9)),
    }


def test_flag_parsing(monkeypatch):
    for flag in ("0", "false", "OFF", "no"):
        monkeypatch.setenv("WEAKFLOW_NUMBA", flag)
        assert not _accel.numba_enabled()
    monkeypatch.setenv("WEAKFLOW_NUMBA", "1")
    assert _accel.numba_enabled() == _accel.HAS_NUMBA


def test_thread_setting(monkeypatch):
    monkeypatch.setenv("WEAKFLOW_THREADS", "2")
    assert _accel.thread_count() == 2
    monkeypatch.setenv("WEAKFLOW_THREADS", "zero")
    with pytest.raises(ValueError):
        _accel.thread_count()
    monkeypatch.setenv("WEAKFLOW_THREADS", "0")
    with pytest.raises(ValueError):
        _accel.thread_count()


def test_laplace_parity(backend, cloud):
    backend("1")
    a = laplace_sum(cloud["src"], cloud["q"], cloud["dip"], cloud["tgt"])
    backend("0")
    b = laplace_sum(cloud["src"], cloud["q"], cloud["dip"], cloud["tgt"])
    assert np.all(np.isfinite(a))
    assert np.allclose(a, b, rtol=1e-12, atol=1e-14)


def test_stokes_parity(backend, cloud):
    backend("1")
    a = stokes_sum(cloud["src"], cloud["force"], cloud["stress"], cloud["tgt"])
    backend("0")
    b = stokes_sum(cloud["src"], cloud["force"], cloud["stress"], cloud["tgt"])
    assert np.all(np.isfinite(a))
    assert np.allclose(a, b, rtol=1e-12, atol=1e-14)


def test_pair_parity(backend):
    rng = np.random.default_rng(1)
    n = 8
    vals = rng.normal(size=n ** 3)
    ia = rng.integers(0, n ** 3, 5000)
    ib = rng.integers(0, n ** 3, 5000)
    backend("1")
    a = pair_ratio_max(vals, ia, ib, n, 0.1, 0.5)
    backend("0")
    b = pair_ratio_max(vals, ia, ib, n, 0.1, 0.5)
    assert a == pytest.approx(b, rel=1e-14)


def test_laplace_single_charge(backend):
    for flag in ("0", "1"):
        backend(flag)
        out = laplace_sum(np.zeros((1, 3)), np.array([4 * np.pi]), None, np.array([[0.0, 0.0, 2.0]]))
        assert out[0] == pytest.approx(0.5)
