import numpy as np
import pytest


def rel_err(a, b):
    """Max absolute difference over max magnitude (scalar summary)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = max(np.max(np.abs(a), initial=0.0), np.max(np.abs(b), initial=0.0), 1e-12)
    return float(np.max(np.abs(a - b), initial=0.0) / scale)


def finite_diff(f, x, eps=1e-3):
    """Central-difference gradient of scalar f w.r.t. every element of x.

    Mutates x in place element by element (restoring it), so f must read
    x afresh on each call. Always works in float64.
    """
    assert x.dtype == np.float64
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        lp = f()
        flat[i] = orig - eps
        lm = f()
        flat[i] = orig
        gflat[i] = (lp - lm) / (2 * eps)
    return g


def loop_conv2d(x, w, b, stride=1):
    """Nested-loop valid cross-correlation oracle (channels-last)."""
    N, H, W, C = x.shape
    kh, kw, _, F = w.shape
    Ho = (H - kh) // stride + 1
    Wo = (W - kw) // stride + 1
    out = np.zeros((N, Ho, Wo, F), dtype=np.float64)
    for n in range(N):
        for ho in range(Ho):
            for wo in range(Wo):
                for f in range(F):
                    acc = 0.0
                    for i in range(kh):
                        for j in range(kw):
                            for c in range(C):
                                acc += float(x[n, ho * stride + i, wo * stride + j, c]) * float(w[i, j, c, f])
                    out[n, ho, wo, f] = acc + float(b[f])
    return out


def loop_maxpool(x):
    """Nested-loop 2x2/stride-2 max oracle."""
    N, H, W, C = x.shape
    out = np.zeros((N, H // 2, W // 2, C), dtype=x.dtype)
    for n in range(N):
        for ho in range(H // 2):
            for wo in range(W // 2):
                for c in range(C):
                    out[n, ho, wo, c] = max(
                        x[n, 2 * ho, 2 * wo, c], x[n, 2 * ho, 2 * wo + 1, c],
                        x[n, 2 * ho + 1, 2 * wo, c], x[n, 2 * ho + 1, 2 * wo + 1, c])
    return out


@pytest.fixture(scope="session", autouse=True)
def _compile_kernels():
    from steersim.nn import kernels
    kernels.warmup()
