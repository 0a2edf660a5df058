"""Hot data-movement kernels behind the layer ops.

Everything here is shape-dumb: callers validate shapes and allocate
outputs. Arrays are channels-last (N, H, W, C). All kernels write
disjoint output slices per parallel chunk, so results do not depend on
the thread count.
"""

import os

os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")  # skip the TBB probe

import numpy as np
from numba import njit, prange


@njit(cache=True, parallel=True)
def im2col(x, kh, kw, stride, cols):
    # cols: (N*Ho*Wo, kh*kw*C), row-major patch layout (i, j, c)
    N, H, W, C = x.shape
    Ho = (H - kh) // stride + 1
    Wo = (W - kw) // stride + 1
    for p in prange(N * Ho):
        n = p // Ho
        ho = p % Ho
        hi = ho * stride
        for wo in range(Wo):
            wi = wo * stride
            row = (n * Ho + ho) * Wo + wo
            k = 0
            for i in range(kh):
                for j in range(kw):
                    for c in range(C):
                        cols[row, k] = x[n, hi + i, wi + j, c]
                        k += 1


@njit(cache=True, parallel=True)
def col2im_add(gcols, kh, kw, stride, dx):
    # Inverse scatter of im2col: dx must be zeroed by the caller once;
    # chunks are per-image so accumulation order is fixed.
    N, H, W, C = dx.shape
    Ho = (H - kh) // stride + 1
    Wo = (W - kw) // stride + 1
    for n in prange(N):
        for ho in range(Ho):
            hi = ho * stride
            for wo in range(Wo):
                wi = wo * stride
                row = (n * Ho + ho) * Wo + wo
                k = 0
                for i in range(kh):
                    for j in range(kw):
                        for c in range(C):
                            dx[n, hi + i, wi + j, c] += gcols[row, k]
                            k += 1


@njit(cache=True, parallel=True)
def maxpool2x2(x, out, argmax):
    # 2x2 window, stride 2; ties keep the first element in row-major
    # window order (argmax codes 0..3 = (0,0),(0,1),(1,0),(1,1)).
    N, H, W, C = x.shape
    Ho = H // 2
    Wo = W // 2
    for p in prange(N * Ho):
        n = p // Ho
        ho = p % Ho
        hi = 2 * ho
        for wo in range(Wo):
            wi = 2 * wo
            for c in range(C):
                best = x[n, hi, wi, c]
                bi = 0
                v = x[n, hi, wi + 1, c]
                if v > best:
                    best = v
                    bi = 1
                v = x[n, hi + 1, wi, c]
                if v > best:
                    best = v
                    bi = 2
                v = x[n, hi + 1, wi + 1, c]
                if v > best:
                    best = v
                    bi = 3
                out[n, ho, wo, c] = best
                argmax[n, ho, wo, c] = bi


@njit(cache=True, parallel=True)
def maxpool2x2_backward(grad_out, argmax, dx):
    # dx zeroed by caller; gradient routed to the argmax cell only.
    N, Ho, Wo, C = grad_out.shape
    for p in prange(N * Ho):
        n = p // Ho
        ho = p % Ho
        hi = 2 * ho
        for wo in range(Wo):
            wi = 2 * wo
            for c in range(C):
                bi = argmax[n, ho, wo, c]
                dx[n, hi + (bi >> 1), wi + (bi & 1), c] += grad_out[n, ho, wo, c]


def warmup():
    """Force-compile all kernels for float32 (cached across processes)."""
    x = np.zeros((1, 4, 4, 1), np.float32)
    cols = np.zeros((9, 4), np.float32)
    im2col(x, 2, 2, 1, cols)
    col2im_add(cols, 2, 2, 1, x.copy())
    out = np.zeros((1, 2, 2, 1), np.float32)
    arg = np.zeros((1, 2, 2, 1), np.int8)
    maxpool2x2(x, out, arg)
    maxpool2x2_backward(out, arg, x.copy())
