"""Pure-Python fallback for the compiled kernels in ``_ckernels.pyx``."""
import math

import numpy as np


def dykstra_halfspaces(A, b, x0, max_iter=10000, tol=1e-10):
    """Project ``x0`` onto ``{x : A x <= b}`` with Dykstra's algorithm.

    ``A`` rows must be unit normals.  Returns ``(x, iterations, residual)``
    where ``residual`` is the largest constraint violation at ``x``.
    """
    A = np.ascontiguousarray(A, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    x = np.array(x0, dtype=float, copy=True)
    m = A.shape[0]
    rows = [A[i] for i in range(m)]
    bs = [float(v) for v in b]
    p = [np.zeros_like(x) for _ in range(m)]
    it = 0
    while it < max_iter:
        it += 1
        change = 0.0
        for i in range(m):
            y = x + p[i]
            viol = float(rows[i] @ y) - bs[i]
            if viol > 0.0:
                s = y - viol * rows[i]
            else:
                s = y
            diff = s - x
            change += float(diff @ diff)
            p[i] = y - s
            x = s
        if math.sqrt(change) <= tol:
            break
    resid = max(0.0, float(np.max(A @ x - b))) if m else 0.0
    return x, it, resid
