"""Pure-numpy implementation of the solver inner loop.

Same contract as the compiled kernel: run ``n_iters`` splitting iterations
in place on ``x``, ``z``, ``y``.  Used when the extension is not built or
when the caller forces ``kernel="python"``.
"""

import numpy as np
from scipy.linalg import cho_solve


def admm_span(L, A, AT, c, b, zero_dim, nonneg_dim, soc_dims, rho, sigma, alpha,
              x, z, y, n_iters):
    one_minus_alpha = 1.0 - alpha
    nn_end = zero_dim + nonneg_dim
    for _ in range(n_iters):
        rhs = sigma * x - c + AT @ (rho * z - y)
        xt = cho_solve((L, True), rhs, check_finite=False)
        zt = A @ xt
        x *= one_minus_alpha
        x += alpha * xt
        u = b - (alpha * zt + one_minus_alpha * z + y / rho)
        w = np.empty_like(u)
        w[:zero_dim] = 0.0
        np.maximum(u[zero_dim:nn_end], 0.0, out=w[zero_dim:nn_end])
        off = nn_end
        for d in soc_dims:
            t = u[off]
            v = u[off + 1 : off + d]
            nv = np.linalg.norm(v)
            if nv <= t:
                w[off : off + d] = u[off : off + d]
            elif nv <= -t:
                w[off : off + d] = 0.0
            else:
                sc = 0.5 * (t + nv)
                w[off] = sc
                w[off + 1 : off + d] = (sc / nv) * v
            off += d
        z[:] = b - w
        y[:] = rho * (w - u)
