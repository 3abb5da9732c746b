"""Euclidean projections onto the cone product and its dual.

The primal cone is ``{0}^zero x R+^nonneg x Q_d1 x ... x Q_dk`` where
``Q_d = {(t, v) : ||v||_2 <= t}``.  Its dual swaps the zero cone for free
rows and keeps the self-dual orthant and second-order blocks.
"""

import numpy as np

__all__ = ["project_soc", "project_cone", "dual_cone_distance"]


def project_soc(block):
    """Project one ``(t, v)`` block onto the second-order cone.

    Inside the cone the point is fixed; inside the polar cone the projection
    is the origin; otherwise it lands on the boundary ray
    ``((t + ||v||) / 2) * (1, v / ||v||)``.
    """
    t = block[0]
    v = block[1:]
    nv = np.linalg.norm(v)
    if nv <= t:
        return block.copy()
    if nv <= -t:
        return np.zeros_like(block)
    scale = 0.5 * (t + nv)
    out = np.empty_like(block)
    out[0] = scale
    # nv > 0 here: nv <= -t <= 0 was handled above
    out[1:] = (scale / nv) * v
    return out


def project_cone(point, cones, dual=False):
    """Project a stacked point onto the cone product (or its dual).

    :param cones: a :class:`coneprog.canon.ConeSpec`.
    :param dual: project onto the dual cone instead (zero rows become free).
    """
    point = np.asarray(point, dtype=float)
    out = np.empty_like(point)
    z = cones.zero
    if dual:
        out[:z] = point[:z]
    else:
        out[:z] = 0.0
    nn = z + cones.nonneg
    np.maximum(point[z:nn], 0.0, out=out[z:nn])
    offset = nn
    for d in cones.soc:
        out[offset : offset + d] = project_soc(point[offset : offset + d])
        offset += d
    return out


def dual_cone_distance(point, cones):
    """Euclidean distance from a point to the dual cone."""
    return float(np.linalg.norm(point - project_cone(point, cones, dual=True)))
