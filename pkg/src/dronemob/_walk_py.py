"""Numpy implementation of the walk kernel (fallback for ``_walk``).

``advance_walks`` consumes one chunk of pre-drawn flights per walker and
records positions at the sorted query ``times`` that fall inside the chunk.
Walker state (``x``, ``y``, ``clock``, ``tidx``) is updated in place so a
walker can be resumed with a fresh chunk when its flights run out.
"""

import numpy as np


def advance_walks(lengths, angles, hovers, v, times, x, y, clock, tidx, out_x, out_y):
    m = times.shape[0]
    cols = np.arange(m)
    state = tidx
    tidx = tidx.copy()
    for k in range(lengths.shape[1]):
        live = tidx < m
        if not live.any():
            break
        t0 = clock + hovers[:, k]
        end = np.searchsorted(times, t0, side="right")
        fill = live[:, None] & (cols >= tidx[:, None]) & (cols < end[:, None])
        out_x[fill] = np.broadcast_to(x[:, None], fill.shape)[fill]
        out_y[fill] = np.broadcast_to(y[:, None], fill.shape)[fill]
        tidx = np.where(live, np.maximum(tidx, end), tidx)
        clock[:] = np.where(live, t0, clock)

        t1 = t0 + lengths[:, k] / v
        c = np.cos(angles[:, k])
        s = np.sin(angles[:, k])
        end = np.searchsorted(times, t1, side="right")
        fill = live[:, None] & (cols >= tidx[:, None]) & (cols < end[:, None])
        frac = (times[None, :] - t0[:, None]) * v
        out_x[fill] = (x[:, None] + frac * c[:, None])[fill]
        out_y[fill] = (y[:, None] + frac * s[:, None])[fill]
        tidx = np.where(live, np.maximum(tidx, end), tidx)
        x[:] = np.where(live, x + lengths[:, k] * c, x)
        y[:] = np.where(live, y + lengths[:, k] * s, y)
        clock[:] = np.where(live, t1, clock)
    state[:] = tidx
