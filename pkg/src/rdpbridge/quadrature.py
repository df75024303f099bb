"""Adaptive Simpson quadrature, vectorised over the active panels."""

from __future__ import annotations

from typing import Callable, Iterable, Tuple

import numpy as np


def adaptive_simpson(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    tol: float = 1e-10,
    breakpoints: Iterable[float] = (),
    initial_panels: int = 256,
    max_depth: int = 60,
    max_panels: int = 1 << 17,
) -> Tuple[float, float]:
    """Integrate a vectorised ``f`` over ``[a, b]`` to absolute tolerance ``tol``.

    ``breakpoints`` (kinks, peaks) become panel edges. Returns
    ``(value, error_estimate)``; the estimate is the sum of the Richardson
    corrections ``|S2 - S1| / 15`` of the accepted panels. Refinement stops
    at ``max_depth`` or once ``max_panels`` panels are active, in which case
    the remaining panels are accepted and counted in the estimate.
    """
    if not b > a:
        return 0.0, 0.0
    cuts = sorted({float(a), float(b), *(float(p) for p in breakpoints if a < p < b)})
    edges = np.concatenate(
        [np.linspace(lo, hi, initial_panels + 1)[:-1] for lo, hi in zip(cuts[:-1], cuts[1:])]
        + [np.array([cuts[-1]])]
    )
    lo, hi = edges[:-1], edges[1:]
    mid = 0.5 * (lo + hi)
    flo, fmid, fhi = f(lo), f(mid), f(hi)
    whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)
    ptol = np.full(lo.shape, tol / lo.size)

    total, err = 0.0, 0.0
    for depth in range(max_depth + 1):
        lmid, rmid = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lmid), f(rmid)
        left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        delta = left + right - whole
        done = np.abs(delta) <= 15.0 * ptol
        if depth == max_depth or 2 * np.count_nonzero(~done) > max_panels:
            done[:] = True
        total += float(np.sum(left[done] + right[done] + delta[done] / 15.0))
        err += float(np.sum(np.abs(delta[done]))) / 15.0
        keep = ~done
        if not keep.any():
            break
        lo_k, mid_k, hi_k = lo[keep], mid[keep], hi[keep]
        lo = np.concatenate([lo_k, mid_k])
        hi = np.concatenate([mid_k, hi_k])
        mid = np.concatenate([lmid[keep], rmid[keep]])
        flo = np.concatenate([flo[keep], fmid[keep]])
        fhi = np.concatenate([fmid[keep], fhi[keep]])
        fmid = np.concatenate([flm[keep], frm[keep]])
        whole = np.concatenate([left[keep], right[keep]])
        ptol = np.concatenate([ptol[keep], ptol[keep]]) / 2.0
    return total, err
