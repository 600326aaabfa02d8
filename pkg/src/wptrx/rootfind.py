"""Bracketed bisection used for commutation-event localization.

Bisection is deliberately chosen over faster open methods: every event the
simulator locates already comes with a guaranteed bracket, and bisection is
immune to the flat regions the cosine forms develop near the precondition
boundaries.
"""

from typing import Callable


def bisect_root(f: Callable[[float], float], lo: float, hi: float,
                xtol: float = 1e-13) -> float:
    """Smallest root of ``f`` in ``[lo, hi]`` given ``f(lo)`` and ``f(hi)``
    bracket a sign change.  Absolute tolerance on the abscissa.

    ``f(lo)`` may be exactly zero (returns ``lo``); likewise for ``hi``.
    """
    flo = f(lo)
    if flo == 0.0:
        return lo
    fhi = f(hi)
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise ValueError(f"root not bracketed on [{lo}, {hi}]: f={flo}, {fhi}")
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:  # bracket collapsed to adjacent floats
            break
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if flo * fmid < 0.0:
            hi = mid
        else:
            lo, flo = mid, fmid
    return 0.5 * (lo + hi)
