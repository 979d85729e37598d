"""Hot loops for cohort simulation and at-risk/event counting.

Two interchangeable implementations live here: numba-compiled loops and
vectorized numpy twins.  Selection happens once at import time; set
``CSHAZARD_NUMBA=0`` to force the pure-numpy path (the default is numba
whenever it imports).  Both paths are exercised against each other in the
test suite and must produce bit-identical outputs.
"""
from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

_FLAG = os.environ.get("CSHAZARD_NUMBA", "1").strip().lower()
USING_NUMBA = HAVE_NUMBA and _FLAG not in ("0", "false", "no", "off")


def assemble_cohort_numpy(u_entry, u_life, u_cause, cdf, cause1_share,
                          entry_lo, entry_hi, min_age, censor_offset):
    """Transform uniform draws into retained observations (numpy path).

    Entry ages are uniform on {entry_lo..entry_hi}; lifetimes are sampled by
    inverse CDF with the strict-inequality tie rule (smallest age whose
    cumulative mass strictly exceeds the draw); the cause draw is a Bernoulli
    against the per-age default share.  Draws whose entry age exceeds the
    lifetime are discarded, not re-drawn.

    Returns (entry, exit, event, is_default) with exit = min(X, Y + offset)
    and event marking X <= Y + offset.
    """
    span = entry_hi - entry_lo + 1
    entry = entry_lo + np.minimum((u_entry * span).astype(np.int64), span - 1)
    idx = np.minimum(np.searchsorted(cdf, u_life, side="right"), cdf.size - 1)
    life = min_age + idx
    is_default = u_cause < cause1_share[idx]
    keep = entry <= life
    censor = entry + censor_offset
    exit_age = np.minimum(life, censor)
    event = life <= censor
    return (
        entry[keep].astype(np.int64),
        exit_age[keep].astype(np.int64),
        event[keep],
        is_default[keep],
    )


def _assemble_cohort_loops(u_entry, u_life, u_cause, cdf, cause1_share,
                           entry_lo, entry_hi, min_age, censor_offset):
    n = u_entry.shape[0]
    span = entry_hi - entry_lo + 1
    k = cdf.shape[0]
    entry = np.empty(n, np.int64)
    exit_age = np.empty(n, np.int64)
    event = np.empty(n, np.bool_)
    is_default = np.empty(n, np.bool_)
    kept = 0
    for j in range(n):
        off = int(u_entry[j] * span)
        if off > span - 1:
            off = span - 1
        y = entry_lo + off
        idx = 0
        while idx < k - 1 and u_life[j] >= cdf[idx]:
            idx += 1
        x = min_age + idx
        if y > x:
            continue
        c = y + censor_offset
        entry[kept] = y
        exit_age[kept] = x if x < c else c
        event[kept] = x <= c
        is_default[kept] = u_cause[j] < cause1_share[idx]
        kept += 1
    return (
        entry[:kept].copy(),
        exit_age[:kept].copy(),
        event[:kept].copy(),
        is_default[:kept].copy(),
    )


def count_exits_numpy(entry, exit_age, event, is_default, age_lo, age_hi):
    """Per-age at-risk and cause-split event counts (numpy path).

    at_risk[x] counts observations with entry <= x <= exit; the event arrays
    count observed exits at x by cause.  Ages run age_lo..age_hi inclusive.
    """
    width = age_hi - age_lo + 1
    ent = np.bincount(np.clip(entry, age_lo, age_hi + 1) - age_lo,
                      minlength=width + 1)
    ext = np.bincount(np.clip(exit_age, age_lo - 1, age_hi + 1) - (age_lo - 1),
                      minlength=width + 2)
    at_risk = np.cumsum(ent)[:width] - np.cumsum(ext)[:width]
    in_window = event & (exit_age >= age_lo) & (exit_age <= age_hi)
    d_mask = in_window & is_default
    p_mask = in_window & ~is_default
    ev_default = np.bincount(exit_age[d_mask] - age_lo, minlength=width)
    ev_prepay = np.bincount(exit_age[p_mask] - age_lo, minlength=width)
    return (
        at_risk.astype(np.int64),
        ev_default.astype(np.int64),
        ev_prepay.astype(np.int64),
    )


def _count_exits_loops(entry, exit_age, event, is_default, age_lo, age_hi):
    width = age_hi - age_lo + 1
    at_risk = np.zeros(width, np.int64)
    ev_default = np.zeros(width, np.int64)
    ev_prepay = np.zeros(width, np.int64)
    for j in range(entry.shape[0]):
        lo = entry[j]
        hi = exit_age[j]
        if lo < age_lo:
            lo = age_lo
        if hi > age_hi:
            hi = age_hi
        for x in range(lo, hi + 1):
            at_risk[x - age_lo] += 1
        ex = exit_age[j]
        if event[j] and age_lo <= ex <= age_hi:
            if is_default[j]:
                ev_default[ex - age_lo] += 1
            else:
                ev_prepay[ex - age_lo] += 1
    return at_risk, ev_default, ev_prepay


if HAVE_NUMBA:
    assemble_cohort_numba = njit(cache=True)(_assemble_cohort_loops)
    count_exits_numba = njit(cache=True)(_count_exits_loops)
else:  # pragma: no cover
    assemble_cohort_numba = None
    count_exits_numba = None

if USING_NUMBA:
    assemble_cohort = assemble_cohort_numba
    count_exits = count_exits_numba
else:
    assemble_cohort = assemble_cohort_numpy
    count_exits = count_exits_numpy
