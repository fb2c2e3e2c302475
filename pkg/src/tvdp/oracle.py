"""Water-filling oracle for linear maximization over total-variation balls.

Conventions used across the package:

* Total variation is the *unhalved* l1 distance, ``tv(p, q) = sum |p - q|``,
  so a radius lives in ``[0, 2]`` and radius 2 is the whole simplex.
* Distributions and payoff ("level") vectors are plain float64 numpy arrays;
  :func:`as_distribution` validates and normalizes the former.
* The oracle always returns the exact constrained maximum (mass shifted onto
  the argmax level set is clamped by what the other sets can give up). The
  unclamped closed form ``<levels, mu> + (radius/2) * oscillation`` is exposed
  separately via :func:`unclamped_value` for comparison; it overshoots
  whenever a clamp binds.
"""

from dataclasses import dataclass

import numpy as np

from ._backend import backend_name, waterfill as _waterfill_core

DEFAULT_TIE_TOL = 1e-9

__all__ = [
    "DEFAULT_TIE_TOL",
    "SupportPartition",
    "WaterfillResult",
    "as_distribution",
    "backend_name",
    "oscillation",
    "partition_levels",
    "tv_distance",
    "unclamped_value",
    "waterfill_maximize",
]


def as_distribution(vec, sum_tol=1e-12, entry_tol=1e-12):
    """Validate an array-like as a probability vector and normalize it.

    Entries may undershoot 0 or overshoot 1 by ``entry_tol`` and the total
    may drift from 1 by ``sum_tol``; anything worse raises ``ValueError``.
    The returned vector is clipped to ``[0, 1]`` and renormalized, so its
    invariants hold to machine precision.
    """
    p = np.asarray(vec, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("distribution must be a non-empty 1-D vector")
    if not np.all(np.isfinite(p)):
        raise ValueError("distribution has non-finite entries")
    if p.min() < -entry_tol or p.max() > 1.0 + entry_tol:
        raise ValueError(f"distribution entries outside [0, 1]: {p}")
    total = p.sum()
    if abs(total - 1.0) > sum_tol:
        raise ValueError(f"distribution sums to {total!r}, not 1")
    p = np.clip(p, 0.0, 1.0)
    return p / p.sum()


def tv_distance(p, q):
    """Unhalved total-variation distance ``sum |p - q|`` between two vectors."""
    a = np.asarray(p, dtype=np.float64)
    b = np.asarray(q, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.abs(a - b).sum())


def oscillation(levels):
    """Spread ``max(levels) - min(levels)`` of a payoff vector."""
    lv = _as_levels(levels)
    return float(lv.max() - lv.min())


@dataclass(frozen=True)
class SupportPartition:
    """Level sets of a payoff vector, grouped within a tie tolerance.

    ``sigma_max`` is the argmax set; ``sigma_levels`` holds the remaining
    sets ascending (``sigma_levels[0]`` is the argmin set). ``levels`` gives
    each ascending set's level (its smallest member, the grouping anchor)
    and ``level_max`` the top set's.
    """

    sigma_max: tuple
    sigma_levels: tuple
    levels: tuple
    level_max: float

    @property
    def n_sets(self):
        return len(self.sigma_levels) + 1


@dataclass(frozen=True)
class WaterfillResult:
    """Outcome of one constrained maximization over a TV ball."""

    maximizer: np.ndarray
    value: float
    effective_radius: float
    r_max: float


def partition_levels(levels, tie_tol=DEFAULT_TIE_TOL):
    """Group a payoff vector into ascending level sets.

    Two entries land in the same set when they differ from the set's anchor
    (its smallest member) by at most ``tie_tol * max(1, |anchor|)``.

    Parameters
    ----------
    levels : array-like
        Finite payoff per outcome.
    tie_tol : float
        Relative grouping tolerance; 0 groups exact ties only.

    Returns
    -------
    SupportPartition
    """
    lv = _as_levels(levels)
    if tie_tol < 0.0:
        raise ValueError("tie_tol must be non-negative")
    order, starts = _sorted_groups(lv, tie_tol)
    groups = []
    for g, a in enumerate(starts):
        b = starts[g + 1] if g + 1 < len(starts) else lv.size
        groups.append(tuple(sorted(int(i) for i in order[a:b])))
    anchors = [float(lv[order[a]]) for a in starts]
    return SupportPartition(
        sigma_max=groups[-1],
        sigma_levels=tuple(groups[:-1]),
        levels=tuple(anchors[:-1]),
        level_max=anchors[-1],
    )


def waterfill_maximize(mu, levels, radius, tie_tol=DEFAULT_TIE_TOL):
    """Maximize ``<levels, nu>`` over the TV ball of ``radius`` around ``mu``.

    The maximizer lifts the argmax level set by half the effective radius
    ``min(radius, r_max)`` with ``r_max = 2 (1 - mu(argmax set))`` and drains
    the same mass from the cheapest sets upward, each set clamped at the mass
    it actually carries. Within a set, mass moves proportionally to ``mu``
    (uniformly onto a massless argmax set), so the result is a genuine
    distribution at TV distance exactly ``min(radius, r_max)`` from ``mu``.

    Parameters
    ----------
    mu : array-like
        Nominal distribution (validated via :func:`as_distribution`).
    levels : array-like
        Finite payoff per outcome, same length as ``mu``.
    radius : float
        TV budget in ``[0, 2]``.
    tie_tol : float
        Relative tolerance for grouping equal levels.

    Returns
    -------
    WaterfillResult
    """
    p = as_distribution(mu)
    lv = _as_levels(levels)
    if lv.shape != p.shape:
        raise ValueError(f"levels shape {lv.shape} does not match mu shape {p.shape}")
    r = _as_radius(radius)
    if tie_tol < 0.0:
        raise ValueError("tie_tol must be non-negative")
    nu, value, eff, r_max = _waterfill_core(p, lv, r, tie_tol)
    return WaterfillResult(
        maximizer=nu, value=float(value), effective_radius=float(eff), r_max=float(r_max)
    )


def unclamped_value(mu, levels, radius):
    """Closed form ``<levels, mu> + (radius/2) * oscillation(levels)``.

    Upper bound on the ball maximum; exceeds it whenever the water-fill has
    to clamp (the argmin set cannot give up ``radius/2`` of mass, or the
    argmax set cannot absorb it).
    """
    p = as_distribution(mu)
    lv = _as_levels(levels)
    if lv.shape != p.shape:
        raise ValueError(f"levels shape {lv.shape} does not match mu shape {p.shape}")
    r = _as_radius(radius)
    return float(lv @ p) + 0.5 * r * float(lv.max() - lv.min())


def _as_levels(levels):
    lv = np.asarray(levels, dtype=np.float64)
    if lv.ndim != 1 or lv.size == 0:
        raise ValueError("levels must be a non-empty 1-D vector")
    if not np.all(np.isfinite(lv)):
        raise ValueError("levels must be finite")
    return lv


def _as_radius(radius):
    r = float(radius)
    if not np.isfinite(r) or r < -1e-12 or r > 2.0 + 1e-12:
        raise ValueError(f"radius {r!r} outside [0, 2]")
    return min(max(r, 0.0), 2.0)


def _sorted_groups(lv, tie_tol):
    """Stable ascending order of ``lv`` plus start offsets of its level sets."""
    order = np.argsort(lv, kind="stable")
    starts = [0]
    anchor = lv[order[0]]
    for k in range(1, lv.size):
        val = lv[order[k]]
        if val - anchor > tie_tol * max(1.0, abs(anchor)):
            starts.append(k)
            anchor = val
    return order, starts
