"""Excursion sets, simultaneous inclusion events, and the max-sup statistic.

The central objects are the lower/upper excursion sets of a field against a
threshold field,

    lower(f, c) = {s : f(s) < c(s)},    upper(f, c) = {s : f(s) > c(s)},

and the event that every band-widened excursion set of an estimate is
contained in the corresponding excursion set of the target, simultaneously
over a finite family of thresholds.  The statistic calibrating that event is

    t_stat(f, A, B) = max( sup_{s in A} -f(s),  sup_{s in B} f(s) ),

with sup over the empty set equal to -inf.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import Field, IndexSet, same_domain
from .errors import ParameterError, ThresholdOrderError


@dataclass(frozen=True)
class ThresholdFamily:
    """Finite families of lower-control and upper-control threshold fields."""

    lower: tuple
    upper: tuple

    def __init__(self, lower=(), upper=()):
        object.__setattr__(self, "lower", tuple(lower))
        object.__setattr__(self, "upper", tuple(upper))
        fields = self.lower + self.upper
        if fields:
            same_domain(*fields)

    @classmethod
    def symmetric(cls, fields) -> "ThresholdFamily":
        fields = tuple(fields)
        return cls(fields, fields)


@dataclass(frozen=True, eq=False)
class ScopeBands:
    """Band geometry: critical value q, rate tau, positive scaling field."""

    q: float
    tau: float
    sigma: Field

    def __post_init__(self):
        if not self.tau > 0:
            raise ParameterError(f"tau must be > 0, got {self.tau}")
        v = self.sigma.values
        if not (np.all(v > 0) and np.all(np.isfinite(v))):
            raise ParameterError("sigma must be strictly positive and finite")

    def half_width(self) -> np.ndarray:
        return self.q * self.tau * self.sigma.values


@dataclass(frozen=True)
class Partition3:
    """Disjoint lower / middle / upper classification of a domain."""

    lower: IndexSet
    middle: IndexSet
    upper: IndexSet


def shift_threshold(c: Field, delta) -> Field:
    """Threshold shifted by delta; infinite thresholds never move."""
    v = c.values
    out = np.where(np.isinf(v), v, v + delta)
    return Field(c.domain, out)


def lower_excursion(f: Field, c: Field, closed: bool = False) -> IndexSet:
    """{s : f(s) < c(s)}, or <= when ``closed``."""
    same_domain(f, c)
    if closed:
        return IndexSet.from_mask(f.values <= c.values)
    return IndexSet.from_mask(f.values < c.values)


def upper_excursion(f: Field, c: Field, closed: bool = False) -> IndexSet:
    """{s : f(s) > c(s)}, or >= when ``closed``."""
    same_domain(f, c)
    if closed:
        return IndexSet.from_mask(f.values >= c.values)
    return IndexSet.from_mask(f.values > c.values)


def t_stat(f: Field, neg_set: IndexSet, pos_set: IndexSet) -> float:
    """max(sup_{neg} -f, sup_{pos} f); empty sets contribute -inf."""
    v = f.values
    best = -np.inf
    if len(neg_set):
        best = float(np.max(-v[neg_set.members]))
    if len(pos_set):
        best = max(best, float(np.max(v[pos_set.members])))
    return best


def scope_event(mu_hat: Field, mu: Field, bands: ScopeBands, fam: ThresholdFamily) -> bool:
    """Do all band-widened excursion inclusions hold for this realization?

    True iff for every lower-control threshold c-, the strict lower excursion
    of ``mu_hat`` below c- - q*tau*sigma is contained in {mu < c-}, and dually
    for every upper-control threshold.
    """
    same_domain(mu_hat, mu, bands.sigma)
    w = bands.half_width()
    mh, mv = mu_hat.values, mu.values
    for c in fam.lower:
        cv = c.values
        shifted = np.where(np.isinf(cv), cv, cv - w)
        if np.any((mh < shifted) & ~(mv < cv)):
            return False
    for c in fam.upper:
        cv = c.values
        shifted = np.where(np.isinf(cv), cv, cv + w)
        if np.any((mh > shifted) & ~(mv > cv)):
            return False
    return True


def partition3(mu_hat: Field, b_minus: Field, b_plus: Field, bands: ScopeBands) -> Partition3:
    """Classify the domain into confidently-below / undecided / confidently-above.

    Needs q >= 0: a negative margin would let the two outer classes overlap.
    """
    dom = same_domain(mu_hat, b_minus, b_plus, bands.sigma)
    if bands.q < 0:
        raise ParameterError("partition3 needs a nonnegative critical value")
    if np.any(b_minus.values > b_plus.values):
        raise ThresholdOrderError("b_minus must be <= b_plus pointwise")
    w = bands.half_width()
    lo = lower_excursion(mu_hat, shift_threshold(b_minus, -w))
    hi = upper_excursion(mu_hat, shift_threshold(b_plus, +w))
    mid = lo.union(hi).complement(dom.size)
    return Partition3(lo, mid, hi)


def contour_regions(mu_hat: Field, levels, bands: ScopeBands) -> list[IndexSet]:
    """Simultaneous confidence regions for the level sets {mu = c_k}."""
    dom = same_domain(mu_hat, bands.sigma)
    w = bands.half_width()
    out = []
    for lev in levels:
        if not np.isfinite(lev):
            raise ParameterError("contour levels must be finite")
        c = Field.constant(dom, lev)
        covered = lower_excursion(mu_hat, shift_threshold(c, -w)).union(
            upper_excursion(mu_hat, shift_threshold(c, +w))
        )
        out.append(covered.complement(dom.size))
    return out


def roi_adapt(b: Field, roi: IndexSet) -> tuple[Field, Field]:
    """Restrict a threshold to a region of interest.

    Returns (c_plus, c_minus): equal to b on the region, +inf / -inf off it,
    so that every excursion against them stays inside the region.
    """
    mask = roi.mask(b.domain.size)
    c_plus = np.where(mask, b.values, np.inf)
    c_minus = np.where(mask, b.values, -np.inf)
    return Field(b.domain, c_plus), Field(b.domain, c_minus)


def scb_scope_equivalence(
    mu_hat: Field,
    mu: Field,
    sigma_hat: Field,
    tau: float,
    q: float,
    probe_thresholds,
) -> tuple[bool, bool]:
    """Band coverage versus all-threshold excursion inclusions.

    ``band_covers`` is the event |mu_hat - mu| <= q*tau*sigma_hat everywhere;
    ``inclusions_hold`` evaluates the inclusion event over the probe
    thresholds plus ``mu`` itself.  The two agree whenever the probes include
    ``mu``, which is the crux of the band/threshold duality.
    """
    same_domain(mu_hat, mu, sigma_hat)
    if not np.all(sigma_hat.values > 0):
        raise ParameterError("sigma_hat must be positive")
    w = q * tau * sigma_hat.values
    band_covers = bool(np.all(np.abs(mu_hat.values - mu.values) <= w))
    fam = ThresholdFamily.symmetric(tuple(probe_thresholds) + (mu,))
    bands = ScopeBands(q, tau, sigma_hat)
    return band_covers, scope_event(mu_hat, mu, bands, fam)
