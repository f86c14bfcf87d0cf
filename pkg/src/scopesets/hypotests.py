"""Band-based relevance and equivalence tests plus multiple-testing baselines.

All four tests share one template: shift the band so it touches the target at
its most critical points, calibrate the max-sup statistic over the preimages
of the shifted band, then read the decision off widened (or shrunken)
excursion sets of the estimate.

Oracle calibration (target known) is the validated path; plug-in calibration
through the thickened preimage estimator is exposed but experimental.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dist import Rng, t_cdf
from .domain import Field, IndexSet, same_domain
from .errors import DegenerateDataError, ParameterError, ThresholdOrderError
from .excursion import ScopeBands, lower_excursion, shift_threshold, upper_excursion
from .preimage import KPolicy, oracle_preimage, plugin_preimage, resolve_k
from .quantile import QuantileEstimate, iid_exact_quantile, mc_oracle_quantile


@dataclass(frozen=True)
class BandSpec:
    """A band b_minus <= b_plus between which the null pins the target."""

    b_minus: Field
    b_plus: Field

    def __post_init__(self):
        same_domain(self.b_minus, self.b_plus)
        if np.any(self.b_minus.values > self.b_plus.values):
            raise ThresholdOrderError("b_minus must be <= b_plus pointwise")

    def gap(self) -> np.ndarray:
        bm, bp = self.b_minus.values, self.b_plus.values
        g = np.where(np.isneginf(bm) | np.isposinf(bp), np.inf, bp - bm)
        return np.where(np.isnan(g), 0.0, g)


@dataclass(frozen=True)
class TestDecision:
    kind: str
    quantile_used: QuantileEstimate
    delta: float
    global_reject: bool | None = None
    rejected: IndexSet = field(default_factory=IndexSet)


@dataclass
class Calibration:
    """How to solve for the critical value.

    Oracle mode reads the touching sets off the known target; plug-in mode
    (experimental) estimates them from the data via the thickened preimage
    estimator with factor ``k`` (or a policy resolved at sample size ``N``).
    ``cov`` is "iid_normal", ("iid_t", df) or a correlation matrix; iid noise
    uses the exact product-CDF solver unless ``exact`` is switched off.
    """

    alpha: float = 0.1
    cov: object = "iid_normal"
    reps: int = 200_000
    rng: Rng | None = None
    eta: float = 0.0
    k: float | None = None
    policy: KPolicy | None = None
    N: int | None = None
    exact: bool = True


def delta_rel(mu: Field, band: BandSpec) -> tuple[float, float, float]:
    """Smallest distances of the target to each band edge (and their min)."""
    same_domain(mu, band.b_minus)
    d_minus = float(np.min(np.abs(mu.values - band.b_minus.values)))
    d_plus = float(np.min(np.abs(mu.values - band.b_plus.values)))
    return min(d_minus, d_plus), d_minus, d_plus


def delta_eqv(mu: Field, band: BandSpec) -> float:
    """Largest signed exceedance of the target over the band (<= 0 inside)."""
    same_domain(mu, band.b_minus)
    over = np.max(mu.values - band.b_plus.values)
    under = np.max(band.b_minus.values - mu.values)
    return float(max(over, under))


def _touch_sets(
    reference: Field,
    c_minus: Field,
    c_plus: Field,
    cal: Calibration,
    bands: ScopeBands,
    plugin: bool,
) -> tuple[IndexSet, IndexSet]:
    if not plugin:
        neg = oracle_preimage(reference, [c_minus], cal.eta, "plus")
        pos = oracle_preimage(reference, [c_plus], cal.eta, "minus")
        return neg, pos
    k = cal.k
    if k is None:
        if cal.policy is None or cal.N is None:
            raise ParameterError("plug-in calibration needs k, or a policy with N")
        k = resolve_k(cal.policy, cal.N, reference.domain.size, df=cal.N - 1)
    neg = plugin_preimage(reference, [c_minus], bands.sigma, bands.tau, k, "plus")
    pos = plugin_preimage(reference, [c_plus], bands.sigma, bands.tau, k, "minus")
    return neg, pos


def _solve_q(neg: IndexSet, pos: IndexSet, cal: Calibration, tail: str) -> QuantileEstimate:
    cov = cal.cov
    iid = cov == "iid_normal" or (isinstance(cov, tuple) and cov[0] == "iid_t")
    if cal.exact and iid:
        df = np.inf if cov == "iid_normal" else float(cov[1])
        return iid_exact_quantile(neg, pos, cal.alpha, df=df, tail=tail)
    rng = cal.rng if cal.rng is not None else Rng(0)
    return mc_oracle_quantile(cov, neg, pos, cal.alpha, cal.reps, rng, tail=tail)


def _resolve(quantile, bands, solve) -> QuantileEstimate:
    if quantile is None:
        return QuantileEstimate(bands.q, "given", float("nan"))
    if isinstance(quantile, QuantileEstimate):
        return quantile
    if isinstance(quantile, Calibration):
        return solve(quantile)
    raise ParameterError("quantile must be None, a QuantileEstimate, or a Calibration")


def grt(
    mu_hat: Field,
    band: BandSpec,
    bands: ScopeBands,
    quantile=None,
    mu: Field | None = None,
) -> TestDecision:
    """Global relevance test: is the target anywhere outside the band?

    Rejects when a widened excursion set of the estimate escapes the band.
    The critical value comes from the band shifted outward by the largest
    exceedance, so that it touches the target's extremes under the boundary
    null.
    """
    reference = mu if mu is not None else mu_hat
    d = delta_eqv(reference, band)

    def solve(cal):
        cm = shift_threshold(band.b_minus, -d)
        cp = shift_threshold(band.b_plus, +d)
        neg, pos = _touch_sets(reference, cm, cp, cal, bands, plugin=mu is None)
        return _solve_q(neg, pos, cal, tail="upper")

    est = _resolve(quantile, bands, solve)
    w = est.q * bands.tau * bands.sigma.values
    lo = lower_excursion(mu_hat, shift_threshold(band.b_minus, -w))
    hi = upper_excursion(mu_hat, shift_threshold(band.b_plus, +w))
    return TestDecision(
        "grT", est, d, global_reject=bool(len(lo) or len(hi)), rejected=lo.union(hi)
    )


def lrt(
    mu_hat: Field,
    band: BandSpec,
    bands: ScopeBands,
    quantile=None,
    mu: Field | None = None,
) -> TestDecision:
    """Local relevance test: familywise-valid out-of-band flags per point.

    The calibrating band shifts inward by the smallest target-to-edge
    distance; when the shifted band touches the target nowhere, the critical
    value defaults to zero.
    """
    reference = mu if mu is not None else mu_hat
    d, _, _ = delta_rel(reference, band)

    def solve(cal):
        cm = shift_threshold(band.b_minus, +d)
        cp = shift_threshold(band.b_plus, -d)
        neg, pos = _touch_sets(reference, cm, cp, cal, bands, plugin=mu is None)
        return _solve_q(neg, pos, cal, tail="upper")

    est = _resolve(quantile, bands, solve)
    w = est.q * bands.tau * bands.sigma.values
    lo = lower_excursion(mu_hat, shift_threshold(band.b_minus, -w))
    hi = upper_excursion(mu_hat, shift_threshold(band.b_plus, +w))
    return TestDecision("lrT", est, d, rejected=lo.union(hi))


def et(
    mu_hat: Field,
    band: BandSpec,
    bands: ScopeBands,
    quantile=None,
    mu: Field | None = None,
) -> TestDecision:
    """Global equivalence test: conclude the target sits inside the band.

    Needs a strictly positive band gap.  The critical value is the lower
    tail of the max-sup statistic over the outward-shifted band; equivalence
    is concluded exactly when both widened excursion sets are empty.
    """
    if not np.all(band.gap() > 0):
        raise ParameterError("equivalence testing needs inf(b_plus - b_minus) > 0")
    reference = mu if mu is not None else mu_hat
    d = delta_eqv(reference, band)

    def solve(cal):
        cm = shift_threshold(band.b_minus, -d)
        cp = shift_threshold(band.b_plus, +d)
        neg, pos = _touch_sets(reference, cm, cp, cal, bands, plugin=mu is None)
        return _solve_q(neg, pos, cal, tail="lower")

    est = _resolve(quantile, bands, solve)
    w = est.q * bands.tau * bands.sigma.values
    lo = lower_excursion(mu_hat, shift_threshold(band.b_minus, -w))
    hi = upper_excursion(mu_hat, shift_threshold(band.b_plus, +w))
    return TestDecision("eT", est, d, global_reject=not (len(lo) or len(hi)))


def let_(
    mu_hat: Field,
    band: BandSpec,
    bands: ScopeBands,
    quantile=None,
    mu: Field | None = None,
) -> TestDecision:
    """Local equivalence test: pointwise in-band conclusions.

    Equivalence is declared at the points where the estimate lies strictly
    inside the band shrunk by the critical margin, matching the
    confidence-interval-inclusion rule in the scalar symmetric case.  The
    calibrating statistic swaps the roles of the two outward-shifted edges.
    """
    if not np.all(band.gap() > 0):
        raise ParameterError("equivalence testing needs inf(b_plus - b_minus) > 0")
    reference = mu if mu is not None else mu_hat
    d, _, _ = delta_rel(reference, band)

    def solve(cal):
        cm = shift_threshold(band.b_minus, -d)
        cp = shift_threshold(band.b_plus, +d)
        # swapped roles: negated sup over the upper edge's touch set
        neg, pos = _touch_sets(reference, cp, cm, cal, bands, plugin=mu is None)
        return _solve_q(neg, pos, cal, tail="upper")

    est = _resolve(quantile, bands, solve)
    w = est.q * bands.tau * bands.sigma.values
    inside_hi = lower_excursion(mu_hat, shift_threshold(band.b_plus, -w))
    inside_lo = upper_excursion(mu_hat, shift_threshold(band.b_minus, +w))
    return TestDecision("leT", est, d, rejected=inside_hi.intersection(inside_lo))


def t_pvalues(data) -> np.ndarray:
    """Two-sided one-sample t-test p-values per column of an N x J matrix."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[0] < 2:
        raise ParameterError("data must be an N x J matrix with N >= 2")
    N = data.shape[0]
    sd = data.std(axis=0, ddof=1)
    if np.any(sd == 0.0):
        raise DegenerateDataError(
            f"zero-variance column(s): {np.flatnonzero(sd == 0.0).tolist()}"
        )
    stat = np.sqrt(N) * np.abs(data.mean(axis=0)) / sd
    return 2.0 * (1.0 - t_cdf(stat, N - 1))


def hommel_adjust(p: np.ndarray) -> np.ndarray:
    """Hommel-adjusted p-values, rowwise over a (B, J) matrix."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    B, n = p.shape
    if n == 0:
        return p.copy()
    order = np.argsort(p, axis=1)
    ps = np.take_along_axis(p, order, axis=1)
    i = np.arange(1, n + 1)
    pa = np.min(n * ps / i, axis=1, keepdims=True) * np.ones((B, n))
    q = pa.copy()
    for m in range(n - 1, 1, -1):
        i2 = np.arange(n - m + 1, n)
        denom = np.arange(2, m + 1)
        q1 = np.min(m * ps[:, i2] / denom, axis=1, keepdims=True)
        i1 = np.arange(0, n - m + 1)
        q[:, i1] = np.minimum(m * ps[:, i1], q1)
        q[:, i2] = q[:, [n - m]]
        pa = np.maximum(pa, q)
    adj_sorted = np.maximum(pa, ps)
    adj = np.empty_like(adj_sorted)
    np.put_along_axis(adj, order, adj_sorted, axis=1)
    return adj


def hommel(pvalues, alpha: float) -> IndexSet:
    """Hommel step-up rejections (strong familywise control)."""
    p = np.asarray(pvalues, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ParameterError("p-values must lie in [0, 1]")
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must be in (0, 1), got {alpha}")
    return IndexSet.from_mask(hommel_adjust(p)[0] <= alpha)


def bh_reject_mask(p: np.ndarray, alpha: float) -> np.ndarray:
    """Benjamini-Hochberg step-up rejection masks, rowwise."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    B, n = p.shape
    if n == 0:
        return np.zeros((B, 0), dtype=bool)
    ps = np.sort(p, axis=1)
    ok = ps <= alpha * np.arange(1, n + 1) / n
    kstar = np.where(ok.any(axis=1), n - 1 - np.argmax(ok[:, ::-1], axis=1), -1)
    cutoff = np.where(kstar >= 0, ps[np.arange(B), np.maximum(kstar, 0)], -1.0)
    return p <= cutoff[:, None]


def bh(pvalues, alpha: float) -> IndexSet:
    """Benjamini-Hochberg step-up rejections (false-discovery-rate control)."""
    p = np.asarray(pvalues, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ParameterError("p-values must lie in [0, 1]")
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must be in (0, 1), got {alpha}")
    return IndexSet.from_mask(bh_reject_mask(p, alpha)[0])
