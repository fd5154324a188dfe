#    Copyright (C) 2026  The clickshield developers
#
#    This program is free software: you can redistribute it and/or modify
#    it under the terms of the GNU General Public License as published by
#    the Free Software Foundation, either version 3 of the License, or
#    (at your option) any later version.
#
#    This program is distributed in the hope that it will be useful,
#    but WITHOUT ANY WARRANTY; without even the implied warranty of
#    MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#    GNU General Public License for more details.
#
#    You should have received a copy of the GNU General Public License
#    along with this program.  If not, see <http://www.gnu.org/licenses/>.
"""
poisson_model.py - Statistics of repeated clicks from a NAT address pool.

C clicks spread uniformly over A addresses are modelled as a Poisson process
with intensity lambda = C/A per address. The expected number of clicks beyond
the first one per address is N(lambda) = lambda + exp(-lambda) - 1, and the
fraction of genuine clicks lost when every repeat is ignored is the loss
factor L = N * A / C, bounded by 0.5 * C/A.

All functions are pure and safe to call from any thread.
"""

import math
from dataclasses import dataclass
from typing import Union

from .exceptions import ModelDomainError
from .shield_constants import ShieldConstants

__all__ = [
    "ModelParams",
    "Lambda",
    "lambda_of",
    "expected_repeats",
    "expected_repeats_series",
    "taylor_remainder",
    "loss_factor",
    "loss_upper_bound",
    "should_discard_repeat",
    "max_discardable_clicks",
    "expected_multi_click_fraction",
]


@dataclass(frozen=True)
class ModelParams:
    """Address pool cardinality A and click count C of one net."""

    pool_size: int
    click_count: int

    def __post_init__(self):
        if self.pool_size < 1:
            raise ModelDomainError("pool_size must be >= 1, got %r" % self.pool_size)
        if self.click_count < 0:
            raise ModelDomainError(
                "click_count must be >= 0, got %r" % self.click_count
            )


@dataclass(frozen=True)
class Lambda:
    """Dimensionless Poisson intensity C/A."""

    value: float

    def __post_init__(self):
        if not math.isfinite(self.value) or self.value < 0:
            raise ModelDomainError(
                "lambda must be finite and >= 0, got %r" % self.value
            )

    def __float__(self):
        return self.value


LambdaLike = Union[Lambda, float, int]


def _lam(lam: LambdaLike) -> float:
    if isinstance(lam, Lambda):
        return lam.value
    return Lambda(float(lam)).value


def lambda_of(params: ModelParams) -> Lambda:
    """Returns the intensity C/A of a net."""
    return Lambda(params.click_count / params.pool_size)


def _repeats_series(lam: float) -> float:
    # N(lambda) = sum_{k>=2} (-1)^k lambda^k / k!, alternating and decreasing
    # for lambda < 1, summed from the smallest term upwards
    terms = []
    term = 1.0
    for k in range(1, ShieldConstants.SERIES_TERMS + 1):
        term *= lam / k
        if k >= 2:
            terms.append(term if k % 2 == 0 else -term)
        if term == 0.0:
            break
    return math.fsum(reversed(terms))


def expected_repeats(lam: LambdaLike) -> float:
    """Expected number of clicks beyond the first one per address,
    N(lambda) = lambda + exp(-lambda) - 1.

    Args:
        lam: Poisson intensity C/A, as a Lambda or a plain number.

    Returns:
        float: N(lambda), never negative.
    """
    lam = _lam(lam)
    if lam == 0.0:
        return 0.0
    if lam < ShieldConstants.SERIES_CUTOVER:
        return _repeats_series(lam)
    return max(0.0, lam + math.expm1(-lam))


def expected_repeats_series(lam: LambdaLike, cutoff: int) -> float:
    """Truncated sum over c = 2..cutoff of (c-1) * P(clicks = c).

    Successive Poisson probabilities are built with
    p(c+1) = p(c) * lambda / (c+1), so no factorial or large power is ever
    formed. Used as the independent check of expected_repeats.

    Args:
        lam: Poisson intensity.
        cutoff: Largest click count included, at least 2.

    Raises:
        ModelDomainError: If cutoff < 2.
    """
    lam = _lam(lam)
    if cutoff < 2:
        raise ModelDomainError("cutoff must be >= 2, got %r" % cutoff)
    if lam == 0.0:
        return 0.0
    p = lam * lam * math.exp(-lam) / 2.0
    parts = []
    for c in range(2, cutoff + 1):
        parts.append((c - 1) * p)
        p *= lam / (c + 1)
    return math.fsum(parts)


def taylor_remainder(lam: LambdaLike) -> float:
    """Gap between the quadratic approximation and the exact value,
    0.5 * lambda**2 - N(lambda)."""
    lam = _lam(lam)
    if lam == 0.0:
        return 0.0
    if lam < ShieldConstants.SERIES_CUTOVER:
        # lambda^3/3! - lambda^4/4! + ... without subtracting two close values
        return math.fsum(_remainder_terms(lam))
    return 0.5 * lam * lam - expected_repeats(lam)


def _remainder_terms(lam: float):
    terms = []
    term = 1.0
    for k in range(1, ShieldConstants.SERIES_TERMS + 1):
        term *= lam / k
        if k >= 3:
            terms.append(term if k % 2 == 1 else -term)
        if term == 0.0:
            break
    return reversed(terms)


def loss_factor(params: ModelParams) -> float:
    """Fraction of genuine clicks lost if every repeated click from the net
    is ignored, L(A, C) = N(C/A) * A / C.

    Raises:
        ModelDomainError: If click_count is 0, the loss is undefined.
    """
    if params.click_count == 0:
        raise ModelDomainError("loss factor is undefined for zero clicks")
    lam = lambda_of(params).value
    return expected_repeats(lam) / lam


def loss_upper_bound(params: ModelParams) -> float:
    """First order bound of the loss factor, 0.5 * C/A."""
    return 0.5 * params.click_count / params.pool_size


def _check_threshold(threshold: float):
    if not 0.0 < threshold < 1.0:
        raise ModelDomainError("threshold must be in (0, 1), got %r" % threshold)


def should_discard_repeat(params: ModelParams, threshold: float) -> bool:
    """Threshold rule of the click handler: a repeated click is discarded
    while 0.5 * C/A stays strictly below the threshold. C counts the prior
    clicks only. A tie means accept.

    Raises:
        ModelDomainError: If threshold is not in (0, 1).
    """
    _check_threshold(threshold)
    return loss_upper_bound(params) < threshold


def max_discardable_clicks(pool_size: int, threshold: float) -> int:
    """Largest prior click count C for which repeats are still discarded.

    Args:
        pool_size: Address pool cardinality A.
        threshold: Loss budget in (0, 1).

    Returns:
        int: C such that should_discard_repeat holds for C and fails for C+1.
    """
    _check_threshold(threshold)
    if pool_size < 1:
        raise ModelDomainError("pool_size must be >= 1, got %r" % pool_size)

    def discards(c):
        return 0.5 * c / pool_size < threshold

    c = max(0, math.ceil(2.0 * threshold * pool_size) - 1)
    # the closed form can be off by one through rounding, settle on the predicate
    while discards(c + 1):
        c += 1
    while c > 0 and not discards(c):
        c -= 1
    return c


def expected_multi_click_fraction(lam: LambdaLike) -> float:
    """Probability that one address originates two or more clicks,
    1 - exp(-lambda) * (1 + lambda)."""
    lam = _lam(lam)
    if lam == 0.0:
        return 0.0
    # 1 - e^-l - l e^-l = -expm1(-l) - l e^-l
    return max(0.0, -math.expm1(-lam) - lam * math.exp(-lam))
