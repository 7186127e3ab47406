"""Asymptotic distribution of estimated portfolio weights.

In the high-dimensional limit the weight of asset i is distributed as a
Gaussian of asset-specific spread, truncated to the positive axis around
one center and to the negative axis around another (the two centers
coincide when no penalty separates the sides), plus a point mass at
exactly zero for the probability that the asset is eliminated from the
portfolio. Pooling over assets gives the mixture this module evaluates,
integrates, and samples.

Sampling needs no rejection loop. For one draw with centers (a, b),
spread s and a shared standard normal z:

    y1 = a + s*z   is emitted if y1 > 0,
    y2 = b + s*z   is emitted if y1 <= 0 and y2 < 0,
    0              otherwise.

Because b >= a, the three events partition the z axis at -a/s and -b/s,
which reproduces the truncated densities and the atom exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .special import norm_cdf, norm_cdf_int, norm_pdf
from .theory import PerAssetLaw, ReplicaSolution

__all__ = [
    "WeightMixture",
    "build_mixture",
    "elimination_probabilities",
    "sample_weights",
]


@dataclass(frozen=True)
class WeightMixture:
    """Pooled weight law: a zero atom of mass `atom` plus per-asset Gaussians.

    `laws` holds one PerAssetLaw per asset; the continuous part carries
    total mass 1 - atom. A law with center_neg = +inf has no negative
    branch (hard short-sale ban).
    """

    atom: float
    laws: tuple[PerAssetLaw, ...]

    def __post_init__(self):
        if not 0.0 <= self.atom <= 1.0:
            raise ValueError("atom mass must lie in [0, 1]")
        if len(self.laws) == 0:
            raise ValueError("mixture needs at least one component")
        if any(l.spread <= 0 for l in self.laws):
            raise ValueError("component spreads must be positive")

    @property
    def n(self) -> int:
        return len(self.laws)

    def _arrays(self):
        a = np.array([l.center_pos for l in self.laws])
        b = np.array([l.center_neg for l in self.laws])
        s = np.array([l.spread for l in self.laws])
        return a, b, s

    def density(self, w):
        """Continuous part of the pooled density (the atom is not included)."""
        w = np.asarray(w, dtype=float)
        scalar = w.ndim == 0
        w2 = np.atleast_1d(w)[:, None]
        a, b, s = self._arrays()
        pos = np.where(w2 > 0, norm_pdf((w2 - a) / s) / s, 0.0)
        with np.errstate(invalid="ignore"):
            neg = np.where(w2 < 0, norm_pdf((w2 - b) / s) / s, 0.0)
        out = np.mean(pos + neg, axis=1)
        return float(out[0]) if scalar else out

    def bin_mass(self, lo: float, hi: float) -> float:
        """Continuous mass on [lo, hi); the zero atom is never included."""
        if hi <= lo:
            return 0.0
        a, b, s = self._arrays()
        mass = 0.0
        p_lo, p_hi = max(lo, 0.0), max(hi, 0.0)
        if p_hi > p_lo:
            mass += float(
                np.mean(norm_cdf((p_hi - a) / s) - norm_cdf((p_lo - a) / s))
            )
        n_lo, n_hi = min(lo, 0.0), min(hi, 0.0)
        if n_hi > n_lo:
            mass += float(
                np.mean(norm_cdf((n_hi - b) / s) - norm_cdf((n_lo - b) / s))
            )
        return mass

    def mean(self) -> float:
        """Analytic mean of the continuous part.

        Per asset the truncated-Gaussian first moments sum to
        s * (Psi(a/s) - Psi(-b/s)) with Psi the integrated cdf; at a saddle
        point this averages to exactly 1, the budget per asset.
        """
        a, b, s = self._arrays()
        pos = s * norm_cdf_int(a / s)
        banned = np.isinf(b)
        # evaluate the negative branch only at finite centers; -inf would
        # produce nan inside the discarded arm of a plain where()
        neg = -s * norm_cdf_int(-np.where(banned, 0.0, b) / s)
        neg = np.where(banned, 0.0, neg)
        return float(np.mean(pos + neg))

    def branch_masses(self) -> tuple[float, float]:
        """(positive, negative) continuous masses; they sum to 1 - atom."""
        a, b, s = self._arrays()
        pos = float(np.mean(norm_cdf(a / s)))
        neg = float(np.mean(norm_cdf(-b / s)))
        return pos, neg


def build_mixture(sol: ReplicaSolution) -> WeightMixture:
    """Pooled weight mixture of a saddle-point solution."""
    return WeightMixture(atom=sol.n0, laws=sol.per_asset)


def elimination_probabilities(sol: ReplicaSolution) -> np.ndarray:
    """Per-asset probability of a weight condensed exactly at zero.

    Equals Phi(-sqrt(lam)/sigma_i) under a short-sale ban: strictly
    increasing in sigma_i and bounded by 1/2.
    """
    return np.array([law.elim_prob for law in sol.per_asset])


def sample_weights(mixture: WeightMixture, size: int, seed) -> np.ndarray:
    """Draw `size` weights from the pooled mixture, exactly in distribution.

    `seed` may be anything numpy's default_rng accepts (int, SeedSequence,
    Generator). Assets are picked uniformly; the classification trick in
    the module docstring converts one Gaussian per draw into the truncated
    pair plus atom without rejection.
    """
    gen = np.random.default_rng(seed)
    a, b, s = mixture._arrays()
    idx = gen.integers(0, mixture.n, size=size)
    z = gen.standard_normal(size)
    y1 = a[idx] + s[idx] * z
    y2 = b[idx] + s[idx] * z
    return np.where(y1 > 0, y1, np.where(y2 < 0, y2, 0.0))
