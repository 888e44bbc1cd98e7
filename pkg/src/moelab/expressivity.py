"""Combinatorial diversity and nonlinear-budget measures.

Expert-choice counts C(N, K) overflow quickly, so everything is kept in
log space (natural log).  Scaling both N and K by an integer alpha never
shrinks diversity: C(alpha N, alpha K) >= C(N, K) ** alpha, reported
here as log_gain >= 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

# Largest n routed through exact integer binomials; beyond this, log-gamma.
EXACT_BINOMIAL_LIMIT = 60


def log_binomial_gamma(n: int, k: int) -> float:
    """ln C(n, k) via log-gamma, valid for arbitrarily large counts."""
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def log_binomial(n: int, k: int) -> float:
    """ln C(n, k); exact integer arithmetic for small n, log-gamma above."""
    if not (isinstance(n, int) and isinstance(k, int)):
        raise DomainError(f"counts must be integers, got {n!r}, {k!r}")
    if k < 0 or n < 0 or k > n:
        raise DomainError(f"need 0 <= k <= n, got n={n}, k={k}")
    if n <= EXACT_BINOMIAL_LIMIT:
        return math.log(math.comb(n, k))
    return log_binomial_gamma(n, k)


@dataclass(frozen=True)
class DiversityReport:
    """Log-space diversity of expert mixtures before and after alpha-scaling."""

    n: int
    k: int
    alpha: int
    log_binom_base: float    # ln C(N, K)
    log_binom_scaled: float  # ln C(alpha N, alpha K)
    log_gain: float          # scaled - alpha * base, >= 0 up to rounding
    u_eff: int | None        # K * m when the FFN width is known

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "alpha": self.alpha,
            "log_binom_base": self.log_binom_base,
            "log_binom_scaled": self.log_binom_scaled,
            "log_gain": self.log_gain,
            "u_eff": self.u_eff,
        }


def diversity_gain(n: int, k: int, alpha: int, m: int | None = None
                   ) -> DiversityReport:
    """Diversity gained by scaling experts and top-k by the same factor."""
    if not isinstance(alpha, int) or alpha < 1:
        raise DomainError(f"alpha must be an integer >= 1, got {alpha!r}")
    if not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= n, got n={n}, k={k}")
    base = log_binomial(n, k)
    scaled = log_binomial(alpha * n, alpha * k)
    return DiversityReport(
        n=n, k=k, alpha=alpha,
        log_binom_base=base,
        log_binom_scaled=scaled,
        log_gain=scaled - alpha * base,
        u_eff=k * m if m is not None else None,
    )


def effective_nonlinear_budget(k_active: int, m: int) -> int:
    """Active nonlinear units per token: top-k count times FFN width."""
    if k_active <= 0 or m <= 0:
        raise DomainError(f"need positive counts, got k={k_active}, m={m}")
    return k_active * m
