"""Analysis constants, step-size caps, potential coefficients and error floors.

Everything here is a closed-form function of the smoothness constants, the
penalty parameter and the network's rho. The caps are deliberately
conservative: runs that use larger steps (as the shipped experiments do)
still report them for auditability.
"""

import logging
import math

from typing_extensions import Literal, NamedTuple

from distributed_bilevel.errors import InvalidNetworkError
from distributed_bilevel.state_problem import SmoothnessInput
from distributed_bilevel.state_solver import AnalysisConstants, StepSizes

logger = logging.getLogger(__name__)

D4Variant = Literal["printed", "p2"]


class StepSizeCaps(NamedTuple):
    """Largest admissible (alpha, beta, gamma) under the convergence rules."""

    alpha_max: float
    beta_max: float
    gamma_max: float


class PotentialCoefficients(NamedTuple):
    """Weights of the potential function V."""

    d0: float
    d1: float
    d2: float
    d3: float
    d4: float
    d5: float


class ErrorFloors(NamedTuple):
    """Penalty floor C^2 and heterogeneity floor B^2 of the rate bound."""

    C_sq: float
    B_sq: float

# ===== DERIVED CONSTANTS =====

def penalty_threshold(s: SmoothnessInput) -> float:
    """Smallest lambda for which the penalty gap bounds apply (exclusive)."""
    return 2.0 * s.L_f1 / s.mu_g


def derive_constants(s: SmoothnessInput, lam: float) -> AnalysisConstants:
    """Compute every constant of the convergence analysis.

    Args:
        s: Smoothness constants of the local objectives
        lam: Penalty parameter

    Returns:
        AnalysisConstants; ``penalty_threshold_met`` is False (and a warning is
        logged) when lam <= 2 L_f1 / mu_g
    """
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    mu, Lf, Lg, Lg2, Cfy = s.mu_g, s.L_f1, s.L_g1, s.L_g2, s.C_fy

    L_ystar = Lg / mu
    C_in = 2.0 * Cfy / mu
    mu_lambda = lam * mu / 2.0
    L_lambda = Lf + lam * Lg
    w_gamma = 0.5 * mu * Lg / (mu + Lg)
    u_beta = mu / (4.0 * Lg)
    tail = 96.0 / u_beta**2 + 24.0

    met = lam > penalty_threshold(s)
    if not met:
        logger.warning("lambda=%g does not exceed 2 L_f1 / mu_g = %g; penalty gap bounds do not apply", lam, penalty_threshold(s))

    return AnalysisConstants(
        lam=lam,
        L_f1=Lf,
        L_g1=Lg,
        kappa=max(Lf, Lg, Cfy) / mu,
        L=(Lf + Lf * Lg2 / mu + Cfy * Lg2 / mu + Cfy * Lg2**2 / mu**2) * (1.0 + L_ystar),
        L_ystar=L_ystar,
        C_in=C_in,
        C_ou=C_in * (1.0 + Lg / mu) * (Lf + Lg2 * C_in / 2.0),
        mu_lambda=mu_lambda,
        L_lambda=L_lambda,
        L_ystar_lambda=2.0 * L_lambda / (lam * mu),
        U_lambda_sq=Lf**2 + lam**2 * Lg**2,
        w_gamma=w_gamma,
        w_beta=0.5 * mu_lambda * L_lambda / (mu_lambda + L_lambda),
        u_beta=u_beta,
        p1=(96.0 * Lg**2 / w_gamma**2 + tail) * Lg**2,
        p2=tail * Lg**2,
        p3=(48.0 / u_beta**2 + 12.0) * Lg**2,
        penalty_threshold_met=met,
    )

# ===== STEP-SIZE RULES =====

def gamma_terms(c: AnalysisConstants, s: SmoothnessInput, rho: float) -> list[float]:
    """Candidate upper bounds whose minimum is gamma_max."""
    gap, Lg, mu = 1.0 - rho, s.L_g1, s.mu_g
    return [
        2.0 / (mu + Lg),
        0.5 * (mu + Lg) / (mu * Lg),
        gap / (8.0 * math.sqrt(c.p3)),
        gap * math.sqrt(c.p1) / (24.0 * Lg * math.sqrt(c.p3)),
        gap / (16.0 * Lg),
    ]


def beta_terms(c: AnalysisConstants, s: SmoothnessInput, rho: float, lam: float) -> list[float]:
    """Candidate upper bounds whose minimum is beta_max."""
    gap, Lg, mu = 1.0 - rho, s.L_g1, s.mu_g
    return [
        1.0 / (lam * Lg),
        # read as one candidate: 1/2 * 1/(L_f1 + lam L_g1) plus 1/(lam mu_g)
        0.5 / (s.L_f1 + lam * Lg) + 1.0 / (lam * mu),
        gap / (10.0 * lam * math.sqrt(c.p2)),
        gap * math.sqrt(c.p1) / (48.0 * Lg * lam * math.sqrt(c.p2)),
        gap / (32.0 * Lg * lam),
    ]


def alpha_terms(c: AnalysisConstants, s: SmoothnessInput, rho: float, lam: float, beta: float, gamma: float) -> list[float]:
    """Candidate upper bounds whose minimum is alpha_max at the given beta and gamma."""
    gap, Lg, mu = 1.0 - rho, s.L_g1, s.mu_g
    return [
        1.0 / (2.0 * c.L),
        gap ** (2.0 / 3.0) / (8.0 * lam ** (2.0 / 3.0) * c.p1 ** (1.0 / 3.0)),
        c.w_gamma * gamma / (16.0 * c.L_ystar * lam),
        mu**2 * beta / (80.0 * Lg**2),
        gap / (5.0 * lam * math.sqrt(c.p1)),
        gap * math.sqrt(c.p3) / (32.0 * Lg * lam * math.sqrt(c.p1)),
        gap / (54.0 * Lg * lam),
    ]


def stepsize_caps(c: AnalysisConstants, s: SmoothnessInput, rho: float, lam: float) -> StepSizeCaps:
    """Largest step sizes admitted by the convergence rules.

    alpha's rule references beta and gamma, so it is evaluated at
    beta = beta_max and gamma = gamma_max.

    Raises:
        InvalidNetworkError: if rho is outside [0, 1)
    """
    if not 0.0 <= rho < 1.0:
        raise InvalidNetworkError(f"step-size rules need rho in [0, 1), got {rho}")
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    gamma_max = min(gamma_terms(c, s, rho))
    beta_max = min(beta_terms(c, s, rho, lam))
    alpha_max = min(alpha_terms(c, s, rho, lam, beta_max, gamma_max))
    return StepSizeCaps(alpha_max, beta_max, gamma_max)


def auto_stepsizes(caps: StepSizeCaps, lam: float, K: int, safety: float) -> StepSizes:
    """Scale the caps by a safety factor in (0, 1)."""
    if not 0.0 < safety < 1.0:
        raise ValueError(f"safety factor must lie in (0, 1), got {safety}")
    return StepSizes(
        alpha=safety * caps.alpha_max,
        beta=safety * caps.beta_max,
        gamma=safety * caps.gamma_max,
        lam=lam,
        K=K,
    )


def exceeded_caps(p: StepSizes, caps: StepSizeCaps) -> list[str]:
    """Names of the step sizes larger than their caps."""
    pairs = (("alpha", p.alpha, caps.alpha_max), ("beta", p.beta, caps.beta_max), ("gamma", p.gamma, caps.gamma_max))
    return [name for name, value, cap in pairs if value > cap]

# ===== POTENTIAL AND FLOORS =====

def _scaled(numerator: float, denominator: float) -> float:
    if numerator == 0.0:
        return 0.0
    return numerator / denominator if denominator else math.inf


def potential_coefficients(p: StepSizes, c: AnalysisConstants, rho: float, d4_variant: D4Variant = "printed") -> PotentialCoefficients:
    """Weights d0..d5 of V.

    ``d4_variant="printed"`` weights the y-consensus error with p3 like the
    z-consensus error; ``"p2"`` uses p2 instead.
    """
    gap = 1.0 - rho
    lam, alpha = p.lam, p.alpha
    d4_p = c.p3 if d4_variant == "printed" else c.p2
    return PotentialCoefficients(
        d0=2.0,
        d1=_scaled(12.0 * c.U_lambda_sq * alpha, c.w_beta * p.beta),
        d2=_scaled(12.0 * c.L_g1**2 * lam**2 * alpha, c.w_gamma * p.gamma),
        d3=4.0 * c.p1 * alpha * lam**2 / gap,
        d4=4.0 * d4_p * alpha * lam**2 / gap,
        d5=4.0 * c.p3 * alpha * lam**2 / gap,
    )


def error_floors(p: StepSizes, c: AnalysisConstants, rho: float, b_f_sq: float, b_g_sq: float) -> ErrorFloors:
    """Penalty floor C^2 and heterogeneity floor B^2."""
    gap_sq = (1.0 - rho) ** 2
    lam, alpha, beta, gamma = p.lam, p.alpha, p.beta, p.gamma
    L_g1 = c.L_g1
    C_sq = (
        2.0 * c.C_ou**2 / lam**2
        + 864.0 * c.C_in**2 * L_g1**2 * c.p1 * lam**2 * alpha**2 / gap_sq
        + 576.0 * c.C_in**2 * L_g1**2 * c.p2 * lam**2 * beta**2 / gap_sq
    )
    B_sq = (
        24.0 * c.p1 * lam**2 * alpha**2 * b_f_sq / gap_sq
        + 48.0 * c.p2 * lam**2 * beta**2 * (b_f_sq + lam**2 * b_g_sq) / gap_sq
        + 24.0 * c.p3 * lam**2 * gamma**2 * b_g_sq / gap_sq
    )
    return ErrorFloors(C_sq, B_sq)

# ===== HORIZON SCALINGS =====

def corollary1_scaling(base: StepSizes, K0: int, K: int) -> StepSizes:
    """Rescale a tuned step-size bundle from horizon K0 to K.

    lambda grows like K^(1/6); alpha, beta and gamma shrink like K^(-2/3),
    K^(-1/2) and K^(-1/3).
    """
    if K0 <= 0 or K <= 0:
        raise ValueError("horizons must be positive")
    ratio = K / K0
    return StepSizes(
        alpha=base.alpha * ratio ** (-2.0 / 3.0),
        beta=base.beta * ratio ** (-0.5),
        gamma=base.gamma * ratio ** (-1.0 / 3.0),
        lam=base.lam * ratio ** (1.0 / 6.0),
        K=K,
    )


def corollary2_scaling(base: StepSizes, K0: int, K: int) -> StepSizes:
    """Min-max horizon scaling: every step like K^(-1/3), lambda held fixed."""
    if K0 <= 0 or K <= 0:
        raise ValueError("horizons must be positive")
    factor = (K / K0) ** (-1.0 / 3.0)
    return StepSizes(alpha=base.alpha * factor, beta=base.beta * factor, gamma=base.gamma * factor, lam=base.lam, K=K)
