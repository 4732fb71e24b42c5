"""Group-effect statistics for behavioral metrics: OLS, one-way ANOVA,
ANCOVA with a baseline covariate, partial eta-squared effect sizes, and
Tukey HSD pairwise comparisons via the studentized-range distribution.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

import numpy as np
from scipy import special
from scipy import stats as sstats

from .semantic import DimensionMismatch

ETA_SMALL = 0.01
ETA_MEDIUM = 0.06
ETA_LARGE = 0.14

_PERFECT_FIT_REL = 1e-12


class StatsError(Exception):
    pass


class RankDeficient(StatsError):
    pass


class DegenerateGroup(StatsError):
    pass


class NonPositiveMSE(StatsError):
    pass


class SlopesHeterogeneityWarning(UserWarning):
    """Covariate slope differs across groups; ANCOVA assumption is shaky."""


class Group(str, Enum):
    REFLECTED = "reflected"
    INTERACTED = "interacted"
    COLLABORATED = "collaborated"


GROUP_ORDER = (Group.REFLECTED, Group.INTERACTED, Group.COLLABORATED)


@dataclass(frozen=True)
class GroupAssignment:
    user_id: str
    group: Group


def assign_groups(edit_counts: dict[str, int]) -> list[GroupAssignment]:
    """Edit count 0 -> reflected, 1 -> interacted, >= 2 -> collaborated."""
    out = []
    for user_id in sorted(edit_counts):
        count = edit_counts[user_id]
        if count < 0:
            raise ValueError(f"negative edit count for {user_id}")
        group = (
            Group.REFLECTED
            if count == 0
            else Group.INTERACTED if count == 1 else Group.COLLABORATED
        )
        out.append(GroupAssignment(user_id=user_id, group=group))
    return out


def effect_band(eta_squared: float) -> str:
    if eta_squared < ETA_SMALL:
        return "negligible"
    if eta_squared < ETA_MEDIUM:
        return "small"
    if eta_squared < ETA_LARGE:
        return "medium"
    return "large"


def fit_ols(
    design_matrix: np.ndarray, response: np.ndarray
) -> tuple[np.ndarray, float, int]:
    """Least squares via SVD; returns (coefficients, RSS, residual df)."""
    X = np.asarray(design_matrix, dtype=float)
    y = np.asarray(response, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise DimensionMismatch(
            f"design {X.shape} incompatible with response {y.shape}"
        )
    n, p = X.shape
    if n <= p:
        raise RankDeficient(f"need more observations ({n}) than parameters ({p})")
    beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < p:
        raise RankDeficient(f"design matrix rank {rank} < {p} columns")
    rss = float(np.sum((y - X @ beta) ** 2))
    return beta, rss, n - p


# ---------------------------------------------------------------------------
# Studentized range distribution, evaluated by Gauss-Legendre quadrature.

_GL_NODES = 400
_gl_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n not in _gl_cache:
        _gl_cache[n] = np.polynomial.legendre.leggauss(n)
    return _gl_cache[n]


def _range_cdf_standard(w: np.ndarray, k: int) -> np.ndarray:
    """P(range of k iid standard normals <= w), vectorized over w."""
    nodes, weights = _gauss_legendre(_GL_NODES)
    lo, hi = -10.0, 10.0
    z = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
    wz = 0.5 * (hi - lo) * weights
    phi = np.exp(-0.5 * z**2) / math.sqrt(2 * math.pi)
    w = np.atleast_1d(np.asarray(w, dtype=float))
    inner = special.ndtr(z)[None, :] - special.ndtr(z[None, :] - w[:, None])
    inner = np.clip(inner, 0.0, 1.0)
    cdf = k * np.sum(wz * phi * inner ** (k - 1), axis=1)
    return np.clip(cdf, 0.0, 1.0)


def studentized_range_cdf(q: float, k: int, df: float) -> float:
    """CDF of the studentized range for k groups and df error degrees of
    freedom; df = math.inf uses the limiting normal-range form."""
    if k < 2:
        raise ValueError("studentized range needs k >= 2 groups")
    if q <= 0:
        return 0.0
    if math.isinf(df) or df > 1e7:
        return float(_range_cdf_standard(np.array([q]), k)[0])
    if df <= 0:
        raise ValueError("df must be positive")
    # Outer integral over s = sqrt(chi2_df / df); bounds trimmed where the
    # density mass is below ~1e-15.
    lo = math.sqrt(sstats.chi2.ppf(1e-16, df) / df)
    hi = math.sqrt(sstats.chi2.isf(1e-16, df) / df)
    nodes, weights = _gauss_legendre(_GL_NODES)
    s = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
    ws = 0.5 * (hi - lo) * weights
    log_density = (
        (1 - df / 2) * math.log(2)
        + (df / 2) * math.log(df)
        - special.gammaln(df / 2)
        + (df - 1) * np.log(s)
        - df * s**2 / 2
    )
    density = np.exp(log_density)
    cdf = float(np.sum(ws * density * _range_cdf_standard(q * s, k)))
    return min(max(cdf, 0.0), 1.0)


def studentized_range_sf(q: float, k: int, df: float) -> float:
    return 1.0 - studentized_range_cdf(q, k, df)


@dataclass(frozen=True)
class PairwiseComparison:
    group_a: Group
    group_b: Group
    q_statistic: float
    p_adjusted: float
    significant: bool


def tukey_hsd(
    adjusted_means: dict[Group, float],
    mse: float,
    group_sizes: dict[Group, int],
    df_error: int,
    alpha: float = 0.05,
) -> list[PairwiseComparison]:
    """Tukey HSD adjusted p-values for every group pair.

    Uses the Tukey-Kramer statistic q = |m_a - m_b| / sqrt(mse/2 (1/n_a +
    1/n_b)), referred to the studentized-range distribution with k groups.
    """
    if mse <= 0:
        raise NonPositiveMSE(f"mse must be positive, got {mse}")
    groups = [g for g in GROUP_ORDER if g in adjusted_means]
    groups += sorted(set(adjusted_means) - set(groups), key=lambda g: g.value)
    if len(groups) < 2:
        raise DegenerateGroup("pairwise comparison needs >= 2 groups")
    k = len(groups)
    out = []
    for i in range(k):
        for j in range(i + 1, k):
            a, b = groups[i], groups[j]
            se = math.sqrt(mse / 2 * (1 / group_sizes[a] + 1 / group_sizes[b]))
            q = abs(adjusted_means[a] - adjusted_means[b]) / se
            p = studentized_range_sf(q, k, df_error)
            out.append(
                PairwiseComparison(
                    group_a=a,
                    group_b=b,
                    q_statistic=q,
                    p_adjusted=p,
                    significant=p < alpha,
                )
            )
    return out


@dataclass(frozen=True)
class AncovaResult:
    metric: str
    f_statistic: float
    p_value: float
    eta_squared: float
    effect_band: str
    adjusted_group_means: dict[Group, float]
    pairwise: list[PairwiseComparison]
    group_sizes: dict[Group, int]
    slopes_homogeneity_p: float | None = None

    def to_json(self) -> dict:
        return {
            "metric": self.metric,
            "f_statistic": self.f_statistic,
            "p_value": self.p_value,
            "eta_squared": self.eta_squared,
            "effect_band": self.effect_band,
            "adjusted_group_means": {
                g.value: m for g, m in self.adjusted_group_means.items()
            },
            "pairwise": [
                {
                    "group_a": c.group_a.value,
                    "group_b": c.group_b.value,
                    "q": c.q_statistic,
                    "p_adjusted": c.p_adjusted,
                    "significant": c.significant,
                }
                for c in self.pairwise
            ],
            "group_sizes": {g.value: n for g, n in self.group_sizes.items()},
            "slopes_homogeneity_p": self.slopes_homogeneity_p,
        }


def _collect_arrays(
    outcome: dict[str, float],
    covariate: dict[str, float] | None,
    groups: Iterable[GroupAssignment],
) -> tuple[np.ndarray, np.ndarray | None, list[Group], np.ndarray]:
    assignments = sorted(groups, key=lambda a: a.user_id)
    if not assignments:
        raise DegenerateGroup("no group assignments")
    missing = [a.user_id for a in assignments if a.user_id not in outcome]
    if missing:
        raise ValueError(f"outcome missing for users: {missing[:5]}")
    if covariate is not None:
        missing = [a.user_id for a in assignments if a.user_id not in covariate]
        if missing:
            raise ValueError(f"covariate missing for users: {missing[:5]}")
    y = np.array([outcome[a.user_id] for a in assignments], dtype=float)
    x = (
        np.array([covariate[a.user_id] for a in assignments], dtype=float)
        if covariate is not None
        else None
    )
    present = [g for g in GROUP_ORDER if any(a.group == g for a in assignments)]
    labels = np.array([present.index(a.group) for a in assignments])
    if len(present) < 2:
        raise DegenerateGroup("need at least 2 groups")
    for idx, group in enumerate(present):
        if np.sum(labels == idx) < 2:
            raise DegenerateGroup(f"group {group.value} has fewer than 2 members")
    if x is not None and not np.all(np.isfinite(x)):
        raise ValueError("covariate must be finite")
    if not np.all(np.isfinite(y)):
        raise ValueError("outcome must be finite")
    return y, x, present, labels


def _dummies(labels: np.ndarray, k: int) -> np.ndarray:
    cols = [(labels == idx).astype(float) for idx in range(1, k)]
    return np.column_stack(cols) if cols else np.empty((len(labels), 0))


def _group_effect_fit(
    y: np.ndarray, x: np.ndarray | None, labels: np.ndarray, k: int
) -> tuple[float, float, float, np.ndarray, float, int]:
    """Shared F-test of group dummies on top of an optional covariate.

    Returns (F, p, partial eta^2, full-model coefficients, mse, df_error).
    """
    n = len(y)
    intercept = np.ones(n)
    base_cols = [intercept] if x is None else [intercept, x]
    X_reduced = np.column_stack(base_cols)
    X_full = np.column_stack(base_cols + [_dummies(labels, k)])

    _, rss_reduced, _ = fit_ols(X_reduced, y)
    beta_full, rss_full, df_full = fit_ols(X_full, y)
    df_diff = X_full.shape[1] - X_reduced.shape[1]

    ss_effect = max(rss_reduced - rss_full, 0.0)
    tss = float(np.sum((y - y.mean()) ** 2))
    eps = max(_PERFECT_FIT_REL * tss, 1e-300)
    if rss_full <= eps:
        if ss_effect <= eps:
            f_stat, p_value, eta = 0.0, 1.0, 0.0
        else:
            f_stat, p_value, eta = math.inf, 0.0, 1.0
    else:
        f_stat = (ss_effect / df_diff) / (rss_full / df_full)
        p_value = float(sstats.f.sf(f_stat, df_diff, df_full))
        eta = ss_effect / rss_reduced if rss_reduced > 0 else 0.0
    mse = rss_full / df_full
    return f_stat, p_value, eta, beta_full, mse, df_full


def _slopes_homogeneity_p(
    y: np.ndarray, x: np.ndarray, labels: np.ndarray, k: int
) -> float | None:
    dummies = _dummies(labels, k)
    X_base = np.column_stack([np.ones(len(y)), x, dummies])
    X_int = np.column_stack([X_base, dummies * x[:, None]])
    try:
        _, rss_base, _ = fit_ols(X_base, y)
        _, rss_int, df_int = fit_ols(X_int, y)
    except (RankDeficient, DimensionMismatch):
        return None
    df_diff = X_int.shape[1] - X_base.shape[1]
    if rss_int <= 0:
        return None
    f_stat = ((rss_base - rss_int) / df_diff) / (rss_int / df_int)
    return float(sstats.f.sf(max(f_stat, 0.0), df_diff, df_int))


def ancova(
    outcome: dict[str, float],
    covariate: dict[str, float],
    groups: Iterable[GroupAssignment],
    metric: str = "",
    alpha: float = 0.05,
) -> AncovaResult:
    """Group effect on an outcome, controlling for a baseline covariate.

    Compares y ~ 1 + covariate + group dummies against y ~ 1 + covariate;
    partial eta^2 is the incremental sum of squares over the reduced-model
    RSS. Adjusted group means are evaluated at the grand covariate mean. A
    zero-variance covariate is dropped, reducing to one-way ANOVA.
    """
    y, x, present, labels = _collect_arrays(outcome, covariate, groups)
    k = len(present)
    if x is not None and np.ptp(x) == 0.0:
        x = None  # constant covariate carries no information

    slopes_p = None
    if x is not None:
        slopes_p = _slopes_homogeneity_p(y, x, labels, k)
        if slopes_p is not None and slopes_p < alpha:
            warnings.warn(
                f"{metric or 'outcome'}: covariate slope differs across groups "
                f"(p={slopes_p:.4g}); adjusted means may mislead",
                SlopesHeterogeneityWarning,
                stacklevel=2,
            )

    f_stat, p_value, eta, beta, mse, df_error = _group_effect_fit(y, x, labels, k)

    base = beta[0] + (beta[1] * float(x.mean()) if x is not None else 0.0)
    offset = 2 if x is not None else 1
    adjusted = {present[0]: float(base)}
    for idx in range(1, k):
        adjusted[present[idx]] = float(base + beta[offset + idx - 1])
    sizes = {g: int(np.sum(labels == i)) for i, g in enumerate(present)}

    if mse > 0:
        pairwise = tukey_hsd(adjusted, mse, sizes, df_error, alpha=alpha)
    else:
        pairwise = [
            PairwiseComparison(a, b, 0.0, 1.0, False)
            for i, a in enumerate(present)
            for b in present[i + 1:]
        ]

    return AncovaResult(
        metric=metric,
        f_statistic=f_stat,
        p_value=p_value,
        eta_squared=eta,
        effect_band=effect_band(eta),
        adjusted_group_means=adjusted,
        pairwise=pairwise,
        group_sizes=sizes,
        slopes_homogeneity_p=slopes_p,
    )


def anova_oneway(
    outcome: dict[str, float],
    groups: Iterable[GroupAssignment],
    metric: str = "",
    alpha: float = 0.05,
) -> AncovaResult:
    """Standard one-way ANOVA with Tukey HSD pairwise comparisons."""
    y, _, present, labels = _collect_arrays(outcome, None, groups)
    k = len(present)
    f_stat, p_value, eta, beta, mse, df_error = _group_effect_fit(y, None, labels, k)
    means = {present[0]: float(beta[0])}
    for idx in range(1, k):
        means[present[idx]] = float(beta[0] + beta[idx])
    sizes = {g: int(np.sum(labels == i)) for i, g in enumerate(present)}
    if mse > 0:
        pairwise = tukey_hsd(means, mse, sizes, df_error, alpha=alpha)
    else:
        pairwise = [
            PairwiseComparison(a, b, 0.0, 1.0, False)
            for i, a in enumerate(present)
            for b in present[i + 1:]
        ]
    return AncovaResult(
        metric=metric,
        f_statistic=f_stat,
        p_value=p_value,
        eta_squared=eta,
        effect_band=effect_band(eta),
        adjusted_group_means=means,
        pairwise=pairwise,
        group_sizes=sizes,
        slopes_homogeneity_p=None,
    )


def significance_stars(p_value: float) -> str:
    if p_value < 0.001:
        return "***"
    if p_value < 0.01:
        return "**"
    if p_value < 0.05:
        return "*"
    return ""


def format_p(p_value: float) -> str:
    return f"{p_value:.4f}{significance_stars(p_value)}"
