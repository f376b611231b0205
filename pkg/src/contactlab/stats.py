"""Small statistical helpers shared by estimators and checks."""
from __future__ import annotations

import math

import numpy as np
from scipy import stats


def binom_se(p: float, m: int) -> float:
    if m <= 0:
        return float("nan")
    return math.sqrt(max(p * (1.0 - p), 0.0) / m)


def pooled_se(*ses: float) -> float:
    return math.sqrt(sum(s * s for s in ses))


def atom_probs(atoms, k: int) -> np.ndarray:
    """Empirical law over ``k`` atoms from integer atom codes."""
    atoms = np.asarray(atoms, dtype=np.int64).ravel()
    if atoms.size == 0:
        return np.zeros(k)
    return np.bincount(atoms, minlength=k)[:k] / atoms.size


def plugin_bias(k: int, m: int) -> float:
    """Size of the upward bias of a plug-in TV over ``k`` atoms and ``m`` samples."""
    if m <= 0:
        return 1.0
    return 0.5 * math.sqrt(k / m)


def tv(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def tv_with_se(p, m_p: int, q, m_q: int | None) -> tuple[float, float]:
    """Plug-in TV between two empirical laws and a delta-method std error.

    ``m_q=None`` treats ``q`` as exact.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    s = np.sign(p - q)
    val = 0.5 * float(np.abs(p - q).sum())
    var = (float((s * s * p).sum()) - float((s * p).sum()) ** 2) / max(m_p, 1)
    if m_q:
        var += (float((s * s * q).sum()) - float((s * q).sum()) ** 2) / m_q
    return val, 0.5 * math.sqrt(max(var, 0.0))


def batch_means(x, n_batches: int = 20) -> tuple[float, float, int]:
    """Mean of a stationary series, std error of the mean by batch means.

    Returns ``(mean, se, batch_size)``.
    """
    x = np.asarray(x, dtype=float)
    b = len(x) // n_batches
    if b < 1:
        raise ValueError("series too short for the requested batches")
    xb = x[: b * n_batches].reshape(n_batches, b).mean(axis=1)
    return float(x.mean()), float(xb.std(ddof=1) / math.sqrt(n_batches)), b


def linfit(x, y, w=None) -> dict:
    """Weighted least-squares line with slope std error and R^2."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones_like(x) if w is None else np.asarray(w, dtype=float)
    W = w.sum()
    xm = (w * x).sum() / W
    ym = (w * y).sum() / W
    sxx = (w * (x - xm) ** 2).sum()
    sxy = (w * (x - xm) * (y - ym)).sum()
    slope = sxy / sxx
    icpt = ym - slope * xm
    resid = y - (icpt + slope * x)
    ss_res = (w * resid ** 2).sum()
    ss_tot = (w * (y - ym) ** 2).sum()
    dof = max(len(x) - 2, 1)
    s2 = ss_res / dof
    return {
        "slope": float(slope),
        "intercept": float(icpt),
        "slope_se": float(math.sqrt(s2 / sxx)),
        "intercept_se": float(math.sqrt(s2 * (1.0 / W + xm * xm / sxx))),
        "r2": float(1.0 - ss_res / ss_tot) if ss_tot > 0 else 1.0,
        "residuals": resid,
    }


def two_proportion_test(k1: int, n1: int, k2: int, n2: int) -> tuple[float, float]:
    """Two-sided z-test for equal proportions; returns ``(z, p_value)``."""
    p = (k1 + k2) / (n1 + n2)
    se = math.sqrt(p * (1 - p) * (1 / n1 + 1 / n2))
    if se == 0:
        return 0.0, 1.0
    z = (k1 / n1 - k2 / n2) / se
    return z, float(2 * stats.norm.sf(abs(z)))


def chi2_two_sample(c1, c2) -> tuple[float, float]:
    """Chi-square homogeneity test of two count vectors over shared atoms."""
    c1 = np.asarray(c1, dtype=float)
    c2 = np.asarray(c2, dtype=float)
    used = (c1 + c2) > 0
    if used.sum() < 2:
        return 0.0, 1.0
    chi2, p, _, _ = stats.chi2_contingency(np.vstack([c1[used], c2[used]]), correction=False)
    return float(chi2), float(p)


def chi2_goodness(counts, probs) -> tuple[float, float]:
    counts = np.asarray(counts, dtype=float)
    probs = np.asarray(probs, dtype=float)
    m = counts.sum()
    exp = probs * m
    used = exp > 0
    if (counts[~used] > 0).any():
        return float("inf"), 0.0
    chi2 = float(((counts[used] - exp[used]) ** 2 / exp[used]).sum())
    dof = max(int(used.sum()) - 1, 1)
    return chi2, float(stats.chi2.sf(chi2, dof))
