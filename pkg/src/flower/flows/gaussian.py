"""Gaussian plug-in estimates of latent/condition dependence.

Fits a joint Gaussian to sampled (z, c) pairs and reports two numbers:
the average KL from the conditional latent law to the standard normal
prior, and the mutual information between z and c. For Gaussians the
identity E_c[KL(p(z|c) || q)] = I(z; c) + KL(p(z) || q) makes the KL an
upper bound on the MI, and the plug-in estimators inherit the bound up
to round-off because both come from the same sample covariance.
"""

from __future__ import annotations

import numpy as np


class SingularCovarianceError(np.linalg.LinAlgError):
    """Sample covariance is numerically singular."""


def _logdet(cov: np.ndarray, label: str) -> float:
    sign, value = np.linalg.slogdet(cov)
    if sign <= 0 or not np.isfinite(value):
        raise SingularCovarianceError(
            f"singular {label} covariance; add jitter to the samples "
            "(e.g. 1e-6 * standard normal) or use more of them"
        )
    return float(value)


def gaussian_kl_to_standard(mean: np.ndarray, cov: np.ndarray) -> float:
    """KL(N(mean, cov) || N(0, I)) in nats."""
    mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
    cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
    d = mean.shape[0]
    return 0.5 * (np.trace(cov) + mean @ mean - d - _logdet(cov, "latent"))


def mi_upper_bound_check(z: np.ndarray, c: np.ndarray, tolerance: float = 1e-6):
    """Estimate (kl, mi) from jointly sampled batches and verify kl >= mi.

    Both quantities are Gaussian plug-in estimates in nats. Raises
    SingularCovarianceError when a covariance degenerates and
    AssertionError if the bound fails beyond `tolerance` (it cannot, short
    of numerical trouble).
    """
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    c = np.atleast_2d(np.asarray(c, dtype=np.float64))
    if z.ndim != 2 or c.ndim != 2 or z.shape[0] != c.shape[0]:
        raise ValueError(f"z and c must be (n, dim) with equal n, "
                         f"got {z.shape} and {c.shape}")
    if z.shape[0] < z.shape[1] + c.shape[1] + 2:
        raise ValueError("too few samples for a full-rank joint covariance")
    dz = z.shape[1]
    joint = np.concatenate([z, c], axis=1)
    mu = joint.mean(axis=0)
    cov = np.cov(joint, rowvar=False)
    szz = cov[:dz, :dz]
    scc = cov[dz:, dz:]
    szc = cov[:dz, dz:]

    logdet_joint = _logdet(cov, "joint")
    logdet_zz = _logdet(szz, "latent")
    logdet_cc = _logdet(scc, "condition")
    mi = 0.5 * (logdet_zz + logdet_cc - logdet_joint)

    # E_c KL(p(z|c) || N(0,I)) with p(z|c) from the joint Gaussian:
    # conditional covariance via the Schur complement, and the expected
    # squared conditional mean picks up the explained-variance term.
    cross = szc @ np.linalg.solve(scc, szc.T)
    cond_cov = szz - cross
    mu_z = mu[:dz]
    logdet_cond = logdet_joint - logdet_cc  # log det of the Schur complement
    kl = 0.5 * (np.trace(cond_cov) + mu_z @ mu_z + np.trace(cross) - dz - logdet_cond)

    if kl + tolerance < mi:
        raise AssertionError(
            f"KL estimate {kl:.6f} fell below MI estimate {mi:.6f}; "
            "this indicates numerical breakdown of the plug-in covariance"
        )
    return float(kl), float(mi)
