"""Bayesian MMV-AMP for joint activity detection and channel estimation.

The recursion alternates, per iteration:

  1. pseudo-data      theta_i = Z^T conj(phi_i) + xhat_i
  2. MMSE denoising   xhat_i <- psi_i * R_i (R_i + Sigma)^-1 theta_i
  3. residual update  Z <- Y - Phi Xhat^T + (1/tau_p) Z Jbar^T   (Onsager)
  4. state evolution  Sigma <- sigma^2 I + (1/tau_p) sum_i [ (psi_i - psi_i^2) q_i q_i^H
                                                             + psi_i Sigma R_i (R_i+Sigma)^-1 ]

where psi_i is the posterior activity probability under the Gaussian-Bernoulli
prior, Jbar sums the Wirtinger Jacobians d eta/d theta of the denoiser, and
Sigma tracks the covariance of the effective noise theta_i - x_i.

Under the equivalent model the pseudo-data behaves as truth plus CN(0, Sigma)
noise, which is what makes both the detector and the closed-form error
probabilities exact in the large-system limit.

Per-user functions (`activity_posterior`, `denoise`, `denoiser_jacobian`) are
the reference implementations; `run_amp` uses a batched path over all users
that is pinned to them by tests.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import SingularMatrixError, StateError
from .linalg import logdet_psd, solve_psd
from .scenario import CovarianceSet, SystemConfig

# Exponent clamp for the posterior odds ratio: wide enough that psi saturates
# to exactly 0.0 / 1.0, narrow enough that exp() cannot overflow.
EXP_CLAMP = 500.0

# Residual blow-up factor that declares divergence.
DIVERGENCE_FACTOR = 1e6

SE_INIT_MODES = ("pilot-scaled", "literal")


@dataclass
class AmpState:
    """One AMP iterate."""

    X_hat: np.ndarray   # (M, N) effective-channel estimate
    Z: np.ndarray       # (tau_p, M) residual
    Sigma: np.ndarray   # (M, M) effective-noise covariance (state evolution)
    psi: np.ndarray     # (N,) posterior activity probabilities
    iter: int


@dataclass
class AmpReport:
    """Final state plus the per-iteration trajectory."""

    state: AmpState
    sigma_trajectory: list = field(default_factory=list)      # full (M, M) per iteration
    sigma_fro_trajectory: list = field(default_factory=list)  # Frobenius norms
    residual_norms: list = field(default_factory=list)
    converged: bool = False
    diverged: bool = False
    iterations: int = 0


def pseudo_data(Z: np.ndarray, phi: np.ndarray, X_hat: np.ndarray) -> np.ndarray:
    """Theta with columns theta_i = Z^T conj(phi_i) + xhat_i, shape (M, N)."""
    return Z.T @ np.conj(phi) + X_hat


def _check_epsilon(epsilon: float):
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"epsilon must be in (0, 1], got {epsilon}")


def _xi_times(theta: np.ndarray, R: np.ndarray, Sigma: np.ndarray) -> np.ndarray:
    """Xi theta = Sigma^-1 theta - (R + Sigma)^-1 theta."""
    try:
        return solve_psd(Sigma, theta) - solve_psd(R + Sigma, theta)
    except SingularMatrixError as exc:
        raise StateError("effective-noise covariance is not positive definite") from exc


def log_evidence_ratio(R: np.ndarray, Sigma: np.ndarray) -> float:
    """u = logdet(R + Sigma) - logdet(Sigma), computed in the log domain."""
    try:
        return logdet_psd(R + Sigma) - logdet_psd(Sigma)
    except SingularMatrixError as exc:
        raise StateError("effective-noise covariance is not positive definite") from exc


def activity_posterior(theta: np.ndarray, R: np.ndarray, Sigma: np.ndarray,
                       epsilon: float) -> float:
    """Posterior activity probability psi in [0, 1].

    psi = 1 / (1 + ((1-eps)/eps) * exp(u - w)) with w = theta^H Xi theta.
    """
    _check_epsilon(epsilon)
    w = float(np.real(np.vdot(theta, _xi_times(theta, R, Sigma))))
    u = log_evidence_ratio(R, Sigma)
    expo = np.clip(u - w, -EXP_CLAMP, EXP_CLAMP)
    return float(1.0 / (1.0 + (1.0 - epsilon) / epsilon * np.exp(expo)))


def denoise(theta: np.ndarray, R: np.ndarray, Sigma: np.ndarray,
            epsilon: float) -> np.ndarray:
    """MMSE denoiser: psi * R (R + Sigma)^-1 theta."""
    psi = activity_posterior(theta, R, Sigma, epsilon)
    q = R @ solve_psd(R + Sigma, theta)
    return psi * q


def denoiser_jacobian(theta: np.ndarray, R: np.ndarray, Sigma: np.ndarray,
                      epsilon: float) -> np.ndarray:
    """Wirtinger derivative d eta / d theta (theta* held fixed), M x M.

    With A = R (R+Sigma)^-1, q = A theta, and dpsi/dw = psi (1 - psi):

        J = psi * A + psi (1 - psi) * q (Xi theta)^H

    since dw/d theta = (Xi theta)^H as a row vector.
    """
    psi = activity_posterior(theta, R, Sigma, epsilon)
    a = R @ np.linalg.inv(R + Sigma)
    q = a @ theta
    xi_theta = _xi_times(theta, R, Sigma)
    return psi * a + psi * (1.0 - psi) * np.outer(q, xi_theta.conj())


def residual_update(Y: np.ndarray, phi: np.ndarray, X_hat_next: np.ndarray,
                    Z_prev: np.ndarray, jacobians: np.ndarray) -> np.ndarray:
    """Onsager-corrected residual: Y - Phi Xhat^T + (1/tau_p) Z_prev Jbar^T.

    `jacobians` is either the stacked (N, M, M) per-user array or the already
    summed (M, M) matrix; the average over users is weighted by N/tau_p, i.e.
    the plain sum carries a 1/tau_p factor.
    """
    jac = np.asarray(jacobians)
    jbar = jac.sum(axis=0) if jac.ndim == 3 else jac
    tau_p = phi.shape[0]
    return Y - phi @ X_hat_next.T + (Z_prev @ jbar.T) / tau_p


def _se_init_scalars(epsilon: float, tau_p: int, noise_power: float,
                     covs: CovarianceSet, mode: str) -> np.ndarray:
    if mode not in SE_INIT_MODES:
        raise ValueError(f"unknown se_init mode {mode!r}")
    r_sum = covs.matrices.sum(axis=0)
    scale = epsilon / (tau_p if mode == "pilot-scaled" else 1.0)
    sigma = noise_power * np.eye(covs.n_antennas, dtype=np.complex128) + scale * r_sum
    return 0.5 * (sigma + sigma.conj().T)


def se_init(config: SystemConfig, covs: CovarianceSet,
            mode: str = "pilot-scaled") -> np.ndarray:
    """Initial effective-noise covariance.

    "pilot-scaled" (default): sigma^2 I + (eps / tau_p) sum_i R_i, the
    covariance of theta_i - x_i at the first iteration (Z = Y, Xhat = 0).
    "literal": sigma^2 I + eps sum_i R_i, i.e. sigma^2 I + E[X X^H] without
    the pilot-length scaling.
    """
    return _se_init_scalars(config.epsilon, config.tau_p, config.noise_power, covs, mode)


class _BatchStats:
    """Per-iteration quantities for all users at once.

    Shapes: psi (N,), q/S/T (M, N), inv (N, M, M), u/w (N,).
    S = (R_i+Sigma)^-1 theta_i, T = Sigma^-1 theta_i, q = R_i (R_i+Sigma)^-1 theta_i.
    """

    __slots__ = ("psi", "q", "S", "T", "inv", "u", "w")

    def __init__(self, Theta, covs, Sigma, epsilon, logdet_sigma=None):
        _check_epsilon(epsilon)
        rs = covs.matrices + Sigma[None, :, :]
        try:
            chol = np.linalg.cholesky(rs)
            if logdet_sigma is None:
                logdet_sigma = logdet_psd(Sigma)
            self.T = solve_psd(Sigma, Theta)
        except (np.linalg.LinAlgError, SingularMatrixError) as exc:
            raise StateError("effective-noise covariance is not positive definite") from exc
        logdets = 2.0 * np.sum(np.log(np.real(np.diagonal(chol, axis1=1, axis2=2))), axis=1)
        self.u = logdets - logdet_sigma
        self.inv = np.linalg.inv(rs)
        self.S = np.einsum("nij,jn->in", self.inv, Theta)
        self.w = np.real(np.sum(np.conj(Theta) * (self.T - self.S), axis=0))
        expo = np.clip(self.u - self.w, -EXP_CLAMP, EXP_CLAMP)
        self.psi = 1.0 / (1.0 + (1.0 - epsilon) / epsilon * np.exp(expo))
        self.q = Theta - Sigma @ self.S


def se_step(Sigma: np.ndarray, Theta: np.ndarray, covs: CovarianceSet,
            epsilon: float, tau_p: int, noise_power: float) -> np.ndarray:
    """One state-evolution update from the current pseudo-data."""
    stats = _BatchStats(Theta, covs, Sigma, epsilon)
    return _se_from_stats(stats, Sigma, tau_p, noise_power)


def _se_from_stats(stats: _BatchStats, Sigma: np.ndarray, tau_p: int,
                   noise_power: float) -> np.ndarray:
    m = Sigma.shape[0]
    psi = stats.psi
    rank_one = (stats.q * (psi - psi ** 2)) @ stats.q.conj().T
    psi_inv_sum = np.einsum("n,nij->ij", psi, stats.inv)
    linear = psi.sum() * Sigma - (Sigma @ Sigma) @ psi_inv_sum
    sigma_next = noise_power * np.eye(m, dtype=np.complex128) + (rank_one + linear) / tau_p
    return 0.5 * (sigma_next + sigma_next.conj().T)


def _jacobian_sum(stats: _BatchStats, Sigma: np.ndarray) -> np.ndarray:
    """sum_i d eta_i / d theta_i from batch stats."""
    m = Sigma.shape[0]
    psi = stats.psi
    psi_inv_sum = np.einsum("n,nij->ij", psi, stats.inv)
    base = psi.sum() * np.eye(m, dtype=np.complex128) - Sigma @ psi_inv_sum
    rank_one = (stats.q * (psi * (1.0 - psi))) @ (stats.T - stats.S).conj().T
    return base + rank_one


def run_amp(Y: np.ndarray, pilots, covs: CovarianceSet, epsilon: float,
            noise_power: float, max_iter: int = 50, tol: float = 1e-6,
            se_init_mode: str = "pilot-scaled") -> AmpReport:
    """Full AMP recursion from Xhat = 0, Z = Y.

    Stops when the relative Frobenius change of Xhat drops below `tol` or
    after `max_iter` iterations. A residual blow-up beyond DIVERGENCE_FACTOR
    times the initial norm sets the `diverged` flag instead of raising.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    phi = pilots.phi if hasattr(pilots, "phi") else np.asarray(pilots)
    tau_p, n = phi.shape
    m = Y.shape[1]
    sigma = _se_init_scalars(epsilon, tau_p, noise_power, covs, se_init_mode)

    x_hat = np.zeros((m, n), dtype=np.complex128)
    z = Y.astype(np.complex128, copy=True)
    psi = np.full(n, epsilon)
    initial_residual = float(np.linalg.norm(Y))

    report = AmpReport(state=AmpState(X_hat=x_hat, Z=z, Sigma=sigma, psi=psi, iter=0))
    for it in range(1, max_iter + 1):
        theta = pseudo_data(z, phi, x_hat)
        stats = _BatchStats(theta, covs, sigma, epsilon)
        if np.any(stats.psi < 0.0) or np.any(stats.psi > 1.0):
            raise StateError("activity posterior left [0, 1]")
        x_next = stats.q * stats.psi
        z = residual_update(Y, phi, x_next, z, _jacobian_sum(stats, sigma))
        sigma = _se_from_stats(stats, sigma, tau_p, noise_power)

        x_scale = float(np.linalg.norm(x_next))
        rel_change = float(np.linalg.norm(x_next - x_hat)) / max(x_scale, 1e-300)
        x_hat, psi = x_next, stats.psi
        resid = float(np.linalg.norm(z))
        report.sigma_trajectory.append(sigma.copy())
        report.sigma_fro_trajectory.append(float(np.linalg.norm(sigma)))
        report.residual_norms.append(resid)
        report.iterations = it
        if resid > DIVERGENCE_FACTOR * max(initial_residual, 1e-300):
            report.diverged = True
            break
        if rel_change <= tol:
            report.converged = True
            break

    report.state = AmpState(X_hat=x_hat, Z=z, Sigma=sigma, psi=psi, iter=report.iterations)
    return report
