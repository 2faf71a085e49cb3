"""Scenario generation for grant-free massive MTC uplink.

A single cell with N single-antenna users around a base station with an
M-antenna uniform linear array. Per coherence block, a sparse subset of users
is active; actives transmit unit-norm QPSK pilot sequences over tau_p symbols
through spatially correlated Rayleigh channels.

Channel covariances follow the Gaussian local-scattering closed form for a
ULA: each user sits at a nominal azimuth angle (from its uniform position in
the cell) and multipath angles spread around it with a given angular standard
deviation. Covariances are trace-normalized so every user has unit average
channel gain.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .linalg import sqrt_psd


@dataclass
class SystemConfig:
    """Scenario scalars. All randomness is injected via explicit generators."""

    N: int = 200                 # users
    M: int = 16                  # BS antennas
    tau_p: int = 30              # pilot length (symbols)
    epsilon: float = 0.05        # per-user activity probability
    noise_power: float = 0.1     # sigma^2, linear scale
    cell_radius: float = 100.0   # meters
    asd_deg: float = 10.0        # angular standard deviation (degrees)
    antenna_spacing: float = 0.5 # wavelengths
    guard_radius: float = 5.0    # meters (no users closer to the BS)
    pathloss_mode: str = "unit-gain"

    def __post_init__(self):
        if self.N < 1:
            raise ConfigError(f"N must be >= 1, got {self.N}")
        if self.M < 1:
            raise ConfigError(f"M must be >= 1, got {self.M}")
        if not 1 <= self.tau_p <= self.N:
            raise ConfigError(f"tau_p must be in [1, N], got {self.tau_p} with N={self.N}")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError(f"epsilon must be in (0, 1), got {self.epsilon}")
        if self.noise_power <= 0.0:
            raise ConfigError(f"noise_power must be > 0, got {self.noise_power}")
        if self.asd_deg < 0.0:
            raise ConfigError(f"asd_deg must be >= 0, got {self.asd_deg}")
        if not 0.0 <= self.guard_radius < self.cell_radius:
            raise ConfigError("guard_radius must lie in [0, cell_radius)")
        if self.pathloss_mode != "unit-gain":
            raise ConfigError(f"unsupported pathloss_mode {self.pathloss_mode!r}")

    @property
    def snr_db(self) -> float:
        return -10.0 * np.log10(self.noise_power)


def noise_power_from_snr_db(snr_db: float) -> float:
    """SNR is defined as 1/sigma^2 under unit pilot norm and unit channel gain."""
    return float(10.0 ** (-snr_db / 10.0))


@dataclass
class CovarianceSet:
    """Per-user M x M Hermitian PSD channel covariances, unit average gain."""

    matrices: np.ndarray           # (N, M, M) complex
    nominal_angles_rad: np.ndarray # (N,) azimuth of each user
    _sqrt_factors: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_users(self) -> int:
        return self.matrices.shape[0]

    @property
    def n_antennas(self) -> int:
        return self.matrices.shape[1]

    def sqrt_factors(self) -> np.ndarray:
        """(N, M, M) Hermitian PSD square roots, computed once and cached."""
        if self._sqrt_factors is None:
            self._sqrt_factors = np.stack([sqrt_psd(r) for r in self.matrices])
        return self._sqrt_factors


@dataclass
class GroundTruth:
    """One coherence block: activity, channels, and effective channels."""

    gamma: np.ndarray  # (N,) in {0, 1}
    H: np.ndarray      # (M, N)
    X: np.ndarray      # (M, N), column i is gamma_i * h_i

    @property
    def active_set(self) -> np.ndarray:
        return np.flatnonzero(self.gamma == 1)


@dataclass
class PilotMatrix:
    """tau_p x N QPSK pilot matrix with unit-norm columns."""

    phi: np.ndarray

    @property
    def tau_p(self) -> int:
        return self.phi.shape[0]


def local_scattering_cov(m_antennas: int, angle_rad: float, asd_rad: float,
                         spacing: float) -> np.ndarray:
    """Gaussian local-scattering covariance for a ULA, trace-normalized to M.

    Entry (m, n) is exp(j*2*pi*d*(m-n)*sin(angle)) damped by the Gaussian
    characteristic function exp(-(asd^2/2) * (2*pi*d*(m-n)*cos(angle))^2).
    """
    delta = np.arange(m_antennas)[:, None] - np.arange(m_antennas)[None, :]
    a = 2.0 * np.pi * spacing * delta
    cov = np.exp(1j * a * np.sin(angle_rad)) * np.exp(-0.5 * (asd_rad * a * np.cos(angle_rad)) ** 2)
    cov *= m_antennas / np.real(np.trace(cov))
    return cov


def draw_user_angles(config: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    """Nominal azimuths from uniform user positions in the guard-ringed disc.

    The radial coordinate is drawn (area-uniform) even though unit-gain
    normalization makes distance irrelevant, so a future distance-dependent
    gain mode would reuse the same geometry stream.
    """
    rng.uniform(config.guard_radius ** 2, config.cell_radius ** 2, size=config.N)
    return rng.uniform(-np.pi, np.pi, size=config.N)


def build_covariances(config: SystemConfig, rng: np.random.Generator) -> CovarianceSet:
    angles = draw_user_angles(config, rng)
    asd_rad = np.deg2rad(config.asd_deg)
    mats = np.stack([
        local_scattering_cov(config.M, ang, asd_rad, config.antenna_spacing)
        for ang in angles
    ])
    return CovarianceSet(matrices=mats, nominal_angles_rad=angles)


def sample_activity(config: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. Bernoulli(epsilon) activity indicators."""
    return (rng.random(config.N) < config.epsilon).astype(np.int8)


def standard_complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """CN(0, 1) entries: independent real/imag parts with variance 1/2 each."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_channels(covs: CovarianceSet, rng: np.random.Generator) -> np.ndarray:
    """Correlated Rayleigh draws h_i = R_i^(1/2) hbar_i, returned as (M, N)."""
    n, m = covs.n_users, covs.n_antennas
    hbar = standard_complex_normal(rng, (m, n))
    return np.einsum("nij,jn->in", covs.sqrt_factors(), hbar)


def gen_pilots(config: SystemConfig, rng: np.random.Generator) -> PilotMatrix:
    """QPSK pilots: entries uniform on {(+-1 +-j)/sqrt(2*tau_p)}."""
    re = 2 * rng.integers(0, 2, size=(config.tau_p, config.N)) - 1
    im = 2 * rng.integers(0, 2, size=(config.tau_p, config.N)) - 1
    phi = (re + 1j * im) / np.sqrt(2.0 * config.tau_p)
    return PilotMatrix(phi=phi)


def synthesize_rx(pilots: PilotMatrix, X: np.ndarray, noise_power: float,
                  rng: np.random.Generator) -> np.ndarray:
    """Received pilot block Y = Phi X^T + W, W i.i.d. CN(0, noise_power)."""
    tau_p = pilots.tau_p
    m = X.shape[0]
    w = np.sqrt(noise_power) * standard_complex_normal(rng, (tau_p, m))
    return pilots.phi @ X.T + w


def draw_ground_truth(config: SystemConfig, covs: CovarianceSet,
                      rng: np.random.Generator) -> GroundTruth:
    gamma = sample_activity(config, rng)
    h = sample_channels(covs, rng)
    x = h * gamma[None, :]
    return GroundTruth(gamma=gamma, H=h, X=x)
