"""Truncated Fock-space linear algebra for single-mode photonic states.

States live in the number basis |0>, ..., |N-1>.  Quadratures follow the
convention a = (x + ip)/sqrt(2), so the vacuum quadrature variance is 1/2
and the vacuum Wigner function peaks at W(0,0) = 1/pi.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

DEFAULT_DIM = 20

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-10


@dataclass(frozen=True)
class FockVector:
    """Pure state as a complex coefficient vector over |n>."""

    dim: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if self.dim < 2:
            raise ValueError(f"dimension must be >= 2, got {self.dim}")
        if amps.shape != (self.dim,):
            raise ValueError(f"amplitudes must have shape ({self.dim},)")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def density_matrix(self) -> "DensityMatrix":
        """Outer product |psi><psi|, normalized to unit trace."""
        v = self.amplitudes / self.norm
        return DensityMatrix(self.dim, np.outer(v, v.conj()))


@dataclass(frozen=True)
class DensityMatrix:
    """Mixed state as a complex N x N matrix in the Fock basis."""

    dim: int
    elements: np.ndarray

    def __post_init__(self):
        el = np.asarray(self.elements, dtype=complex)
        if self.dim < 2:
            raise ValueError(f"dimension must be >= 2, got {self.dim}")
        if el.shape != (self.dim, self.dim):
            raise ValueError(f"elements must have shape ({self.dim}, {self.dim})")
        el.flags.writeable = False
        object.__setattr__(self, "elements", el)

    @property
    def trace(self) -> float:
        return float(np.trace(self.elements).real)

    def populations(self) -> np.ndarray:
        """Diagonal probabilities p_n = <n|rho|n>."""
        return np.real(np.diag(self.elements)).copy()

    def normalized(self) -> "DensityMatrix":
        tr = np.trace(self.elements)
        if abs(tr) == 0.0:
            raise ValueError("cannot normalize a traceless matrix")
        return DensityMatrix(self.dim, self.elements / tr)

    def validate(self, herm_tol=HERMITICITY_TOL, trace_tol=TRACE_TOL, psd_tol=PSD_TOL):
        """Raise ValueError unless Hermitian, unit-trace and PSD at tolerance."""
        el = self.elements
        herm_dev = float(np.max(np.abs(el - el.conj().T)))
        if herm_dev > herm_tol:
            raise ValueError(f"not Hermitian: max deviation {herm_dev:.3e}")
        tr_dev = abs(np.trace(el) - 1.0)
        if tr_dev > trace_tol:
            raise ValueError(f"trace deviates from 1 by {tr_dev:.3e}")
        min_eig = float(np.min(np.linalg.eigvalsh(0.5 * (el + el.conj().T))))
        if min_eig < -psd_tol:
            raise ValueError(f"not PSD: smallest eigenvalue {min_eig:.3e}")
        return self


@dataclass(frozen=True)
class PhotonStatistics:
    """Photon-number distribution summary of a state."""

    probabilities: np.ndarray
    mean: float
    g2_zero: float | None = field(default=None)


def fock_state(n: int, dim: int = DEFAULT_DIM) -> FockVector:
    """Number state |n>."""
    if dim < 2:
        raise ValueError(f"dimension must be >= 2, got {dim}")
    if not 0 <= n < dim:
        raise ValueError(f"n={n} outside truncation 0..{dim - 1}")
    amps = np.zeros(dim, dtype=complex)
    amps[n] = 1.0
    return FockVector(dim, amps)


def coherent_state(alpha: complex, dim: int = DEFAULT_DIM) -> FockVector:
    """Coherent state with amplitude alpha, truncated at dim photons.

    Coefficients are exp(-|alpha|^2/2) alpha^n / sqrt(n!).  Warns when
    |alpha|^2 > dim/4, where the truncated tail is no longer negligible.
    """
    if dim < 2:
        raise ValueError(f"dimension must be >= 2, got {dim}")
    nbar = abs(alpha) ** 2
    if nbar > dim / 4:
        warnings.warn(
            f"|alpha|^2 = {nbar:.3g} exceeds dim/4 = {dim / 4:.3g}; "
            "truncation may be inadequate",
            stacklevel=2,
        )
    n = np.arange(dim)
    if alpha == 0:
        amps = np.zeros(dim, dtype=complex)
        amps[0] = 1.0
        return FockVector(dim, amps)
    # log-domain magnitudes to stay stable for large n
    log_mag = n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1) - nbar / 2
    phase = np.exp(1j * n * np.angle(alpha))
    return FockVector(dim, np.exp(log_mag) * phase)


def thermal_state(nbar: float, dim: int = DEFAULT_DIM) -> DensityMatrix:
    """Thermal state p_n proportional to (nbar/(1+nbar))^n, renormalized."""
    if nbar < 0:
        raise ValueError("mean photon number must be nonnegative")
    if nbar == 0:
        return fock_state(0, dim).density_matrix()
    q = nbar / (1.0 + nbar)
    p = q ** np.arange(dim)
    p /= p.sum()
    return DensityMatrix(dim, np.diag(p).astype(complex))


def _loss_kraus_coeffs(dim: int, transmission: float) -> np.ndarray:
    """b[n, k] = sqrt(C(n,k) T^(n-k) (1-T)^k), the k-photon-loss amplitudes."""
    T = transmission
    if T == 1.0:  # identity channel
        b = np.zeros((dim, dim))
        b[:, 0] = 1.0
        return b
    if T == 0.0:  # everything lost
        return np.eye(dim)
    n = np.arange(dim)[:, None]
    k = np.arange(dim)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        log_binom = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    log_binom = np.where(k <= n, log_binom, -np.inf)
    log_b2 = log_binom + (n - k) * np.log(T) + k * np.log(1.0 - T)
    return np.exp(0.5 * log_b2)


def pure_loss_channel(rho: DensityMatrix, transmission: float) -> DensityMatrix:
    """Beam-splitter photon loss with intensity transmission T.

    Kraus form: rho -> sum_k K_k rho K_k^dag with
    K_k = sum_n sqrt(C(n,k) T^(n-k) (1-T)^k) |n-k><n|.
    """
    if not 0.0 <= transmission <= 1.0:
        raise ValueError(f"transmission must be in [0, 1], got {transmission}")
    dim = rho.dim
    b = _loss_kraus_coeffs(dim, transmission)
    out = np.zeros((dim, dim), dtype=complex)
    el = rho.elements
    for k in range(dim):
        nk = dim - k
        # (K_k rho K_k^dag)_{m,n} = b[m+k,k] b[n+k,k] rho_{m+k,n+k}
        coeff = b[k:, k]
        out[:nk, :nk] += coeff[:, None] * el[k:, k:] * coeff[None, :]
    return DensityMatrix(dim, out)


def _hermite_functions(n_max: int, x: np.ndarray) -> np.ndarray:
    """Normalized harmonic-oscillator eigenfunctions psi_0..psi_n_max at x.

    Upward recurrence psi_n = x sqrt(2/n) psi_{n-1} - sqrt((n-1)/n) psi_{n-2},
    stable because each step works with the normalized functions.
    """
    x = np.asarray(x, dtype=float)
    psi = np.empty((n_max + 1,) + x.shape)
    psi[0] = np.pi ** -0.25 * np.exp(-0.5 * x * x)
    if n_max >= 1:
        psi[1] = np.sqrt(2.0) * x * psi[0]
    for n in range(2, n_max + 1):
        psi[n] = x * np.sqrt(2.0 / n) * psi[n - 1] - np.sqrt((n - 1) / n) * psi[n - 2]
    return psi


def quadrature_pdf(rho: DensityMatrix, theta: float, x) -> np.ndarray:
    """Probability density of the rotated quadrature x_theta.

    pr(x, theta) = sum_mn rho_mn exp(i theta (m-n)) psi_m(x) psi_n(x).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    psi = _hermite_functions(rho.dim - 1, x)  # (dim, npts)
    phase = np.exp(1j * theta * np.arange(rho.dim))
    twisted = phase[:, None] * rho.elements * phase.conj()[None, :]
    pdf = np.einsum("mn,mk,nk->k", twisted, psi, psi).real
    return np.clip(pdf, 0.0, None)


def _wigner_basis(dim: int, q, p) -> np.ndarray:
    """W_mn(q, p) table, so that W = sum_mn rho_mn W_mn."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    r2 = q * q + p * p
    z = q - 1j * p
    base = np.exp(-r2) / np.pi
    W = np.empty((dim, dim) + r2.shape, dtype=complex)
    for m in range(dim):
        for n in range(m + 1):
            d = m - n
            log_coeff = 0.5 * (d * np.log(2.0) + gammaln(n + 1) - gammaln(m + 1))
            lag = eval_genlaguerre(n, d, 2.0 * r2)
            Wmn = base * (-1.0) ** n * np.exp(log_coeff) * z**d * lag
            W[m, n] = Wmn
            if d:
                W[n, m] = np.conj(Wmn)
    return W


def wigner(rho: DensityMatrix, q, p):
    """Wigner function at phase-space points (q, p); broadcastable arrays.

    Normalized so that the double integral over (q, p) equals 1 and the
    vacuum gives W(0,0) = 1/pi.
    """
    q_arr, p_arr = np.broadcast_arrays(np.asarray(q, float), np.asarray(p, float))
    W = _wigner_basis(rho.dim, q_arr, p_arr)
    vals = np.einsum("mn,mn...->...", rho.elements, W).real
    if vals.ndim == 0:
        return float(vals)
    return vals


def photon_statistics(rho: DensityMatrix) -> PhotonStatistics:
    """Populations, mean photon number and g2(0) of a state.

    g2(0) = <n(n-1)>/<n>^2; reported as None for the vacuum (undefined).
    """
    p = rho.populations()
    n = np.arange(rho.dim)
    mean = float(np.dot(n, p))
    if mean <= 0.0:
        g2 = None
    else:
        g2 = float(np.dot(n * (n - 1), p) / mean**2)
    return PhotonStatistics(probabilities=p, mean=mean, g2_zero=g2)


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    if rho.dim != sigma.dim:
        raise ValueError("dimension mismatch")
    w, V = np.linalg.eigh(0.5 * (rho.elements + rho.elements.conj().T))
    w = np.clip(w, 0.0, None)
    w[w < rho.dim * np.finfo(float).eps * w.max()] = 0.0  # sqrt would amplify noise
    sqrt_rho = (V * np.sqrt(w)) @ V.conj().T
    inner = sqrt_rho @ sigma.elements @ sqrt_rho
    ev = np.clip(np.linalg.eigvalsh(0.5 * (inner + inner.conj().T)), 0.0, None)
    if ev.max() > 0:
        ev[ev < rho.dim * np.finfo(float).eps * ev.max()] = 0.0
    return float(np.sum(np.sqrt(ev)) ** 2)
