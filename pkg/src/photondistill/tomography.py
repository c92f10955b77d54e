"""Synthetic homodyne records and iterative maximum-likelihood reconstruction.

The forward model draws quadrature samples from the marginal distributions
of a (possibly loss-degraded) state; the reconstruction iterates the
expectation-maximization update rho <- N[R(rho) rho R(rho)] over binned
quadrature projectors, with the detection efficiency folded into the POVM.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import IllConditionedError
from .fockspace import DensityMatrix, _hermite_functions, pure_loss_channel, quadrature_pdf

logger = logging.getLogger(__name__)

X_RANGE = (-6.0, 6.0)
N_EDGES = 801  # POVM bin edges across X_RANGE
SAMPLING_GRID = 4001  # finer grid for inverse-CDF sampling

# inverse-loss amplification beyond this is treated as numerically hopeless
CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class QuadratureSample:
    """One homodyne outcome: local-oscillator phase and quadrature value."""

    theta: float
    x: float

    def __post_init__(self):
        object.__setattr__(self, "theta", float(self.theta) % (2.0 * math.pi))
        object.__setattr__(self, "x", float(self.x))


@dataclass
class ReconstructionResult:
    rho: DensityMatrix
    log_likelihood_trace: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False

    @property
    def final_log_likelihood(self) -> float:
        return self.log_likelihood_trace[-1] if self.log_likelihood_trace else float("nan")


def sample_homodyne(
    rho: DensityMatrix,
    phases,
    samples_per_phase: int,
    efficiency: float = 1.0,
    seed: int = 0,
) -> list[QuadratureSample]:
    """Draw quadrature samples of the state seen by a lossy homodyne detector.

    The state is degraded by `efficiency` via the pure loss channel and
    sampled per phase by inverse-CDF lookup on a tabulated grid.  Phases get
    independent deterministic substreams, so results do not depend on the
    order in which phases are processed.
    """
    phases = list(phases)
    if not phases:
        raise ValueError("phase list must not be empty")
    if not 0.0 < efficiency <= 1.0:
        raise ValueError("efficiency must be in (0, 1]")
    if samples_per_phase <= 0:
        raise ValueError("samples_per_phase must be positive")
    lossy = rho if efficiency == 1.0 else pure_loss_channel(rho, efficiency)
    x = np.linspace(*X_RANGE, SAMPLING_GRID)
    streams = np.random.SeedSequence(seed).spawn(len(phases))
    samples = []
    for theta, stream in zip(phases, streams):
        pdf = quadrature_pdf(lossy, theta, x)
        cdf = np.concatenate(([0.0], np.cumsum((pdf[1:] + pdf[:-1]) * 0.5 * np.diff(x))))
        cdf /= cdf[-1]
        u = np.random.default_rng(stream).uniform(size=samples_per_phase)
        xs = np.interp(u, cdf, x)
        samples.extend(QuadratureSample(theta, xv) for xv in xs)
    return samples


def _bin_matrices(dim: int, edges: np.ndarray) -> np.ndarray:
    """G[l, m, n] = integral over bin l of psi_m(x) psi_n(x) dx (Simpson)."""
    n_bins = len(edges) - 1
    # 4 Simpson subintervals per bin -> 5 nodes, shared endpoints
    nodes = np.linspace(edges[:-1], edges[1:], 5, axis=1)  # (n_bins, 5)
    h = (edges[1:] - edges[:-1]) / 4.0
    w = np.array([1.0, 4.0, 2.0, 4.0, 1.0]) / 3.0
    psi = _hermite_functions(dim - 1, nodes.reshape(-1)).reshape(dim, n_bins, 5)
    prod = np.einsum("mlt,nlt,t->lmn", psi, psi, w)
    return prod * h[:, None, None]


def _efficiency_adjusted(G: np.ndarray, efficiency: float) -> np.ndarray:
    """Pull the loss channel into the measurement operators (adjoint map)."""
    if efficiency == 1.0:
        return G
    dim = G.shape[1]
    from .fockspace import _loss_kraus_coeffs

    b = _loss_kraus_coeffs(dim, efficiency)
    out = np.zeros_like(G)
    for k in range(dim):
        coeff = b[k:, k]
        out[:, k:, k:] += coeff[None, :, None] * G[:, : dim - k, : dim - k] * coeff[None, None, :]
    return out


def mle_reconstruct(
    samples,
    dim: int,
    efficiency: float = 1.0,
    max_iter: int = 1000,
    tol: float = 1e-9,
) -> ReconstructionResult:
    """Iterative maximum-likelihood estimate of the density matrix.

    samples: iterable of QuadratureSample or (theta, x) pairs.  Stops when
    the per-sample log-likelihood gain drops below tol.  The detection
    efficiency is handled inside the POVM, so the returned state refers to
    the field before the lossy detector.
    """
    if not 0.0 < efficiency <= 1.0:
        raise ValueError("efficiency must be in (0, 1]")
    pairs = [(s.theta, s.x) if isinstance(s, QuadratureSample) else (float(s[0]), float(s[1])) for s in samples]
    if not pairs:
        raise ValueError("no samples given")
    n_rec = 10 * dim * dim
    if len(pairs) < n_rec:
        logger.warning("only %d samples for dim %d; %d recommended", len(pairs), dim, n_rec)

    thetas = sorted({t for t, _ in pairs})
    theta_index = {t: i for i, t in enumerate(thetas)}
    edges = np.linspace(*X_RANGE, N_EDGES)
    counts = np.zeros((len(thetas), N_EDGES - 1))
    for t, xv in pairs:
        b = int(np.clip(np.searchsorted(edges, xv, side="right") - 1, 0, N_EDGES - 2))
        counts[theta_index[t], b] += 1.0
    freqs = counts / counts.sum()

    G = _efficiency_adjusted(_bin_matrices(dim, edges), efficiency)
    n = np.arange(dim)
    phase = np.exp(1j * np.outer(np.array(thetas), n))  # (J, dim)
    hit = freqs > 0
    # a single occupied bin carries no distribution information; the
    # fixed point is arbitrary, so flag the run as non-converged
    degenerate = int(np.count_nonzero(hit)) < 2

    rho = np.eye(dim, dtype=complex) / dim
    trace = []
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        # projector matrix elements Pi_{j,l}[m,n] = e^{-i theta_j (m-n)} G_l[m,n],
        # matching pr(x, theta) = sum_mn rho_mn e^{i theta (m-n)} psi_m psi_n
        twisted = phase.conj()[:, :, None] * rho[None, :, :].transpose(0, 2, 1) * phase[:, None, :]
        # twisted[j, m, n] = rho_nm e^{-i theta_j (m-n)}
        pr = np.einsum("lmn,jmn->jl", G, twisted).real
        pr = np.clip(pr, 1e-300, None)
        ll = float(np.sum(freqs[hit] * np.log(pr[hit])))
        trace.append(ll)
        if not degenerate and len(trace) > 1 and abs(trace[-1] - trace[-2]) < tol:
            converged = True
            break
        weights = np.where(hit, freqs / pr, 0.0)
        R_real = np.einsum("jl,lmn->jmn", weights, G)
        R = np.einsum("jm,jmn,jn->mn", phase.conj(), R_real, phase)
        rho = R @ rho @ R
        rho = 0.5 * (rho + rho.conj().T)
        rho /= np.trace(rho).real

    result_rho = DensityMatrix(dim, rho)
    return ReconstructionResult(
        rho=result_rho,
        log_likelihood_trace=trace,
        iterations=iterations,
        converged=converged,
    )


def loss_correct(rho: DensityMatrix, loss: float) -> DensityMatrix:
    """Invert a known loss channel (inverse Bernoulli transformation).

    Exact on the truncated space; small negative eigenvalues produced by
    noisy inputs are clipped to zero (logged).  Raises IllConditionedError
    when the amplification (1/T)^(N-1) exceeds CONDITION_LIMIT.
    """
    if not 0.0 <= loss < 1.0:
        raise ValueError("loss must be in [0, 1)")
    if loss == 0.0:
        return rho
    dim = rho.dim
    T = 1.0 - loss
    condition = (1.0 / T) ** (dim - 1)
    if condition > CONDITION_LIMIT:
        raise IllConditionedError(
            f"inverse-loss amplification {condition:.3e} exceeds {CONDITION_LIMIT:.1e}"
        )
    # same combinatorial kernel as the forward channel, with T -> 1/T
    el = rho.elements
    out = np.zeros_like(el)
    neg_T_ratio = -loss / T  # (1 - 1/T) * T_inv-weight collapses to this
    for m in range(dim):
        for nn in range(dim):
            kmax = dim - max(m, nn)
            kk = np.arange(kmax)
            log_c = 0.5 * (
                gammaln(m + kk + 1) - gammaln(kk + 1) - gammaln(m + 1)
                + gammaln(nn + kk + 1) - gammaln(kk + 1) - gammaln(nn + 1)
            )
            coeff = np.exp(log_c - 0.5 * (m + nn) * math.log(T)) * neg_T_ratio**kk
            out[m, nn] = np.sum(coeff * el[m + kk, nn + kk])
    out = 0.5 * (out + out.conj().T)
    ev, V = np.linalg.eigh(out)
    if ev.min() < -1e-12:
        logger.info("loss_correct clipped negative eigenvalues down to %.3e", ev.min())
    ev = np.clip(ev, 0.0, None)
    out = (V * ev) @ V.conj().T
    out /= np.trace(out).real
    return DensityMatrix(dim, out)


def write_samples_csv(path, samples):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta", "x"])
        for s in samples:
            writer.writerow([f"{s.theta:.12g}", f"{s.x:.12g}"])


def read_samples_csv(path) -> list[QuadratureSample]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [QuadratureSample(float(row["theta"]), float(row["x"])) for row in reader]


def reconstruction_report(result: ReconstructionResult) -> dict:
    """JSON-ready summary of a reconstruction run."""
    return {
        "dim": result.rho.dim,
        "iterations": result.iterations,
        "converged": result.converged,
        "final_log_likelihood": result.final_log_likelihood,
        "rho": {
            "real": np.real(result.rho.elements).tolist(),
            "imag": np.imag(result.rho.elements).tolist(),
        },
    }


def write_reconstruction_json(path, result: ReconstructionResult):
    with open(path, "w") as fh:
        json.dump(reconstruction_report(result), fh, indent=2)
