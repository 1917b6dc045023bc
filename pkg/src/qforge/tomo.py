"""Desk-scale two-mode homodyne tomography.

Quadrature convention: ``x_theta = (a e^{-i theta} + a^dag e^{i theta}) / sqrt2``,
vacuum variance 1/2.  With ``<x|n> = psi_n(x)`` the rotated eigenstates obey
``<x, theta|n> = exp(-i n theta) psi_n(x)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from qforge import fock, optics
from qforge.fock import DensityMatrix, StateVector

QUTRIT_BASIS = ((2, 0), (1, 1), (0, 2))
CSV_HEADER = ("theta1", "theta2", "x1", "x2")
QUADRATURE_CONVENTION = "x_theta = (a exp(-i theta) + a^dag exp(i theta)) / sqrt2, hbar = 1, vacuum variance 1/2"


class TomoError(ValueError):
    pass


class EmptySamples(TomoError):
    pass


@dataclass(frozen=True)
class LossChannel:
    eta: float

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise TomoError(f"transmissivity must lie in (0, 1], got {self.eta}")

    def __call__(self, rho: DensityMatrix) -> DensityMatrix:
        return apply_loss(rho, self.eta)


def apply_loss(rho: DensityMatrix, eta: float) -> DensityMatrix:
    """Each mode meets a vacuum ancilla on a beam splitter with |t|^2 = eta; ancillas are traced out."""
    LossChannel(eta)
    if eta == 1:
        return rho
    m = rho.modes
    bs_t, bs_r = math.sqrt(eta), math.sqrt(1 - eta)
    for mode in range(m):
        w, v = np.linalg.eigh((rho.matrix + rho.matrix.conj().T) / 2)
        branches = []
        for lam, vec in zip(w, v.T):
            if lam <= 1e-15:
                continue
            psi = fock.from_dense(vec * math.sqrt(lam), m, rho.cutoff)
            psi = fock.tensor(psi, fock.vacuum(1, 0))
            branches.append(optics.apply_beamsplitter(psi, optics.BeamSplitter(bs_t, bs_r, (mode, m))))
        big = fock.density_from_ensemble(branches, m + 1, rho.cutoff)
        rho = fock.partial_trace(big, range(m))
    return rho


def hermite_functions(x: np.ndarray, nmax: int) -> np.ndarray:
    """psi_0..psi_nmax at ``x`` by the stable three-term recurrence; shape (len(x), nmax + 1)."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (nmax + 1,))
    out[..., 0] = np.pi ** -0.25 * np.exp(-x * x / 2)
    if nmax >= 1:
        out[..., 1] = math.sqrt(2) * x * out[..., 0]
    for n in range(1, nmax):
        out[..., n + 1] = math.sqrt(2 / (n + 1)) * x * out[..., n] - math.sqrt(n / (n + 1)) * out[..., n - 1]
    return out


@dataclass(frozen=True)
class QuadratureSample:
    x1: float
    x2: float
    theta1: float
    theta2: float


@dataclass(frozen=True, eq=False)
class QuadratureSamples:
    """Column arrays of two-mode homodyne records."""

    theta1: np.ndarray
    theta2: np.ndarray
    x1: np.ndarray
    x2: np.ndarray

    def __post_init__(self):
        cols = [np.asarray(getattr(self, k), dtype=float).reshape(-1) for k in CSV_HEADER]
        if len({c.shape for c in cols}) != 1:
            raise TomoError("sample columns differ in length")
        for k, c in zip(CSV_HEADER, cols):
            c.setflags(write=False)
            object.__setattr__(self, k, c)

    def __len__(self):
        return self.x1.shape[0]

    def __iter__(self) -> Iterator[QuadratureSample]:
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, i) -> QuadratureSample:
        return QuadratureSample(float(self.x1[i]), float(self.x2[i]), float(self.theta1[i]), float(self.theta2[i]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in zip(self.theta1, self.theta2, self.x1, self.x2):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "QuadratureSamples":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or tuple(rows[0]) != CSV_HEADER:
            raise TomoError(f"expected header {','.join(CSV_HEADER)}")
        data = np.array(rows[1:], dtype=float).reshape(-1, 4)
        return cls(data[:, 0], data[:, 1], data[:, 2], data[:, 3])


def _quadrature_rows(rho_modes: int, cutoff: int, x1, x2, th1, th2) -> np.ndarray:
    """Rows <x1,th1; x2,th2|n1,n2> over the density-matrix basis."""
    if rho_modes != 2:
        raise TomoError("homodyne model covers two-mode states")
    basis = np.array(fock.enumerate_basis(2, cutoff))
    h1 = hermite_functions(x1, cutoff)
    h2 = hermite_functions(x2, cutoff)
    n1, n2 = basis[:, 0], basis[:, 1]
    phase = np.exp(-1j * (np.outer(th1, n1) + np.outer(th2, n2)))
    return h1[:, n1] * h2[:, n2] * phase


def quadrature_density(rho: DensityMatrix, x1, x2, th1, th2) -> np.ndarray:
    w = _quadrature_rows(rho.modes, rho.cutoff, np.atleast_1d(x1), np.atleast_1d(x2), np.atleast_1d(th1), np.atleast_1d(th2))
    return np.real(np.einsum("ia,ab,ib->i", w, rho.matrix / rho.trace(), w.conj()))


def _phases(strategy: str, shots: int, rng: np.random.Generator, grid: int) -> tuple[np.ndarray, np.ndarray]:
    if strategy == "uniform":
        return rng.uniform(0, 2 * np.pi, shots), rng.uniform(0, 2 * np.pi, shots)
    if strategy == "grid":
        idx = np.arange(shots)
        g = 2 * np.pi * np.arange(grid) / grid
        return g[idx % grid], g[(idx // grid) % grid]
    raise TomoError(f"unknown phase strategy {strategy!r}")


def sample_homodyne(
    rho: DensityMatrix,
    shots: int,
    phase_strategy: str = "uniform",
    seed: int = 0,
    grid: int = 8,
) -> QuadratureSamples:
    """Exact draws of (x1, x2) at the chosen phases by rejection from a Gaussian envelope.

    The density obeys ``p(x) <= lambda_max(rho) K(x1) K(x2)`` with
    ``K(x) = sum_{n <= cutoff} psi_n(x)^2``, and ``K`` is dominated by a scaled
    Gaussian, which gives a phase-independent envelope.
    """
    if shots < 1:
        raise TomoError("shots must be >= 1")
    rng = np.random.default_rng(seed)
    rho = rho.normalized()
    cut = rho.cutoff
    sigma = math.sqrt(max(1.0, (cut + 1) / 2))
    xs = np.linspace(-12 - 2 * math.sqrt(cut), 12 + 2 * math.sqrt(cut), 20001)
    k = np.sum(hermite_functions(xs, cut) ** 2, axis=1)
    g = np.exp(-xs * xs / (2 * sigma**2)) / (sigma * math.sqrt(2 * np.pi))
    c1 = 1.02 * float(np.max(k / g))
    lam = float(np.max(np.linalg.eigvalsh(rho.matrix)))
    bound = lam * c1 * c1
    th1, th2 = _phases(phase_strategy, shots, rng, grid)
    x1 = np.empty(shots)
    x2 = np.empty(shots)
    pending = np.arange(shots)
    while pending.size:
        batch = np.repeat(pending, 4)
        p1 = rng.normal(0, sigma, batch.size)
        p2 = rng.normal(0, sigma, batch.size)
        env = bound * np.exp(-(p1**2 + p2**2) / (2 * sigma**2)) / (2 * np.pi * sigma**2)
        dens = quadrature_density(rho, p1, p2, th1[batch], th2[batch])
        accept = rng.uniform(size=batch.size) * env < dens
        # first accepted proposal of each pending shot
        acc_idx = np.flatnonzero(accept)
        shots_hit, first = np.unique(batch[acc_idx], return_index=True)
        chosen = acc_idx[first]
        x1[shots_hit] = p1[chosen]
        x2[shots_hit] = p2[chosen]
        pending = np.setdiff1d(pending, shots_hit, assume_unique=True)
    return QuadratureSamples(th1, th2, x1, x2)


@dataclass
class TomoResult:
    rho: DensityMatrix
    subspace_fidelity: float
    photon_number_dist: np.ndarray
    iterations: int
    log_likelihoods: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "rho": fock.density_to_dict(self.rho),
            "subspace_fidelity": self.subspace_fidelity,
            "photon_number_dist": self.photon_number_dist.tolist(),
            "iterations": self.iterations,
            "log_likelihood": self.log_likelihoods[-1] if self.log_likelihoods else None,
            "quadrature_convention": QUADRATURE_CONVENTION,
        }


def _binned(samples: QuadratureSamples, bin_width: float | None, phase_bins: int | None):
    x1, x2, t1, t2 = samples.x1, samples.x2, samples.theta1, samples.theta2
    if bin_width:
        x1 = (np.floor(x1 / bin_width) + 0.5) * bin_width
        x2 = (np.floor(x2 / bin_width) + 0.5) * bin_width
    if phase_bins:
        step = 2 * np.pi / phase_bins
        t1 = np.round(t1 / step) % phase_bins * step
        t2 = np.round(t2 / step) % phase_bins * step
    keys = np.stack([t1, t2, x1, x2], axis=1)
    uniq, counts = np.unique(keys, axis=0, return_counts=True)
    return uniq, counts.astype(float)


def _log_likelihood(w: np.ndarray, f: np.ndarray, rho: np.ndarray) -> tuple[float, np.ndarray]:
    p = np.real(np.einsum("ia,ab,ib->i", w, rho, w.conj()))
    p = np.clip(p, 1e-300, None)
    return float(np.dot(f, np.log(p)) / f.sum()), p


def mle_reconstruct(
    samples: QuadratureSamples,
    cutoff: int,
    max_iter: int = 500,
    tol: float = 1e-8,
    target: StateVector | None = None,
    bin_width: float | None = 0.05,
    phase_bins: int | None = None,
    slack: float = 1e-9,
) -> TomoResult:
    """Iterative R rho R maximum likelihood over the basis with total photons <= ``cutoff``.

    A step that would lower the likelihood is diluted, ``(1 + eps R) rho (1 + eps R)``,
    with ``eps`` halved until the likelihood does not drop.
    """
    if len(samples) == 0:
        raise EmptySamples("no samples to reconstruct from")
    keys, f = _binned(samples, bin_width, phase_bins)
    w = _quadrature_rows(2, cutoff, keys[:, 2], keys[:, 3], keys[:, 0], keys[:, 1])
    dim = w.shape[1]
    rho = np.eye(dim, dtype=complex) / dim
    ll, p = _log_likelihood(w, f, rho)
    history = [ll]
    it = 0
    for it in range(1, max_iter + 1):
        r = (w.conj().T * (f / p)) @ w / f.sum()
        r = (r + r.conj().T) / 2
        eps = None
        while True:
            op = r if eps is None else np.eye(dim) + eps * r
            cand = op @ rho @ op
            cand = (cand + cand.conj().T) / 2
            cand /= np.trace(cand).real
            cll, cp = _log_likelihood(w, f, cand)
            if cll >= ll - slack:
                break
            eps = 1.0 if eps is None else eps / 2
            if eps < 1e-12:
                cand, cll, cp = rho, ll, p
                break
        gain = cll - ll
        rho, ll, p = cand, cll, cp
        history.append(ll)
        if abs(gain) < tol * max(1.0, abs(ll)):
            break
    dm = DensityMatrix(2, cutoff, rho)
    fid = qutrit_diagnostics(dm, target)["subspace_fidelity"] if target is not None else float("nan")
    return TomoResult(dm, fid, fock.total_photon_distribution(dm), it, history)


def qutrit_block(rho: DensityMatrix) -> np.ndarray:
    index = fock.basis_index(rho.modes, rho.cutoff)
    idx = [index[o] for o in QUTRIT_BASIS]
    return rho.matrix[np.ix_(idx, idx)] / rho.trace()


def qutrit_diagnostics(rho: DensityMatrix, target: StateVector | Sequence[complex] | None = None) -> dict:
    """Renormalized {|20>,|11>,|02>} block, its fidelity to ``target`` and the photon-number distribution."""
    if rho.modes != 2 or rho.cutoff < 2:
        raise TomoError("qutrit diagnostics need a two-mode state with cutoff >= 2")
    block = qutrit_block(rho)
    weight = float(np.trace(block).real)
    sub = block / weight if weight > 0 else block
    fid = float("nan")
    if target is not None:
        if isinstance(target, StateVector):
            vec = np.array([target[o] for o in QUTRIT_BASIS])
        else:
            vec = np.asarray(target, dtype=complex)
        vec = vec / np.linalg.norm(vec)
        fid = float(np.real(vec.conj() @ sub @ vec))
    return {
        "two_photon_population": weight,
        "subspace_fidelity": fid,
        "block_real": sub.real.tolist(),
        "block_imag": sub.imag.tolist(),
        "photon_number_dist": fock.total_photon_distribution(rho).tolist(),
    }


def true_subspace_state(rho: DensityMatrix) -> DensityMatrix:
    """Renormalized qutrit block of ``rho`` as a two-mode density matrix (cutoff 2)."""
    block = qutrit_block(rho)
    full = np.zeros((6, 6), dtype=complex)
    index = fock.basis_index(2, 2)
    idx = [index[o] for o in QUTRIT_BASIS]
    full[np.ix_(idx, idx)] = block / np.trace(block).real
    return DensityMatrix(2, 2, full)


def subspace_fidelity(rho_hat: DensityMatrix, rho_true: DensityMatrix) -> float:
    """Uhlmann fidelity between the renormalized qutrit blocks of two states."""
    return fock.uhlmann_fidelity(true_subspace_state(rho_hat), true_subspace_state(rho_true))
