"""Physical interpretation of process tensors: photon-number transfer blocks,
transmissivity and global-phase fits, process fidelities and output-state
prediction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DegenerateBlock, DimensionMismatch, EmptyMap
from .fock import DensityMatrix, ProcessTensor, apply_process, fidelity_psd

__all__ = [
    "PhaseFit",
    "diagonal_block",
    "binomial_transfer_matrix",
    "fit_transmissivity",
    "phase_map",
    "block_mean_phase",
    "fit_global_phase",
    "fit_phase_line",
    "process_fidelity",
    "predict_output",
]

DEFAULT_MAG_FLOOR = 0.02  # below the statistical noise floor, phases are meaningless
DEFAULT_PHASE_BLOCKS = ((0, 1), (0, 2), (0, 3))


def diagonal_block(t: ProcessTensor, imag_tol: float | None = None) -> np.ndarray:
    """Photon-number transfer matrix M[k, m] = Re t[k, k, m, m].

    Imaginary parts must be residual: within 1e-9 for analytic tensors and
    1e-3 for reconstructed ones (chosen from the tensor's tp_tol when
    ``imag_tol`` is not given).
    """
    if imag_tol is None:
        imag_tol = 1e-9 if t.tp_tol <= 1e-6 else 1e-3
    diag = np.einsum("kkmm->km", t.entries)
    worst = float(np.max(np.abs(diag.imag)))
    if worst > imag_tol:
        raise ValueError(f"diagonal block has imaginary residue {worst:.3e} > {imag_tol:.0e}")
    return diag.real.copy()


def binomial_transfer_matrix(eta: float, dim: int) -> np.ndarray:
    """B[k, m] = C(m, k) eta^k (1-eta)^(m-k): the loss-channel diagonal block."""
    k = np.arange(dim)[:, None].astype(float)
    m = np.arange(dim)[None, :].astype(float)
    mask = k <= m
    comb = np.exp(gammaln(m + 1) - gammaln(k + 1) - gammaln(np.where(mask, m - k, 0.0) + 1))
    vals = comb * np.power(eta, k) * np.power(1.0 - eta, np.where(mask, m - k, 0.0))
    return np.where(mask, vals, 0.0)


def fit_transmissivity(diag: np.ndarray) -> float:
    """Least-squares transmissivity of a diagonal block.

    Minimizes the squared deviation from the binomial transfer matrix over
    eta in [0, 1] via golden-section search to 1e-6; a coarse scan first
    verifies the objective is unimodal (single bracketed minimum).
    """
    diag = np.asarray(diag, dtype=float)
    if diag.ndim != 2 or diag.shape[0] != diag.shape[1]:
        raise ValueError(f"diagonal block must be square, got shape {diag.shape}")
    dim = diag.shape[0]
    if dim < 2:
        raise DegenerateBlock("transmissivity fit needs a block of dim >= 2")

    def objective(eta: float) -> float:
        return float(np.sum((diag - binomial_transfer_matrix(eta, dim)) ** 2))

    grid = np.linspace(0.0, 1.0, 201)
    vals = np.array([objective(g) for g in grid])
    interior = (vals[1:-1] < vals[:-2]) & (vals[1:-1] <= vals[2:])
    n_minima = int(interior.sum()) + int(vals[0] < vals[1]) + int(vals[-1] < vals[-2])
    if n_minima != 1:
        raise ValueError(f"transmissivity objective is not unimodal on the scan grid ({n_minima} minima)")
    i = int(np.argmin(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid.size - 1)]

    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    dd = a + inv_phi * (b - a)
    fc, fd = objective(c), objective(dd)
    while b - a > 1e-8:
        if fc < fd:
            b, dd, fd = dd, c, fc
            c = b - inv_phi * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, dd, fd
            dd = a + inv_phi * (b - a)
            fd = objective(dd)
    return float(np.clip((a + b) / 2.0, 0.0, 1.0))


def phase_map(
    t: ProcessTensor, k: int, l: int, mag_floor: float = DEFAULT_MAG_FLOOR
) -> list[tuple[int, int, float]]:
    """Principal-branch phases of the (k, l) output block.

    Emits (m, n, phase) for every input pair on the phase-symmetric family
    m - n = k - l whose element magnitude clears ``mag_floor``; raises
    EmptyMap when nothing does.
    """
    if k == l:
        raise ValueError("phase_map needs an off-diagonal block (k != l)")
    d = t.dim
    if not (0 <= k < d and 0 <= l < d):
        raise ValueError(f"block ({k}, {l}) outside dimension {d}")
    out = []
    for m in range(d):
        n = m - (k - l)
        if 0 <= n < d:
            val = t.entries[k, l, m, n]
            if abs(val) >= mag_floor:
                out.append((m, n, float(np.angle(val))))
    if not out:
        raise EmptyMap(f"no element of block ({k}, {l}) reaches magnitude {mag_floor}")
    return out


def block_mean_phase(t: ProcessTensor, k: int, l: int, mag_floor: float = DEFAULT_MAG_FLOOR) -> float:
    """Magnitude-weighted circular mean phase of the (k, l) block.

    The block's family elements above ``mag_floor`` are summed as vectors and
    the angle of the resultant taken, so noise-dominated small elements
    cannot swing the mean.  Exact for tensors whose block phases are all
    equal (any loss channel).
    """
    total = 0j
    for m, n, _ in phase_map(t, k, l, mag_floor):
        total += t.entries[k, l, m, n]
    return float(np.angle(total))


@dataclass(frozen=True)
class PhaseFit:
    """Global-phase fit: phi_hat in (-pi, pi], per-block circular means and
    the rms residual of the linear law theta = (l - k) * phi."""

    phi_hat: float
    per_block_means: tuple[tuple[int, int, float], ...]
    residual: float

    def __post_init__(self):
        if not -np.pi < self.phi_hat <= np.pi:
            raise ValueError(f"phi_hat {self.phi_hat} outside (-pi, pi]")
        if self.residual < 0:
            raise ValueError("residual must be >= 0")


def fit_phase_line(block_means) -> PhaseFit:
    """Least-squares slope of theta_kl = (l - k) * phi through the origin.

    ``block_means`` are (k, l, theta) triples with theta on the principal
    branch; the sequence is unwrapped (multiples of 2*pi added so jumps stay
    below pi, which makes it monotone whenever the true phi lies in (0, pi))
    before fitting phi = sum (l-k) theta / sum (l-k)^2.
    """
    block_means = list(block_means)
    if not block_means:
        raise EmptyMap("no block means to fit")
    steps = np.array([l - k for k, l, _ in block_means], dtype=float)
    th = np.unwrap(np.array([theta for _, _, theta in block_means], dtype=float))
    phi = float(np.sum(steps * th) / np.sum(steps * steps))
    residual = float(np.sqrt(np.mean((th - steps * phi) ** 2)))
    if not -np.pi < phi <= np.pi:
        phi = float((phi + np.pi) % (2.0 * np.pi) - np.pi)
        if phi == -np.pi:
            phi = np.pi
    return PhaseFit(phi_hat=phi, per_block_means=tuple(block_means), residual=residual)


def fit_global_phase(
    t: ProcessTensor,
    mag_floor: float = DEFAULT_MAG_FLOOR,
    blocks=DEFAULT_PHASE_BLOCKS,
) -> PhaseFit:
    """Fit the constant channel phase from the (0,1), (0,2), (0,3) blocks.

    Block phases are combined by magnitude-weighted circular (vector) means,
    branch-cut safe near +-pi, then fed to :func:`fit_phase_line`.
    """
    means = [(k, l, block_mean_phase(t, k, l, mag_floor)) for k, l in blocks]
    return fit_phase_line(means)


def process_fidelity(a: ProcessTensor, b: ProcessTensor) -> tuple[float, float]:
    """(full, diagonal) fidelity between two process tensors.

    ``full`` is the Uhlmann fidelity of the Choi matrices normalized to unit
    trace (Choi/D).  ``diagonal`` is a Bhattacharyya-type overlap of the two
    column-normalized diagonal blocks under uniform column weights 1/D:
    (sum_km sqrt(A[k,m] B[k,m]) / D)^2.  Both are reported because either
    could be meant by a bare "fidelity" between channels.
    """
    if a.dim != b.dim:
        raise DimensionMismatch(f"tensor dims differ: {a.dim} != {b.dim}")
    d = a.dim
    full = fidelity_psd(a.choi() / d, b.choi() / d)
    da = np.clip(diagonal_block(a), 0.0, None)
    db = np.clip(diagonal_block(b), 0.0, None)
    da = da / da.sum(axis=0, keepdims=True)
    db = db / db.sum(axis=0, keepdims=True)
    bc = float(np.sum(np.sqrt(da * db)) / d)
    return full, min(1.0, bc * bc)


def predict_output(t: ProcessTensor, rho_in: DensityMatrix) -> DensityMatrix:
    """Output state of the channel for an arbitrary (possibly nonclassical)
    input; an alias of :func:`csqpt.fock.apply_process` for reporting."""
    return apply_process(t, rho_in)
