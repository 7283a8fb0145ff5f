"""Truncated Fock-space states and channels: coherent states, rank-4 process
tensors with a Choi-matrix view, the analytic beam-splitter loss channel,
Wigner functions and Uhlmann fidelity.

Conventions: quadratures are X = (a + a^dag)/2 and Y = (a - a^dag)/(2i), so
the vacuum has variance 1/4 in each and the Wigner function of a coherent
state |alpha> peaks at (Re alpha, Im alpha).  A process tensor ``t[k, l, m, n]``
maps the input matrix element (m, n) to the output element (k, l); a loss
channel with phase phi carries element phase (l - k) * phi, which puts +phi on
the (0, 1) output block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from . import _validation as v
from .errors import DimensionMismatch, TruncationError

__all__ = [
    "DensityMatrix",
    "ProcessTensor",
    "ChannelModel",
    "WignerGrid",
    "coherent_density",
    "fock_density",
    "superposition_density",
    "apply_process",
    "loss_channel_tensor",
    "truncate_process_tensor",
    "wigner",
    "state_fidelity",
    "mean_photon_number",
]


def log_factorial(n) -> np.ndarray:
    """log(n!); log space keeps dimensions up to 64 overflow-free."""
    return gammaln(np.asarray(n, dtype=float) + 1.0)


def sqrt_binomial(m, k) -> np.ndarray:
    """sqrt(C(m, k)) in log space; zero where k > m."""
    m = np.asarray(m, dtype=float)
    k = np.asarray(k, dtype=float)
    out = np.exp(0.5 * (gammaln(m + 1) - gammaln(k + 1) - gammaln(m - k + 1)))
    return np.where(k <= m, out, 0.0)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A quantum state as a truncated Fock-basis matrix.

    ``entries[m, n]`` multiplies |m><n|.  The matrix must be exactly Hermitian,
    positive semidefinite down to ``psd_tol`` and unit-trace within
    ``trace_tol``.  The slacks default to the strict values for directly
    constructed states; channel outputs widen them to the channel's
    trace-preservation residual.
    """

    entries: np.ndarray
    trace_tol: float = v.STATE_TRACE_TOL
    psd_tol: float = v.STATE_PSD_TOL

    def __post_init__(self):
        arr = v.as_complex_matrix(self.entries, "DensityMatrix.entries")
        v.check_hermitian(arr, "DensityMatrix.entries")
        v.check_psd(arr, self.psd_tol, "DensityMatrix.entries")
        v.check_unit_trace(arr, self.trace_tol, "DensityMatrix.entries")
        object.__setattr__(self, "entries", v.freeze(arr))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def trace(self) -> float:
        return float(np.real(np.trace(self.entries)))


def mean_photon_number(rho: DensityMatrix) -> float:
    """Tr(rho * n_hat)."""
    return float(np.real(np.sum(np.arange(rho.dim) * np.diag(rho.entries))))


@dataclass(frozen=True)
class ChannelModel:
    """Transmissivity/phase pair of the beam-splitter loss model (vacuum bath)."""

    eta: float
    phi: float = 0.0

    def __post_init__(self):
        eta = float(self.eta)
        if not 0.0 <= eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {eta}")
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "phi", float(self.phi) % (2.0 * np.pi))


@dataclass(frozen=True, eq=False)
class ProcessTensor:
    """Rank-4 channel tensor in the Fock basis.

    ``entries[k, l, m, n]`` sends input |m><n| to output |k><l|.  ``tp_tol``
    is the trace-preservation residual the tensor is validated against:
    1e-6 by default for analytic tensors, 0.02 for statistically
    reconstructed ones.
    """

    entries: np.ndarray
    tp_tol: float = 1e-6

    def __post_init__(self):
        arr = np.array(self.entries, dtype=np.complex128, copy=True)
        if arr.ndim != 4 or len(set(arr.shape)) != 1:
            raise ValueError(f"ProcessTensor entries must be a (D,D,D,D) tensor, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("ProcessTensor entries contain non-finite values")
        if not np.array_equal(arr, arr.transpose(1, 0, 3, 2).conj()):
            raise ValueError("ProcessTensor entries must satisfy t[k,l,m,n] = conj(t[l,k,n,m])")
        d = arr.shape[0]
        tp_resid = float(np.max(np.abs(np.einsum("kkmn->mn", arr) - np.eye(d))))
        if tp_resid > self.tp_tol:
            raise ValueError(f"trace-preservation residual {tp_resid:.3e} exceeds tp_tol {self.tp_tol:.0e}")
        choi = np.ascontiguousarray(arr.transpose(0, 2, 1, 3)).reshape(d * d, d * d)
        v.check_psd(choi, v.CHOI_PSD_TOL, "ProcessTensor Choi matrix")
        object.__setattr__(self, "entries", v.freeze(arr))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def choi(self) -> np.ndarray:
        """Choi matrix with row index (k, m) and column index (l, n)."""
        d = self.dim
        return np.ascontiguousarray(self.entries.transpose(0, 2, 1, 3)).reshape(d * d, d * d)

    @classmethod
    def from_choi(cls, choi: np.ndarray, tp_tol: float = 1e-6) -> "ProcessTensor":
        """Inverse of :meth:`choi` (same index pairing)."""
        choi = np.asarray(choi, dtype=np.complex128)
        d = round(np.sqrt(choi.shape[0]))
        if choi.shape != (d * d, d * d):
            raise ValueError(f"Choi matrix shape {choi.shape} is not (D^2, D^2)")
        return cls(choi.reshape(d, d, d, d).transpose(0, 2, 1, 3), tp_tol=tp_tol)

    def trace_preservation_residual(self) -> float:
        d = self.dim
        return float(np.max(np.abs(np.einsum("kkmn->mn", self.entries) - np.eye(d))))


def truncate_process_tensor(tensor: ProcessTensor, dim: int, tp_tol: float | None = None) -> ProcessTensor:
    """Restrict a tensor to the leading ``dim`` Fock levels.

    The Choi matrix of the restriction is a principal submatrix, so complete
    positivity survives; for loss-like channels (photons only move downward)
    the restricted tensor stays trace preserving up to the population the
    discarded levels received.
    """
    if not 1 <= dim <= tensor.dim:
        raise ValueError(f"need 1 <= dim <= {tensor.dim}, got {dim}")
    if dim == tensor.dim:
        return tensor
    sub = tensor.entries[:dim, :dim, :dim, :dim]
    sub = (sub + sub.transpose(1, 0, 3, 2).conj()) / 2.0
    return ProcessTensor(sub, tp_tol=tensor.tp_tol if tp_tol is None else tp_tol)


def coherent_amplitudes(alpha: complex, dim: int) -> np.ndarray:
    """Fock coefficients c_m = e^{-|a|^2/2} a^m / sqrt(m!) up to dim - 1."""
    alpha = complex(alpha)
    if alpha == 0:
        c = np.zeros(dim, dtype=np.complex128)
        c[0] = 1.0
        return c
    m = np.arange(dim)
    log_mag = -0.5 * abs(alpha) ** 2 + m * np.log(abs(alpha)) - 0.5 * log_factorial(m)
    return np.exp(log_mag) * np.exp(1j * m * np.angle(alpha))


def coherent_density(alpha: complex, dim: int) -> DensityMatrix:
    """Truncated coherent state |alpha><alpha|, renormalized to unit trace.

    Renormalization absorbs the truncation tail; if the pre-normalization
    trace falls below 0.999 (or |alpha|^2 > dim/4) the state does not fit and
    TruncationError is raised instead of silently distorting it.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    alpha = complex(alpha)
    if abs(alpha) ** 2 > dim / 4.0:
        raise TruncationError(f"|alpha|^2 = {abs(alpha) ** 2:.4f} exceeds dim/4 = {dim / 4.0:.4f}")
    c = coherent_amplitudes(alpha, dim)
    rho = v.hermitized(np.outer(c, c.conj()))
    tr = float(np.real(np.trace(rho)))
    if tr < 0.999:
        raise TruncationError(f"coherent state trace {tr:.6f} < 0.999 at dim {dim}")
    return DensityMatrix(rho / tr)


def fock_density(n: int, dim: int) -> DensityMatrix:
    """Photon-number state |n><n|."""
    if not 0 <= n < dim:
        raise ValueError(f"need 0 <= n < dim, got n={n}, dim={dim}")
    rho = np.zeros((dim, dim), dtype=np.complex128)
    rho[n, n] = 1.0
    return DensityMatrix(rho)


def superposition_density(c0: complex, c1: complex, dim: int) -> DensityMatrix:
    """Pure two-level superposition (c0|0> + c1|1>), auto-normalized."""
    if dim < 2:
        raise ValueError("superposition states need dim >= 2")
    vec = np.zeros(dim, dtype=np.complex128)
    vec[0], vec[1] = complex(c0), complex(c1)
    norm = np.linalg.norm(vec)
    if norm == 0:
        raise ValueError("superposition coefficients cannot both be zero")
    vec /= norm
    return DensityMatrix(v.hermitized(np.outer(vec, vec.conj())))


def apply_process(tensor: ProcessTensor, rho: DensityMatrix) -> DensityMatrix:
    """Act the channel on a state: out[k, l] = sum_mn t[k, l, m, n] rho[m, n].

    The output trace may deviate from 1 by up to the tensor's tp_tol, so the
    state is validated with correspondingly widened slacks.
    """
    if tensor.dim != rho.dim:
        raise DimensionMismatch(f"tensor dim {tensor.dim} != state dim {rho.dim}")
    out = np.einsum("klmn,mn->kl", tensor.entries, rho.entries)
    return DensityMatrix(
        v.hermitized(out),
        trace_tol=max(v.STATE_TRACE_TOL, tensor.tp_tol),
        psd_tol=max(v.STATE_PSD_TOL, v.CHOI_PSD_TOL),
    )


def _phase_table(phi: float, dim: int) -> np.ndarray:
    """e^{i d phi} for d = -(dim-1) .. dim-1, with exact conjugate symmetry."""
    pos = np.exp(1j * phi * np.arange(dim))
    full = np.concatenate([pos[:0:-1].conj(), pos])
    return full  # index with [d + dim - 1]


def loss_channel_tensor(model: ChannelModel, dim: int) -> ProcessTensor:
    """Analytic tensor of the beam-splitter loss channel.

    t[k, l, m, n] = delta_{m-k, n-l} sqrt(C(m,k) C(n,l)) eta^{(k+l)/2}
    (1-eta)^{m-k} e^{i (l-k) phi} for k <= m, l <= n; zero otherwise.  Only
    elements with k - l = m - n survive, and the trace is preserved exactly at
    any truncation because photons only move downward.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    eta, phi = model.eta, model.phi
    k = np.arange(dim)[:, None]
    m = np.arange(dim)[None, :]
    # B[k, m] = sqrt(C(m, k)) eta^{k/2} (1-eta)^{(m-k)/2}, zero for k > m
    half = np.where(k <= m, (m - k) / 2.0, 0.0)
    B = sqrt_binomial(m, k) * np.power(eta, k / 2.0) * np.power(1.0 - eta, half)
    t = np.einsum("km,ln->klmn", B, B).astype(np.complex128)
    kk, ll, mm, nn = np.ogrid[0:dim, 0:dim, 0:dim, 0:dim]
    t *= (mm - kk) == (nn - ll)
    table = _phase_table(phi, dim)
    t *= table[(ll - kk) + dim - 1]
    t = (t + t.transpose(1, 0, 3, 2).conj()) / 2.0  # exact Hermitian pairing
    return ProcessTensor(t, tp_tol=1e-6)


@dataclass(frozen=True, eq=False)
class WignerGrid:
    """Wigner function samples on a rectangular phase-space grid.

    ``values[i, j]`` is W(x_axis[i], y_axis[j]).  Every entry obeys the
    universal bound |W| <= 2/pi.
    """

    x_axis: np.ndarray
    y_axis: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        x = np.array(self.x_axis, dtype=float, copy=True)
        y = np.array(self.y_axis, dtype=float, copy=True)
        w = np.array(self.values, dtype=float, copy=True)
        for axis, name in ((x, "x_axis"), (y, "y_axis")):
            if axis.ndim != 1 or axis.size < 1 or np.any(np.diff(axis) <= 0):
                raise ValueError(f"{name} must be strictly increasing")
        if w.shape != (x.size, y.size):
            raise ValueError(f"values shape {w.shape} does not match axes ({x.size}, {y.size})")
        bound = 2.0 / np.pi + 1e-9
        if np.max(np.abs(w)) > bound:
            raise ValueError(f"Wigner values exceed the 2/pi bound: max |W| = {np.max(np.abs(w)):.6f}")
        object.__setattr__(self, "x_axis", v.freeze(x))
        object.__setattr__(self, "y_axis", v.freeze(y))
        object.__setattr__(self, "values", v.freeze(w))

    def integral(self) -> float:
        """Trapezoidal integral of W over the grid."""
        return float(np.trapezoid(np.trapezoid(self.values, self.y_axis, axis=1), self.x_axis))

    def centroid(self) -> tuple[float, float]:
        """First moment of W over the grid, normalized by its integral."""
        wx = np.trapezoid(np.trapezoid(self.values * self.x_axis[:, None], self.y_axis, axis=1), self.x_axis)
        wy = np.trapezoid(np.trapezoid(self.values * self.y_axis[None, :], self.y_axis, axis=1), self.x_axis)
        total = self.integral()
        return float(wx / total), float(wy / total)


def wigner(rho: DensityMatrix, x_axis, y_axis) -> WignerGrid:
    """Wigner function of ``rho`` on the given axes.

    Evaluated as the Fock-basis series with associated Laguerre polynomials,
    normalized so the full-plane integral equals Tr(rho) and the vacuum peaks
    at 2/pi.  When the grid covers [-5, 5] at dim <= 10 the trapezoidal
    integral is checked against the trace to 2%.
    """
    x = np.asarray(x_axis, dtype=float)
    y = np.asarray(y_axis, dtype=float)
    X, Y = np.meshgrid(x, y, indexing="ij")
    r2 = X * X + Y * Y
    gauss = (2.0 / np.pi) * np.exp(-2.0 * r2)
    z = X - 1j * Y
    u = 4.0 * r2
    d = rho.dim
    lf = log_factorial(np.arange(d))
    w = np.zeros_like(X, dtype=np.complex128)
    for n in range(d):
        for m in range(n, d):
            coef = (-1.0) ** n * np.exp(0.5 * (lf[n] - lf[m]) + (m - n) * np.log(2.0))
            base = coef * np.power(z, m - n) * eval_genlaguerre(n, m - n, u)
            if m == n:
                w += rho.entries[m, n].real * base
            else:
                w += 2.0 * (rho.entries[m, n] * base).real
    values = gauss * w.real
    grid = WignerGrid(x, y, values)
    covers = x[0] <= -5.0 and x[-1] >= 5.0 and y[0] <= -5.0 and y[-1] >= 5.0
    if covers and d <= 10:
        total = grid.integral()
        if abs(total - rho.trace()) > 0.02 * rho.trace():
            raise ValueError(f"Wigner integral {total:.6f} deviates from trace {rho.trace():.6f} by > 2%")
    return grid


def _sqrtm_psd(arr: np.ndarray) -> np.ndarray:
    w, u = np.linalg.eigh(arr)
    return (u * np.sqrt(np.clip(w, 0.0, None))) @ u.conj().T


def fidelity_psd(a: np.ndarray, b: np.ndarray) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(a) b sqrt(a)))^2 for unit-trace PSD matrices."""
    sqa = _sqrtm_psd(a)
    inner = v.hermitized(sqa @ b @ sqa)
    s = float(np.sum(np.sqrt(np.clip(np.linalg.eigvalsh(inner), 0.0, None))))
    return min(1.0, s * s)


def state_fidelity(a: DensityMatrix, b: DensityMatrix) -> float:
    """Uhlmann fidelity between two states, in [0, 1]."""
    if a.dim != b.dim:
        raise DimensionMismatch(f"state dims differ: {a.dim} != {b.dim}")
    return fidelity_psd(a.entries, b.entries)
