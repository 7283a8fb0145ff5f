"""Quadrature wavefunctions, homodyne statistics, binned measurement operators
and deterministic synthetic-data generation.

The phase scan is modeled as P uniform sections of [0, 2*pi); every sample in
a section carries the section-center phase.  Quadrature values are drawn by
inverse-CDF lookup on a tabulated pdf, driven by the counter-based Philox
generator so a seed fully determines the output.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.integrate import cumulative_trapezoid, quad_vec

from . import _validation as v
from .errors import EdgeOrderError
from .fock import DensityMatrix

__all__ = [
    "QuadratureSample",
    "QuadratureDataset",
    "HomodynePovm",
    "quadrature_wavefunction",
    "wavefunction_matrix",
    "quadrature_pdf",
    "section_phases",
    "sample_dataset",
    "build_povm",
]

# Inverse-CDF table covers [-6, 6] at step 1e-3; out-of-range mass is < 1e-12
# for every state with |alpha| <= 1.1.
_CDF_X_MIN = -6.0
_CDF_X_MAX = 6.0
_CDF_POINTS = 12001


def wavefunction_matrix(dim: int, x) -> np.ndarray:
    """psi_0..psi_{dim-1} evaluated at x, stacked as shape (dim,) + x.shape.

    psi_n(x) = (2/pi)^{1/4} (2^n n!)^{-1/2} H_n(sqrt2 x) e^{-x^2}: oscillator
    eigenfunctions with vacuum x-variance 1/4, evaluated by upward recurrence
    on normalized Hermite functions (stable, unlike raw polynomials).
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    x = np.asarray(x, dtype=float)
    q = np.sqrt(2.0) * x
    out = np.empty((dim,) + x.shape, dtype=float)
    h0 = np.pi ** -0.25 * np.exp(-0.5 * q * q)
    out[0] = h0
    if dim > 1:
        out[1] = np.sqrt(2.0) * q * h0
    for n in range(1, dim - 1):
        out[n + 1] = np.sqrt(2.0 / (n + 1)) * q * out[n] - np.sqrt(n / (n + 1.0)) * out[n - 1]
    return 2.0 ** 0.25 * out


def quadrature_wavefunction(n: int, x):
    """psi_n at quadrature x (scalar or array)."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    out = wavefunction_matrix(n + 1, x)[n]
    return float(out) if np.isscalar(x) else out


def quadrature_pdf(rho: DensityMatrix, theta: float, x):
    """p(x | theta) = sum_mn rho[m,n] e^{i(n-m)theta} psi_m(x) psi_n(x).

    The imaginary residue is discarded and tiny negative round-off is clamped
    to zero.
    """
    scalar = np.isscalar(x)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    psi = wavefunction_matrix(rho.dim, xs)
    vecs = np.exp(1j * np.arange(rho.dim) * theta)[:, None] * psi  # v_m(x) = e^{i m theta} psi_m
    p = np.real(np.einsum("mx,mn,nx->x", vecs.conj(), rho.entries, vecs))
    if np.min(p) < -1e-9:
        raise ValueError(f"quadrature pdf went negative ({np.min(p):.3e}); invalid state")
    p = np.maximum(p, 0.0)
    return float(p[0]) if scalar else p


def section_phases(phase_sections: int) -> np.ndarray:
    """Center phase of each of P uniform sections of [0, 2*pi)."""
    if phase_sections < 1:
        raise ValueError(f"phase_sections must be >= 1, got {phase_sections}")
    return (np.arange(phase_sections) + 0.5) * (2.0 * np.pi / phase_sections)


class QuadratureSample(NamedTuple):
    """One homodyne outcome: local-oscillator phase and quadrature value."""

    theta: float
    x: float


@dataclass(frozen=True, eq=False)
class QuadratureDataset:
    """Ordered homodyne samples with probe metadata.

    ``samples`` is an (n, 2) array of (theta, x) rows with theta in [0, 2*pi);
    ``probe_alpha`` records the coherent amplitude sent into the channel and
    ``seed`` the generator seed, for provenance.
    """

    samples: np.ndarray
    probe_alpha: complex = 0j
    seed: int = 0

    def __post_init__(self):
        arr = np.array(v.as_sample_array(self.samples, "QuadratureDataset.samples"), copy=True)
        object.__setattr__(self, "samples", v.freeze(arr))
        object.__setattr__(self, "probe_alpha", complex(self.probe_alpha))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def thetas(self) -> np.ndarray:
        return self.samples[:, 0]

    @property
    def xs(self) -> np.ndarray:
        return self.samples[:, 1]

    def __len__(self) -> int:
        return self.n_samples

    def __getitem__(self, i: int) -> QuadratureSample:
        return QuadratureSample(*self.samples[i])


def sample_dataset(
    rho: DensityMatrix,
    phase_sections: int,
    n_samples: int,
    seed: int,
    probe_alpha: complex = 0j,
) -> QuadratureDataset:
    """Draw a deterministic homodyne dataset from ``rho``.

    Sample i carries the center phase of section floor(i * P / n); its x is an
    inverse-CDF lookup on the tabulated pdf of that section, fed by Philox
    uniforms keyed on ``seed``.  Identical arguments give identical bytes.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    if seed < 0:
        raise ValueError(f"seed must be a nonnegative integer, got {seed}")
    thetas = section_phases(phase_sections)
    xs = np.linspace(_CDF_X_MIN, _CDF_X_MAX, _CDF_POINTS)
    rng = np.random.Generator(np.random.Philox(key=seed))
    u = rng.random(n_samples)
    section = (np.arange(n_samples, dtype=np.int64) * phase_sections) // n_samples
    out_x = np.empty(n_samples, dtype=float)
    for p in range(phase_sections):
        mask = section == p
        if not np.any(mask):
            continue
        cdf = cumulative_trapezoid(quadrature_pdf(rho, thetas[p], xs), xs, initial=0.0)
        cdf /= cdf[-1]
        out_x[mask] = np.interp(u[mask], cdf, xs)
    samples = np.column_stack([thetas[section], out_x])
    return QuadratureDataset(samples, probe_alpha=probe_alpha, seed=seed)


@dataclass(frozen=True, eq=False)
class HomodynePovm:
    """Binned quadrature measurement operators in the Fock basis.

    ``operators[p, b]`` is the (dim x dim) effect of landing in x-bin b while
    the scan sits in phase section p; the built-in 1/P factor makes the whole
    (p, b) family a single POVM.  Each effect is PSD, and per section the
    x-bins resolve the identity on the n <= dim-2 subspace up to the
    probability mass outside the edges (deficit <= 1e-3).
    """

    phase_sections: int
    x_edges: np.ndarray
    operators: np.ndarray

    def __post_init__(self):
        edges = np.array(self.x_edges, dtype=float, copy=True)
        ops = np.array(self.operators, dtype=np.complex128, copy=True)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise EdgeOrderError("x_edges must be strictly increasing with at least 2 entries")
        P = int(self.phase_sections)
        if P < 1:
            raise ValueError(f"phase_sections must be >= 1, got {P}")
        B = edges.size - 1
        if ops.ndim != 4 or ops.shape[:2] != (P, B) or ops.shape[2] != ops.shape[3]:
            raise ValueError(f"operators must have shape (P, B, D, D), got {ops.shape}")
        d = ops.shape[2]
        flat = ops.reshape(P * B, d, d)
        if not np.array_equal(flat, flat.conj().transpose(0, 2, 1)):
            raise ValueError("POVM operators must be Hermitian")
        lo = float(np.min(np.linalg.eigvalsh(flat)))
        if lo < -v.POVM_PSD_TOL:
            raise ValueError(f"POVM operators not PSD: min eigenvalue {lo:.3e}")
        for p in range(P):
            complete = P * ops[p].sum(axis=0)
            hi = float(np.max(np.linalg.eigvalsh(complete)))
            if hi > 1.0 + 1e-8:
                raise ValueError(f"section {p} bins overshoot the identity: max eigenvalue {hi:.2e}")
            if d >= 2:
                sub = complete[: d - 1, : d - 1]
                deficit = 1.0 - float(np.min(np.linalg.eigvalsh(sub)))
                if deficit > 1e-3:
                    raise ValueError(f"section {p} leaves deficit {deficit:.2e} > 1e-3 below n = {d - 2}")
        object.__setattr__(self, "phase_sections", P)
        object.__setattr__(self, "x_edges", v.freeze(edges))
        object.__setattr__(self, "operators", v.freeze(ops))

    @property
    def dim(self) -> int:
        return self.operators.shape[2]

    @property
    def n_bins(self) -> int:
        return self.operators.shape[1]

    @property
    def thetas(self) -> np.ndarray:
        return section_phases(self.phase_sections)

    def flat_operators(self) -> np.ndarray:
        """Operators reshaped to (P*B, D, D), section-major."""
        return self.operators.reshape(-1, self.dim, self.dim)


def build_povm(phase_sections: int, x_edges, dim: int) -> HomodynePovm:
    """Assemble the binned homodyne POVM.

    operator(p, b)[m, n] = e^{i(m-n)theta_p} * integral of psi_m psi_n over
    bin b, divided by P; the 1/P factor encodes the uniform phase schedule so
    the whole (p, b) family forms one POVM.  Bin integrals use adaptive
    quadrature to 1e-10 absolute.
    """
    edges = np.asarray(x_edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise EdgeOrderError("x_edges must be strictly increasing with at least 2 entries")
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    P = int(phase_sections)
    B = edges.size - 1

    def integrand(x: float) -> np.ndarray:
        psi = wavefunction_matrix(dim, np.array([x]))[:, 0]
        return np.outer(psi, psi)

    bin_ints = np.empty((B, dim, dim), dtype=float)
    for b in range(B):
        val, _ = quad_vec(integrand, edges[b], edges[b + 1], epsabs=1e-10, epsrel=1e-10)
        bin_ints[b] = val

    phases = np.exp(1j * np.arange(dim)[None, :] * section_phases(P)[:, None])  # (P, d): e^{i n theta_p}
    # Matrix element [m, n] carries e^{i(m-n)theta_p} so that Tr[op rho] equals
    # the quadrature pdf integrated over the bin (same orientation that puts a
    # coherent state's section mean at |alpha| cos(theta - arg alpha)).
    ops = (phases[:, None, :, None] * phases.conj()[:, None, None, :]) * bin_ints[None, :, :, :] / P
    ops = (ops + ops.conj().transpose(0, 1, 3, 2)) / 2.0  # bitwise Hermitian despite FMA rounding
    return HomodynePovm(P, edges, ops)
