"""Iterative maximum-likelihood reconstruction of density matrices from binned
homodyne data and of process tensors from families of coherent-probe datasets.

State reconstruction is the classic R*rho*R fixed point; process
reconstruction iterates the trace-preservation-constrained fixed point
E <- Lam^{-1/2} R E R Lam^{-1/2} on the Choi matrix.  Both loops only accept
updates that do not decrease the log-likelihood, so the likelihood trace is
monotone by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _validation as v
from .errors import DimensionMismatch, InsufficientProbes
from .fock import DensityMatrix, ProcessTensor, coherent_density
from .homodyne import HomodynePovm, QuadratureDataset

__all__ = [
    "MleConfig",
    "BinnedCounts",
    "StateMleResult",
    "ProcessMleResult",
    "bin_dataset",
    "state_mle",
    "process_mle",
    "process_mle_from_frequencies",
    "log_likelihood",
]

_PROB_FLOOR = 1e-300
_LL_SLACK = 1e-12
RECONSTRUCTED_TP_TOL = 0.02
# Weight of the depolarizing-Choi pull mixed into every process update.  The
# single-ray probe family measures high-photon-number tensor components so
# weakly that the plain likelihood iteration random-walks there; a pull of
# this size freezes those directions at the maximum-entropy channel while
# biasing well-measured components by well under a percent.
PROCESS_PRIOR_SHRINK = 7e-5


@dataclass(frozen=True)
class MleConfig:
    """Iteration controls for both reconstruction loops.

    ``dilution`` mixes the fixed-point update into the previous iterate;
    1.0 (undiluted) is stable for state reconstruction while Choi-space
    iterations benefit from damping (0.5 default there).
    """

    max_iter: int = 5000
    rel_tol: float = 1e-11
    dilution: float = 1.0
    dim: int = 7

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if not self.rel_tol > 0:
            raise ValueError(f"rel_tol must be > 0, got {self.rel_tol}")
        if not 0.0 < self.dilution <= 1.0:
            raise ValueError(f"dilution must lie in (0, 1], got {self.dilution}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")


DEFAULT_STATE_CONFIG = MleConfig(dilution=1.0)
# Choi-space iterations need damping, and the weakly probed high-n tensor
# columns keep improving well past the point the likelihood looks flat, so
# the process loop runs longer and to a tighter relative tolerance.
DEFAULT_PROCESS_CONFIG = MleConfig(max_iter=5000, rel_tol=1e-12, dilution=0.5)


@dataclass(frozen=True, eq=False)
class BinnedCounts:
    """Histogram of a dataset against a POVM: counts[p, b] plus the number of
    samples that fell outside the x edges."""

    counts: np.ndarray
    dropped: int = 0

    def __post_init__(self):
        arr = np.array(self.counts, copy=True)
        if arr.ndim != 2 or not np.issubdtype(arr.dtype, np.integer):
            raise ValueError("counts must be a 2-d integer array")
        if np.any(arr < 0):
            raise ValueError("counts must be nonnegative")
        object.__setattr__(self, "counts", v.freeze(arr.astype(np.int64)))
        object.__setattr__(self, "dropped", int(self.dropped))

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def bin_dataset(ds: QuadratureDataset, povm: HomodynePovm) -> BinnedCounts:
    """Histogram dataset samples onto the POVM's (section, x-bin) grid.

    Sections tile [0, 2*pi) uniformly; x values outside the edges are dropped
    and reported via ``BinnedCounts.dropped``.
    """
    P, B = povm.phase_sections, povm.n_bins
    section = np.floor(ds.thetas / (2.0 * np.pi / P)).astype(np.int64)
    section = np.minimum(section, P - 1)  # guard against round-up at the top edge
    xbin = np.searchsorted(povm.x_edges, ds.xs, side="right") - 1
    in_range = (xbin >= 0) & (xbin < B)
    counts = np.zeros((P, B), dtype=np.int64)
    np.add.at(counts, (section[in_range], xbin[in_range]), 1)
    return BinnedCounts(counts, dropped=int(ds.n_samples - in_range.sum()))


def _frequencies(counts: BinnedCounts) -> np.ndarray:
    if counts.total < 1:
        raise ValueError("total counts must be >= 1")
    return counts.counts.ravel() / counts.total


def _ll(freq: np.ndarray, prob: np.ndarray) -> float:
    """sum f ln p with the empty-bin floor; bins with f = 0 contribute 0."""
    mask = freq > 0
    return float(np.sum(freq[mask] * np.log(np.maximum(prob[mask], _PROB_FLOOR))))


@dataclass(frozen=True, eq=False)
class StateMleResult:
    state: DensityMatrix
    converged: bool
    n_iter: int
    log_likelihood: float
    ll_trace: np.ndarray


def state_mle(counts: BinnedCounts, povm: HomodynePovm, cfg: MleConfig = DEFAULT_STATE_CONFIG) -> StateMleResult:
    """Reconstruct a density matrix from binned homodyne counts.

    Iterates rho <- N[R(rho) rho R(rho)] with R = sum_j (f_j / p_j) Pi_j from
    the maximally mixed state, mixing by ``cfg.dilution``; an update is only
    accepted if the log-likelihood does not decrease (retried at smaller
    dilution otherwise), and iteration stops once the relative improvement
    drops below ``cfg.rel_tol`` or ``cfg.max_iter`` is hit (``converged``
    False in the latter case).
    """
    if counts.counts.shape != (povm.phase_sections, povm.n_bins):
        raise DimensionMismatch(
            f"counts shape {counts.counts.shape} does not match POVM ({povm.phase_sections}, {povm.n_bins})"
        )
    if cfg.dim != povm.dim:
        raise DimensionMismatch(f"cfg.dim {cfg.dim} does not match POVM dim {povm.dim}")
    d = povm.dim
    ops = povm.flat_operators()
    freq = _frequencies(counts)

    def forward(r: np.ndarray) -> np.ndarray:
        return np.real(np.einsum("jmn,nm->j", ops, r, optimize=True))

    rho = np.eye(d, dtype=np.complex128) / d
    ll = _ll(freq, forward(rho))
    trace = [ll]
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        p = forward(rho)
        w = np.where(freq > 0, freq / np.maximum(p, _PROB_FLOOR), 0.0)
        R = np.einsum("j,jmn->mn", w, ops, optimize=True)
        update = R @ rho @ R
        update = v.hermitized(update)
        update /= np.real(np.trace(update))

        accepted = None
        d_mix = cfg.dilution
        for _ in range(40):
            cand = update if d_mix == 1.0 else v.hermitized((1.0 - d_mix) * rho + d_mix * update)
            ll_cand = _ll(freq, forward(cand))
            if ll_cand >= ll - _LL_SLACK:
                accepted = (cand, ll_cand)
                break
            d_mix /= 2.0
        if accepted is None:
            converged = True  # no improving direction left: numerical fixed point
            break
        cand, ll_cand = accepted
        assert ll_cand >= ll - _LL_SLACK
        improvement = ll_cand - ll
        rho, ll = cand, ll_cand
        trace.append(ll)
        if improvement <= cfg.rel_tol * abs(ll):
            converged = True
            break

    rho = v.hermitized(rho)
    rho /= np.real(np.trace(rho))
    return StateMleResult(
        state=DensityMatrix(rho),
        converged=converged,
        n_iter=it,
        log_likelihood=ll,
        ll_trace=np.asarray(trace),
    )


@dataclass(frozen=True, eq=False)
class ProcessMleResult:
    tensor: ProcessTensor
    converged: bool
    n_iter: int
    log_likelihood: float
    ll_trace: np.ndarray


def _identity_choi(d: int) -> np.ndarray:
    omega = np.eye(d, dtype=np.complex128).reshape(-1)  # |Omega> = sum_m |m m> in (k, m) pairing
    return np.outer(omega, omega.conj())


def process_mle(
    probes: Sequence[tuple[complex, BinnedCounts]],
    povm: HomodynePovm,
    cfg: MleConfig = DEFAULT_PROCESS_CONFIG,
    phase_symmetric: bool = True,
    shrink: float = PROCESS_PRIOR_SHRINK,
) -> ProcessMleResult:
    """Reconstruct a process tensor from binned data of coherent probes.

    ``probes`` pairs each probe amplitude with the binned counts measured at
    the channel output.  Probe states enter the likelihood as renormalized
    truncated coherent states at the reconstruction dimension.  See
    :func:`process_mle_from_frequencies` for ``phase_symmetric``.
    """
    if len(probes) < 1:
        raise InsufficientProbes("no probes given")
    alphas = [complex(a) for a, _ in probes]
    if len(set(alphas)) < 2:
        raise InsufficientProbes("need at least 2 distinct probe amplitudes")
    d = povm.dim
    if cfg.dim != d:
        raise DimensionMismatch(f"cfg.dim {cfg.dim} does not match POVM dim {d}")
    rhos = np.stack([coherent_density(a, d).entries for a in alphas])
    counts = np.stack([c.counts.ravel() for _, c in probes]).astype(float)
    total = counts.sum()
    if total < 1:
        raise ValueError("total counts must be >= 1")
    return process_mle_from_frequencies(
        counts / total, rhos, povm, cfg, phase_symmetric=phase_symmetric, shrink=shrink
    )


def process_mle_from_frequencies(
    freq: np.ndarray,
    probe_rhos: np.ndarray,
    povm: HomodynePovm,
    cfg: MleConfig = DEFAULT_PROCESS_CONFIG,
    phase_symmetric: bool = True,
    shrink: float = PROCESS_PRIOR_SHRINK,
) -> ProcessMleResult:
    """Core constrained Choi-space fixed point, on relative frequencies.

    ``freq[i, j]`` are relative frequencies (summing to 1 over all probes and
    outcomes; exact probabilities work too, enabling noiseless studies) and
    ``probe_rhos[i]`` the matching input density matrices.  The iteration is
    E <- Lam^{-1/2} R E R Lam^{-1/2} with R = sum_ij (f_ij / p_ij)
    (Pi_j (x) rho_i^T) and Lam the output-traced R E R, which keeps
    Tr_out E = I at every step; updates are diluted and likelihood-monotone
    exactly as in state_mle.  Start is the identity-channel Choi mixed 50/50
    with the maximally mixed one.

    With ``phase_symmetric`` (the default) every update is projected onto the
    family of tensors with t[k, l, m, n] = 0 unless k - l = m - n.  Probe
    amplitudes along a single phase ray have real, symmetric density matrices,
    which leave the complementary tensor components invisible to the
    likelihood; restricting to the phase-symmetric class (the class the loss
    channel belongs to) is what makes the maximization identifiable.  The
    projection is a unitary twirl, so positivity and the output trace are
    untouched.

    ``shrink`` mixes that fraction of the maximum-entropy (depolarizing) Choi
    into each update; see PROCESS_PRIOR_SHRINK.  Pass 0 for the bare
    likelihood iteration.
    """
    d = povm.dim
    ops = povm.flat_operators()
    rhos = np.asarray(probe_rhos, dtype=np.complex128)
    freq = np.asarray(freq, dtype=float)
    if rhos.ndim != 3 or rhos.shape[1:] != (d, d):
        raise DimensionMismatch(f"probe_rhos must have shape (n, {d}, {d}), got {rhos.shape}")
    if freq.shape != (rhos.shape[0], ops.shape[0]):
        raise DimensionMismatch(f"freq shape {freq.shape} does not match ({rhos.shape[0]}, {ops.shape[0]})")
    kk, mm, ll, nn = np.ogrid[0:d, 0:d, 0:d, 0:d]
    family = ((kk - mm) == (ll - nn)) if phase_symmetric else np.ones((d, d, d, d), dtype=bool)

    def forward(e4: np.ndarray) -> np.ndarray:
        out = np.einsum("kmln,imn->ikl", e4, rhos, optimize=True)
        return np.real(np.einsum("jlk,ikl->ij", ops, out, optimize=True))

    D2 = d * d
    E = 0.5 * _identity_choi(d) + 0.5 * np.eye(D2, dtype=np.complex128) / d
    ll = _ll(freq.ravel(), forward(E.reshape(d, d, d, d)).ravel())
    trace = [ll]
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        e4 = E.reshape(d, d, d, d)
        p = forward(e4)
        w = np.where(freq > 0, freq / np.maximum(p, _PROB_FLOOR), 0.0)
        G = np.einsum("ij,jkl->ikl", w, ops, optimize=True)
        R4 = np.einsum("ikl,inm->kmln", G, rhos, optimize=True)
        # Twirling R onto the family (it only acts there for family iterates)
        # keeps every iterate inside the phase-symmetric class.
        R = v.hermitized(np.where(family, R4, 0.0).reshape(D2, D2))
        T = v.hermitized(R @ E @ R)
        lam = np.einsum("kmkn->mn", T.reshape(d, d, d, d))
        wl, ul = np.linalg.eigh(v.hermitized(lam))
        lam_isqrt = (ul * np.power(np.maximum(wl, 1e-12), -0.5)) @ ul.conj().T
        update = np.einsum("ma,kalb,bn->kmln", lam_isqrt, T.reshape(d, d, d, d), lam_isqrt, optimize=True)
        update = v.hermitized(update.reshape(D2, D2))
        # Input directions whose lam eigenvalue hit the floor carry no data;
        # the normalization leaves their output trace short.  Complete them
        # with the depolarizing channel so Tr_out E = I holds exactly.
        deficit = np.eye(d) - np.einsum("kmkn->mn", update.reshape(d, d, d, d))
        wd, ud = np.linalg.eigh(v.hermitized(deficit))
        deficit = (ud * np.clip(wd, 0.0, None)) @ ud.conj().T
        if phase_symmetric:
            deficit = np.diag(np.clip(np.diag(deficit).real, 0.0, None)).astype(np.complex128)
        update = v.hermitized(
            update + np.einsum("kl,mn->kmln", np.eye(d) / d, deficit).reshape(D2, D2)
        )
        if shrink > 0:
            update = (1.0 - shrink) * update + shrink * np.eye(D2, dtype=np.complex128) / d

        accepted = None
        d_mix = cfg.dilution
        for _ in range(40):
            cand = v.hermitized((1.0 - d_mix) * E + d_mix * update) if d_mix != 1.0 else update
            ll_cand = _ll(freq.ravel(), forward(cand.reshape(d, d, d, d)).ravel())
            if ll_cand >= ll - _LL_SLACK:
                accepted = (cand, ll_cand)
                break
            d_mix /= 2.0
        if accepted is None:
            converged = True
            break
        cand, ll_cand = accepted
        assert ll_cand >= ll - _LL_SLACK
        improvement = ll_cand - ll
        E, ll = cand, ll_cand
        trace.append(ll)
        if improvement <= cfg.rel_tol * abs(ll):
            converged = True
            break

    tensor_entries = E.reshape(d, d, d, d).transpose(0, 2, 1, 3)
    tensor_entries = (tensor_entries + tensor_entries.transpose(1, 0, 3, 2).conj()) / 2.0
    return ProcessMleResult(
        tensor=ProcessTensor(tensor_entries, tp_tol=RECONSTRUCTED_TP_TOL),
        converged=converged,
        n_iter=it,
        log_likelihood=ll,
        ll_trace=np.asarray(trace),
    )


def log_likelihood(op, counts, povm: HomodynePovm) -> float:
    """sum_j f_j ln p_j for a state, or sum_ij f_ij ln p_ij for a process.

    Pass a DensityMatrix with one BinnedCounts, or a ProcessTensor with the
    probe list given to :func:`process_mle` (pairs of amplitude and counts).
    Probabilities are floored at 1e-300; empty bins contribute nothing.
    """
    if isinstance(op, DensityMatrix):
        if not isinstance(counts, BinnedCounts):
            raise TypeError("state log-likelihood needs BinnedCounts")
        if op.dim != povm.dim:
            raise DimensionMismatch(f"state dim {op.dim} != POVM dim {povm.dim}")
        freq = _frequencies(counts)
        p = np.real(np.einsum("jmn,nm->j", povm.flat_operators(), op.entries, optimize=True))
        return _ll(freq, p)
    if isinstance(op, ProcessTensor):
        d = povm.dim
        if op.dim != d:
            raise DimensionMismatch(f"tensor dim {op.dim} != POVM dim {d}")
        alphas = [complex(a) for a, _ in counts]
        rhos = np.stack([coherent_density(a, d).entries for a in alphas])
        raw = np.stack([c.counts.ravel() for _, c in counts]).astype(float)
        freq = raw / raw.sum()
        e4 = op.entries.transpose(0, 2, 1, 3)  # [k, m, l, n]
        out = np.einsum("kmln,imn->ikl", e4, rhos, optimize=True)
        p = np.real(np.einsum("jlk,ikl->ij", povm.flat_operators(), out, optimize=True))
        return _ll(freq.ravel(), p.ravel())
    raise TypeError(f"unsupported operator type {type(op).__name__}")
