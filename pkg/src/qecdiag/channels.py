"""Single-qubit channel representations, metrics and noise generators.

Chi matrices are 4x4 complex arrays in the Pauli basis (I, X, Y, Z) with
the convention ``E(rho) = sum_{P,Q} chi[P,Q] P rho Q``. Pauli error models
are ``PauliDist`` objects, either explicit over all ``4**n`` Paulis
(canonical index order) or factored into one 4-vector per qubit.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize

from qecdiag import pauli as pl
from qecdiag.errors import UsageError, ValidationError

CPTP_TOL = 1e-10
DIST_TOL = 1e-12

SIGMA = np.array([
    [[1, 0], [0, 1]],
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)


# ---------------------------------------------------------------------------
# representations
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ChiMatrix:
    """Chi matrix of a single-qubit channel."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise UsageError(f"chi matrix must be 4x4, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def validate(self, tol: float = CPTP_TOL) -> "ChiMatrix":
        check_chi(self.matrix, tol)
        return self

    def is_cptp(self, tol: float = CPTP_TOL) -> bool:
        try:
            check_chi(self.matrix, tol)
        except ValidationError:
            return False
        return True

    @property
    def ptm(self) -> np.ndarray:
        return chi_to_ptm(self.matrix)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return np.einsum("pq,pab,bc,qcd->ad", self.matrix, SIGMA, rho, SIGMA)


@dataclass(frozen=True, eq=False)
class PauliDist:
    """Probability distribution over n-qubit Pauli errors."""

    probs: np.ndarray
    factored: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if self.factored:
            if p.ndim != 2 or p.shape[1] != 4:
                raise UsageError("factored distribution needs shape (n, 4)")
        else:
            if p.ndim != 1 or len(p) < 4 or 4 ** round(math.log(len(p), 4)) != len(p):
                raise UsageError(f"explicit distribution needs 4**n entries, got {p.shape}")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def single(cls, vec: Sequence[float]) -> "PauliDist":
        return cls(np.asarray(vec, dtype=float).reshape(1, 4), factored=True)

    @property
    def n(self) -> int:
        if self.factored:
            return self.probs.shape[0]
        return round(math.log(len(self.probs), 4))

    def explicit(self) -> np.ndarray:
        if not self.factored:
            return self.probs
        return product_distribution(self.probs)

    def qubit(self, j: int) -> np.ndarray:
        if not self.factored:
            raise UsageError("per-qubit view needs a factored distribution")
        return self.probs[j]

    @property
    def identity_prob(self) -> float:
        if self.factored:
            return float(np.prod(self.probs[:, 0]))
        return float(self.probs[0])

    def validate(self, tol: float = DIST_TOL) -> "PauliDist":
        p = self.probs
        if np.any(p < 0):
            raise ValidationError("negative Pauli probability")
        sums = p.sum(axis=1) if self.factored else np.array([p.sum()])
        if np.any(np.abs(sums - 1) > tol):
            raise ValidationError(f"Pauli distribution sums to {sums}, not 1")
        return self


def product_distribution(per_qubit: np.ndarray) -> np.ndarray:
    """Explicit ``4**n`` vector of an independent per-qubit model."""
    per_qubit = np.asarray(per_qubit, dtype=float)
    n = per_qubit.shape[0]
    digits = pl.index_digits(n)
    out = np.ones(4**n)
    for j in range(n):
        out *= per_qubit[j][digits[:, j]]
    return out


# ---------------------------------------------------------------------------
# conversions and checks
# ---------------------------------------------------------------------------

def chi_from_kraus(kraus: Sequence[np.ndarray]) -> np.ndarray:
    chi = np.zeros((4, 4), dtype=complex)
    for k in kraus:
        c = np.einsum("pab,ba->p", SIGMA, np.asarray(k)) / 2
        chi += np.outer(c, c.conj())
    return chi


def chi_from_unitary(u: np.ndarray) -> np.ndarray:
    return chi_from_kraus([u])


# T[u, t, p, q] = tr(s_u s_p s_t s_q) / 2
_PTM_TENSOR = np.einsum("uab,pbc,tcd,qda->utpq", SIGMA, SIGMA, SIGMA, SIGMA) / 2
_CHI_TO_PTM = _PTM_TENSOR.reshape(16, 16)
_PTM_TO_CHI = np.linalg.inv(_CHI_TO_PTM)


def chi_to_ptm(chi: np.ndarray) -> np.ndarray:
    """Pauli transfer matrix ``R[u, t] = tr(s_u E(s_t)) / 2``."""
    chi = np.asarray(chi)
    out = np.einsum("...pq,utpq->...ut", chi, _PTM_TENSOR)
    return out.real if np.allclose(out.imag, 0, atol=1e-13) else out


def ptm_to_chi(ptm: np.ndarray) -> np.ndarray:
    ptm = np.asarray(ptm, dtype=complex)
    flat = ptm.reshape(*ptm.shape[:-2], 16)
    return (flat @ _PTM_TO_CHI.T).reshape(*ptm.shape[:-2], 4, 4)


def check_chi(chi: np.ndarray, tol: float = CPTP_TOL, trace_preserving: bool = True) -> None:
    """Raise ``ValidationError`` unless chi is Hermitian, PSD and trace 1.

    Syndrome-conditioned logical channels are normalised by ``Pr(s)`` but
    need not preserve the trace of every input, so they are checked with
    ``trace_preserving=False``.
    """
    chi = np.asarray(chi)
    if np.max(np.abs(chi - chi.conj().T)) > tol:
        raise ValidationError("chi matrix is not Hermitian")
    evals = np.linalg.eigvalsh((chi + chi.conj().T) / 2)
    if evals.min() < -tol:
        raise ValidationError(f"chi matrix has negative eigenvalue {evals.min():.3g}")
    if abs(np.trace(chi).real - 1) > tol:
        raise ValidationError(f"chi trace is {np.trace(chi).real!r}, not 1")
    if not trace_preserving:
        return
    ptm = chi_to_ptm(chi)
    # trace preservation: the identity row of the PTM is (1, 0, 0, 0)
    if np.max(np.abs(ptm[0] - np.array([1, 0, 0, 0]))) > tol:
        raise ValidationError("channel is not trace preserving")


def _as_chi(c) -> np.ndarray | None:
    if isinstance(c, ChiMatrix):
        return c.matrix
    arr = np.asarray(c)
    if arr.shape == (4, 4):
        return arr.astype(complex)
    return None


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def infidelity(c) -> float:
    """``1 - chi[0, 0]``; for a Pauli distribution, one minus P(identity)."""
    if isinstance(c, PauliDist):
        if c.factored:
            return float(1 - np.prod(c.probs[:, 0]))
        return float(c.probs[1:].sum())
    chi = _as_chi(c)
    if chi is None:
        vec = np.asarray(c, dtype=float)
        return float(vec[1:].sum())
    return float(1 - chi[0, 0].real)


def pauli_twirl(c, tol: float = CPTP_TOL) -> PauliDist:
    """Pauli-twirled channel: the diagonal of the chi matrix."""
    if isinstance(c, PauliDist):
        return c
    chi = _as_chi(c)
    diag = np.real(np.diag(chi)).copy()
    if abs(diag.sum() - 1) > tol or diag.min() < -tol:
        raise ValidationError(f"chi diagonal {diag} is not a distribution")
    diag = np.clip(diag, 0, None)
    return PauliDist(diag.reshape(1, 4), factored=True)


def _trace_norm(h: np.ndarray) -> float:
    return float(np.abs(np.linalg.eigvalsh(h)).sum())


def _extended_action(chi: np.ndarray, rho: np.ndarray) -> np.ndarray:
    ops = np.stack([np.kron(s, np.eye(2)) for s in SIGMA])
    return np.einsum("pq,pab,bc,qcd->ad", chi, ops, rho, ops)


def diamond_distance_est(c, restarts: int = 8, seed: int = 0) -> float:
    """Multi-start lower bound on ``||E - I||_diamond`` (trace-norm scale).

    Maximises ``||(E x I)(psi) - psi||_1`` over pure two-qubit inputs. The
    maximally entangled input is always evaluated first, and restart ``i``
    always uses the same start, so the value never decreases with more
    restarts. This is an estimate, not the SDP value.
    """
    chi = _as_chi(c) if not isinstance(c, PauliDist) else np.diag(c.probs[0])
    rng = np.random.default_rng(seed)

    def value(v: np.ndarray) -> float:
        psi = v[:4] + 1j * v[4:]
        psi = psi / np.linalg.norm(psi)
        rho = np.outer(psi, psi.conj())
        return _trace_norm(_extended_action(chi, rho) - rho)

    bell = np.zeros(8)
    bell[0] = bell[3] = 1 / math.sqrt(2)
    best = value(bell)
    starts = [bell] + [rng.normal(size=8) for _ in range(restarts)]
    for start in starts:
        res = minimize(lambda v: -value(v), start, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
        best = max(best, -res.fun, value(start))
    return best


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def gaussian_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    """GUE-style matrix: unit-variance real diagonal, complex off-diagonal
    entries with ``E|H_ij|^2 = 1`` split evenly between real and imaginary."""
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (a + a.conj().T) / 2


def random_cptp(t: float, seed: int) -> ChiMatrix:
    """Random channel from an 8x8 Stinespring unitary ``exp(-i H t)``.

    System (dim 2) is the first tensor factor, the 4-dimensional
    environment starts in ``|0>`` and is traced out.
    """
    if not 0.001 <= t <= 0.1:
        warnings.warn(f"t={t} outside the sampled range [0.001, 0.1]", stacklevel=2)
    rng = np.random.default_rng(seed)
    h = gaussian_hermitian(8, rng)
    u = expm(-1j * h * t).reshape(2, 4, 2, 4)
    kraus = [u[:, j, :, 0] for j in range(4)]
    return ChiMatrix(chi_from_kraus(kraus))


def coherent_channel(axis: Sequence[float], delta: float) -> ChiMatrix:
    """Chi matrix of ``exp(-i (pi/2) delta n.sigma)``."""
    axis = np.asarray(axis, dtype=float)
    if axis.shape != (3,) or abs(np.linalg.norm(axis) - 1) > 1e-9:
        raise UsageError(f"rotation axis must be a unit 3-vector, got {axis}")
    half = math.pi * delta / 2
    c = np.concatenate([[math.cos(half)], -1j * math.sin(half) * axis])
    return ChiMatrix(np.outer(c, c.conj()))


def depolarizing(n: int, p: float) -> PauliDist:
    if not 0 <= p <= 1:
        raise UsageError(f"depolarizing rate {p} outside [0, 1]")
    row = [1 - p, p / 3, p / 3, p / 3]
    return PauliDist(np.tile(row, (n, 1)), factored=True)


def biased_model(p_x: float, eta: float, theta: float = math.pi / 2) -> PauliDist:
    """Twirl of ``rho -> p_I rho + sum_Q p_Q e^{-i theta Q} rho e^{i theta Q}``
    with ``p_Z = eta p_X`` and ``p_Y = p_X p_Z``."""
    if eta <= 0:
        raise UsageError("bias eta must be positive")
    if p_x < 0:
        raise UsageError("p_X must be nonnegative")
    p_z = eta * p_x
    p_y = p_x * p_z
    p_i = 1 - p_x - p_y - p_z
    if p_i < 0:
        raise UsageError(f"p_I = {p_i} is negative for p_X={p_x}, eta={eta}")
    s2 = math.sin(theta) ** 2
    err = np.array([p_x, p_y, p_z])
    vec = np.concatenate([[p_i + (1 - s2) * err.sum()], s2 * err])
    return PauliDist((vec / vec.sum()).reshape(1, 4), factored=True)


def biased_px_for_infidelity(r: float, eta: float) -> float:
    """p_X giving total error ``p_X + p_X^2 eta + eta p_X = r``."""
    a, b = eta, 1 + eta
    return (-b + math.sqrt(b * b + 4 * a * r)) / (2 * a)


def correlated_pauli(n: int, r0: float, q: float, subset: Sequence[int],
                     seed: int) -> PauliDist:
    """Mixture of an i.i.d. model and Gaussian-weighted multi-qubit errors.

    The i.i.d. part uses per-qubit rate ``1 - (1 - r0)**(1/n)`` so that its
    identity probability is ``1 - r0``. Weights on ``subset`` are
    ``N(4**n r0, 4**n r0)`` samples clipped at zero and normalised. After
    mixing, the identity probability is reset to ``1 - r0`` and the rest
    rescaled to total ``r0``.
    """
    if not 0 <= q <= 1:
        raise UsageError(f"mixing weight q={q} outside [0, 1]")
    if not 0 < r0 < 1:
        raise UsageError(f"r0={r0} outside (0, 1)")
    subset = np.asarray(subset, dtype=np.int64)
    if np.any(subset == 0):
        raise UsageError("correlated subset must exclude the identity")
    if np.any((subset < 0) | (subset >= 4**n)):
        raise UsageError("subset index out of range")
    if len(subset) == 0 and q < 1:
        raise UsageError("empty correlated subset with q < 1")
    r1 = 1 - (1 - r0) ** (1 / n)
    iid = product_distribution(np.tile([1 - r1, r1 / 3, r1 / 3, r1 / 3], (n, 1)))
    cor = np.zeros(4**n)
    if len(subset):
        rng = np.random.default_rng(seed)
        mean = 4**n * r0
        w = np.clip(rng.normal(mean, math.sqrt(mean), size=len(subset)), 0, None)
        if w.sum() == 0:
            w = np.ones(len(subset))
        np.add.at(cor, subset, w / w.sum())
    mix = q * iid + (1 - q) * cor
    rest = mix[1:].sum()
    out = np.empty_like(mix)
    out[0] = 1 - r0
    out[1:] = mix[1:] * (r0 / rest)
    return PauliDist(out)


def adversarial_subset(residual_class: np.ndarray, size: int,
                       rng: np.random.Generator, min_weight: int = 2) -> np.ndarray:
    """Multi-qubit errors drawn with equal odds from correctable and
    uncorrectable Paulis (``residual_class`` from a decoder table)."""
    n = round(math.log(len(residual_class), 4))
    heavy = pl.weights(n) >= min_weight
    good = np.flatnonzero(heavy & (residual_class == 0))
    bad = np.flatnonzero(heavy & (residual_class != 0))
    picks = rng.random(size) < 0.5
    out = np.where(picks, rng.choice(good, size=size), rng.choice(bad, size=size))
    return np.unique(out)


def member_seed(master_seed: int, index: int) -> int:
    """Deterministic per-member seed derived from ``(master_seed, index)``."""
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1)[0])


def kron_all(mats) -> np.ndarray:
    return reduce(np.kron, mats)
