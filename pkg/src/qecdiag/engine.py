"""Effective logical channels of one code block.

Two routes compute the syndrome-conditioned logical channel:

* ``conditional_channel`` evaluates the chi-matrix pair sum over the
  correctable errors of one syndrome directly;
* ``syndrome_channels`` gets every syndrome at once from Pauli transfer
  matrices: the input is propagated on the 4 * 2**m normalizer
  elements and the syndrome dependence comes out of a Walsh-Hadamard
  transform over stabilizer-group elements.

The two are checked against each other (and against a dense simulator)
in the tests. For Pauli noise both collapse to sums of probabilities over
syndrome cosets.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from qecdiag import pauli as pl
from qecdiag.channels import (CPTP_TOL, ChiMatrix, PauliDist, check_chi,
                              chi_to_ptm, ptm_to_chi)
from qecdiag.codes import DecoderTable, StabilizerCode, _syndrome_bits
from qecdiag.errors import UsageError

PAIR_PRUNE = 1e-18


@dataclass(frozen=True, eq=False)
class FactoredInput:
    """Noise on the ``n`` qubits of one block.

    Either per-qubit channels (``chis`` of shape ``(n, 4, 4)``, with
    ``pauli`` set when all of them are diagonal) or a single explicit
    n-qubit Pauli distribution (``explicit``).
    """

    n: int
    chis: np.ndarray | None = None
    pauli: np.ndarray | None = None
    explicit: np.ndarray | None = None

    @classmethod
    def from_channels(cls, channels: Sequence) -> "FactoredInput":
        chis, vecs = [], []
        for c in channels:
            if isinstance(c, PauliDist):
                if c.n != 1:
                    raise UsageError("per-qubit Pauli entries must be single-qubit")
                vec = np.asarray(c.explicit(), dtype=float)
                chis.append(np.diag(vec).astype(complex))
                vecs.append(vec)
                continue
            arr = c.matrix if isinstance(c, ChiMatrix) else np.asarray(c)
            if arr.shape == (4,):
                vec = arr.astype(float)
                chis.append(np.diag(vec).astype(complex))
                vecs.append(vec)
            elif arr.shape == (4, 4):
                chis.append(arr.astype(complex))
                vecs.append(None)
            else:
                raise UsageError(f"cannot read a single-qubit channel from shape {arr.shape}")
        chis = np.array(chis)
        pauli = np.array(vecs) if all(v is not None for v in vecs) else None
        return cls(len(chis), chis=chis, pauli=pauli)

    @classmethod
    def iid(cls, channel, n: int) -> "FactoredInput":
        if isinstance(channel, PauliDist) and channel.factored and channel.n == n:
            return cls.from_channels(list(channel.probs))
        return cls.from_channels([channel] * n)

    @classmethod
    def from_dist(cls, dist: PauliDist) -> "FactoredInput":
        if dist.factored:
            return cls.from_channels(list(dist.probs))
        return cls(dist.n, explicit=np.asarray(dist.probs, dtype=float))

    @property
    def is_pauli(self) -> bool:
        return self.pauli is not None or self.explicit is not None

    def pauli_probs(self) -> np.ndarray:
        """Explicit ``4**n`` error distribution (Pauli inputs only)."""
        if self.explicit is not None:
            return self.explicit
        if self.pauli is None:
            raise UsageError("input is not a Pauli channel")
        from qecdiag.channels import product_distribution
        return product_distribution(self.pauli)

    def validate(self, tol: float = CPTP_TOL) -> "FactoredInput":
        if self.chis is not None:
            for chi in self.chis:
                check_chi(chi, tol)
        if self.explicit is not None:
            PauliDist(self.explicit).validate()
        return self


@dataclass(frozen=True, eq=False)
class ConditionalChannel:
    """Logical chi conditioned on one syndrome, with its probability.

    ``logical_chi`` is ``None`` when ``prob`` is zero (undefined channel).
    """

    logical_chi: np.ndarray | None
    prob: float

    @property
    def defined(self) -> bool:
        return self.logical_chi is not None


def _check_input(code: StabilizerCode, inp: FactoredInput) -> None:
    if inp.n != code.n:
        raise UsageError(f"input has {inp.n} qubits, code {code.name} has {code.n}")


# ---------------------------------------------------------------------------
# pair-sum route
# ---------------------------------------------------------------------------

def _syndrome_members(decoder: DecoderTable, s: int):
    """Indices and phases of ``R_s S`` and ``Lbar_l R_s S`` for one syndrome.

    Returns ``(idx, phase)`` of shape ``(4, 2**m)``: ``idx[l]`` are the
    Paulis ``P`` with ``R_s P = i**phase Lbar_l S``.
    """
    code = decoder.code
    t = code.tables
    rec = decoder.recoveries[s]
    m = code.n - code.k
    # R_s S for every group element, then Lbar_l on top
    gx, gz, gr = pl.raw_multiply(rec.x, rec.z, rec.raw_phase,
                                 t.group_x, t.group_z, t.group_r)
    idx = np.empty((4, 2**m), dtype=np.int64)
    for lc in range(4):
        ex, ez, _ = pl.raw_multiply(t.logical_x_rep[lc], t.logical_z_rep[lc],
                                    t.logical_r_rep[lc], gx, gz, gr)
        idx[lc] = pl.xz_to_index(ex, ez, code.n)
    return idx, decoder.recovery_phases[idx]


def _pair_sum(decoder: DecoderTable, inp: FactoredInput, s: int) -> np.ndarray:
    """Unnormalised logical chi for syndrome ``s``."""
    code = decoder.code
    idx, ph = _syndrome_members(decoder, s)
    omega = (1j) ** ph
    flat_idx = idx.ravel()
    flat_w = omega.ravel()
    if inp.explicit is not None:
        # diagonal joint chi: only P = Q pairs survive
        probs = inp.explicit[idx]
        return np.diag(probs.sum(axis=1)).astype(complex)
    digits = pl.index_digits(code.n)[flat_idx]
    # joint chi entry for every pair: prod_j chi_j[P_j, Q_j]
    prod = np.ones((len(flat_idx), len(flat_idx)), dtype=complex)
    for j in range(code.n):
        dj = digits[:, j]
        prod *= inp.chis[j][dj[:, None], dj[None, :]]
    prod[np.abs(prod) < PAIR_PRUNE] = 0
    weighted = flat_w[:, None] * prod * flat_w.conj()[None, :]
    size = idx.shape[1]
    return weighted.reshape(4, size, 4, size).sum(axis=(1, 3))


def conditional_channel(code: StabilizerCode, decoder: DecoderTable,
                        inp: FactoredInput, s) -> ConditionalChannel:
    """Logical channel and probability of syndrome ``s``."""
    _check_input(code, inp)
    if decoder.code is not code:
        raise UsageError("decoder belongs to a different code")
    s = _syndrome_bits(code, s)
    chi = _pair_sum(decoder, inp, s)
    prob = float(np.trace(chi).real)
    if prob <= 0:
        return ConditionalChannel(None, 0.0)
    return ConditionalChannel(chi / prob, prob)


def average_channel(code: StabilizerCode, decoder: DecoderTable,
                    inp: FactoredInput) -> np.ndarray:
    """Syndrome-averaged logical chi ``sum_s Pr(s) chi_s``."""
    _check_input(code, inp)
    probs, chis = syndrome_channels(code, decoder, inp)
    ok = probs > 0
    return np.einsum("s,sab->ab", probs[ok], chis[ok])


# ---------------------------------------------------------------------------
# all syndromes at once
# ---------------------------------------------------------------------------

class _NormalizerData:
    """Normalizer elements ``T(a, S) = eps * Lbar_a S`` for transfer-matrix work."""

    def __init__(self, decoder: DecoderTable):
        code = decoder.code
        t = code.tables
        n, m = code.n, code.n - code.k
        self.m = m
        size = 2**m
        idx = np.empty((4, size), dtype=np.int64)
        eps = np.empty((4, size))
        for a in range(4):
            ex, ez, er = pl.raw_multiply(t.logical_x_rep[a], t.logical_z_rep[a],
                                         t.logical_r_rep[a], t.group_x, t.group_z, t.group_r)
            herm = (er - pl.popcount(ex & ez)) % 4
            if np.any(herm % 2):
                raise AssertionError("logical times stabilizer is not Hermitian")
            idx[a] = pl.xz_to_index(ex, ez, n)
            eps[a] = 1 - herm  # i**0 = 1, i**2 = -1
        self.idx = idx.ravel()
        self.eps = eps.ravel()
        # split qubits in two halves so the joint transfer matrix is built
        # from two small Kronecker products
        self.h = (n + 1) // 2
        lo_bits = 2 * (n - self.h)
        hi = self.idx >> lo_bits
        lo = self.idx & ((1 << lo_bits) - 1)
        self.hi_pairs = (hi[:, None] * (4**self.h) + hi[None, :]).ravel()
        self.lo_pairs = (lo[:, None] * (4 ** (n - self.h)) + lo[None, :]).ravel()
        s = np.arange(size)
        self.hadamard = 1 - 2 * (pl.popcount(s[:, None] & s[None, :]) & 1).astype(float)
        # (-1)^<R_s, Lbar_b>
        rec = decoder.recovery_index
        rx, rz = t.x[rec], t.z[rec]
        self.rec_sign = np.stack([
            1 - 2 * pl.symplectic_parity(rx, rz, t.logical_x_rep[b], t.logical_z_rep[b])
            for b in range(4)], axis=1).astype(float)
        # Pauli route: (syndrome, residual class) bucket of every Pauli
        self.bucket = t.syndromes * 4 + decoder.residual_class


@lru_cache(maxsize=32)
def _normalizer_data(decoder: DecoderTable) -> _NormalizerData:
    return _NormalizerData(decoder)


def _kron_ptm(ptms: np.ndarray) -> np.ndarray:
    out = np.ones((1, 1))
    for r in ptms:
        out = np.kron(out, r)
    return out


def syndrome_ptms(code: StabilizerCode, decoder: DecoderTable,
                  inp: FactoredInput) -> np.ndarray:
    """Unnormalised logical transfer matrices ``M[s]`` for all syndromes.

    ``M[s][0, 0]`` is ``Pr(s)``; dividing by it gives the conditional
    logical channel.
    """
    _check_input(code, inp)
    nd = _normalizer_data(decoder)
    ptms = chi_to_ptm(inp.chis)
    if np.iscomplexobj(ptms):
        ptms = ptms.real
    big = _kron_ptm(ptms[:nd.h]).ravel()
    small = _kron_ptm(ptms[nd.h:]).ravel()
    size = 2**nd.m
    g = (big[nd.hi_pairs] * small[nd.lo_pairs]).reshape(4 * size, 4 * size)
    g = nd.eps[:, None] * g * nd.eps[None, :]
    # f[b, S', a] = sum_S g[(b, S'), (a, S)]
    f = g.reshape(4, size, 4, size).sum(axis=3)
    # walsh-hadamard over S'
    w = np.einsum("st,bta->sba", nd.hadamard, f) / size
    return w * nd.rec_sign[:, :, None]


def syndrome_distribution(code: StabilizerCode, decoder: DecoderTable,
                          inp: FactoredInput) -> np.ndarray:
    """``Pr(s)`` for every syndrome."""
    if inp.is_pauli:
        return pauli_syndrome_residuals(code, decoder, inp).sum(axis=1)
    return syndrome_ptms(code, decoder, inp)[:, 0, 0]


def pauli_syndrome_residuals(code: StabilizerCode, decoder: DecoderTable,
                             inp: FactoredInput) -> np.ndarray:
    """``(2**m, 4)`` joint probabilities of syndrome and residual class."""
    _check_input(code, inp)
    nd = _normalizer_data(decoder)
    probs = inp.pauli_probs()
    out = np.bincount(nd.bucket, weights=probs, minlength=4 * 2**nd.m)
    return out.reshape(-1, 4)


def syndrome_channels(code: StabilizerCode, decoder: DecoderTable,
                      inp: FactoredInput, exact_below: float = 0.0
                      ) -> tuple[np.ndarray, np.ndarray]:
    """``(probs, chis)``: probability and normalised logical chi of every
    syndrome. Rows with zero probability are left as zeros.

    The transform route for non-Pauli input carries an absolute error near
    machine precision, so a syndrome of probability ``p`` gets a relative
    error of roughly ``1e-16 / p`` in its chi. Syndromes with
    ``0 < p < exact_below`` are recomputed with the pair sum.
    """
    if inp.is_pauli:
        joint = pauli_syndrome_residuals(code, decoder, inp)
        probs = joint.sum(axis=1)
        chis = np.zeros((len(probs), 4, 4), dtype=complex)
        ok = probs > 0
        diag = np.zeros_like(joint)
        diag[ok] = joint[ok] / probs[ok, None]
        chis[:, np.arange(4), np.arange(4)] = diag
        return probs, chis
    m = syndrome_ptms(code, decoder, inp)
    probs = m[:, 0, 0].copy()
    probs[probs < 0] = 0
    chis = np.zeros((len(probs), 4, 4), dtype=complex)
    ok = probs > 0
    chis[ok] = ptm_to_chi(m[ok] / probs[ok, None, None])
    for sy in np.flatnonzero(ok & (probs < exact_below)):
        raw = _pair_sum(decoder, inp, int(sy))
        probs[sy] = raw.trace().real
        chis[sy] = raw / probs[sy] if probs[sy] > 0 else 0
    return probs, chis


# ---------------------------------------------------------------------------
# scalar summaries
# ---------------------------------------------------------------------------

def exact_pu(code: StabilizerCode, decoder: DecoderTable, dist) -> float:
    """Total probability of the errors the decoder does not correct."""
    if isinstance(dist, PauliDist):
        probs = dist.explicit()
    elif isinstance(dist, FactoredInput):
        if not dist.is_pauli:
            raise UsageError("exact p_u needs a Pauli distribution")
        probs = dist.pauli_probs()
    else:
        probs = np.asarray(dist, dtype=float)
        if probs.ndim != 1:
            raise UsageError("exact p_u needs a Pauli distribution")
    if len(probs) != 4**code.n:
        raise UsageError(f"distribution has {len(probs)} entries, expected {4**code.n}")
    return float(probs[~decoder.correctable_mask].sum())


def logical_infidelity(chi) -> float:
    """``1 - chi[0, 0]`` of a logical chi matrix.

    For trace-one input this is computed as the non-identity diagonal
    mass, which keeps full relative precision for tiny infidelities.
    """
    chi = np.asarray(chi.matrix if isinstance(chi, ChiMatrix) else chi)
    if abs(chi[0, 0].imag) > 1e-10:
        raise UsageError(f"chi[0, 0] has imaginary part {chi[0, 0].imag:.3g}")
    tail = float(np.real(np.trace(chi) - chi[0, 0]))
    if abs(np.trace(chi).real - 1) > 1e-9:
        return float(1 - chi[0, 0].real)
    return tail
