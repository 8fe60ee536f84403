"""n-qubit Pauli operators in symplectic bit form.

A Pauli is stored as two integer bitmasks ``x`` and ``z`` (bit ``q`` is
qubit ``q``) plus a phase exponent ``phase`` so that the operator is

    i**phase * P_0 (x) P_1 (x) ... (x) P_{n-1}

with each ``P_q`` one of the Hermitian letters I, X, Y, Z. Internally the
product rule is evaluated in the ``X^x Z^z`` form where ``Y = i X Z``; the
conversion only needs the number of Y letters.

Canonical indexing: base-4 digit per qubit (I=0, X=1, Y=2, Z=3) with
qubit 0 the most significant digit. Vectorised helpers at the bottom of
the module work on whole arrays of indices and are what the heavier
modules use.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np

from qecdiag.errors import UsageError

LETTERS = "IXYZ"
_LETTER_XZ = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_XZ_DIGIT = {(0, 0): 0, (1, 0): 1, (1, 1): 2, (0, 1): 3}
_PHASE_PREFIX = {"": 0, "+": 0, "+1": 0, "1": 0, "-": 2, "-1": 2,
                 "i": 1, "+i": 1, "-i": 3, "+1i": 1, "-1i": 3}
_PHASE_STR = {0: "", 1: "+i", 2: "-", 3: "-i"}
_STRING_RE = re.compile(r"^\s*([+-]?1?i?)\s*([IXYZ]+)\s*$")

_SIGMA = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _popcount(v: int) -> int:
    return bin(v).count("1")


@dataclass(frozen=True)
class PauliOperator:
    """Immutable n-qubit Pauli ``i**phase * (tensor of letters)``."""

    x: int
    z: int
    n: int
    phase: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise UsageError("a Pauli needs at least one qubit")
        mask = (1 << self.n) - 1
        if self.x & ~mask or self.z & ~mask:
            raise UsageError("bit pattern wider than the qubit count")
        object.__setattr__(self, "phase", self.phase % 4)

    # -- constructors -------------------------------------------------
    @classmethod
    def identity(cls, n: int) -> "PauliOperator":
        return cls(0, 0, n)

    @classmethod
    def from_string(cls, text: str) -> "PauliOperator":
        """Parse ``"XIZ"``, ``"-YY"``, ``"+iZ"``; qubit 0 is leftmost."""
        m = _STRING_RE.match(text)
        if m is None:
            raise UsageError(f"not a Pauli string: {text!r}")
        prefix, letters = m.groups()
        if prefix not in _PHASE_PREFIX:
            raise UsageError(f"bad phase prefix in {text!r}")
        x = z = 0
        for q, ch in enumerate(letters):
            bx, bz = _LETTER_XZ[ch]
            x |= bx << q
            z |= bz << q
        return cls(x, z, len(letters), _PHASE_PREFIX[prefix])

    @classmethod
    def from_index(cls, index: int, n: int) -> "PauliOperator":
        if not 0 <= index < 4**n:
            raise UsageError(f"index {index} out of range for {n} qubits")
        x = z = 0
        for q in range(n):
            d = (index >> (2 * (n - 1 - q))) & 3
            x |= (d in (1, 2)) << q
            z |= (d in (2, 3)) << q
        return cls(x, z, n)

    @classmethod
    def from_bits(cls, x_bits, z_bits, phase: int = 0) -> "PauliOperator":
        x_bits, z_bits = list(x_bits), list(z_bits)
        if len(x_bits) != len(z_bits):
            raise UsageError("x and z bit vectors differ in length")
        x = sum(int(b) << q for q, b in enumerate(x_bits))
        z = sum(int(b) << q for q, b in enumerate(z_bits))
        return cls(x, z, len(x_bits), phase)

    # -- views --------------------------------------------------------
    @property
    def x_bits(self) -> tuple[int, ...]:
        return tuple((self.x >> q) & 1 for q in range(self.n))

    @property
    def z_bits(self) -> tuple[int, ...]:
        return tuple((self.z >> q) & 1 for q in range(self.n))

    @property
    def letters(self) -> str:
        return "".join(
            LETTERS[_XZ_DIGIT[((self.x >> q) & 1, (self.z >> q) & 1)]]
            for q in range(self.n)
        )

    @property
    def index(self) -> int:
        """Canonical base-4 index of the phase-free operator."""
        idx = 0
        for q in range(self.n):
            idx = 4 * idx + _XZ_DIGIT[((self.x >> q) & 1, (self.z >> q) & 1)]
        return idx

    @property
    def raw_phase(self) -> int:
        """Phase exponent in the ``i**r X^x Z^z`` form."""
        return (self.phase + _popcount(self.x & self.z)) % 4

    def phase_free(self) -> "PauliOperator":
        return PauliOperator(self.x, self.z, self.n)

    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    def __str__(self) -> str:
        return _PHASE_STR[self.phase] + self.letters

    def __repr__(self) -> str:
        return f"PauliOperator({str(self)!r})"

    def __mul__(self, other: "PauliOperator") -> "PauliOperator":
        return multiply(self, other)

    def inverse(self) -> "PauliOperator":
        # Hermitian letters square to I, so only the scalar is inverted.
        return PauliOperator(self.x, self.z, self.n, -self.phase)

    def to_matrix(self) -> np.ndarray:
        mat = np.array([[1.0 + 0j]])
        for ch in self.letters:
            mat = np.kron(mat, _SIGMA[ch])
        return (1j**self.phase) * mat


def _check_sizes(a: PauliOperator, b: PauliOperator) -> None:
    if a.n != b.n:
        raise UsageError(f"qubit count mismatch: {a.n} vs {b.n}")


def multiply(a: PauliOperator, b: PauliOperator) -> PauliOperator:
    """Exact operator product ``a @ b`` including the phase."""
    _check_sizes(a, b)
    raw = a.raw_phase + b.raw_phase + 2 * _popcount(a.z & b.x)
    x, z = a.x ^ b.x, a.z ^ b.z
    return PauliOperator(x, z, a.n, raw - _popcount(x & z))


def commutes(a: PauliOperator, b: PauliOperator) -> bool:
    _check_sizes(a, b)
    return _popcount((a.x & b.z) ^ (a.z & b.x)) % 2 == 0


def weight(p: PauliOperator) -> int:
    return _popcount(p.x | p.z)


def iter_paulis(n: int) -> Iterator[PauliOperator]:
    """All phase-free n-qubit Paulis in canonical index order."""
    for idx in range(4**n):
        yield PauliOperator.from_index(idx, n)


# ---------------------------------------------------------------------------
# vectorised helpers over arrays of canonical indices / bitmasks
# ---------------------------------------------------------------------------

def popcount(a: np.ndarray) -> np.ndarray:
    return np.bitwise_count(np.asarray(a, dtype=np.int64)).astype(np.int64)


@lru_cache(maxsize=16)
def index_digits(n: int) -> np.ndarray:
    """``(4**n, n)`` array of letter digits (I=0, X=1, Y=2, Z=3)."""
    idx = np.arange(4**n, dtype=np.int64)
    shifts = 2 * np.arange(n - 1, -1, -1, dtype=np.int64)
    out = (idx[:, None] >> shifts[None, :]) & 3
    out.setflags(write=False)
    return out


@lru_cache(maxsize=16)
def index_xz(n: int) -> tuple[np.ndarray, np.ndarray]:
    """x and z bitmasks for every canonical index."""
    d = index_digits(n)
    bits = np.int64(1) << np.arange(n, dtype=np.int64)
    x = (((d == 1) | (d == 2)) * bits).sum(axis=1)
    z = (((d == 2) | (d == 3)) * bits).sum(axis=1)
    x.setflags(write=False)
    z.setflags(write=False)
    return x, z


def xz_to_index(x: np.ndarray, z: np.ndarray, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    z = np.asarray(z, dtype=np.int64)
    idx = np.zeros(np.broadcast(x, z).shape, dtype=np.int64)
    for q in range(n):
        xb = (x >> q) & 1
        zb = (z >> q) & 1
        digit = np.where(zb == 1, np.where(xb == 1, 2, 3), xb)
        idx = 4 * idx + digit
    return idx


def symplectic_parity(x1, z1, x2, z2) -> np.ndarray:
    """1 where the operators anticommute, 0 where they commute."""
    return popcount((np.asarray(x1) & z2) ^ (np.asarray(z1) & x2)) & 1


def raw_multiply(x1, z1, r1, x2, z2, r2):
    """Product in the ``i**r X^x Z^z`` form, broadcasting over arrays."""
    r = (np.asarray(r1) + r2 + 2 * popcount(np.asarray(z1) & x2)) % 4
    return np.asarray(x1) ^ x2, np.asarray(z1) ^ z2, r


def weights(n: int) -> np.ndarray:
    """Hamming weight of every canonical index."""
    return (index_digits(n) != 0).sum(axis=1)
