"""Stabilizer codes, syndromes, Pauli decomposition and lookup decoders.

Every full-sweep table here enumerates all ``4**n`` Paulis of one code
block, so these tables are only available for ``n <= MAX_ENUM_QUBITS``.
Syndromes are integers whose most significant bit belongs to generator 0.
Logical classes are encoded like single-qubit letters: I=0, X=1, Y=2, Z=3.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from qecdiag import pauli as pl
from qecdiag.errors import CapacityError, UsageError, ValidationError
from qecdiag.pauli import PauliOperator, commutes, multiply

MAX_ENUM_QUBITS = 10
MAX_SYNDROME_BITS = 16

# (x-bit, z-bit) of a class digit and back
CLASS_BITS = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=np.int64)
_BITS_CLASS = np.array([[0, 3], [1, 2]], dtype=np.int64)


class CodeValidationError(ValidationError):
    """A code definition violates one of the stabilizer-code invariants.

    ``kind`` is one of ``count``, ``format``, ``noncommuting``,
    ``dependent``, ``logical`` or ``distance``.
    """

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


def _symp_vec(p: PauliOperator) -> int:
    return p.x | (p.z << p.n)


def gf2_rank(vectors: Sequence[int]) -> int:
    rows = [v for v in vectors if v]
    rank = 0
    while rows:
        pivot = max(rows)
        rows.remove(pivot)
        rank += 1
        top = pivot.bit_length() - 1
        rows = [r ^ pivot if (r >> top) & 1 else r for r in rows]
        rows = [r for r in rows if r]
    return rank


def _gf2_solve(rows: list[int], rhs: list[int], nbits: int) -> int:
    """One solution ``t`` of ``popcount(rows[i] & t) % 2 == rhs[i]``."""
    aug = [(r, b) for r, b in zip(rows, rhs)]
    pivots: list[tuple[int, int, int]] = []
    for col in range(nbits):
        sel = next((i for i, (r, _) in enumerate(aug) if (r >> col) & 1), None)
        if sel is None:
            continue
        pr, pb = aug.pop(sel)
        aug = [(r ^ pr, b ^ pb) if (r >> col) & 1 else (r, b) for r, b in aug]
        pivots = [(c, r ^ pr, b ^ pb) if (r >> col) & 1 else (c, r, b)
                  for c, r, b in pivots]
        pivots.append((col, pr, pb))
    if any(b for r, b in aug if r == 0):
        raise ValidationError("inconsistent linear system")
    t = 0
    for col, _, b in pivots:
        if b:
            t |= 1 << col
    return t


@dataclass(frozen=True, eq=False)
class StabilizerCode:
    """An [[n, k, d]] stabilizer code. Invariants are checked on creation."""

    n: int
    k: int
    d: int
    stabilizer_gens: tuple[PauliOperator, ...]
    logical_x: tuple[PauliOperator, ...]
    logical_z: tuple[PauliOperator, ...]
    name: str = "code"

    def __post_init__(self):
        object.__setattr__(self, "stabilizer_gens", tuple(self.stabilizer_gens))
        object.__setattr__(self, "logical_x", tuple(self.logical_x))
        object.__setattr__(self, "logical_z", tuple(self.logical_z))
        self._validate()

    def _validate(self) -> None:
        n, k = self.n, self.k
        if not 0 <= k < n:
            raise CodeValidationError("count", f"need 0 <= k < n, got n={n}, k={k}")
        if len(self.stabilizer_gens) != n - k:
            raise CodeValidationError(
                "count", f"expected {n - k} generators, got {len(self.stabilizer_gens)}")
        if len(self.logical_x) != k or len(self.logical_z) != k:
            raise CodeValidationError("count", f"expected {k} logical X and Z operators")
        for op in (*self.stabilizer_gens, *self.logical_x, *self.logical_z):
            if op.n != n:
                raise CodeValidationError("format", f"operator {op} does not act on {n} qubits")
        gens = self.stabilizer_gens
        for i, a in enumerate(gens):
            for b in gens[i + 1:]:
                if not commutes(a, b):
                    raise CodeValidationError(
                        "noncommuting", f"generators {a} and {b} anticommute")
        if gf2_rank([_symp_vec(g) for g in gens]) < n - k:
            raise CodeValidationError(
                "dependent", f"generators are not independent: {[str(g) for g in gens]}")
        for op in (*self.logical_x, *self.logical_z):
            bad = next((g for g in gens if not commutes(op, g)), None)
            if bad is not None:
                raise CodeValidationError(
                    "logical", f"logical {op} anticommutes with stabilizer {bad}")
        lx, lz = self.logical_x, self.logical_z
        for i in range(k):
            for j in range(k):
                if commutes(lx[i], lz[j]) == (i == j):
                    want = "anticommute" if i == j else "commute"
                    raise CodeValidationError(
                        "logical", f"logicals {lx[i]} and {lz[j]} must {want}")
                if i < j and not (commutes(lx[i], lx[j]) and commutes(lz[i], lz[j])):
                    raise CodeValidationError(
                        "logical", f"logicals of qubits {i} and {j} must commute")

    # -- derived structure --------------------------------------------
    @property
    def num_syndromes(self) -> int:
        return 2 ** (self.n - self.k)

    @cached_property
    def pure_error_gens(self) -> tuple[PauliOperator, ...]:
        """Destabilizers: ``T_i`` anticommutes with generator i only and
        commutes with every logical and with every other ``T_j``."""
        n, m = self.n, self.n - self.k
        constraints = [*self.stabilizer_gens, *self.logical_x, *self.logical_z]
        # <T, C> = T.x . C.z + T.z . C.x ; with T packed as x | z << n
        rows = [c.z | (c.x << n) for c in constraints]
        out = []
        for i in range(m):
            rhs = [int(j == i) for j in range(len(constraints))]
            t = _gf2_solve(rows, rhs, 2 * n)
            out.append(PauliOperator(t & ((1 << n) - 1), t >> n, n))
        for i in range(m):
            for j in range(i + 1, m):
                if not commutes(out[i], out[j]):
                    out[j] = multiply(out[j], self.stabilizer_gens[i]).phase_free()
        return tuple(out)

    @cached_property
    def tables(self) -> "CodeTables":
        return CodeTables(self)

    def distance(self) -> int:
        """Minimum weight of a nontrivial logical operator (full sweep)."""
        t = self.tables
        mask = (t.syndromes == 0) & (t.logical_class != 0)
        return int(pl.weights(self.n)[mask].min())

    def to_dict(self) -> dict:
        return {
            "name": self.name, "n": self.n, "k": self.k, "d": self.d,
            "stabilizers": [str(g) for g in self.stabilizer_gens],
            "logical_x": [str(g) for g in self.logical_x],
            "logical_z": [str(g) for g in self.logical_z],
        }


class CodeTables:
    """Full-sweep lookup arrays over the ``4**n`` Paulis of one block."""

    def __init__(self, code: StabilizerCode):
        n, m = code.n, code.n - code.k
        if n > MAX_ENUM_QUBITS:
            raise CapacityError(
                f"{code.name}: full sweeps need n <= {MAX_ENUM_QUBITS}, got {n}")
        if code.k != 1:
            # logical classes below assume a single logical qubit
            raise CapacityError(f"{code.name}: only k = 1 codes are tabulated")
        self.n, self.m = n, m
        x, z = pl.index_xz(n)
        self.x, self.z = x, z
        syn = np.zeros(4**n, dtype=np.int64)
        for i, g in enumerate(code.stabilizer_gens):
            syn |= pl.symplectic_parity(x, z, g.x, g.z) << (m - 1 - i)
        self.syndromes = syn
        lx, lz = code.logical_x[0], code.logical_z[0]
        xbar = pl.symplectic_parity(x, z, lz.x, lz.z)
        zbar = pl.symplectic_parity(x, z, lx.x, lx.z)
        self.logical_class = _BITS_CLASS[xbar, zbar]
        # P = Lbar S E with E fixed by the syndrome; the destabilizers
        # mutually commute, so E drops out of the commutation test.
        stab = np.zeros(4**n, dtype=np.int64)
        for i, t in enumerate(code.pure_error_gens):
            stab |= pl.symplectic_parity(x, z, t.x, t.z) << (m - 1 - i)
        self.stabilizer_bits = stab
        self.group_x, self.group_z, self.group_r = _group_elements(code.stabilizer_gens)
        reps = [logical_representative(code, c) for c in range(4)]
        self.logical_x_rep = np.array([r.x for r in reps], dtype=np.int64)
        self.logical_z_rep = np.array([r.z for r in reps], dtype=np.int64)
        self.logical_r_rep = np.array([r.raw_phase for r in reps], dtype=np.int64)
        self.logical_reps = tuple(reps)


def _group_elements(gens: Sequence[PauliOperator]):
    """All products of ``gens`` as raw (x, z, r) arrays.

    Element index ``b`` uses bit ``m-1-i`` for generator ``i``.
    """
    m = len(gens)
    x = np.zeros(1, dtype=np.int64)
    z = np.zeros(1, dtype=np.int64)
    r = np.zeros(1, dtype=np.int64)
    for g in gens:
        # new bit becomes least significant, earlier generators shift up
        gx, gz, gr = pl.raw_multiply(x, z, r, g.x, g.z, g.raw_phase)
        x = np.stack([x, gx], axis=1).ravel()
        z = np.stack([z, gz], axis=1).ravel()
        r = np.stack([r, gr], axis=1).ravel()
    assert len(x) == 2**m
    return x, z, r


@dataclass(frozen=True, eq=False)
class DecoderTable:
    """Syndrome -> recovery lookup for one code."""

    code: StabilizerCode
    recoveries: tuple[PauliOperator, ...]
    weights: tuple[float, float, float]
    recovery_index: np.ndarray = field(repr=False)

    @cached_property
    def residual_class(self) -> np.ndarray:
        """Logical class left by ``R_{s(Q)} Q`` for every Pauli ``Q``."""
        t = self.code.tables
        rec_class = t.logical_class[self.recovery_index]
        bits = CLASS_BITS[t.logical_class] ^ CLASS_BITS[rec_class[t.syndromes]]
        return _BITS_CLASS[bits[:, 0], bits[:, 1]]

    @cached_property
    def class_indices(self) -> tuple[np.ndarray, ...]:
        """Canonical indices grouped by residual class I, X, Y, Z."""
        return tuple(np.flatnonzero(self.residual_class == c) for c in range(4))

    @cached_property
    def correctable_mask(self) -> np.ndarray:
        return self.residual_class == 0

    @cached_property
    def recovery_phases(self) -> np.ndarray:
        """Exponent ``e`` with ``R_{s(P)} P = i**e Lbar S`` for every ``P``.

        ``Lbar`` is the Hermitian logical representative of the residual
        class and ``S`` the signed stabilizer-group element.
        """
        t = self.code.tables
        n = self.code.n
        rx, rz = t.x[self.recovery_index], t.z[self.recovery_index]
        rr = pl.popcount(rx & rz)
        s = t.syndromes
        px, pz = t.x, t.z
        nx, nz, nr = pl.raw_multiply(rx[s], rz[s], rr[s], px, pz, pl.popcount(px & pz))
        cls = self.residual_class
        # stabilizer bits of N = R_s P from the destabilizers
        bits = np.zeros_like(nx)
        m = n - self.code.k
        for i, dg in enumerate(self.code.pure_error_gens):
            bits |= pl.symplectic_parity(nx, nz, dg.x, dg.z) << (m - 1 - i)
        lx, lz, lr = t.logical_x_rep[cls], t.logical_z_rep[cls], t.logical_r_rep[cls]
        ox, oz, orr = pl.raw_multiply(lx, lz, lr, t.group_x[bits], t.group_z[bits],
                                      t.group_r[bits])
        if not (np.array_equal(ox, nx) and np.array_equal(oz, nz)):
            raise AssertionError("decomposition of R_s P failed")
        return (nr - orr) % 4

    @cached_property
    def coset_members(self) -> np.ndarray:
        """``(2**m, 4, 2**m)`` indices: Paulis with syndrome s and residual l."""
        t = self.code.tables
        key = t.syndromes * 4 + self.residual_class
        order = np.lexsort((np.arange(len(key)), key))
        m = self.code.n - self.code.k
        return order.reshape(2**m, 4, 2**m)


def syndrome_of(code: StabilizerCode, p: PauliOperator) -> tuple[int, ...]:
    if p.n != code.n:
        raise UsageError(f"operator has {p.n} qubits, code has {code.n}")
    return tuple(int(not commutes(p, g)) for g in code.stabilizer_gens)


def syndrome_index(code: StabilizerCode, p: PauliOperator) -> int:
    out = 0
    for b in syndrome_of(code, p):
        out = 2 * out + b
    return out


def _syndrome_bits(code: StabilizerCode, s) -> int:
    m = code.n - code.k
    if isinstance(s, (tuple, list, np.ndarray)):
        if len(s) != m:
            raise UsageError(f"syndrome needs {m} bits")
        val = 0
        for b in s:
            val = 2 * val + int(b)
        s = val
    s = int(s)
    if not 0 <= s < 2**m:
        raise UsageError(f"syndrome {s} out of range")
    return s


def pure_error(code: StabilizerCode, s) -> PauliOperator:
    """Product of destabilizers selected by the syndrome bits."""
    s = _syndrome_bits(code, s)
    m = code.n - code.k
    out = PauliOperator.identity(code.n)
    for i, t in enumerate(code.pure_error_gens):
        if (s >> (m - 1 - i)) & 1:
            out = multiply(out, t)
    return out


def stabilizer_element(code: StabilizerCode, bits: int) -> PauliOperator:
    m = code.n - code.k
    out = PauliOperator.identity(code.n)
    for i, g in enumerate(code.stabilizer_gens):
        if (bits >> (m - 1 - i)) & 1:
            out = multiply(out, g)
    return out


def logical_representative(code: StabilizerCode, cls: int) -> PauliOperator:
    n = code.n
    lx, lz = code.logical_x[0], code.logical_z[0]
    if cls == 0:
        return PauliOperator.identity(n)
    if cls == 1:
        return lx
    if cls == 3:
        return lz
    y = multiply(lx, lz)
    return PauliOperator(y.x, y.z, n, y.phase + 1)


def decompose(code: StabilizerCode, p: PauliOperator) -> tuple[str, int, PauliOperator]:
    """Split ``p`` as ``Lbar * S * E`` (up to phase).

    Returns the logical letter, the stabilizer-group element index (bit
    ``m-1-i`` set when generator ``i`` is a factor) and the pure error.
    Works for any k = 1 code without building the full tables.
    """
    if p.n != code.n:
        raise UsageError(f"operator has {p.n} qubits, code has {code.n}")
    if code.k != 1:
        raise CapacityError("decompose supports k = 1 codes")
    lx, lz = code.logical_x[0], code.logical_z[0]
    cls = int(_BITS_CLASS[int(not commutes(p, lz)), int(not commutes(p, lx))])
    m = code.n - code.k
    bits = 0
    for i, t in enumerate(code.pure_error_gens):
        bits |= int(not commutes(p, t)) << (m - 1 - i)
    return pl.LETTERS[cls], bits, pure_error(code, syndrome_index(code, p))


def build_decoder(code: StabilizerCode, weights=(1.0, 1.0, 1.0)) -> DecoderTable:
    """Minimum weighted-cost lookup decoder.

    Cost of a Pauli is ``w_X * #X + w_Y * #Y + w_Z * #Z``; ties go to the
    smallest canonical index.
    """
    w = tuple(float(v) for v in weights)
    if len(w) != 3:
        raise UsageError("weights are (w_X, w_Y, w_Z)")
    if min(w) < 0:
        raise UsageError(f"negative decoder weight in {w}")
    if max(w) == 0:
        raise UsageError("decoder weights are all zero")
    if code.n - code.k > MAX_SYNDROME_BITS:
        raise CapacityError(f"{code.n - code.k} syndrome bits exceeds {MAX_SYNDROME_BITS}")
    t = code.tables
    digits = pl.index_digits(code.n)
    counts = np.stack([(digits == d).sum(axis=1) for d in (1, 2, 3)], axis=1)
    cost = counts @ np.array(w)
    idx = np.arange(len(cost))
    order = np.lexsort((idx, cost, t.syndromes))
    syn_sorted = t.syndromes[order]
    first = np.flatnonzero(np.r_[True, syn_sorted[1:] != syn_sorted[:-1]])
    rec_idx = order[first]
    if len(rec_idx) != code.num_syndromes:
        raise ValidationError("some syndromes are unreachable")
    recoveries = tuple(PauliOperator.from_index(int(i), code.n) for i in rec_idx)
    rec_idx.setflags(write=False)
    return DecoderTable(code, recoveries, w, rec_idx)


def correctable_set(code: StabilizerCode, decoder: DecoderTable, s) -> frozenset:
    """``{R_s S : S in stabilizer group}`` as phase-free operators."""
    s = _syndrome_bits(code, s)
    r = decoder.recoveries[s]
    m = code.n - code.k
    return frozenset(multiply(r, stabilizer_element(code, b)).phase_free()
                     for b in range(2**m))


def correctable_indices(decoder: DecoderTable) -> np.ndarray:
    """Canonical indices of every correctable error, all syndromes."""
    return np.flatnonzero(decoder.correctable_mask)


# ---------------------------------------------------------------------------
# definition files
# ---------------------------------------------------------------------------

def load_code(definition) -> StabilizerCode:
    """Build a validated code from a dict, JSON text, or a path to JSON."""
    try:
        if isinstance(definition, Path) or (
                isinstance(definition, str) and not definition.lstrip().startswith("{")):
            definition = json.loads(Path(definition).read_text())
        elif isinstance(definition, str):
            definition = json.loads(definition)
    except (OSError, json.JSONDecodeError) as exc:
        raise CodeValidationError("format", f"cannot read code definition: {exc}") from exc
    try:
        n, k, d = int(definition["n"]), int(definition["k"]), int(definition["d"])
        stabs = [PauliOperator.from_string(s) for s in definition["stabilizers"]]
        lxs = [PauliOperator.from_string(s) for s in definition["logical_x"]]
        lzs = [PauliOperator.from_string(s) for s in definition["logical_z"]]
    except (KeyError, TypeError, UsageError) as exc:
        raise CodeValidationError("format", f"malformed code definition: {exc}") from exc
    code = StabilizerCode(n, k, d, stabs, lxs, lzs, definition.get("name", "code"))
    if k == 1 and n <= MAX_ENUM_QUBITS:
        actual = code.distance()
        if actual != d:
            raise CodeValidationError("distance", f"declared d={d} but distance is {actual}")
    return code


def builtin_code(name: str) -> StabilizerCode:
    """Load one of the shipped definitions (``steane``, ``cyclic_search``)."""
    path = resources.files("qecdiag") / "data" / f"{name}.json"
    if not path.is_file():
        raise UsageError(f"no shipped code named {name!r}")
    return load_code(json.loads(path.read_text()))


@dataclass(frozen=True)
class ConcatSpec:
    """Level-L concatenation of k = 1 codes, level 1 first."""

    levels: int
    code_per_level: tuple[StabilizerCode, ...]
    decoder_per_level: tuple[DecoderTable, ...]

    def __post_init__(self):
        object.__setattr__(self, "code_per_level", tuple(self.code_per_level))
        object.__setattr__(self, "decoder_per_level", tuple(self.decoder_per_level))
        if self.levels < 1:
            raise UsageError("need at least one level")
        if len(self.code_per_level) != self.levels or len(self.decoder_per_level) != self.levels:
            raise UsageError("one code and one decoder per level")
        for c, dec in zip(self.code_per_level, self.decoder_per_level):
            if c.k != 1:
                raise UsageError(f"{c.name} encodes {c.k} qubits; concatenation needs k = 1")
            if dec.code is not c:
                raise UsageError(f"decoder does not belong to {c.name}")

    @classmethod
    def uniform(cls, code: StabilizerCode, decoder: DecoderTable, levels: int) -> "ConcatSpec":
        return cls(levels, (code,) * levels, (decoder,) * levels)
