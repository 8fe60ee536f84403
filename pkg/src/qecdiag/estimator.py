"""Logical estimator for concatenated codes.

Each code block is summarised by the distribution of the logical class it
leaves behind after decoding. At level 1 that distribution is a sweep of
the physical Pauli model over all ``4**n`` errors. At higher levels the
inputs of a block are the residual distributions of its ``n`` children,
treated as independent, and the same sweep is applied to their product.
The estimate of the uncorrectable probability is the non-identity mass at
the top.

Also here: the accuracy bound, and extrapolation of partial
noise-reconstruction data to a full Pauli distribution.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from qecdiag import pauli as pl
from qecdiag.channels import PauliDist, product_distribution
from qecdiag.codes import ConcatSpec, DecoderTable, StabilizerCode
from qecdiag.errors import UsageError, ValidationError

SUM_TOL = 1e-12


@dataclass(frozen=True)
class ResidualDist:
    probs: tuple[float, float, float, float]

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (4,):
            raise UsageError("residual distribution has 4 entries")
        if np.any(p < 0):
            raise ValidationError(f"negative residual probability in {p}")
        object.__setattr__(self, "probs", tuple(float(v) for v in p))

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.probs)

    @property
    def failure(self) -> float:
        """Non-identity mass, summed directly for precision."""
        return self.probs[1] + self.probs[2] + self.probs[3]


def _residual_sweep(decoder: DecoderTable, probs: np.ndarray) -> np.ndarray:
    # pairwise sums per class; a weighted bincount drifts by ~1e-12 here
    return np.array([probs[idx].sum() for idx in decoder.class_indices])


def residual_dist_level1(code: StabilizerCode, decoder: DecoderTable,
                         dist: PauliDist) -> ResidualDist:
    if dist.n != code.n:
        raise UsageError(f"distribution on {dist.n} qubits, code has {code.n}")
    return ResidualDist(_residual_sweep(decoder, dist.explicit()))


def _block_matrix(code: StabilizerCode, block_dists) -> np.ndarray:
    if len(block_dists) != code.n:
        raise UsageError(f"need {code.n} block distributions, got {len(block_dists)}")
    return np.array([b.vector if isinstance(b, ResidualDist) else np.asarray(b, dtype=float)
                     for b in block_dists])


def residual_dist_recurse(code: StabilizerCode, decoder: DecoderTable,
                          block_dists: Sequence[ResidualDist]) -> ResidualDist:
    mat = _block_matrix(code, block_dists)
    return ResidualDist(_residual_sweep(decoder, product_distribution(mat)))


def gamma_tilde(code: StabilizerCode, decoder: DecoderTable, block_dists) -> float:
    """Probability of a non-identity block pattern the decoder corrects."""
    mat = _block_matrix(code, block_dists)
    probs = product_distribution(mat)
    mask = decoder.correctable_mask.copy()
    mask[0] = False
    return float(probs[mask].sum())


def lambda_tilde(block_pc: Sequence[float]) -> float:
    vals = np.asarray(block_pc, dtype=float)
    if np.any((vals < 0) | (vals > 1)):
        raise UsageError("block success probabilities must lie in [0, 1]")
    return float(np.prod(vals))


def accuracy_bound(n_c: int, d_c: int, level: int, r0: float) -> float:
    if not 0 < r0 < 1:
        raise UsageError(f"r0={r0} outside (0, 1)")
    return float(n_c ** (level + 1) * r0 ** (2 + (d_c + 1) // 2))


@dataclass
class EstimateReport:
    p_u_tilde: float
    per_level: list
    bound: float
    timing: float
    residuals: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def _per_qubit_rate(dist: PauliDist) -> float:
    if dist.factored:
        return float(1 - dist.probs[:, 0].mean())
    r = float(dist.probs[1:].sum())
    return 1 - (1 - r) ** (1 / dist.n)


def logical_estimator(spec: ConcatSpec, physical) -> EstimateReport:
    """Estimate the top-level uncorrectable probability.

    ``physical`` is one PauliDist used for every level-1 block, or a list
    of ``prod(n_l for l >= 2)`` distributions, one per level-1 block in
    tree order.
    """
    start = time.perf_counter()
    codes, decs = spec.code_per_level, spec.decoder_per_level
    shared = isinstance(physical, PauliDist)
    blocks = [physical] if shared else list(physical)
    if not shared:
        want = math.prod(c.n for c in codes[1:])
        if len(blocks) != want:
            raise UsageError(f"need {want} level-1 distributions, got {len(blocks)}")
    for b in blocks:
        if b.n != codes[0].n:
            raise UsageError(f"level-1 block on {b.n} qubits, code has {codes[0].n}")

    level = [residual_dist_level1(codes[0], decs[0], b) for b in blocks]
    per_level = [(None, None)]
    residuals = [level[0].probs] if shared else [r.probs for r in level]
    pc = level[0].probs[0]
    per_level[0] = (pc, 0.0)
    for code, dec in zip(codes[1:], decs[1:]):
        groups = [level * code.n] if shared else [
            level[i:i + code.n] for i in range(0, len(level), code.n)]
        nxt, lam, gam = [], [], []
        for g in groups:
            r = residual_dist_recurse(code, dec, g)
            lt = lambda_tilde([b.probs[0] for b in g])
            gt = gamma_tilde(code, dec, g)
            if abs(lt + gt - r.probs[0]) > SUM_TOL:
                raise AssertionError("correctable mass does not split into Lambda + Gamma")
            nxt.append(r)
            lam.append(lt)
            gam.append(gt)
        level = nxt
        per_level.append((lam[0], gam[0]) if len(lam) == 1 else (lam, gam))
        residuals = [r.probs for r in level]
    top = level[0]
    r0 = float(np.mean([_per_qubit_rate(b) for b in blocks]))
    bound = accuracy_bound(codes[-1].n, codes[-1].d, spec.levels, r0) if 0 < r0 < 1 else 0.0
    return EstimateReport(
        p_u_tilde=top.failure,
        per_level=per_level,
        bound=bound,
        timing=time.perf_counter() - start,
        residuals=residuals,
        meta={"levels": spec.levels, "codes": [c.name for c in codes], "r0": r0},
    )


# ---------------------------------------------------------------------------
# partial noise reconstruction
# ---------------------------------------------------------------------------

@dataclass
class NRDataset:
    """Leading Pauli error rates of an n-qubit channel plus its infidelity."""

    n: int
    entries: list
    total_infidelity: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.entries = [(int(i), float(p)) for i, p in self.entries]
        idx = [i for i, _ in self.entries]
        if len(set(idx)) != len(idx):
            raise ValidationError("repeated Pauli in NR dataset")
        if any(not 0 <= i < 4**self.n for i in idx):
            raise ValidationError("Pauli index out of range in NR dataset")
        if any(not 0 <= p <= 1 for _, p in self.entries):
            raise ValidationError("NR probability outside [0, 1]")
        if not 0 <= self.total_infidelity < 1:
            raise ValidationError(f"infidelity {self.total_infidelity} outside [0, 1)")
        if sum(p for _, p in self.entries) > 1 + SUM_TOL:
            raise ValidationError("NR probabilities sum above 1")

    @property
    def k(self) -> int:
        return len(self.entries)

    @classmethod
    def from_dist(cls, dist: PauliDist, k: int) -> "NRDataset":
        """The ``k`` largest rates of ``dist`` (ties by canonical index)."""
        probs = dist.explicit()
        order = np.lexsort((np.arange(len(probs)), -probs))[:k]
        return cls(dist.n, [(int(i), float(probs[i])) for i in order],
                   float(probs[1:].sum()), {"selection": "largest first"})

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"n={self.n},infidelity={self.total_infidelity!r},K={self.k}\n")
        w = csv.writer(buf, lineterminator="\n")
        for i, p in self.entries:
            w.writerow([pl.PauliOperator.from_index(i, self.n).letters, repr(p)])
        return buf.getvalue()

    def save(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "NRDataset":
        lines = text.strip().splitlines()
        if not lines:
            raise ValidationError("empty NR file")
        try:
            head = dict(part.split("=", 1) for part in lines[0].split(","))
            n, r, k = int(head["n"]), float(head["infidelity"]), int(head["K"])
        except (KeyError, ValueError) as exc:
            raise ValidationError(f"bad NR header {lines[0]!r}") from exc
        entries = []
        for row in csv.reader(lines[1:]):
            if not row:
                continue
            try:
                op = pl.PauliOperator.from_string(row[0])
                prob = float(row[1])
            except (IndexError, ValueError) as exc:
                raise ValidationError(f"bad NR row {row!r}") from exc
            if op.n != n:
                raise ValidationError(f"row {row[0]} does not act on {n} qubits")
            entries.append((op.index, prob))
        if len(entries) != k:
            raise ValidationError(f"header says K={k} but file has {len(entries)} rows")
        return cls(n, entries, r)

    @classmethod
    def load(cls, path) -> "NRDataset":
        return cls.from_csv(Path(path).read_text())


def extrapolate_nr(data: NRDataset) -> PauliDist:
    """Fill the missing rates with an i.i.d. depolarizing profile.

    Absent Paulis get ``(1-r0)**(n-w) (r0/3)**w`` with ``r0`` from the
    total infidelity, then one common factor brings the total to 1.
    """
    n = data.n
    r0 = 1 - (1 - data.total_infidelity) ** (1 / n)
    w = pl.weights(n)
    base = (1 - r0) ** (n - w) * (r0 / 3) ** w
    present = np.zeros(4**n, dtype=bool)
    out = base.copy()
    for i, p in data.entries:
        out[i] = p
        present[i] = True
    if present.all():
        return PauliDist(out, meta={"r0": r0, "scale": 1.0})
    known = out[present].sum()
    absent = base[~present].sum()
    if known > 1 + SUM_TOL:
        raise ValidationError(f"reconstructed rates sum to {known} > 1")
    scale = (1 - known) / absent
    out[~present] *= scale
    return PauliDist(out, meta={"r0": r0, "scale": float(scale)})
