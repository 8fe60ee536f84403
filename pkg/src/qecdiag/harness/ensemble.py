"""Noise ensembles and the per-channel experiment pipeline.

An ensemble spec is a JSON document::

    {"kind": "random_cptp", "count": 300, "master_seed": 11,
     "parameters": {"t_min": 0.001, "t_max": 0.1},
     "code": "steane", "levels": 2, "samples": 1000,
     "mode": "importance", "lambda0": 0.5}

Member ``i`` is built from ``member_seed(master_seed, i)`` alone, so any
record can be regenerated from the spec and its id.
"""

from __future__ import annotations

import csv
import json
import math
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from pathlib import Path

import numpy as np

from qecdiag import channels as ch
from qecdiag.codes import ConcatSpec, build_decoder, builtin_code, load_code
from qecdiag.engine import FactoredInput
from qecdiag.errors import QECDiagError, ValidationError
from qecdiag.estimator import logical_estimator
from qecdiag.sampler import ImportanceConfig, mc_logical_infidelity

VERSION = "0.1.0"
KINDS = ("random_cptp", "coherent", "correlated_pauli", "biased", "depolarizing")

_DEFAULTS = {
    "random_cptp": {"t_min": 0.001, "t_max": 0.1},
    "coherent": {"mu_min": 0.001, "mu_max": 0.1},
    "correlated_pauli": {"r0_min": 1e-3, "r0_max": 1e-2, "q_min": 0.0, "q_max": 1.0,
                         "subset_size": 64},
    "biased": {"p_x": 1e-3, "eta": 10.0, "theta": math.pi / 2},
    "depolarizing": {"p": 1e-3},
}


@dataclass
class EnsembleSpec:
    kind: str
    count: int = 1
    master_seed: int = 0
    parameters: dict = field(default_factory=dict)
    code: str = "steane"
    levels: int = 2
    decoder_weights: tuple = (1.0, 1.0, 1.0)
    samples: int = 1000
    mode: str = "importance"
    lambda0: float = 0.5
    mc_raw: bool = True
    mc_rc: bool = True
    diamond_restarts: int = -1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown ensemble kind {self.kind!r}; choose from {KINDS}")
        if self.count < 0:
            raise ValidationError("count must be nonnegative")
        merged = dict(_DEFAULTS[self.kind])
        unknown = set(self.parameters) - set(merged)
        if unknown:
            raise ValidationError(f"unknown parameters for {self.kind}: {sorted(unknown)}")
        merged.update(self.parameters)
        self.parameters = merged
        self.decoder_weights = tuple(float(w) for w in self.decoder_weights)
        p = merged
        if self.kind == "random_cptp" and not 0 <= p["t_min"] <= p["t_max"]:
            raise ValidationError("need 0 <= t_min <= t_max")
        if self.kind == "coherent" and not 0 < p["mu_min"] <= p["mu_max"]:
            raise ValidationError("need 0 < mu_min <= mu_max")
        if self.kind == "correlated_pauli":
            if not (0 < p["r0_min"] <= p["r0_max"] < 1 and 0 <= p["q_min"] <= p["q_max"] <= 1):
                raise ValidationError("correlated_pauli ranges out of bounds")

    @classmethod
    def load(cls, source) -> "EnsembleSpec":
        if isinstance(source, dict):
            data = source
        else:
            try:
                data = json.loads(Path(source).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ValidationError(f"cannot read ensemble spec {source}: {exc}") from exc
        names = {f.name for f in fields(cls)}
        extra = set(data) - names
        if extra:
            raise ValidationError(f"unknown ensemble spec keys {sorted(extra)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ValidationError(str(exc)) from exc

    def to_dict(self) -> dict:
        d = asdict(self)
        d["decoder_weights"] = list(self.decoder_weights)
        return d

    def concat(self) -> ConcatSpec:
        return _concat(self.code, self.decoder_weights, self.levels)


@lru_cache(maxsize=16)
def _concat(code_name: str, weights: tuple, levels: int) -> ConcatSpec:
    code = resolve_code(code_name)
    return ConcatSpec.uniform(code, build_decoder(code, weights), levels)


@lru_cache(maxsize=16)
def resolve_code(name_or_path: str):
    if Path(name_or_path).suffix == ".json" or "/" in name_or_path:
        return load_code(Path(name_or_path))
    return builtin_code(name_or_path)


@dataclass
class NoiseMember:
    """One generated channel: per-qubit chi matrices or one explicit Pauli
    distribution over the whole block."""

    id: int
    kind: str
    seed: int
    params: dict
    chis: np.ndarray | None = None
    explicit: ch.PauliDist | None = None

    def raw_input(self) -> FactoredInput:
        if self.explicit is not None:
            return FactoredInput.from_dist(self.explicit)
        return FactoredInput.from_channels(list(self.chis))

    def twirled(self) -> ch.PauliDist:
        if self.explicit is not None:
            return self.explicit
        diag = np.real(np.einsum("jpp->jp", self.chis))
        return ch.PauliDist(np.clip(diag, 0, None) / diag.sum(axis=1, keepdims=True),
                            factored=True)

    @property
    def is_pauli(self) -> bool:
        if self.explicit is not None:
            return True
        off = self.chis - np.einsum("jp,pq->jpq", np.einsum("jpp->jp", self.chis), np.eye(4))
        return bool(np.max(np.abs(off)) == 0)

    def infidelity(self) -> float:
        """Mean single-qubit infidelity; block infidelity for explicit models."""
        if self.explicit is not None:
            return ch.infidelity(self.explicit)
        return float(np.mean([1 - c[0, 0].real for c in self.chis]))

    def diamond(self, restarts: int) -> float:
        if self.explicit is not None:
            return float("nan")
        seen, vals = {}, []
        for c in self.chis:
            key = c.tobytes()
            if key not in seen:
                seen[key] = ch.diamond_distance_est(c, restarts=restarts, seed=self.seed)
            vals.append(seen[key])
        return float(np.mean(vals))

    def validate(self) -> None:
        if self.chis is not None:
            for c in self.chis:
                ch.check_chi(c)
        if self.explicit is not None:
            self.explicit.validate()


def _log_uniform(rng, lo, hi):
    if lo == hi:
        return float(lo)
    return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))


def generate_member(spec: EnsembleSpec, index: int) -> NoiseMember:
    seed = ch.member_seed(spec.master_seed, index)
    rng = np.random.default_rng(seed)
    p = spec.parameters
    n = resolve_code(spec.code).n
    if spec.kind == "random_cptp":
        t = _log_uniform(rng, p["t_min"], p["t_max"]) if p["t_min"] > 0 else float(
            rng.uniform(p["t_min"], p["t_max"]))
        chi = ch.random_cptp(t, seed).matrix
        return NoiseMember(index, spec.kind, seed, {"t": t}, chis=np.array([chi] * n))
    if spec.kind == "coherent":
        mu = _log_uniform(rng, p["mu_min"], p["mu_max"])
        deltas = rng.normal(mu, math.sqrt(mu), size=n)
        axes = rng.normal(size=(n, 3))
        axes /= np.linalg.norm(axes, axis=1, keepdims=True)
        chis = np.array([ch.coherent_channel(a, d).matrix for a, d in zip(axes, deltas)])
        return NoiseMember(index, spec.kind, seed,
                           {"mu": mu, "deltas": deltas.tolist(), "axes": axes.tolist()},
                           chis=chis)
    if spec.kind == "correlated_pauli":
        r0 = _log_uniform(rng, p["r0_min"], p["r0_max"])
        q = float(rng.uniform(p["q_min"], p["q_max"]))
        concat = spec.concat()
        subset = ch.adversarial_subset(concat.decoder_per_level[0].residual_class,
                                       int(p["subset_size"]), rng)
        dist = ch.correlated_pauli(n, r0, q, subset, int(rng.integers(2**31)))
        return NoiseMember(index, spec.kind, seed,
                           {"r0": r0, "q": q, "subset": subset.tolist()}, explicit=dist)
    if spec.kind == "biased":
        dist = ch.biased_model(p["p_x"], p["eta"], p["theta"])
        chis = np.array([np.diag(dist.probs[0]).astype(complex)] * n)
        return NoiseMember(index, spec.kind, seed, dict(p), chis=chis)
    dist = ch.depolarizing(1, p["p"])
    chis = np.array([np.diag(dist.probs[0]).astype(complex)] * n)
    return NoiseMember(index, spec.kind, seed, {"p": p["p"]}, chis=chis)


# ---------------------------------------------------------------------------
# run records
# ---------------------------------------------------------------------------

@dataclass
class RunRecord:
    id: int
    kind: str
    seed: int
    params: str
    infidelity: float = float("nan")
    diamond: float = float("nan")
    pu_rc: float = float("nan")
    mc_rc: float = float("nan")
    mc_rc_se: float = float("nan")
    mc_raw: float = float("nan")
    mc_raw_se: float = float("nan")
    mode: str = ""
    samples: int = 0
    timing: float = 0.0
    error: str = ""

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> list[str]:
        out = []
        for name in self.columns():
            v = getattr(self, name)
            out.append(repr(float(v)) if isinstance(v, float) else str(v))
        return out

    @classmethod
    def from_row(cls, row: dict) -> "RunRecord":
        kw = {}
        for f in fields(cls):
            raw = row[f.name]
            if f.type in ("int", int):
                kw[f.name] = int(raw)
            elif f.type in ("float", float):
                kw[f.name] = float(raw)
            else:
                kw[f.name] = raw
        return cls(**kw)


def run_member(spec: EnsembleSpec, index: int) -> RunRecord:
    """Every metric of one ensemble member; errors land in ``error``."""
    start = time.perf_counter()
    try:
        member = generate_member(spec, index)
    except QECDiagError as exc:
        return RunRecord(index, spec.kind, ch.member_seed(spec.master_seed, index), "{}",
                         error=f"{type(exc).__name__}: {exc}")
    rec = RunRecord(member.id, member.kind, member.seed, json.dumps(member.params),
                    mode=spec.mode, samples=spec.samples)
    try:
        member.validate()
        concat = spec.concat()
        rec.infidelity = member.infidelity()
        if spec.diamond_restarts >= 0:
            rec.diamond = member.diamond(spec.diamond_restarts)
        twirled = member.twirled()
        rec.pu_rc = logical_estimator(concat, twirled).p_u_tilde
        cfg = ImportanceConfig(lambda0=spec.lambda0, max_samples=max(spec.samples, 1),
                               seed=member.seed, mode=spec.mode)
        if spec.mc_rc and spec.samples > 0:
            res = mc_logical_infidelity(concat, FactoredInput.from_dist(twirled), cfg)
            rec.mc_rc, rec.mc_rc_se = res.estimate, res.std_error
        if spec.mc_raw and spec.samples > 0:
            if member.is_pauli and spec.mc_rc:
                rec.mc_raw, rec.mc_raw_se = rec.mc_rc, rec.mc_rc_se
            else:
                res = mc_logical_infidelity(concat, member.raw_input(), cfg)
                rec.mc_raw, rec.mc_raw_se = res.estimate, res.std_error
    except QECDiagError as exc:
        rec.error = f"{type(exc).__name__}: {exc}"
    except Exception as exc:  # keep the run alive, keep the trace
        rec.error = f"{type(exc).__name__}: {exc} | " + traceback.format_exc(limit=2).replace("\n", " ")
    rec.timing = time.perf_counter() - start
    return rec


def read_records(path) -> list[RunRecord]:
    path = Path(path)
    if not path.exists() or path.stat().st_size == 0:
        return []
    with path.open(newline="") as fh:
        return [RunRecord.from_row(r) for r in csv.DictReader(fh)]


def write_sidecar(spec: EnsembleSpec, out: Path) -> None:
    meta = {
        "spec": spec.to_dict(),
        "version": VERSION,
        "seeds": {"master_seed": spec.master_seed, "member_seed": "SeedSequence([master_seed, id])"},
        "gaussian_hermitian": "H = (A + A^dagger)/2, A_ij = a + ib with a, b ~ N(0, 1)",
        "stinespring_environment": "|0> of a 4-dimensional environment",
    }
    Path(str(out) + ".json").write_text(json.dumps(meta, indent=2))


def run_ensemble(spec, out=None, threads: int = 1) -> list[RunRecord]:
    """Run every member not already present in ``out`` and append it.

    Returns all records (old and new) ordered by id.
    """
    spec = spec if isinstance(spec, EnsembleSpec) else EnsembleSpec.load(spec)
    existing = read_records(out) if out else []
    done = {r.id for r in existing}
    todo = [i for i in range(spec.count) if i not in done]
    new: list[RunRecord] = []
    writer = fh = None
    if out:
        out = Path(out)
        write_sidecar(spec, out)
        fresh = not existing
        fh = out.open("a" if not fresh else "w", newline="")
        writer = csv.writer(fh, lineterminator="\n")
        if fresh:
            writer.writerow(RunRecord.columns())
    try:
        if threads > 1 and len(todo) > 1:
            with ProcessPoolExecutor(threads) as pool:
                results = pool.map(run_member, [spec] * len(todo), todo)
                for rec in results:
                    new.append(rec)
                    if writer:
                        writer.writerow(rec.row())
                        fh.flush()
        else:
            for i in todo:
                rec = run_member(spec, i)
                new.append(rec)
                if writer:
                    writer.writerow(rec.row())
                    fh.flush()
    finally:
        if fh:
            fh.close()
    return sorted(existing + new, key=lambda r: r.id)


def member_to_json(member: NoiseMember) -> dict:
    out = {"id": member.id, "kind": member.kind, "seed": member.seed, "params": member.params}
    if member.chis is not None:
        out["chi"] = [[[c.real, c.imag] for c in chi.ravel()] for chi in member.chis]
    if member.explicit is not None:
        probs = member.explicit.probs
        nz = np.flatnonzero(probs)
        out["pauli"] = {"n": member.explicit.n, "entries": [[int(i), repr(float(probs[i]))] for i in nz]}
    return out
