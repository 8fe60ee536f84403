"""Monte Carlo estimate of the average logical infidelity.

A sample walks the concatenation tree bottom-up. Each block gets the
conditional channels of its children as input, computes its own syndrome
distribution, draws a syndrome and passes the matching conditional
channel upward. In importance mode the draw comes from a flattened
distribution ``Q(s) ~ P(s)**(1/k)`` and the likelihood ratios of all draws
multiply into the sample weight.

By default the top block is not drawn: its syndromes are few enough to
average exactly given the sampled children, which keeps the estimator
unbiased and removes the noisiest draw. ``average_top=False`` draws it
like every other block.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from qecdiag import engine
from qecdiag.codes import ConcatSpec
from qecdiag.engine import FactoredInput
from qecdiag.errors import UsageError

MIN_EXPONENT = 1e-4


@dataclass(frozen=True)
class ImportanceConfig:
    lambda0: float = 0.5
    k_search_tolerance: float = 1e-6
    max_samples: int = 10_000
    seed: int = 0
    mode: str = "importance"
    threads: int = 1
    average_top: bool = True

    def __post_init__(self):
        if not 0 < self.lambda0 < 1:
            raise UsageError(f"lambda0={self.lambda0} outside (0, 1)")
        if self.max_samples < 1:
            raise UsageError("need at least one sample")
        if self.mode not in ("direct", "importance"):
            raise UsageError(f"unknown sampling mode {self.mode!r}")
        if self.k_search_tolerance <= 0:
            raise UsageError("k tolerance must be positive")


@dataclass
class MCResult:
    estimate: float
    std_error: float
    n_samples: int
    convergence_trace: list
    k_used: list
    weight_mean: float
    weight_std_error: float
    mode: str
    lambda0: float
    seed: int
    timing: float = 0.0
    meta: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["samples", "estimate", "std_error"])
        for row in self.convergence_trace:
            w.writerow([row[0], repr(row[1]), repr(row[2])])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# importance distribution
# ---------------------------------------------------------------------------

def _log_tilt(p: np.ndarray, beta: float) -> np.ndarray:
    out = np.zeros_like(p)
    nz = p > 0
    logq = beta * np.log(p[nz])
    logq -= logq.max()
    q = np.exp(logq)
    out[nz] = q / q.sum()
    return out


def tilt(p, k: float) -> np.ndarray:
    """``p**(1/k)`` renormalised; zero entries stay zero."""
    if not k > 0 or not math.isfinite(k):
        raise UsageError(f"tilt exponent k={k} must be positive")
    return _log_tilt(np.asarray(p, dtype=float), 1 / k)


class KChoice(NamedTuple):
    k: float
    attained: bool


def choose_k(p, lambda0: float, tol: float = 1e-6) -> KChoice:
    """Smallest ``k >= 1`` whose tilt puts at least ``lambda0`` on ``s != 0``.

    Bisection runs on the exponent ``1/k``. If even the flattest allowed
    tilt misses the threshold the flattest ``k`` comes back with
    ``attained=False``.
    """
    p = np.asarray(p, dtype=float)

    def mass(beta):
        q = _log_tilt(p, beta)
        return 1 - q[0]

    if mass(1.0) >= lambda0:
        return KChoice(1.0, True)
    lo = MIN_EXPONENT
    if mass(lo) < lambda0:
        return KChoice(1 / lo, False)
    hi = 1.0
    while hi - lo > tol * hi:
        mid = (lo + hi) / 2
        if mass(mid) >= lambda0:
            lo = mid
        else:
            hi = mid
    return KChoice(1 / lo, True)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

class _BlockDraw:
    """Syndrome table of one block: probabilities, proposal, channels."""

    __slots__ = ("probs", "proposal", "ratio", "cdf", "channels", "k")

    def __init__(self, probs, channels, cfg: ImportanceConfig):
        probs = np.clip(probs, 0, None)
        probs = probs / probs.sum()
        self.probs = probs
        self.channels = channels
        if cfg.mode == "importance":
            self.k = choose_k(probs, cfg.lambda0, cfg.k_search_tolerance).k
            q = tilt(probs, self.k)
        else:
            self.k = 1.0
            q = probs
        self.proposal = q
        with np.errstate(divide="ignore", invalid="ignore"):
            self.ratio = np.where(q > 0, probs / q, 0.0)
        self.cdf = np.cumsum(q)

    def draw(self, rng: np.random.Generator):
        s = int(np.searchsorted(self.cdf, rng.random() * self.cdf[-1], side="right"))
        s = min(s, len(self.cdf) - 1)
        while self.proposal[s] == 0:
            s -= 1
        return s, self.channels[s], self.ratio[s]


def _block_table(code, decoder, inp: FactoredInput, cfg) -> _BlockDraw:
    if inp.is_pauli:
        joint = engine.pauli_syndrome_residuals(code, decoder, inp)
        probs = joint.sum(axis=1)
        chans = np.zeros_like(joint)
        ok = probs > 0
        chans[ok] = joint[ok] / probs[ok, None]
        return _BlockDraw(probs, chans, cfg)
    probs, chis = engine.syndrome_channels(code, decoder, inp)
    return _BlockDraw(probs, chis, cfg)


def _channel_infidelity(ch: np.ndarray) -> float:
    if ch.ndim == 1:
        return float(ch[1:].sum())
    return engine.logical_infidelity(ch)


class _Walker:
    def __init__(self, spec: ConcatSpec, inputs: Sequence[FactoredInput], cfg):
        self.spec = spec
        self.cfg = cfg
        code, dec = spec.code_per_level[0], spec.decoder_per_level[0]
        cache: dict[int, _BlockDraw] = {}
        self.level1 = []
        for inp in inputs:
            if id(inp) not in cache:
                cache[id(inp)] = _block_table(code, dec, inp, cfg)
            self.level1.append(cache[id(inp)])
        self.shared = len(inputs) == 1

    def sample(self, rng):
        """One tree walk: (top channel, weight, k per level)."""
        ks = [[] for _ in range(self.spec.levels)]

        def walk(level: int, block: int):
            weight = 1.0
            if level:
                code = self.spec.code_per_level[level]
                dec = self.spec.decoder_per_level[level]
                kids = []
                for j in range(code.n):
                    ch, w = walk(level - 1, block * code.n + j)
                    kids.append(ch)
                    weight *= w
                table = _block_table(code, dec, FactoredInput.from_channels(kids), self.cfg)
            else:
                table = self.level1[0 if self.shared else block]
            if level == self.spec.levels - 1 and self.cfg.average_top:
                ks[level].append(1.0)
                return table, weight
            ch_out, w_out = self._draw(table, rng, ks[level])
            return ch_out, weight * w_out

        top, weight = walk(self.spec.levels - 1, 0)
        if isinstance(top, _BlockDraw):
            r = float(sum(p * _channel_infidelity(c)
                          for p, c in zip(top.probs, top.channels) if p > 0))
        else:
            r = _channel_infidelity(top)
        return r, weight, [float(np.mean(k)) for k in ks]

    @staticmethod
    def _draw(table, rng, ks):
        _, ch, ratio = table.draw(rng)
        ks.append(table.k)
        return ch, ratio


def _sample_range(spec, inputs, cfg, start, stop):
    walker = _Walker(spec, inputs, cfg)
    vals = np.empty(stop - start)
    weights = np.empty(stop - start)
    ks = np.empty((stop - start, spec.levels))
    for i in range(start, stop):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, i]))
        r, w, k = walker.sample(rng)
        vals[i - start] = r * w
        weights[i - start] = w
        ks[i - start] = k
    return vals, weights, ks


def checkpoints(n: int) -> list[int]:
    """Sample counts at powers of ``10**(1/4)``, always ending at ``n``."""
    out, j = [], 0
    while True:
        c = int(math.floor(10 ** (j / 4) + 1e-9))
        if c >= n:
            break
        if not out or c != out[-1]:
            out.append(c)
        j += 1
    out.append(n)
    return out


def _normalise_inputs(spec: ConcatSpec, inp) -> list[FactoredInput]:
    inputs = [inp] if isinstance(inp, FactoredInput) else list(inp)
    n1 = spec.code_per_level[0].n
    want = math.prod(c.n for c in spec.code_per_level[1:])
    if len(inputs) not in (1, want):
        raise UsageError(f"need 1 or {want} level-1 inputs, got {len(inputs)}")
    for x in inputs:
        if x.n != n1:
            raise UsageError(f"level-1 input on {x.n} qubits, code has {n1}")
    return inputs


def mc_logical_infidelity(spec: ConcatSpec, inp, cfg: ImportanceConfig) -> MCResult:
    """Average logical infidelity of the top block by sampling syndromes.

    ``inp`` is one FactoredInput shared by every level-1 block, or one per
    level-1 block in tree order.
    """
    start_t = time.perf_counter()
    inputs = _normalise_inputs(spec, inp)
    n = cfg.max_samples
    if cfg.threads > 1 and n > 1:
        bounds = np.linspace(0, n, cfg.threads + 1).astype(int)
        with ProcessPoolExecutor(cfg.threads) as pool:
            parts = list(pool.map(_sample_range, [spec] * cfg.threads,
                                  [inputs] * cfg.threads, [cfg] * cfg.threads,
                                  bounds[:-1], bounds[1:]))
        vals = np.concatenate([p[0] for p in parts])
        weights = np.concatenate([p[1] for p in parts])
        ks = np.concatenate([p[2] for p in parts])
    else:
        vals, weights, ks = _sample_range(spec, inputs, cfg, 0, n)

    trace = []
    csum, csq = np.cumsum(vals), np.cumsum(vals**2)
    for c in checkpoints(n):
        mean = csum[c - 1] / c
        var = max(csq[c - 1] / c - mean**2, 0.0)
        se = math.sqrt(var * c / (c - 1) / c) if c > 1 else 0.0
        trace.append((c, float(mean), float(se)))
    estimate = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    wse = float(np.std(weights, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return MCResult(
        estimate=estimate,
        std_error=se,
        n_samples=n,
        convergence_trace=trace,
        k_used=[float(v) for v in ks.mean(axis=0)],
        weight_mean=float(np.mean(weights)),
        weight_std_error=wse,
        mode=cfg.mode,
        lambda0=cfg.lambda0,
        seed=cfg.seed,
        timing=time.perf_counter() - start_t,
    )
