"""Dispersion statistics and code selection tables."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from qecdiag import channels as ch
from qecdiag.codes import ConcatSpec, build_decoder
from qecdiag.engine import FactoredInput
from qecdiag.errors import UsageError
from qecdiag.estimator import logical_estimator
from qecdiag.sampler import ImportanceConfig, mc_logical_infidelity


@dataclass
class BinReport:
    """Per-bin spread ``(1/|b|) max/min`` of a response at similar predictor."""

    predictor: str
    response: str
    edges: list
    counts: list
    deltas: list
    meta: dict = field(default_factory=dict)

    def rows(self):
        for (lo, hi), c, d in zip(self.edges, self.counts, self.deltas):
            yield lo, hi, c, d


def _column(records, name):
    out = []
    for r in records:
        v = r[name] if isinstance(r, dict) else getattr(r, name)
        out.append(float(v))
    return np.array(out)


def dispersion(records, predictor: str, response: str, bins=10) -> BinReport:
    """Bin on a log-spaced predictor axis and report ``Delta`` per bin.

    ``bins`` is a count (log-spaced over the observed range) or explicit
    edges. Records with a non-positive or missing value are dropped; empty
    bins are omitted.
    """
    x = _column(records, predictor)
    y = _column(records, response)
    keep = np.isfinite(x) & np.isfinite(y) & (x > 0) & (y > 0)
    x, y = x[keep], y[keep]
    if len(x) == 0:
        raise UsageError("no usable records for the dispersion report")
    if np.isscalar(bins):
        lo, hi = x.min(), x.max()
        if lo == hi:
            edges = np.array([lo, hi])
        else:
            edges = np.logspace(math.log10(lo), math.log10(hi), int(bins) + 1)
    else:
        edges = np.asarray(bins, dtype=float)
    which = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, len(edges) - 2)
    out_edges, counts, deltas = [], [], []
    for b in range(len(edges) - 1):
        inside = which == b
        if not inside.any():
            continue
        ys = y[inside]
        out_edges.append((float(edges[b]), float(edges[b + 1])))
        counts.append(int(inside.sum()))
        deltas.append(float(ys.max() / ys.min() / len(ys)))
    return BinReport(predictor, response, out_edges, counts, deltas,
                     {"bins": "log-spaced over observed range" if np.isscalar(bins) else "given",
                      "dropped": int((~keep).sum())})


# ---------------------------------------------------------------------------
# code selection
# ---------------------------------------------------------------------------

def bias_weights(eta: float) -> tuple[float, float, float]:
    return (float(eta), float(eta), 1.0)


def biased_noise(eta: float, r: float, theta: float = math.pi / 2) -> ch.PauliDist:
    """Single-qubit biased model with total error ``p_X + p_Y + p_Z = r``."""
    return ch.biased_model(ch.biased_px_for_infidelity(r, eta), eta, theta)


def code_select(codes, etas, levels: int, r: float, theta: float = math.pi / 2,
                mc_samples: int = 0, seed: int = 0, lambda0: float = 0.5,
                rel_tie: float = 1e-12) -> list[dict]:
    """Estimator (and optionally Monte Carlo) ranking of codes over a bias sweep.

    ``codes`` holds ``(label, code)`` pairs, which get the bias-adapted
    decoder ``(eta, eta, 1)`` at each point, or ``(label, code, decoder)``
    triples whose decoder is kept fixed.
    """
    if len(codes) < 2:
        raise UsageError("code selection needs at least two codes")
    rows = []
    for eta in etas:
        noise = biased_noise(eta, r, theta)
        row = {"eta": float(eta), "p_x": ch.biased_px_for_infidelity(r, eta)}
        pus, mcs = {}, {}
        for entry in codes:
            label, code = entry[0], entry[1]
            dec = entry[2] if len(entry) > 2 else build_decoder(code, bias_weights(eta))
            spec = ConcatSpec.uniform(code, dec, levels)
            per_block = ch.PauliDist(np.tile(noise.probs[0], (code.n, 1)), factored=True)
            pus[label] = logical_estimator(spec, per_block).p_u_tilde
            row[f"pu:{label}"] = pus[label]
            if mc_samples:
                cfg = ImportanceConfig(lambda0=lambda0, max_samples=mc_samples, seed=seed)
                res = mc_logical_infidelity(spec, FactoredInput.from_dist(per_block), cfg)
                mcs[label] = res.estimate
                row[f"mc:{label}"] = res.estimate
                row[f"mc_se:{label}"] = res.std_error
        row["winner"] = _winner(pus, rel_tie)
        if mc_samples:
            row["mc_winner"] = _winner(mcs, rel_tie)
        rows.append(row)
    return rows


def _winner(values: dict, rel_tie: float):
    ranked = sorted(values.items(), key=lambda kv: kv[1])
    best, second = ranked[0], ranked[1]
    if abs(second[1] - best[1]) <= rel_tie * max(abs(best[1]), abs(second[1]), 1e-300):
        return None
    return best[0]
