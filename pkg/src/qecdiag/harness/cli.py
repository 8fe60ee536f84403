"""Command line entry point.

Exit codes: 0 success, 2 invalid input, 3 request beyond supported size.
"""

from __future__ import annotations

import csv
import functools
import json
import math
import sys
from pathlib import Path

import click
import numpy as np

from qecdiag import channels as ch
from qecdiag.codes import ConcatSpec, build_decoder
from qecdiag.engine import FactoredInput
from qecdiag.errors import CapacityError, QECDiagError, UsageError, ValidationError
from qecdiag.estimator import NRDataset, extrapolate_nr, logical_estimator
from qecdiag.harness.analysis import code_select, dispersion
from qecdiag.harness.ensemble import (EnsembleSpec, generate_member, member_to_json,
                                      resolve_code, run_ensemble)
from qecdiag.sampler import ImportanceConfig, mc_logical_infidelity

EXIT_VALIDATION = 2
EXIT_CAPACITY = 3


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except CapacityError as exc:
            click.echo(f"capacity error: {exc}", err=True)
            sys.exit(EXIT_CAPACITY)
        except (ValidationError, UsageError) as exc:
            click.echo(f"validation error: {exc}", err=True)
            sys.exit(EXIT_VALIDATION)
        except QECDiagError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_VALIDATION)
    return wrapper


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=not text.endswith("\n"))


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc


def parse_noise(text: str, n: int):
    """Noise description -> (FactoredInput, twirled PauliDist or None).

    Forms: ``depolarizing:P``, ``pauli:PI,PX,PY,PZ``, ``biased:PX:ETA[:THETA]``,
    ``random_cptp:T:SEED``, ``coherent:NX,NY,NZ:DELTA``, ``nr:PATH``.
    """
    kind, _, rest = text.partition(":")
    parts = rest.split(":") if rest else []
    try:
        if kind == "depolarizing":
            dist = ch.depolarizing(n, float(parts[0]))
            return FactoredInput.from_dist(dist), dist
        if kind == "pauli":
            vec = ch.PauliDist.single(_floats(parts[0])).validate()
            dist = ch.PauliDist(np.tile(vec.probs[0], (n, 1)), factored=True)
            return FactoredInput.from_dist(dist), dist
        if kind == "biased":
            theta = float(parts[2]) if len(parts) > 2 else math.pi / 2
            one = ch.biased_model(float(parts[0]), float(parts[1]), theta)
            dist = ch.PauliDist(np.tile(one.probs[0], (n, 1)), factored=True)
            return FactoredInput.from_dist(dist), dist
        if kind == "random_cptp":
            chi = ch.random_cptp(float(parts[0]), int(parts[1]))
            return FactoredInput.iid(chi, n), None
        if kind == "coherent":
            chi = ch.coherent_channel(_floats(parts[0]), float(parts[1]))
            return FactoredInput.iid(chi, n), None
        if kind == "nr":
            dist = extrapolate_nr(NRDataset.load(rest))
            if dist.n != n:
                raise ValidationError(f"NR data on {dist.n} qubits, code has {n}")
            return FactoredInput.from_dist(dist), dist
    except (IndexError, ValueError) as exc:
        if isinstance(exc, QECDiagError):
            raise
        raise UsageError(f"cannot parse noise {text!r}: {exc}") from exc
    raise UsageError(f"unknown noise kind {kind!r}")


def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc


def _concat_from(cfg: dict, levels) -> ConcatSpec:
    code = resolve_code(cfg.get("code", "steane"))
    dec = build_decoder(code, tuple(cfg.get("weights", (1.0, 1.0, 1.0))))
    return ConcatSpec.uniform(code, dec, int(levels or cfg.get("levels", 1)))


@click.group()
def main():
    """Logical error rates of concatenated codes from physical noise models."""


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path())
@click.option("--seed", type=int, help="override the master seed")
@_handle_errors
def gen(spec_path, out, seed):
    """Generate ensemble channels as JSON lines."""
    data = _load_json(spec_path)
    if seed is not None:
        data["master_seed"] = seed
    spec = EnsembleSpec.load(data)
    lines = [json.dumps(member_to_json(generate_member(spec, i))) for i in range(spec.count)]
    _emit("\n".join(lines) + "\n", out)


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True),
              help="JSON with code, levels, weights and optionally noise")
@click.option("--noise", help="noise description, overrides the spec file")
@click.option("--levels", type=int)
@click.option("--out", type=click.Path())
@_handle_errors
def estimate(spec_path, noise, levels, out):
    """Logical estimator report for a Pauli (or twirled) noise model."""
    cfg = _load_json(spec_path)
    concat = _concat_from(cfg, levels)
    inp, dist = parse_noise(noise or cfg.get("noise", "depolarizing:0.001"),
                            concat.code_per_level[0].n)
    if dist is None:
        dist = ch.PauliDist(np.real(np.einsum("jpp->jp", inp.chis)), factored=True)
    report = logical_estimator(concat, dist)
    _emit(report.to_json() + "\n", out)


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True))
@click.option("--noise")
@click.option("--levels", type=int)
@click.option("--samples", type=int, default=10_000, show_default=True)
@click.option("--mode", type=click.Choice(["direct", "importance"]), default="importance",
              show_default=True)
@click.option("--lambda0", type=float, default=0.5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--out", type=click.Path())
@click.option("--trace", type=click.Path(), help="write the convergence trace CSV here")
@_handle_errors
def simulate(spec_path, noise, levels, samples, mode, lambda0, seed, threads, out, trace):
    """Monte Carlo average logical infidelity."""
    cfg = _load_json(spec_path)
    concat = _concat_from(cfg, levels)
    inp, _ = parse_noise(noise or cfg.get("noise", "depolarizing:0.001"),
                         concat.code_per_level[0].n)
    icfg = ImportanceConfig(lambda0=lambda0, max_samples=samples, seed=seed, mode=mode,
                            threads=threads)
    res = mc_logical_infidelity(concat, inp, icfg)
    if trace:
        Path(trace).write_text(res.trace_csv())
    _emit(res.to_json() + "\n", out)


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", type=int)
@click.option("--samples", type=int)
@click.option("--mode", type=click.Choice(["direct", "importance"]))
@click.option("--lambda0", type=float)
@click.option("--levels", type=int)
@click.option("--threads", type=int, default=1, show_default=True)
@_handle_errors
def ensemble(spec_path, out, seed, samples, mode, lambda0, levels, threads):
    """Full pipeline over an ensemble; resumable CSV output."""
    data = _load_json(spec_path)
    for key, val in (("master_seed", seed), ("samples", samples), ("mode", mode),
                     ("lambda0", lambda0), ("levels", levels)):
        if val is not None:
            data[key] = val
    records = run_ensemble(EnsembleSpec.load(data), out, threads=threads)
    bad = sum(1 for r in records if r.error)
    click.echo(f"{len(records)} records in {out} ({bad} with errors)")


@main.command()
@click.argument("records_csv", type=click.Path(exists=True))
@click.option("--predictor", default="pu_rc", show_default=True)
@click.option("--response", default="mc_rc", show_default=True)
@click.option("--bins", "nbins", type=int, default=10, show_default=True)
@click.option("--out", type=click.Path())
@_handle_errors
def bins(records_csv, predictor, response, nbins, out):
    """Per-bin dispersion of a response against a predictor column."""
    with open(records_csv, newline="") as fh:
        rows = [r for r in csv.DictReader(fh) if not r.get("error")]
    if rows and (predictor not in rows[0] or response not in rows[0]):
        raise ValidationError(f"columns {predictor!r}/{response!r} not in {records_csv}")
    rep = dispersion(rows, predictor, response, nbins)
    lines = ["bin_lo,bin_hi,count,delta"]
    lines += [f"{lo!r},{hi!r},{c},{d!r}" for lo, hi, c, d in rep.rows()]
    _emit("\n".join(lines) + "\n", out)


@main.command("code-select")
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True),
              help="JSON with codes, etas, levels, r and optional mc_samples, theta")
@click.option("--samples", type=int, help="Monte Carlo samples per point (0 = estimator only)")
@click.option("--levels", type=int)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--lambda0", type=float, default=0.5, show_default=True)
@click.option("--out", type=click.Path())
@_handle_errors
def code_select_cmd(spec_path, samples, levels, seed, lambda0, out):
    """Rank codes over a bias sweep with bias-adapted decoders."""
    cfg = _load_json(spec_path)
    names = cfg.get("codes", ["steane", "cyclic_search"])
    codes = [(name, resolve_code(name)) for name in names]
    rows = code_select(codes, cfg.get("etas", [10, 30, 100]),
                       int(levels or cfg.get("levels", 2)), float(cfg.get("r", 1e-2)),
                       float(cfg.get("theta", math.pi / 2)),
                       mc_samples=int(samples if samples is not None else cfg.get("mc_samples", 0)),
                       seed=seed, lambda0=lambda0)
    cols = list(rows[0])
    lines = [",".join(cols)]
    for row in rows:
        lines.append(",".join("" if row[c] is None else
                              (repr(row[c]) if isinstance(row[c], float) else str(row[c]))
                              for c in cols))
    _emit("\n".join(lines) + "\n", out)


@main.command("nr-import")
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True),
              help="NR dataset CSV")
@click.option("--code", "code_name", default="steane", show_default=True)
@click.option("--levels", type=int, default=2, show_default=True)
@click.option("--out", type=click.Path())
@_handle_errors
def nr_import(spec_path, code_name, levels, out):
    """Extrapolate partial NR data and report the logical estimator."""
    data = NRDataset.load(spec_path)
    dist = extrapolate_nr(data)
    code = resolve_code(code_name)
    concat = ConcatSpec.uniform(code, build_decoder(code), levels)
    report = logical_estimator(concat, dist)
    report.meta.update({"nr_k": data.k, "nr_selection": "largest first (assumed)",
                        "extrapolation": dist.meta})
    _emit(report.to_json() + "\n", out)


if __name__ == "__main__":
    main()
