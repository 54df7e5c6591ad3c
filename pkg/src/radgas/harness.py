"""Experiment orchestration and persistence.

A run writes one directory::

    summary.json     versioned summary, deterministic for a given config
    log.txt          human-readable log (includes wall-clock timing)
    norms/*.csv      one ``t,value`` series per measured norm
    reports/*.json   lemma reports, energies and profile details
    fields/*.bin     optional snapshots (``[run] save_fields``)
    figures/*.png    decay figures (``[run] figures``)
"""

from __future__ import annotations

import csv
import json
import logging
import math
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import initial_data
from .analysis import (LINEAR_TOLERANCE, Claim, conservation_claims, exponent_claim,
                       initial_functionals, verify_asymptotic_profile, verify_nonlinear_decay)
from .config import ExperimentConfig
from .errors import RadgasError, RegimeError
from .fieldio import dump_field
from .fitting import NormSeries, default_window
from .grid import Grid
from .integrator import integrate
from .model import mass
from .norms import l1_norm
from .propagators import (box_validity_horizon, heat_kernel, linear_decay_series,
                          verify_G_minus_G0, verify_heat_moment, verify_propagator_decay)

SCHEMA = "radgas.summary/1"

# growth allowed in the bounded-ratio trend of the propagator estimate
TREND_TOLERANCE = 0.05
HEAT_MOMENT_TOLERANCE = 0.05

log = logging.getLogger("radgas")


def validity_horizon(grid: Grid, u0) -> tuple:
    """``(t_valid, offset, variance)`` for data ``u0`` on ``grid``.

    The smaller of the Gaussian tail rule and ``L >= 12 sqrt(1 + T) + 2 r0``
    with ``r0 = offset + 2 sqrt(variance)`` the initial support radius.
    """
    offset, var = initial_data.moments(grid, u0)
    tail = box_validity_horizon(grid, var, offset)
    room = (grid.L - 2.0 * (offset + 2.0 * math.sqrt(var))) / 12.0
    spread = room**2 - 1.0 if room > 0 else 0.0
    return max(0.0, min(tail, spread)), offset, var


@dataclass
class RunRecord:
    config_hash: str
    summary: dict
    claims: dict
    series_paths: dict = field(default_factory=dict)
    output_dir: Path | None = None
    wall_clock: float = 0.0
    steps: int = 0

    @property
    def passed(self) -> bool:
        return all(c.verdict is not False for cl in self.claims.values() for c in cl)

    def all_claims(self):
        for suite, cl in self.claims.items():
            for c in cl:
                yield suite, c

    def claim(self, suite: str, name: str) -> Claim:
        for c in self.claims.get(suite, []):
            if c.name == name:
                return c
        raise KeyError(f"{suite}: no claim {name!r}")


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, Path):
        return obj.as_posix()
    return obj


def write_json(path, obj) -> None:
    text = json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False)
    Path(path).write_text(text + "\n")


class _Outputs:
    """Per-run output directory; a no-op when ``root`` is None."""

    def __init__(self, root, figures: bool):
        self.root = Path(root) if root is not None else None
        self.figures = figures and root is not None
        self.series = {}
        if self.root is not None:
            for sub in ("norms", "reports", "fields", "figures"):
                (self.root / sub).mkdir(parents=True, exist_ok=True)

    def norm(self, name: str, t, values) -> None:
        key = re.sub(r"[^A-Za-z0-9*+.-]+", "_", name).strip("_")
        self.series[name] = f"norms/{key}.csv"
        if self.root is not None:
            NormSeries(name, np.asarray(t), np.asarray(values)).to_csv(self.root / self.series[name])

    def report(self, name: str, obj) -> None:
        if self.root is not None:
            write_json(self.root / "reports" / f"{name}.json", obj)

    def path(self, sub: str, name: str):
        return None if self.root is None else self.root / sub / name


def _lemma_claims(report, label: str, theory_of, tolerance, comparator) -> list:
    claims = []
    for e in report.entries:
        name = f"{label} k={e.k}"
        if e.fit is None:
            claims.append(Claim(name, theory_of(e.k), None, tolerance, comparator,
                                reason=e.note or "no fit"))
        else:
            claims.append(Claim(name, theory_of(e.k), e.fit.exponent, tolerance, comparator,
                                detail={"fit": e.fit.to_dict()}))
    return claims


def linear_suite(grid: Grid, u0, times, t_valid: float, out: _Outputs) -> list:
    """Propagator lemmas and linear decay rates; no time stepping."""
    n = grid.n
    window = default_window(times, t_valid)
    claims = []
    if l1_norm(grid, u0) == 0:
        return [Claim("linear suite", None, None, LINEAR_TOLERANCE, "within", reason="zero field")]

    rep = verify_propagator_decay(grid, u0, times, ks=(0, 1, 2, 3), t_valid=t_valid,
                                  growth_tolerance=TREND_TOLERANCE)
    out.report("propagator_decay", rep.to_dict())
    for e in rep.entries:
        claims.append(Claim(f"G(t) ratio trend k={e.k}", 0.0, e.trend, TREND_TOLERANCE,
                            "at_most", reason="" if e.trend is not None else (e.note or "no trend"),
                            detail={"note": e.note}))
        out.norm(f"Gu0 d{e.k} ratio", e.times, e.ratios)

    u_norms, q_norms = linear_decay_series(grid, u0, times, ks=(0, 1, 2))
    for k in (0, 1, 2):
        out.norm(f"ubar d{k}", times, u_norms[k])
        out.norm(f"qbar d{k}", times, q_norms[k])
        claims.append(exponent_claim(f"|d^{k} ubar|_L2 exponent",
                                     NormSeries(f"ubar d{k}", times, u_norms[k]),
                                     -(n / 4 + k / 2), LINEAR_TOLERANCE, window))
        claims.append(exponent_claim(f"|d^{k} qbar|_L2 exponent",
                                     NormSeries(f"qbar d{k}", times, q_norms[k]),
                                     -(n / 4 + (k + 1) / 2), LINEAR_TOLERANCE, window))

    rep = verify_G_minus_G0(grid, u0, times, ks=(0, 1), t_valid=t_valid, window=window,
                            slack=LINEAR_TOLERANCE)
    out.report("G_minus_G0", rep.to_dict())
    for e in rep.entries:
        out.norm(f"(G-G0)u0 d{e.k}", e.times, e.norms)
    claims += _lemma_claims(rep, "|(G-G0)u0| exponent", lambda k: -(n / 4 + k / 2 + 1),
                            LINEAR_TOLERANCE, "at_most")

    # zero-mass data: u0 itself when it has no mass, else u0 - M phi0
    l1 = l1_norm(grid, u0)
    M = mass(grid, u0)
    if abs(M) <= 1e-10 * l1:
        phi, tol, comparator, two_sided = u0, HEAT_MOMENT_TOLERANCE, "within", True
    else:
        phi0 = heat_kernel(grid, 1.0)
        phi = u0 - M * phi0 / mass(grid, phi0)
        tol, comparator, two_sided = LINEAR_TOLERANCE, "at_most", False
    if l1_norm(grid, phi) <= 1e-12 * l1:
        claims.append(Claim("|G0 phi| exponent (zero mass)", None, None, tol, comparator,
                            reason="zero field"))
    else:
        phi = phi - mass(grid, phi) / grid.volume  # remove roundoff mass
        rep = verify_heat_moment(grid, phi, times, ks=(0, 1), t_valid=t_valid, window=window,
                                 tolerance=tol, two_sided=two_sided)
        out.report("heat_moment", rep.to_dict())
        for e in rep.entries:
            out.norm(f"G0 phi d{e.k}", e.times, e.norms)
        claims += _lemma_claims(rep, "|d^k G0 phi| exponent (zero mass)",
                                lambda k: -(n / 4 + (k + 1) / 2), tol, comparator)
    if out.figures:
        from .plotting import decay_figure
        decay_figure(out.path("figures", "linear_decay.png"),
                     [{"label": f"|d^{k} ubar|", "t": times, "values": u_norms[k],
                       "fit": _fit_of(claims, f"|d^{k} ubar|_L2 exponent")} for k in (0, 1, 2)],
                     title=f"linear decay, n={n}", window=window)
    return claims


def _fit_of(claims, name):
    for c in claims:
        if c.name == name:
            return c.detail.get("fit")
    return None


def run_experiment(cfg: ExperimentConfig, output_dir=None, write: bool = True) -> RunRecord:
    """Run every enabled suite of ``cfg`` and persist the artifacts.

    With ``write=False`` nothing touches the disk.  Raises
    :class:`RegimeError` (carrying the data amplitude) if the trajectory
    leaves the small-data regime.
    """
    started = time.perf_counter()
    root = None
    if write:
        root = Path(output_dir) if output_dir is not None else cfg.output_dir
        root.mkdir(parents=True, exist_ok=True)
    out = _Outputs(root, cfg.data["run"]["figures"])
    handler = None
    if root is not None:
        handler = logging.FileHandler(root / "log.txt", mode="w")
        handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
        log.addHandler(handler)
        log.setLevel(logging.INFO)
    try:
        record = _run(cfg, out)
    finally:
        if handler is not None:
            log.info("wall clock %.2f s", time.perf_counter() - started)
            log.removeHandler(handler)
            handler.close()
    record.wall_clock = time.perf_counter() - started
    record.output_dir = root
    return record


def _run(cfg: ExperimentConfig, out: _Outputs) -> RunRecord:
    grid = cfg.grid()
    s = cfg.sobolev_s
    u0 = initial_data.build(grid, cfg.data["initial"]["name"], cfg.initial_params())
    t_valid, offset, var = validity_horizon(grid, u0)
    integ = cfg.data["integrator"]
    t_end = t_valid if integ["t_end"] == "auto" else float(integ["t_end"])
    log.info("config %s", cfg.digest())
    log.info("grid n=%d N=%d L=%g dx=%g", grid.n, grid.N, grid.L, grid.dx)
    log.info("box-validity horizon %.4g (offset %.3g, variance %.3g); t_end %.4g",
             t_valid, offset, var, t_end)
    if not t_end > integ["t_first"]:
        raise RadgasError(f"t_end {t_end:g} leaves no room for output times; enlarge the box")
    if t_end > t_valid:
        log.warning("t_end exceeds the box-validity horizon; fits stop at %.4g", t_valid)
    times = cfg.output_times(t_end)
    fit_horizon = min(t_valid, t_end)
    window = default_window(times, fit_horizon)
    functionals = initial_functionals(grid, u0, s)
    log.info("E0 %.6g  E1 %.6g  E2 %.6g  M %.6g", functionals["E0"], functionals["E1"],
             functionals["E2"], functionals["M"])

    claims = {}
    skipped = {}
    integration = None
    if "linear" in cfg.suites:
        claims["linear"] = linear_suite(grid, u0, times, fit_horizon, out)

    need_traj = any(x in cfg.suites for x in ("nonlinear-decay", "profile"))
    if "profile" in cfg.suites and grid.n < 2:
        claims["profile"] = [Claim("asymptotic profile", None, None, 0.15, "at_most",
                                   reason="theorem hypothesis n >= 2")]
        need_traj = "nonlinear-decay" in cfg.suites
    traj = None
    if need_traj:
        icfg = cfg.integrator_config(t_end)
        try:
            traj = integrate(grid, u0, icfg, cfg.flux())
        except RegimeError as exc:
            amp = functionals["Linf"]
            raise RegimeError(f"{exc} [initial amplitude {amp:.3e}]", time=exc.time,
                              amplitude=amp) from exc
        integration = dict(traj.provenance)
        log.info("integrated %d steps (%s, dt=%g)", integration["steps"], icfg.scheme, icfg.dt)
        if out.root is not None and cfg.data["run"]["save_fields"]:
            dump_field(out.path("fields", "u_initial.bin"), grid, traj.fields[0], {"t": 0.0})
            dump_field(out.path("fields", "u_final.bin"), grid, traj.fields[-1],
                       {"t": float(traj.times[-1])})

    norms = None
    u_exponent = None
    if traj is not None and "nonlinear-decay" in cfg.suites:
        cl, norms, energies = verify_nonlinear_decay(traj, s, fit_horizon, window)
        cl += conservation_claims(traj, norms["L1"])
        claims["nonlinear-decay"] = cl
        u_exponent = cl[0].measured
        for key, values in norms.items():
            out.norm(f"u {key}", traj.times, values)
        td, keep = np.unique(np.asarray(traj.diagnostics["t"]), return_index=True)
        out.norm("mass per step", td, np.asarray(traj.diagnostics["mass"])[keep])
        out.report("energies", energies.to_dict())
        if out.figures:
            from .plotting import decay_figure, energy_figure
            curves = [{"label": f"|d^{k} u|", "t": traj.times, "values": norms[f"d{k}"],
                       "fit": _fit_of(cl, f"|d^{k} u|_L2 exponent")} for k in range(3)
                      if f"d{k}" in norms]
            decay_figure(out.path("figures", "nonlinear_decay.png"), curves,
                         title=f"nonlinear decay, n={grid.n}", window=window)
            energy_figure(out.path("figures", "energies.png"), energies,
                          title="time-weighted energies")
    if traj is not None and "profile" in cfg.suites and grid.n >= 2:
        if u_exponent is None:
            from .analysis import snapshot_norms
            l2 = np.array([snapshot_norms(grid, u, 0)["L2"] for u in traj.fields])
            c = exponent_claim("u", NormSeries("L2", np.asarray(traj.times), l2), 0.0, 1.0, window)
            u_exponent = c.measured
        prof = verify_asymptotic_profile(traj, traj.fields[0], s, fit_horizon, window,
                                         u_exponent=u_exponent)
        claims["profile"] = prof.claims
        for key, values in prof.series.items():
            out.norm(key, traj.times, values)
        out.report("profile", prof.to_dict())
        if out.figures:
            from .plotting import decay_figure
            curves = [{"label": key, "t": traj.times, "values": prof.series[f"{key} d0"],
                       "fit": _fit_of(prof.claims, name)}
                      for key, name in (("u-u*", "|d^0(u-u*)|_L2 exponent"),
                                        ("u-ubar", "|u-ubar|_L2 exponent"),
                                        ("ubar-utilde", "|ubar-utilde|_L2 exponent"),
                                        ("utilde-u*", "|utilde-u*|_L2 exponent"))]
            decay_figure(out.path("figures", "profile.png"), curves,
                         title=f"asymptotic profile, n={grid.n}", window=window)

    for suite in cfg.suites:
        if suite not in claims:
            skipped[suite] = "not run"
    counts = {"pass": 0, "fail": 0, "skip": 0}
    for cl in claims.values():
        for c in cl:
            counts[c.status] += 1
            if c.verdict is None and not c.reason:
                raise RadgasError(f"claim {c.name!r} skipped without a reason")
    summary = {
        "schema": SCHEMA,
        "config": {k: v for k, v in cfg.canonical().items()},
        "config_hash": cfg.digest(),
        "grid": {"n": grid.n, "N": grid.N, "L": grid.L, "dx": grid.dx},
        "s": s,
        "initial": dict(functionals, offset=offset, variance=var),
        "t_valid": t_valid,
        "t_end": t_end,
        "window": list(window),
        "integration": integration,
        "suites": {
            suite: {
                "claims": [c.to_dict() for c in cl],
                "verdict": "pass" if all(c.verdict is not False for c in cl) else "fail",
            }
            for suite, cl in claims.items()
        },
        "series": dict(sorted(out.series.items())),
        "counts": counts,
        "verdict": "pass" if counts["fail"] == 0 else "fail",
    }
    summary["config"]["run"].pop("output_dir", None)
    if out.root is not None:
        write_json(out.root / "summary.json", summary)
    for suite, cl in claims.items():
        for c in cl:
            log.info("%s | %s | %s | measured %s", suite, c.name, c.status, c.measured)
    return RunRecord(cfg.digest(), _clean(summary), claims, dict(out.series),
                     steps=integration["steps"] if integration else 0)


# -- sweeps --------------------------------------------------------------------------


@dataclass
class SweepEntry:
    value: object
    record: RunRecord | None
    error: str = ""

    @property
    def passed(self) -> bool:
        return self.record is not None and self.record.passed


def _value_label(value) -> str:
    return str(value).replace("/", "_").replace(" ", "")


def _sweep_one(base: ExperimentConfig, axis: str, value, sub, write: bool) -> SweepEntry:
    try:
        cfg = base.with_overrides({axis: value})
        return SweepEntry(value, run_experiment(cfg, sub, write=write))
    except (RadgasError, ValueError) as exc:
        return SweepEntry(value, None, f"{type(exc).__name__}: {exc}")


def run_sweep(base: ExperimentConfig, axis: str, values, output_dir=None,
              write: bool = True, workers: int = 1) -> list:
    """Independent runs of ``base`` with ``axis`` set to each of ``values``.

    Failures (invalid configs, regime errors) are recorded per value and do
    not stop the sweep.  Aggregates ``sweep.csv`` and ``sweep.json`` with
    every claim's measured value per swept value.  ``workers > 1`` runs the
    values in separate processes; each writes only its own subdirectory.
    """
    values = list(values)
    if not values:
        return []
    root = Path(output_dir) if output_dir is not None else base.output_dir
    subs = [root / f"{axis}={_value_label(v)}" if write else None for v in values]
    if workers > 1 and len(values) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=min(workers, len(values))) as pool:
            futures = [pool.submit(_sweep_one, base, axis, v, sub, write)
                       for v, sub in zip(values, subs)]
            entries = [f.result() for f in futures]
    else:
        entries = [_sweep_one(base, axis, v, sub, write) for v, sub in zip(values, subs)]
    if write:
        _write_sweep(root, axis, entries, base.data["run"]["figures"])
    return entries


def _write_sweep(root: Path, axis: str, entries, figures: bool) -> None:
    root.mkdir(parents=True, exist_ok=True)
    names = []
    for e in entries:
        if e.record is not None:
            for suite, c in e.record.all_claims():
                key = f"{suite}: {c.name}"
                if key not in names:
                    names.append(key)
    rows = []
    for e in entries:
        row = {"value": e.value, "error": e.error}
        if e.record is not None:
            for suite, c in e.record.all_claims():
                row[f"{suite}: {c.name}"] = (c.measured, c.status)
        rows.append(row)
    with open(root / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([axis, "status"] + names)
        for row in rows:
            status = "error" if row["error"] else "ok"
            cells = []
            for name in names:
                m = row.get(name)
                cells.append("" if m is None or m[0] is None else repr(float(m[0])))
            writer.writerow([row["value"], status] + cells)
    write_json(root / "sweep.json", {
        "schema": "radgas.sweep/1",
        "axis": axis,
        "entries": [
            {
                "value": e.value,
                "error": e.error or None,
                "verdict": None if e.record is None else ("pass" if e.passed else "fail"),
                "config_hash": None if e.record is None else e.record.config_hash,
                "claims": {} if e.record is None else {
                    f"{suite}: {c.name}": {"measured": c.measured, "verdict": c.status}
                    for suite, c in e.record.all_claims()
                },
            }
            for e in entries
        ],
    })
    if figures:
        from .plotting import sweep_figure
        exps = {}
        for name in names:
            if "exponent" not in name:
                continue
            ys = []
            for row in rows:
                m = row.get(name)
                ys.append(None if m is None else m[0])
            exps[name] = ys
        try:
            xs = [float(e.value) for e in entries]
        except (TypeError, ValueError):
            xs = None  # categorical axis (e.g. scheme): table only
        if exps and xs is not None:
            (root / "figures").mkdir(exist_ok=True)
            sweep_figure(root / "figures" / "sweep.png", xs, exps, axis)
