"""Trajectory diagnostics and theorem-level verification.

Everything here consumes a :class:`radgas.integrator.Trajectory` (or plain
fields) and produces norm series, time-weighted energies and *claims*:
fitted or measured quantities paired with a theory value, a tolerance, a
comparator and a verdict.

Seminorms are evaluated through the grid's shell reduction, so a snapshot
needs one forward transform however many orders are requested.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import FitError
from .fitting import DecayFit, NormSeries, default_window, fit_decay
from .grid import Grid, gradient
from .norms import l1_norm, l2_norm, linf_norm, seminorm, sobolev_norm
from .propagators import heat_kernel

# pass tolerances on exponents
LINEAR_TOLERANCE = 0.1
NONLINEAR_TOLERANCE = 0.15


def sobolev_order(n: int) -> int:
    """Smallest admissible ``s``: ``[n/2] + 2``, and at least 3 when ``n = 1``."""
    return max(n // 2 + 2, 3 if n == 1 else 0)


# -- claims -------------------------------------------------------------------


@dataclass
class Claim:
    """One checked statement.

    ``comparator`` is ``"within"`` (``|measured - theory| <= tolerance``),
    ``"at_most"`` (``measured <= theory + tolerance``), ``"at_least"``
    (``measured >= theory - tolerance``) or ``"below"``
    (``measured < tolerance``, used for ratios with no theory value).
    A ``None`` verdict is a skip and must carry a ``reason``.
    """

    name: str
    theory: float | None
    measured: float | None
    tolerance: float
    comparator: str
    verdict: bool | None = None
    reason: str = ""
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.verdict is None and self.measured is not None:
            self.verdict = self.evaluate(self.measured)

    def evaluate(self, value: float) -> bool:
        if not math.isfinite(value):
            return False
        if self.comparator == "within":
            return abs(value - self.theory) <= self.tolerance
        if self.comparator == "at_most":
            return value <= self.theory + self.tolerance
        if self.comparator == "at_least":
            return value >= self.theory - self.tolerance
        if self.comparator == "below":
            return value < self.tolerance
        raise ValueError(f"unknown comparator {self.comparator!r}")

    @property
    def status(self) -> str:
        if self.verdict is None:
            return "skip"
        return "pass" if self.verdict else "fail"

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "theory": self.theory,
            "measured": self.measured,
            "tolerance": self.tolerance,
            "comparator": self.comparator,
            "verdict": self.status,
        }
        if self.reason:
            out["reason"] = self.reason
        if self.detail:
            out["detail"] = self.detail
        return out


def exponent_claim(name: str, series: NormSeries, theory: float, tolerance: float,
                   window, comparator: str = "within", dual: bool = False) -> Claim:
    """Fit ``series`` on ``window`` and compare its exponent with ``theory``.

    With ``dual`` the log-corrected fit is attached to the detail (reported,
    not gated).
    """
    if series.is_zero():
        return Claim(name, theory, None, tolerance, comparator, reason="zero field")
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            fit = fit_decay(series, window)
            log_fit = fit_decay(series, window, log_correction=True) if dual else None
    except FitError as exc:
        return Claim(name, theory, None, tolerance, comparator, reason=str(exc))
    detail = {"fit": fit.to_dict()}
    if log_fit is not None:
        detail["log_fit"] = log_fit.to_dict()
    if caught:
        detail["warning"] = str(caught[0].message)
    return Claim(name, theory, fit.exponent, tolerance, comparator, detail=detail)


# -- snapshot norms -------------------------------------------------------------


def shell_seminorms(grid: Grid, power, orders, extra=None) -> dict:
    """Seminorms ``||d^k f||`` from per-shell power (see :meth:`Grid.shell_power`)."""
    sh = grid.shells
    p = power if extra is None else power * extra
    return {k: math.sqrt(max(float(np.sum(p * sh.kd2**k)), 0.0)) for k in orders}


def q_weight(grid: Grid) -> np.ndarray:
    """Per-shell weight turning ``|u_hat|^2`` into ``|q_hat|^2``."""
    sh = grid.shells
    return sh.kd2 / (1.0 + sh.k2) ** 2


def snapshot_norms(grid: Grid, u, s: int) -> dict:
    """All scalar norms of one snapshot ``u`` that the suites consume.

    Keys: ``L1``, ``L1_1``, ``L2``, ``Linf``, ``du_Linf``, ``d{k}`` for
    ``k = 0..s+1`` and ``q_d{k}`` for ``k = 0..s+1``.
    """
    u = grid.check_field(u)
    power = grid.shell_power(grid.rfft(u))
    orders = range(s + 2)
    du = shell_seminorms(grid, power, orders)
    dq = shell_seminorms(grid, power, orders, q_weight(grid))
    out = {
        "L1": l1_norm(grid, u),
        "L1_1": float(grid.cell_volume * np.sum((1.0 + np.sqrt(grid.radius2)) * np.abs(u))),
        "L2": du[0],
        "Linf": linf_norm(grid, u),
        "du_Linf": float(np.sqrt(np.max(np.sum(gradient(grid, u) ** 2, axis=0)))),
    }
    out.update({f"d{k}": v for k, v in du.items()})
    out.update({f"q_d{k}": v for k, v in dq.items()})
    return out


def trajectory_norms(traj, s: int) -> dict:
    """``{key: array over snapshot times}`` of :func:`snapshot_norms`."""
    rows = [snapshot_norms(traj.grid, u, s) for u in traj.fields]
    return {key: np.array([r[key] for r in rows]) for key in rows[0]}


def initial_functionals(grid: Grid, u0, s: int) -> dict:
    """Data sizes ``E0 = |u0|_{H^s}``, ``E1 = E0 + |u0|_{L1}``, ``E2 = E0 + |u0|_{L1_1}`` and ``M``."""
    e0 = sobolev_norm(grid, u0, s)
    l1 = l1_norm(grid, u0)
    l11 = float(grid.cell_volume * np.sum((1.0 + np.sqrt(grid.radius2)) * np.abs(u0)))
    return {
        "E0": e0,
        "E1": e0 + l1,
        "E2": e0 + l11,
        "M": float(grid.cell_volume * np.sum(u0)),
        "Linf": linf_norm(grid, u0),
    }


# -- time-weighted energies -------------------------------------------------------


@dataclass
class WeightedEnergyReport:
    """Running time-weighted energies along a trajectory.

    ``E``, ``M`` and ``N`` are running suprema and ``D`` a running integral,
    so all four are non-decreasing.  ``combined`` is the left side of the
    uniform energy estimate at each time.
    """

    times: np.ndarray
    E: np.ndarray
    D: np.ndarray
    M: np.ndarray
    N: np.ndarray
    combined: np.ndarray
    s: int
    n: int

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def at_final(self) -> dict:
        return {"T": self.T, "E": float(self.E[-1]), "D": float(self.D[-1]),
                "M": float(self.M[-1]), "N": float(self.N[-1])}

    def to_dict(self) -> dict:
        return {
            "s": self.s,
            "n": self.n,
            "t": self.times.tolist(),
            "E": self.E.tolist(),
            "D": self.D.tolist(),
            "M": self.M.tolist(),
            "N": self.N.tolist(),
            "combined": self.combined.tolist(),
        }


def _sobolev_sq(norms: dict, lo: int, hi: int):
    """``||d^lo u||^2_{H^{hi-lo}}`` from per-order seminorm arrays."""
    return sum(norms[f"d{m}"] ** 2 for m in range(lo, hi + 1)) if hi >= lo else 0.0


def compute_weighted_energies(traj, s: int, n: int | None = None, norms: dict | None = None):
    """Running ``E(T)``, ``D(T)``, ``M(T)``, ``N(T)`` and the combined energy.

    The ``j = s`` term of ``D`` involves an ``H^{-1}`` norm and is omitted;
    the integrals use the trapezoid rule on the snapshot times.
    """
    n = traj.grid.n if n is None else n
    t = np.asarray(traj.times, dtype=float)
    if norms is None:
        norms = trajectory_norms(traj, s)
    w = 1.0 + t
    e_terms = [np.maximum.accumulate(w**j * _sobolev_sq(norms, j, s)) for j in range(s + 1)]
    m_terms = [np.maximum.accumulate(w ** (n / 2 + j) * _sobolev_sq(norms, j, s))
               for j in range(s)]
    d_terms = [_cumulative(w**j * _sobolev_sq(norms, j + 1, s), t) for j in range(s)]
    q_hs1 = sum(norms[f"q_d{m}"] ** 2 for m in range(s + 2))
    integrand = _sobolev_sq(norms, 1, s) + q_hs1
    combined = _sobolev_sq(norms, 0, s) + q_hs1 + _cumulative(integrand, t)
    return WeightedEnergyReport(
        times=t,
        E=np.sqrt(sum(e_terms)),
        D=np.sqrt(sum(d_terms)) if d_terms else np.zeros_like(t),
        M=np.sqrt(sum(m_terms)) if m_terms else np.zeros_like(t),
        N=np.maximum.accumulate(w * norms["du_Linf"]),
        combined=np.asarray(combined, dtype=float),
        s=s,
        n=n,
    )


def _cumulative(y, t):
    y = np.broadcast_to(np.asarray(y, dtype=float), t.shape)
    if t.size < 2:
        return np.zeros_like(t)
    return cumulative_trapezoid(y, t, initial=0.0)


# -- interpolation inequality -------------------------------------------------------


def gn_inequality_check(grid: Grid, u, s0: int | None = None) -> float:
    """``|u|_inf / (|u|_2^{1-theta} |d^{s0} u|_2^theta)`` with ``theta = n / (2 s0)``."""
    u = grid.check_field(u)
    n = grid.n
    s0 = n // 2 + 1 if s0 is None else int(s0)
    if 2 * s0 <= n:
        raise ValueError(f"need s0 > n/2, got s0={s0} for n={n}")
    theta = n / (2.0 * s0)
    a = l2_norm(grid, u)
    if a == 0:
        raise ValueError("interpolation ratio undefined for the zero field")
    b = seminorm(grid, u, s0)
    return linf_norm(grid, u) / (a ** (1 - theta) * b**theta)


# -- nonlinear decay -------------------------------------------------------------------


def verify_nonlinear_decay(traj, s: int, t_valid: float, window=None,
                           tolerance: float = NONLINEAR_TOLERANCE, norms=None):
    """Claims for the optimal decay theorem, Remark 1 and the energy estimate.

    Returns ``(claims, norms, energies)``.
    """
    grid = traj.grid
    n = grid.n
    t = np.asarray(traj.times, dtype=float)
    norms = trajectory_norms(traj, s) if norms is None else norms
    window = window or default_window(t, t_valid)
    claims = []
    for k in range(min(s - 1, 2) + 1):
        series = NormSeries(f"d{k} L2", t, norms[f"d{k}"])
        claims.append(exponent_claim(f"|d^{k} u|_L2 exponent", series, -(n / 4 + k / 2),
                                     tolerance, window, dual=(n == 2)))
    for k in range(min(s - 2, 1) + 1):
        series = NormSeries(f"q d{k} L2", t, norms[f"q_d{k}"])
        claims.append(exponent_claim(f"|d^{k} q|_L2 exponent", series,
                                     -(n / 4 + (k + 1) / 2), tolerance, window))
    series = NormSeries("du Linf", t, norms["du_Linf"])
    claims.append(exponent_claim("|du|_inf exponent", series, -1.0, tolerance, window,
                                 comparator="at_most"))

    energies = compute_weighted_energies(traj, s, n, norms)
    claims.extend(energy_claims(energies, window))
    return claims, norms, energies


def energy_claims(energies: WeightedEnergyReport, window) -> list:
    t = energies.times
    claims = []
    if np.all(energies.N == 0):
        return [Claim(name, None, None, tol, "below", reason="zero field")
                for name, tol in (("N(T) max/min on late half-window", 2.0),
                                  ("combined energy spread", 10.0),
                                  ("E(T) final/penultimate", 1.05),
                                  ("M(T) final/penultimate", 1.05))]
    lo, hi = window
    mid = math.sqrt((1.0 + lo) * (1.0 + hi)) - 1.0
    late = (t >= mid) & (t <= hi)
    n_late = energies.N[late]
    claims.append(Claim("N(T) max/min on late half-window", None,
                        float(n_late.max() / n_late.min()) if n_late.size else None, 2.0, "below",
                        reason="" if n_late.size else "no samples in late window",
                        detail={"window": [mid, hi]}))
    early = int(np.argmin(np.abs(t - 0.1)))
    ref = energies.combined[early]
    after = energies.combined[early:]
    spread = float(max(after.max() / ref, ref / after.min())) if ref > 0 else None
    claims.append(Claim("combined energy spread", None, spread, 10.0, "below",
                        detail={"reference_time": float(t[early])}))
    for name, arr in (("E(T)", energies.E), ("M(T)", energies.M)):
        ratio = float(arr[-1] / arr[-2]) if arr.size >= 2 and arr[-2] > 0 else None
        claims.append(Claim(f"{name} final/penultimate", None, ratio, 1.05, "below",
                            reason="" if ratio is not None else "too few samples"))
    return claims


def conservation_claims(traj, l1_series, tol_l1: float = 1e-8, tol_mass: float = 1e-10) -> list:
    """L1 contraction and mass conservation along a trajectory."""
    t = np.asarray(traj.times, dtype=float)
    l1 = np.asarray(l1_series, dtype=float)
    l1_0 = l1[0]
    claims = []
    if l1_0 == 0:
        claims.append(Claim("L1 growth rate / |u0|_L1", None, None, tol_l1, "below",
                            reason="zero field"))
    else:
        rates = np.diff(l1) / np.diff(t)
        worst = float(max(rates.max(), 0.0)) / l1_0 if rates.size else 0.0
        claims.append(Claim("L1 growth rate / |u0|_L1", None, worst, tol_l1, "below"))
    m = traj.diagnostics.get("mass") if traj.diagnostics else None
    if m is None or len(m) == 0:
        m = np.array([traj.grid.cell_volume * np.sum(u) for u in traj.fields])
    drift = float(np.max(np.abs(np.asarray(m) - m[0])))
    claims.append(Claim("mass drift", None, drift, tol_mass, "below",
                        detail={"mass": float(m[0])}))
    return claims


# -- asymptotic profile ---------------------------------------------------------------------


@dataclass
class ProfileReport:
    times: np.ndarray
    series: dict
    claims: list
    mass: float

    @property
    def passed(self) -> bool:
        return all(c.verdict is not False for c in self.claims)

    def to_dict(self) -> dict:
        return {
            "mass": self.mass,
            "t": self.times.tolist(),
            "series": {k: v.tolist() for k, v in self.series.items()},
            "claims": [c.to_dict() for c in self.claims],
        }


def profile_series(grid: Grid, times, fields, u0, ks=(0, 1)) -> tuple:
    """Seminorms of ``u - u*``, ``q - q*`` and the three-way decomposition.

    ``u_bar = G(t) u0``, ``u_tilde = G0(t) u0`` and ``u* = M G0(x, t+1)``
    sampled in closed form at the box center.  Returns ``(series, M)``.
    """
    u0 = grid.check_field(u0)
    M = float(grid.cell_volume * np.sum(u0))
    k2 = grid.half_lattice.k2
    U0 = grid.rfft(u0)
    inv = 1.0 / (1.0 + k2)
    names = ["u-u*", "q-q*", "u-ubar", "ubar-utilde", "utilde-u*"]
    series = {f"{name} d{k}": np.empty(len(times)) for name in names for k in ks}
    qw = grid.shells.kd2
    for i, (t, u) in enumerate(zip(times, fields)):
        U = grid.rfft(grid.check_field(u))
        Ubar = np.exp(-k2 * t * inv) * U0
        Util = np.exp(-k2 * t) * U0
        Ustar = grid.rfft(M * heat_kernel(grid, t + 1.0)) if M != 0 else np.zeros_like(U)
        parts = {
            "u-u*": U - Ustar,
            "u-ubar": U - Ubar,
            "ubar-utilde": Ubar - Util,
            "utilde-u*": Util - Ustar,
        }
        for name, D in parts.items():
            vals = shell_seminorms(grid, grid.shell_power(D), ks)
            for k in ks:
                series[f"{name} d{k}"][i] = vals[k]
        # q - q* = -i xi_d (U / (1 + |xi|^2) - U*)
        vals = shell_seminorms(grid, grid.shell_power(U * inv - Ustar), ks, qw)
        for k in ks:
            series[f"q-q* d{k}"][i] = vals[k]
    return series, M


def verify_asymptotic_profile(traj, u0, s: int, t_valid: float, window=None,
                              tolerance: float = NONLINEAR_TOLERANCE,
                              separation: float = 0.3, u_exponent: float | None = None):
    """Claims of the asymptotic-profile theorem for ``n >= 2``.

    Gated on the plain fits: ``|u - u*|`` and ``|q - q*|`` exponents at most
    their theory values plus ``tolerance``; the ``k = 0`` profile error at
    least ``separation`` steeper than ``|u|`` itself; and each piece of the
    decomposition at least ``separation`` steeper than ``-n/4``.  At
    ``n = 2`` the log-corrected fit is reported next to each plain fit.
    """
    grid = traj.grid
    n = grid.n
    t = np.asarray(traj.times, dtype=float)
    window = window or default_window(t, t_valid)
    if n < 2:
        claim = Claim("asymptotic profile", None, None, tolerance, "at_most",
                      reason="theorem hypothesis n >= 2")
        return ProfileReport(t, {}, [claim], float(grid.cell_volume * np.sum(u0)))
    ks = tuple(range(min(s - 1, 1) + 1))
    series, M = profile_series(grid, t, traj.fields, u0, ks)
    dual = n == 2
    claims = []
    for k in ks:
        claims.append(exponent_claim(
            f"|d^{k}(u-u*)|_L2 exponent", NormSeries(f"u-u* d{k}", t, series[f"u-u* d{k}"]),
            -(n / 4 + (k + 1) / 2), tolerance, window, "at_most", dual))
    claims.append(exponent_claim(
        "|q-q*|_L2 exponent", NormSeries("q-q* d0", t, series["q-q* d0"]),
        -(n / 4 + 1.0), tolerance, window, "at_most", dual))
    if u_exponent is not None and claims[0].measured is not None:
        gap = u_exponent - claims[0].measured
        claims.append(Claim("|u-u*| steeper than |u| by", separation, gap, 0.0, "at_least",
                            detail={"u_exponent": u_exponent}))
    for name in ("u-ubar", "ubar-utilde", "utilde-u*"):
        c = exponent_claim(f"|{name}|_L2 exponent", NormSeries(f"{name} d0", t, series[f"{name} d0"]),
                           -n / 4 - separation, 0.0, window, "at_most", dual)
        claims.append(c)
    return ProfileReport(t, series, claims, M)
