"""Pass/fail checks over completed sweeps and single-well states."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .eigensolve import (
    DEFAULT_RELATIVE_TOL,
    EigenPair,
    Parity,
    min_singular_on_complement,
    parity_defect,
)
from .errors import SignChange, TailTooShort, TooFewSamples
from .grid_ops import Grid, GridFunction, SparseOperator
from .splitting import pair_on_grid

NOISE_FLOOR = 10 * DEFAULT_RELATIVE_TOL


@dataclass
class DecayFit:
    slope: float
    intercept: float
    r_squared: float
    window: tuple[float, float]

    @property
    def rate(self) -> float:
        return -self.slope


@dataclass
class CheckResult:
    name: str
    paper_ref: str
    passed: bool
    measured: object = None
    expected: object = None
    tolerance: object = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "paper_ref": self.paper_ref,
            "pass": bool(self.passed),
            "measured": _jsonable(self.measured),
            "expected": _jsonable(self.expected),
            "tolerance": _jsonable(self.tolerance),
            **({"details": _jsonable(self.details)} if self.details else {}),
        }


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def fit_decay_rate(samples: Sequence[tuple[float, float]]) -> DecayFit:
    """Least-squares line through ``(x, log|value|)``."""
    if len(samples) < 4:
        raise TooFewSamples(f"need at least 4 samples, got {len(samples)}")
    x = np.array([s[0] for s in samples], dtype=float)
    y = np.array([s[1] for s in samples], dtype=float)
    if np.any(y == 0) or len(set(np.sign(y))) > 1:
        raise SignChange("values must be nonzero with one sign")
    ly = np.log(np.abs(y))
    slope, intercept = np.polyfit(x, ly, 1)
    resid = ly - (slope * x + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot <= 1e-300 else max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    return DecayFit(float(slope), float(intercept), r2, (float(x.min()), float(x.max())))


def _nonincreasing(values: Sequence[float], floor: float) -> bool:
    return all(b <= a + floor for a, b in zip(values, values[1:]))


def check_ratio_limit(sweep: Sequence, tol: float = 0.05, floor: float = NOISE_FLOOR) -> CheckResult:
    """``|ratio - 1| < tol`` at the largest ``d`` and non-increasing over the last three."""
    sweep = sorted(sweep, key=lambda r: r.d)
    dev = [abs(r.ratio - 1.0) for r in sweep]
    last = dev[-3:]
    ok = bool(dev and dev[-1] < tol and _nonincreasing(last, floor))
    return CheckResult(
        name="ratio_limit",
        paper_ref="splitting over twice the hopping tends to 1 as d grows",
        passed=ok,
        measured={"d": [r.d for r in sweep], "abs_ratio_minus_1": dev},
        expected="< tol at max d, non-increasing over the last three d",
        tolerance={"tol": tol, "noise_floor": floor},
    )


def check_lower_bound(
    sweep: Sequence[tuple[float, float]],
    e_j: float,
    epsilon: float | None = None,
    fit_err: float = 0.01,
    prefactor_power: float = 0.0,
) -> CheckResult:
    """Decay rate of ``|rho_j(d)|`` lies in ``[kappa (1 - fit_err), sqrt(kappa^2 + epsilon)]``.

    ``sweep`` holds ``(d, rho)`` samples; ``epsilon`` defaults to ``0.05 |e_j|``.
    A power-law prefactor ``d^(-prefactor_power)`` is divided out before the
    fit (``(nu - 1)/2`` for Bessel-type tails in nu dimensions).
    """
    epsilon = 0.05 * abs(e_j) if epsilon is None else epsilon
    kappa = math.sqrt(-e_j)
    fit = fit_decay_rate([(d, abs(r) * d**prefactor_power) for d, r in sweep])
    lo, hi = kappa * (1 - fit_err), math.sqrt(kappa**2 + epsilon)
    return CheckResult(
        name="lower_bound",
        paper_ref="|rho| >= C sqrt(-e) exp(-d sqrt(-e + eps)) for reflection-symmetric wells",
        passed=lo <= fit.rate <= hi,
        measured=fit.rate,
        expected=[lo, hi],
        tolerance={"epsilon": epsilon, "fit_err": fit_err},
    )


def _ray_samples(phi: EigenPair, lo: float, hi: float) -> list[tuple[float, float]]:
    f = phi.vector
    g = f.grid
    samples = []
    if g.nu == 1:
        x = g.axis(0)
        for sign in (1, -1):
            m = (sign * x >= lo) & (sign * x <= hi)
            samples += list(zip(np.abs(x[m]), f.values[m]))
        return samples
    # rays along +-x1 and +-x2 through the well centre
    i0 = g.node_index(0.0, 0)
    j0 = g.node_index(0.0, 1)
    for axis, line in ((0, f.values[:, j0]), (1, f.values[i0, :])):
        x = g.axis(axis)
        for sign in (1, -1):
            m = (sign * x >= lo) & (sign * x <= hi)
            samples += list(zip(np.abs(x[m]), line[m]))
    return samples


def check_agmon(
    phi: EigenPair,
    a: float,
    kappa_ref: float | None = None,
    rel_tol: float | None = None,
    window: tuple[float, float] = (2.0, 8.0),
) -> tuple[CheckResult, DecayFit]:
    """Pointwise decay rate of ``phi`` along the axis rays.

    In two dimensions the factor ``(|x| - a)^(-1/2)`` is divided out before
    the log-linear fit.
    """
    if not phi.energy < 0:
        raise ValueError("decay check needs a bound state")
    g = phi.vector.grid
    kappa = math.sqrt(-phi.energy)
    kappa_ref = kappa if kappa_ref is None else kappa_ref
    rel_tol = (0.02 if g.nu == 1 else 0.05) if rel_tol is None else rel_tol
    lo, hi = a + window[0] / kappa, a + window[1] / kappa
    reach = min(min(abs(w) for w in g.walls(k)) for k in range(g.nu))
    if hi >= reach:
        raise TailTooShort(f"decay window up to |x| = {hi:.3g} exceeds the box ({reach:.3g})")
    samples = _ray_samples(phi, lo, hi)
    if g.nu > 1:
        p = (g.nu - 1) / 2
        samples = [(r, v * (r - a) ** p) for r, v in samples]
    fit = fit_decay_rate(samples)
    err = abs(fit.rate - kappa_ref) / kappa_ref
    res = CheckResult(
        name="agmon_decay",
        paper_ref="pointwise exponential decay at rate sqrt(-E) outside the support",
        passed=err <= rel_tol,
        measured=fit.rate,
        expected=kappa_ref,
        tolerance=rel_tol,
        details={"nu": g.nu, "window": [lo, hi], "r_squared": fit.r_squared},
    )
    return res, fit


def energy_margin(d: float, kappa: float, a: float) -> float:
    return math.exp(-kappa * (d - 2 * a) / 2) + 0.05


def energy_estimate_result(sigma_min: float, e_j: float, d: float, gamma_j: float, a: float) -> CheckResult:
    """Pass iff ``sigma_min >= gamma_j (1 - margin(d))``."""
    margin = energy_margin(d, math.sqrt(-e_j), a)
    need = gamma_j * (1 - margin)
    return CheckResult(
        name="energy_estimate",
        paper_ref="||(H - e) psi|| >= (gamma - xi_d) ||psi|| off the two-level subspace",
        passed=sigma_min >= need,
        measured=sigma_min,
        expected=f">= {need:.6g}",
        tolerance={"gamma": gamma_j, "margin": margin},
        details={"d": d},
    )


def check_energy_estimate(
    H_dw: SparseOperator,
    phi_j: EigenPair,
    d: float,
    gamma_j: float,
    a: float,
) -> tuple[CheckResult, float]:
    """Resolvent lower bound of ``H - e_j`` off ``span{phi_j, R^d phi_j}``."""
    basis = list(pair_on_grid(phi_j, d, H_dw.grid))
    sigma_min = min_singular_on_complement(H_dw.shifted(phi_j.energy), basis)
    return energy_estimate_result(sigma_min, phi_j.energy, d, gamma_j, a), sigma_min


def check_energy_sweep(
    samples: Sequence[tuple[float, float]], gamma_j: float, upper_slack: float = 1e-6
) -> CheckResult:
    """``sigma_min(d)`` increases with ``d`` and never exceeds ``gamma_j``."""
    samples = sorted(samples)
    sig = [s for _, s in samples]
    increasing = all(b > a for a, b in zip(sig, sig[1:]))
    capped = all(s <= gamma_j + upper_slack for s in sig)
    return CheckResult(
        name="energy_estimate_sweep",
        paper_ref="gap on the complement approaches the single-well gap",
        passed=increasing and capped,
        measured={"d": [d for d, _ in samples], "sigma_min": sig},
        expected=f"increasing, <= {gamma_j:.10g}",
        tolerance=upper_slack,
    )


def smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity transition from 0 (t <= 0) to 1 (t >= 1)."""
    t = np.asarray(t, dtype=float)
    out = np.where(t >= 1, 1.0, 0.0)
    m = (t > 0) & (t < 1)
    a = np.exp(-1.0 / t[m])
    b = np.exp(-1.0 / (1.0 - t[m]))
    out[m] = a / (a + b)
    return out


def ramp(r: np.ndarray, r_in: float, r_out: float) -> np.ndarray:
    """1 on ``[0, r_in]``, 0 on ``[r_out, inf)``, smooth between."""
    r = np.asarray(r, dtype=float)
    out = 1.0 - smooth_step((r - r_in) / (r_out - r_in))
    return np.where(r <= r_in, 1.0, np.where(r >= r_out, 0.0, out))


def partition_functions(d: float, grid: Grid) -> tuple[GridFunction, GridFunction]:
    """``Theta_d`` (ramps from 1 at radius d/3 to 0 at d/2 around each well)
    and ``Sigma_d = sqrt(1 - Theta_d^2)``."""
    theta = ramp(grid.radius(0.0), d / 3, d / 2) + ramp(grid.radius(d), d / 3, d / 2)
    sigma = np.sqrt(np.clip(1.0 - theta**2, 0.0, None))
    return GridFunction(grid, theta), GridFunction(grid, sigma)


def partition_commutator_norms(d: float, grid: Grid) -> tuple[float, float]:
    """Max norms of the discrete gradient and Laplacian of ``Theta_d``."""
    if not d > 0:
        raise ValueError("d must be positive")
    theta, _ = partition_functions(d, grid)
    t = theta.values
    h = grid.h
    grads = np.gradient(t, h) if grid.nu > 1 else [np.gradient(t, h)]
    grad_norm = np.sqrt(sum(gk**2 for gk in grads))
    inner = tuple(slice(1, -1) for _ in range(grid.nu))
    lap = np.zeros_like(t[inner])
    for k in range(grid.nu):
        plus = [slice(1, -1)] * grid.nu
        minus = [slice(1, -1)] * grid.nu
        plus[k] = slice(2, None)
        minus[k] = slice(None, -2)
        lap += (t[tuple(plus)] - 2 * t[inner] + t[tuple(minus)]) / h**2
    return float(np.max(grad_norm)), float(np.max(np.abs(lap)))


def check_parity(phi: EigenPair, center: float, tol: float) -> tuple[Parity, float, bool]:
    """Parity label about ``x1 = center``, the defect, and whether defect <= 10 tol."""
    label, defect = parity_defect(phi.vector, center)
    passed = defect <= 10 * tol
    return (label if passed else Parity.NONE), defect, passed
