"""Per-separation pipeline and d-sweeps: hopping, splitting, corrections, gaps.

One task per separation ``d``: the single-well states, the double-well
operator and every requested level share that task, so nothing is solved
twice.  Tasks are independent and can run in worker processes.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .eigensolve import (
    DEFAULT_RELATIVE_TOL,
    EigenPair,
    SpectralGap,
    default_tolerance,
    detect_degeneracy,
    lowest_k,
)
from .errors import DoubleWellError
from .grid_ops import Grid, GridFunction, SparseOperator, assemble_hamiltonian, build_grid
from .hopping import HoppingResult, compute_hopping
from .potential import DoubleWellConfig, PotentialSpec, assemble_double_well, sample_single_well
from .splitting import (
    CorrectionsReport,
    SplittingResult,
    TwoLevelModel,
    corrections_report,
    double_well_levels,
    pair_on_grid,
    two_level_matrix,
)
from .eigensolve import min_singular_on_complement
from .hopping import rho_from_tails
from .verify import (
    NOISE_FLOOR,
    CheckResult,
    check_agmon,
    energy_estimate_result,
    check_energy_sweep,
    check_lower_bound,
    check_parity,
    check_ratio_limit,
    fit_decay_rate,
    partition_commutator_norms,
    partition_functions,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SweepSettings:
    spec: PotentialSpec
    nu: int
    h: float
    levels: tuple[int, ...]
    d_values: tuple[float, ...]
    eig_tol: float = DEFAULT_RELATIVE_TOL
    kappa_min: float | None = None
    energy_estimate: bool = True


@dataclass
class SingleWell:
    grid: Grid
    potential: GridFunction
    hamiltonian: SparseOperator
    pairs: list[EigenPair]
    gaps: list[SpectralGap]
    tol: float

    @property
    def bound(self) -> list[EigenPair]:
        return [p for p in self.pairs if p.bound]


@dataclass
class SweepRecord:
    j: int
    d: float
    d_requested: float
    e_j: float = math.nan
    gamma: float = math.nan
    hopping: HoppingResult | None = None
    splitting: SplittingResult | None = None
    two_level: TwoLevelModel | None = None
    corrections: CorrectionsReport | None = None
    sigma_min: float = math.nan
    flags: list[str] = field(default_factory=list)

    @property
    def kappa(self) -> float:
        return math.sqrt(-self.e_j) if self.e_j < 0 else math.nan

    @property
    def rho(self) -> float:
        return self.hopping.rho_volume if self.hopping else math.nan

    @property
    def ratio(self) -> float:
        return self.splitting.ratio if self.splitting else math.nan

    CSV_FIELDS = (
        "j", "d", "d_requested", "e_j", "gamma",
        "rho_volume", "rho_surface", "rho_symmetric", "plane_c",
        "A_plus", "A_minus", "kappa", "fit_residual",
        "E_minus", "E_plus", "Delta", "rho_used", "ratio", "predicted_split",
        "r1", "r2", "r3", "pairing_score", "sigma_min", "flags",
    )

    def row(self) -> dict:
        out = {k: None for k in self.CSV_FIELDS}
        out.update(j=self.j, d=self.d, d_requested=self.d_requested, e_j=self.e_j, gamma=self.gamma)
        if self.hopping:
            out.update(self.hopping.row())
            out["rho_used"] = self.hopping.rho_volume
        if self.splitting:
            s = self.splitting
            out.update(E_minus=s.E_minus, E_plus=s.E_plus, Delta=s.Delta, ratio=s.ratio,
                       pairing_score=s.pairing_score)
        if self.two_level:
            out["predicted_split"] = self.two_level.predicted_split
        if self.corrections:
            c = self.corrections
            out.update(r1=c.r1, r2=c.r2, r3=c.r3)
        out["sigma_min"] = self.sigma_min
        out["d"] = self.d
        out["flags"] = ";".join(self.flags)
        return out


def solve_single_well(
    spec: PotentialSpec, grid: Grid, k: int, rel_tol: float = DEFAULT_RELATIVE_TOL
) -> SingleWell:
    """Lowest ``k`` states of the single well on ``grid`` (parity about x1 = 0)."""
    pot = sample_single_well(spec, grid)
    ham = assemble_hamiltonian(grid, pot)
    tol = default_tolerance(ham, rel_tol)
    plane = 0.0 if spec.reflection_symmetric else None
    pairs = lowest_k(ham, min(k, ham.dimension), tol=tol, parity_plane=plane)
    return SingleWell(grid, pot, ham, pairs, detect_degeneracy(pairs), tol)


def estimate_kappa_min(spec: PotentialSpec, nu: int, h: float, levels, rel_tol=DEFAULT_RELATIVE_TOL) -> float:
    """Smallest decay rate among the requested bound levels.

    Starts from a box sized for the well depth and widens it until the
    slowest requested level fits the sizing rule.
    """
    kappa = math.sqrt(spec.lambda_sq)
    top = max(levels) if levels else 1
    for _ in range(8):
        sw = solve_single_well(spec, build_grid(nu, 0.0, kappa, h, spec.a), top + 1, rel_tol)
        bound = sw.bound[:top]
        if not bound:
            raise DoubleWellError("the well has no bound state at this depth")
        k_new = min(p.kappa for p in bound)
        if k_new >= 0.98 * kappa:
            return k_new
        kappa = k_new
    return kappa


def run_separation(settings: SweepSettings, d: float, kappa_min: float) -> list[SweepRecord]:
    """Everything for one separation, one record per requested level."""
    spec = settings.spec
    grid = build_grid(settings.nu, d, kappa_min, settings.h, spec.a)
    dd = grid.d
    records = [SweepRecord(j=j, d=dd, d_requested=d) for j in settings.levels]
    if grid.d_snapped:
        for r in records:
            r.flags.append(f"d_snapped:{d}->{dd}")
    if not settings.levels:
        return records

    sw = solve_single_well(spec, grid.single_well_grid(), max(settings.levels) + 1, settings.eig_tol)
    try:
        pot_dw = assemble_double_well(DoubleWellConfig(spec, dd), grid)
    except DoubleWellError as exc:
        for r in records:
            r.flags.append(type(exc).__name__)
        return records
    H_dw = assemble_hamiltonian(grid, pot_dw)
    dw_tol = default_tolerance(H_dw, settings.eig_tol)
    bound = sw.bound

    for rec in records:
        j = rec.j
        if j > len(bound):
            rec.flags.append("level_not_bound")
            continue
        phi = bound[j - 1]
        gap = sw.gaps[j - 1]
        rec.e_j, rec.gamma = phi.energy, gap.gamma
        if gap.degenerate:
            rec.flags.append("degenerate_level")
            continue
        if not abs(phi.energy) > gap.gamma:
            rec.flags.append("gap_not_below_binding")
        if phi.kappa <= 1:
            rec.flags.append("kappa_le_1")
        try:
            rec.hopping = compute_hopping(j, phi, sw.potential, dd, spec.a, spec.reflection_symmetric)
        except DoubleWellError as exc:
            rec.flags.append(f"hopping:{type(exc).__name__}")
            continue
        rho = rec.hopping.rho_volume
        try:
            rec.splitting = double_well_levels(H_dw, phi, dd, gap.gamma, j, rho, tol=dw_tol)
        except DoubleWellError as exc:
            rec.flags.append(f"splitting:{type(exc).__name__}")
        try:
            rec.two_level = two_level_matrix(phi, H_dw, dd)
        except DoubleWellError as exc:
            rec.flags.append(f"two_level:{type(exc).__name__}")
        try:
            rec.corrections = corrections_report(phi, sw.potential, dd, rho, H_dw)
        except (DoubleWellError, ZeroDivisionError, ValueError) as exc:
            rec.flags.append(f"corrections:{type(exc).__name__}")
        if settings.energy_estimate:
            try:
                basis = list(pair_on_grid(phi, dd, grid))
                rec.sigma_min = min_singular_on_complement(H_dw.shifted(phi.energy), basis)
            except DoubleWellError as exc:
                rec.flags.append(f"energy_estimate:{type(exc).__name__}")
    return records


def _task(args):
    settings, d, kappa_min = args
    return run_separation(settings, d, kappa_min)


def run_sweep(settings: SweepSettings, jobs: int = 1, kappa_min: float | None = None) -> list[SweepRecord]:
    """Records for every (level, d), ordered by level then separation."""
    if not settings.levels:
        return []
    kappa_min = kappa_min or settings.kappa_min or estimate_kappa_min(
        settings.spec, settings.nu, settings.h, settings.levels, settings.eig_tol
    )
    tasks = [(settings, d, kappa_min) for d in settings.d_values]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_task, tasks))
    else:
        chunks = [_task(t) for t in tasks]
    records = [r for chunk in chunks for r in chunk]
    records.sort(key=lambda r: (r.j, r.d))
    return records


CHECK_NAMES = (
    "hopping_law",
    "hopping_agreement",
    "tail_formula",
    "ratio_limit",
    "lower_bound",
    "agmon_decay",
    "energy_estimate",
    "energy_estimate_sweep",
    "corrections_vanish",
    "parity",
    "partition",
)


@dataclass(frozen=True)
class CheckSettings:
    ratio_tol: float = 0.05
    rate_tol: float = 0.01
    epsilon: float | None = None
    agreement_tol: float = 1e-3
    tail_tol: float = 0.02
    amplitude_tol: float = 0.02
    agmon_tol: float | None = None
    correction_factor: float = 2.0
    r1_slack: float = 1e-3
    enabled: tuple[str, ...] = CHECK_NAMES


def _level_records(records, j):
    return sorted((r for r in records if r.j == j and r.hopping is not None), key=lambda r: r.d)


def _skipped(name: str, why: str) -> CheckResult:
    return CheckResult(name=name, paper_ref="not evaluated", passed=False, details={"skipped": why})


def check_hopping_law(
    recs, kappa: float, rate_tol: float, amp_tol: float, prefactor_power: float = 0.0
) -> CheckResult:
    """Fitted decay rate of ``|rho(d)| d^p`` near kappa and ``|rho| d^p e^{kappa d}`` flat."""
    p = prefactor_power
    fit = fit_decay_rate([(r.d, abs(r.rho) * r.d**p) for r in recs])
    scaled = [abs(r.rho) * r.d**p * math.exp(kappa * r.d) for r in recs]
    spread = (max(scaled) - min(scaled)) / max(scaled)
    rate_err = abs(fit.rate - kappa) / kappa
    return CheckResult(
        name="hopping_law",
        paper_ref="rho(d) ~ C sqrt(-e) exp(-sqrt(-e) d)",
        passed=rate_err <= rate_tol and spread <= amp_tol,
        measured={"rate": fit.rate, "amplitude_spread": spread},
        expected={"rate": kappa},
        tolerance={"rate_rel": rate_tol, "amplitude_rel": amp_tol},
    )


def check_hopping_agreement(recs, tol: float) -> CheckResult:
    devs = [r.hopping.max_relative_deviation() for r in recs]
    return CheckResult(
        name="hopping_agreement",
        paper_ref="volume, surface-flux and reflection formulas for rho agree",
        passed=bool(devs) and max(devs) <= tol,
        measured={"d": [r.d for r in recs], "max_rel_dev": devs},
        expected=f"<= {tol}",
        tolerance=tol,
    )


def check_tail_formula(recs, tol: float) -> CheckResult:
    errs, ds = [], []
    for r in recs:
        if r.hopping.tail is None:
            continue
        exact = rho_from_tails(r.hopping.tail, r.d)
        errs.append(abs(exact - r.rho) / abs(r.rho))
        ds.append(r.d)
    return CheckResult(
        name="tail_formula",
        paper_ref="1D rho = -2 A+ A- kappa exp(-kappa d)",
        passed=bool(errs) and max(errs) <= tol,
        measured={"d": ds, "rel_err": errs},
        expected=f"<= {tol}",
        tolerance=tol,
    )


def check_corrections(recs, kappa: float, a: float, factor: float, slack: float) -> CheckResult:
    """r1, r2, r3 shrink by ``factor`` across the sweep; r1 under ``C e^{-2 kappa (d-a)}/|rho|``."""
    recs = [r for r in recs if r.corrections is not None]
    if len(recs) < 2:
        return _skipped("corrections_vanish", "fewer than two separations with corrections")
    first, last = recs[0], recs[-1]
    drops = {
        k: getattr(first.corrections, k) / max(getattr(last.corrections, k), 1e-300)
        for k in ("r1", "r2", "r3")
    }
    c = abs(first.corrections.diagonal_shift) * math.exp(2 * kappa * (first.d - a))
    bound_ok = all(
        r.corrections.r1 <= (1 + slack) * c * math.exp(-2 * kappa * (r.d - a)) / abs(r.rho)
        for r in recs
    )
    return CheckResult(
        name="corrections_vanish",
        paper_ref="correction terms of the two-level reduction are o(rho)",
        passed=all(v >= factor for v in drops.values()) and bound_ok,
        measured={"drop": drops, "r1_bound_holds": bound_ok,
                  "r": [[r.corrections.r1, r.corrections.r2, r.corrections.r3] for r in recs]},
        expected=f"each ratio drops by >= {factor}",
        tolerance={"factor": factor, "r1_slack": slack},
    )


def check_partition(d: float, grid: Grid, spec: PotentialSpec) -> CheckResult:
    """Doubling d halves sup|grad Theta_d|; Sigma_d kills both wells node-wise."""
    g1, _ = partition_commutator_norms(d, grid)
    wide = build_grid(grid.nu, 2 * d, 1.0, grid.h, spec.a)
    g2, _ = partition_commutator_norms(wide.d, wide)
    _, sig = partition_functions(d, grid)
    v = sample_single_well(spec, grid, 0.0).values + sample_single_well(spec, grid, d).values
    killed = bool(np.all(sig.values * v == 0.0))
    halving = g1 / g2
    return CheckResult(
        name="partition",
        paper_ref="partition of unity with derivatives shrinking like 1/d",
        passed=abs(halving - 2.0) <= 0.2 and killed,
        measured={"grad_ratio": halving, "sigma_v_zero": killed},
        expected={"grad_ratio": 2.0},
        tolerance=0.1,
    )


def evaluate_checks(
    settings: SweepSettings,
    records: list[SweepRecord],
    checks: CheckSettings = CheckSettings(),
    single: SingleWell | None = None,
) -> list[CheckResult]:
    """Every enabled check over a finished sweep, in a fixed order."""
    spec = settings.spec
    on = set(checks.enabled)
    out: list[CheckResult] = []
    if single is None and on & {"agmon_decay", "parity"}:
        kappa_min = estimate_kappa_min(spec, settings.nu, settings.h, settings.levels or (1,))
        g = build_grid(settings.nu, max(settings.d_values, default=0.0), kappa_min, settings.h, spec.a)
        single = solve_single_well(spec, g.single_well_grid(), max(settings.levels or (1,)) + 1,
                                   settings.eig_tol)

    for j in settings.levels:
        recs = _level_records(records, j)
        tag = {"j": j}
        enough = len(recs) >= 4
        kappa = recs[0].kappa if recs else math.nan
        power = (settings.nu - 1) / 2
        if "hopping_law" in on:
            res = (check_hopping_law(recs, kappa, checks.rate_tol, checks.amplitude_tol, power)
                   if enough else _skipped("hopping_law", "fewer than 4 separations"))
            out.append(_tagged(res, tag))
        if "hopping_agreement" in on and recs:
            out.append(_tagged(check_hopping_agreement(recs, checks.agreement_tol), tag))
        if "tail_formula" in on and settings.nu == 1 and recs:
            out.append(_tagged(check_tail_formula(recs, checks.tail_tol), tag))
        split = [r for r in recs if r.splitting is not None]
        if "ratio_limit" in on:
            res = (check_ratio_limit(split, checks.ratio_tol, NOISE_FLOOR * _noise_scale(settings))
                   if len(split) >= 3 else _skipped("ratio_limit", "fewer than 3 splittings"))
            out.append(_tagged(res, tag))
        if "lower_bound" in on and spec.reflection_symmetric:
            res = (check_lower_bound([(r.d, r.rho) for r in recs], recs[0].e_j, checks.epsilon,
                                     prefactor_power=power)
                   if enough else _skipped("lower_bound", "fewer than 4 separations"))
            out.append(_tagged(res, tag))
        est = [r for r in recs if math.isfinite(r.sigma_min)]
        if j == 1 and "energy_estimate" in on and est:
            last = est[-1]
            res = energy_estimate_result(last.sigma_min, last.e_j, last.d, last.gamma, spec.a)
            out.append(_tagged(res, tag))
        # On a Dirichlet box the continuum is replaced by box modes above 0,
        # so a gap set by the continuum edge bounds nothing; the check is skipped.
        continuum_gap = bool(est) and est[0].gamma >= abs(est[0].e_j)
        if continuum_gap and "energy_estimate_sweep" in on:
            log.warning("energy_estimate_sweep skipped for j=%d: gap set by the continuum edge", j)
        if j == 1 and "energy_estimate_sweep" in on and len(est) >= 2 and not continuum_gap:
            out.append(_tagged(check_energy_sweep([(r.d, r.sigma_min) for r in est], est[0].gamma), tag))
        if j == 1 and "corrections_vanish" in on:
            out.append(_tagged(check_corrections(recs, kappa, spec.a, checks.correction_factor,
                                                 checks.r1_slack), tag))

    if "agmon_decay" in on and single is not None and single.bound:
        try:
            res, _ = check_agmon(single.bound[0], spec.a, rel_tol=checks.agmon_tol)
        except DoubleWellError as exc:
            res = _skipped("agmon_decay", str(exc))
        out.append(_tagged(res, {"j": 1}))
    if "parity" in on and spec.reflection_symmetric and single is not None:
        labels, defects, ok = [], [], True
        for p in single.bound:
            label, defect, passed = check_parity(p, 0.0, single.tol)
            labels.append(label.value)
            defects.append(defect)
            ok &= passed
        out.append(CheckResult(
            name="parity",
            paper_ref="symmetric wells have even or odd bound states",
            passed=ok and bool(labels),
            measured={"labels": labels, "defects": defects},
            expected="defect <= 10 eig_tol",
            tolerance=10 * single.tol,
        ))
    if "partition" in on and settings.d_values:
        d = max(settings.d_values)
        g = build_grid(settings.nu, d, 1.0, settings.h, spec.a)
        out.append(check_partition(g.d, g, spec))
    return out


def _noise_scale(settings: SweepSettings) -> float:
    return settings.eig_tol / DEFAULT_RELATIVE_TOL


def _tagged(res: CheckResult, tag: dict) -> CheckResult:
    res.details = {**tag, **res.details}
    res.name = f"{res.name}[j={tag['j']}]"
    return res
