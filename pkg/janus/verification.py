"""Verification Module
Fast oracles of the partitioned scheme, run by the ``verify`` command."""

import logging
import time
import traceback
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from janus.assembly import SubdomainOperators
from janus.constants import FF_FLM, FORMULATIONS, FR_FLM, FR_RLM, RR_FLM, RR_RLM, SEED
from janus.fom import restrict_to_subdomains, run_single_domain
from janus.ivr import CoupledSystem, Formulation, build_coupled_system, interface_residual, run, step
from janus.metrics import BrokenNorm, error_series
from janus.numerics import Matrix
from janus.pod import CompositeBasis, PodDecomposition
from janus.problem import ProblemConfig, manufactured_problem, solid_body_rotation_config
from janus.storage import write_csv
from janus.tools import config_hash

logger = logging.getLogger("verification")

CONSISTENCY_TOL = 1e-10
IDENTITY_TOL = 1e-12
MONOLITHIC_TOL = 1e-9
CONDITION_SPREAD = 10.0
FF_CONDITION_MAX = 100.0
ILL_POSED_FACTOR = 1e3
RESIDUAL_TOL = 1e-10
PROJECTED_RESIDUAL_TOL = 1e-9
MONOLITHIC_STEPS = 50
DESK_MESHES = (16, 32)
PAPER_MESHES = (16, 32, 64)
D_SWEEP = (5, 10, 20, 40)
TRACE_COMPATIBLE = (FF_FLM, RR_RLM, FR_FLM, FR_RLM)

CHECK_HEADER = ["check", "passed", "value", "threshold", "detail"]


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one oracle"""

    name: str
    passed: bool
    value: float
    threshold: float
    seconds: float = 0.0
    detail: str = ""


Bases = Tuple[Optional[CompositeBasis], Optional[CompositeBasis]]


def _bases_for(form: Formulation, bases: Bases) -> Bases:
    return (bases[0] if form.reduced[0] else None, bases[1] if form.reduced[1] else None)


def _system(tag: str, ops: Tuple[SubdomainOperators, SubdomainOperators], bases: Bases) -> CoupledSystem:
    form = Formulation.from_tag(tag)
    return build_coupled_system(form, ops, _bases_for(form, bases))


def _random_basis(rng: np.random.Generator, rows: int, cols: int) -> Matrix:
    q, _ = np.linalg.qr(rng.standard_normal((rows, cols)))
    return q[:, :cols]


def check_single_domain_consistency(nx: int = 16, kappa: float = 1e-3, final_time: float = 1.0) -> CheckResult:
    """FF_fLM against the single-domain solution with equal diffusion on both sides"""
    cfg = solid_body_rotation_config(kappa, kappa, nx, final_time=final_time)
    mesh = cfg.build_mesh()
    subs, ops = cfg.coupled_operators(mesh)
    benchmark = run_single_domain(cfg, sample_stride=1)
    result = run(_system(FF_FLM, ops, (None, None)), cfg.time_grid(mesh))
    errors = error_series(result, benchmark, subs, BrokenNorm.from_operators(ops))
    worst = float(np.max(errors.values))
    return CheckResult(
        "single_domain_consistency",
        worst <= CONSISTENCY_TOL,
        worst,
        CONSISTENCY_TOL,
        detail=f"nx={nx} kappa={kappa:g} Tf={final_time:g} states={errors.values.size}",
    )


def check_identity_projection(nx: int = 8, final_time: float = 0.5) -> CheckResult:
    """ROM formulations with full rank identity bases reproduce FF_fLM"""
    cfg = solid_body_rotation_config(1e-3, 1e-2, nx, final_time=final_time)
    mesh = cfg.build_mesh()
    subs, ops = cfg.coupled_operators(mesh)
    grid = cfg.time_grid(mesh)
    bases = (
        CompositeBasis.identity(subs[0].n_gamma, subs[0].n_interior),
        CompositeBasis.identity(subs[1].n_gamma, subs[1].n_interior),
    )
    reference = run(_system(FF_FLM, ops, (None, None)), grid)
    worst, details = 0.0, []
    for tag in (RR_RLM, RR_FLM, FR_FLM, FR_RLM):
        result = run(_system(tag, ops, bases), grid)
        scale = max(float(np.max(np.abs(s))) for s in reference.states)
        deviation = max(float(np.max(np.abs(a - b))) for a, b in zip(result.states, reference.states)) / scale
        worst = max(worst, deviation)
        details.append(f"{tag}={deviation:.2e}")
    return CheckResult("identity_projection", worst <= IDENTITY_TOL, worst, IDENTITY_TOL, detail=" ".join(details))


def check_monolithic(seed: int = SEED, nx: int = 4, steps: int = MONOLITHIC_STEPS) -> CheckResult:
    """Every partitioned step equals the simultaneous solve of the saddle-point system"""
    rng = np.random.default_rng(seed)
    problem = manufactured_problem("advection_diffusion", nx=nx)
    cfg = problem.config
    mesh = cfg.build_mesh()
    subs, ops = cfg.coupled_operators(mesh)
    dt = cfg.time_step(mesh)

    bases = []
    for sub in subs:
        d_gamma = int(rng.integers(max(sub.n_gamma - 1, 1), sub.n_gamma + 1))
        d_interior = int(rng.integers(1, sub.n_interior + 1))
        interface = _random_basis(rng, sub.n_gamma, d_gamma)
        interior = _random_basis(rng, sub.n_interior, d_interior)
        bases.append(
            CompositeBasis(
                interface=interface,
                interior=interior,
                sigma_interface=np.ones(d_gamma),
                sigma_interior=np.ones(d_interior),
                d_max_interface=sub.n_gamma,
            )
        )

    worst, details = 0.0, []
    for tag in FORMULATIONS:
        system = _system(tag, ops, (bases[0], bases[1]))
        state = system.initial_state()
        deviation = 0.0
        for _ in range(steps):
            outcome = step(system, state, dt)
            u1_dot, u2_dot, multiplier = system.monolithic_velocity(outcome.rhs)
            partitioned = np.concatenate([*outcome.velocities, outcome.multiplier])
            monolithic = np.concatenate([u1_dot, u2_dot, multiplier])
            scale = max(float(np.linalg.norm(monolithic)), np.finfo(float).tiny)
            deviation = max(deviation, float(np.linalg.norm(partitioned - monolithic)) / scale)
            state = outcome.state
        worst = max(worst, deviation)
        details.append(f"{tag}={deviation:.2e}")
    return CheckResult("monolithic_dae", worst <= MONOLITHIC_TOL, worst, MONOLITHIC_TOL, detail=" ".join(details))


def snapshot_decompositions(cfg: ProblemConfig) -> Tuple[PodDecomposition, PodDecomposition]:
    """Per side POD of a single-domain run of cfg"""
    traj = run_single_domain(cfg, sample_stride=1)
    sets = restrict_to_subdomains(traj, cfg.partition())
    return PodDecomposition.from_snapshots(sets[0]), PodDecomposition.from_snapshots(sets[1])


def _swept_bases(pods: Sequence[PodDecomposition], d: int) -> Bases:
    return (
        pods[0].basis(d_interior=min(d, pods[0].interior.rank)),
        pods[1].basis(d_interior=min(d, pods[1].interior.rank)),
    )


def condition_sweep(
    meshes: Sequence[int] = DESK_MESHES,
    d_values: Sequence[int] = D_SWEEP,
    kappa: float = 1e-5,
    final_time: float = np.pi / 4.0,
) -> Dict[Tuple[str, int, int], Tuple[float, bool]]:
    """cond2(S) and Cholesky success per (formulation, nx, d) with POD bases"""
    table: Dict[Tuple[str, int, int], Tuple[float, bool]] = {}
    for nx in meshes:
        cfg = solid_body_rotation_config(kappa, kappa, nx, final_time=final_time)
        _, ops = cfg.coupled_operators()
        pods = snapshot_decompositions(cfg)
        for d in d_values:
            bases = _swept_bases(pods, d)
            for tag in (*TRACE_COMPATIBLE, RR_FLM):
                schur = _system(tag, ops, bases).schur
                table[(tag, nx, d)] = (schur.condition, schur.spd)
    return table


def check_schur(table: Dict[Tuple[str, int, int], Tuple[float, bool]]) -> List[CheckResult]:
    """SPD and bounded condition spread for trace-compatible formulations, blow-up for RR_fLM"""
    checks = []
    spread_worst = 0.0
    all_spd = True
    for tag in TRACE_COMPATIBLE:
        conditions = [c for (t, _, _), (c, _) in table.items() if t == tag]
        all_spd = all_spd and all(spd for (t, _, _), (_, spd) in table.items() if t == tag)
        if conditions:
            spread_worst = max(spread_worst, max(conditions) / min(conditions))
    checks.append(CheckResult("schur_spd", all_spd, float(all_spd), 1.0, detail=",".join(TRACE_COMPATIBLE)))
    checks.append(
        CheckResult("schur_condition_spread", spread_worst <= CONDITION_SPREAD, spread_worst, CONDITION_SPREAD)
    )

    ff = [c for (t, _, _), (c, _) in table.items() if t == FF_FLM]
    ff_max = max(ff) if ff else 0.0
    checks.append(CheckResult("schur_ff_condition", ff_max <= FF_CONDITION_MAX, ff_max, FF_CONDITION_MAX))

    smallest = min((d for (t, _, d) in table if t == RR_FLM), default=0)
    ratios = [
        table[(RR_FLM, nx, d)][0] / table[(RR_RLM, nx, d)][0] for (t, nx, d) in table if t == RR_FLM and d == smallest
    ]
    ratio = min(ratios) if ratios else float("inf")
    checks.append(CheckResult("rr_flm_ill_conditioning", ratio >= ILL_POSED_FACTOR, ratio, ILL_POSED_FACTOR))
    return checks


def check_interface_enforcement(nx: int = 16, d: int = 10, final_time: float = np.pi / 4.0) -> CheckResult:
    """Pointwise interface velocity equality for fLM, Galerkin orthogonality for FR_rLM"""
    cfg = solid_body_rotation_config(1e-5, 1e-5, nx, final_time=final_time)
    mesh = cfg.build_mesh()
    _, ops = cfg.coupled_operators(mesh)
    bases = _swept_bases(snapshot_decompositions(cfg), d)
    grid = cfg.time_grid(mesh)
    ratios, details = [], []
    for tag in (FF_FLM, FR_FLM, FR_RLM):
        system = _system(tag, ops, bases)
        state = system.initial_state()
        worst = 0.0
        for dt in grid.step_sizes:
            outcome = step(system, state, float(dt))
            residual, norm = interface_residual(system, outcome.velocities)
            if tag == FR_RLM:
                projector = system.sides[1].rom.interface_basis.T @ ops[1].constraint.gamma  # type: ignore
                norm = float(np.max(np.abs(projector @ residual)))
            worst = max(worst, norm)
            state = outcome.state
        threshold = PROJECTED_RESIDUAL_TOL if tag == FR_RLM else RESIDUAL_TOL
        ratios.append(worst / threshold)
        details.append(f"{tag}={worst:.2e}")
    value = max(ratios)
    return CheckResult("interface_enforcement", value <= 1.0, value, 1.0, detail=" ".join(details))


def _timed(name: str, check: Callable[[], List[CheckResult]]) -> List[CheckResult]:
    start = time.perf_counter()
    try:
        results = check()
    except (ValueError, RuntimeError) as e:
        logger.error("Check %s failed with an error: %s\n%s", name, e, traceback.format_exc())
        results = [CheckResult(name, False, float("nan"), float("nan"), detail=f"{type(e).__name__}: {e}")]
    seconds = time.perf_counter() - start
    return [replace(r, seconds=seconds) for r in results]


def run_verification(seed: int = SEED, out_dir: Optional[Path] = None) -> List[CheckResult]:
    """Runs every oracle and writes verify.csv when out_dir is given"""
    results: List[CheckResult] = []
    results += _timed("single_domain_consistency", lambda: [check_single_domain_consistency()])
    results += _timed("identity_projection", lambda: [check_identity_projection()])
    results += _timed("monolithic_dae", lambda: [check_monolithic(seed)])
    results += _timed("schur", lambda: check_schur(condition_sweep()))
    results += _timed("interface_enforcement", lambda: [check_interface_enforcement()])

    for result in results:
        log = logger.info if result.passed else logger.error
        log(
            "%s: %s (value %.3e, threshold %.3e, %.1fs) %s",
            result.name,
            "passed" if result.passed else "FAILED",
            result.value,
            result.threshold,
            result.seconds,
            result.detail,
        )
    if out_dir is not None:
        write_csv(
            Path(out_dir) / "verify.csv",
            CHECK_HEADER,
            ([r.name, r.passed, r.value, r.threshold, r.detail] for r in results),
            config_hash({"seed": seed, "checks": [r.name for r in results]}),
        )
    return results
