"""Experiments Module
Experiment driver: snapshot collection, offline POD, the (formulation, basis
size) sweep of partitioned runs and the summary report.

Output layout below the output directory:
    snapshots/run_<i>.npz        single-domain trajectories used as snapshots
    benchmark.npz                single-domain reference for the error
    offline/side<i>_pod.npz      interface and interior POD of subdomain i
    offline/side<i>_basis.npz    composite basis selected by the energy thresholds
    offline/side<i>_rom.npz      operators projected onto that basis
    offline/energy_side<i>.csv   snapshot energy curves
    offline/dims.csv             dimensions selected by the energy thresholds
    cells/<tag>[_d<d>]/          per sweep cell: summary, errors, residuals, trace
    report.csv, report.txt       aggregated summary
    timings.csv                  offline and online wall clock per cell
"""

import logging
import time
import traceback
from dataclasses import asdict, dataclass, field
from multiprocessing import Pool
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from janus.constants import (
    CONFIG_PATH,
    FF_FLM,
    FORMULATIONS,
    JOBS,
    OUTPUT_DIR,
    PROFILE,
    SAMPLE_STRIDE,
    SD_ROM,
    SEED,
    STRICT_CFL,
)
from janus.baseline import SingleDomainRom
from janus.fom import restrict_to_subdomains, run_single_domain
from janus.ivr import Formulation, SingularSchurError, build_coupled_system, run
from janus.metrics import BrokenNorm, error_series, interface_trace, relative_error, restrict_state
from janus.pod import CompositeBasis, PodDecomposition, SnapshotSet, energy_curve, project_operators, select_dim
from janus.problem import ProblemConfig, solid_body_rotation_config
from janus.storage import (
    load_decomposition,
    load_trajectory,
    read_csv,
    save_basis,
    save_decomposition,
    save_rom_operators,
    save_trajectory,
    write_csv,
)
from janus.tools import cell_name, config_hash, parse_int_list

logger = logging.getLogger("experiments")

SUMMARY_HEADER = [
    "tag",
    "d_interior",
    "d1_gamma",
    "d1_0",
    "d2_gamma",
    "d2_0",
    "multiplier",
    "trace_compatible",
    "spd",
    "cond2",
    "final_error",
    "max_error",
    "max_residual",
    "status",
    "message",
]
TIMING_HEADER = ["tag", "d_interior", "offline_seconds", "online_seconds"]
STATUS_OK = "ok"
STATUS_SINGULAR = "singular"
STATUS_FAILED = "failed"


@dataclass(frozen=True)
class SnapshotRun:
    """One single-domain run whose states become snapshots"""

    kappa1: float
    kappa2: float
    dt: Optional[float] = None


@dataclass(frozen=True)
class ExperimentConfig:  # pylint: disable=too-many-instance-attributes
    """Experiment parameters; keys of the YAML file mirror the symbols of the model"""

    kappa1: float
    kappa2: float
    nx: int
    final_time: float
    formulations: Tuple[str, ...]
    d_sweep: Tuple[int, ...]
    snapshot_runs: Tuple[SnapshotRun, ...] = ()
    dt: Optional[float] = None
    cfl_safety: float = 0.075
    delta0: float = 0.01
    deltagamma: Optional[float] = None
    sample_stride: int = SAMPLE_STRIDE
    seed: int = SEED
    profile: str = PROFILE
    output_dir: Path = Path(OUTPUT_DIR)
    jobs: int = JOBS
    strict_cfl: bool = STRICT_CFL
    single_domain_rom: bool = False
    extra: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.formulations:
            raise ValueError("At least one formulation is required")
        unknown = [f for f in self.formulations if f not in FORMULATIONS]
        if unknown:
            raise ValueError(f"Unknown formulations {unknown}, expected a subset of {FORMULATIONS}")
        if not self.d_sweep:
            raise ValueError("The basis size sweep is empty")
        if min(self.d_sweep) < 1:
            raise ValueError(f"Basis sizes must be positive, got {self.d_sweep}")
        if self.jobs < 1:
            raise ValueError(f"jobs must be at least 1, got {self.jobs}")

    @classmethod
    def from_dict(cls, raw: Dict[str, Any], profile: Optional[str] = None, **overrides: Any) -> "ExperimentConfig":
        """Top-level keys, then the selected profile's keys, then explicit overrides"""
        profile = profile or PROFILE
        profiles = raw.get("profiles", {}) or {}
        if profiles and profile not in profiles:
            raise ValueError(f"Unknown profile {profile}, expected one of {sorted(profiles)}")
        merged = {k: v for k, v in raw.items() if k != "profiles"}
        merged.update(profiles.get(profile, {}) or {})
        merged.update({k: v for k, v in overrides.items() if v is not None})

        runs = tuple(
            SnapshotRun(kappa1=float(r["kappa1"]), kappa2=float(r["kappa2"]), dt=_optional_float(r.get("dt")))
            for r in merged.get("snapshot_runs", []) or []
        )
        known = {
            "kappa1",
            "kappa2",
            "nx",
            "Tf",
            "dt",
            "cfl_safety",
            "delta0",
            "deltagamma",
            "formulations",
            "d_sweep",
            "snapshot_runs",
            "sample_stride",
            "seed",
            "output_dir",
            "jobs",
            "strict_cfl",
            "single_domain_rom",
        }
        try:
            return cls(
                kappa1=float(merged["kappa1"]),
                kappa2=float(merged["kappa2"]),
                nx=int(merged["nx"]),
                final_time=float(merged["Tf"]),
                formulations=tuple(merged.get("formulations", FORMULATIONS)),
                d_sweep=tuple(parse_int_list(merged.get("d_sweep", []))),
                snapshot_runs=runs,
                dt=_optional_float(merged.get("dt")),
                cfl_safety=float(merged.get("cfl_safety", 0.075)),
                delta0=float(merged.get("delta0", 0.01)),
                deltagamma=_optional_float(merged.get("deltagamma")),
                sample_stride=int(merged.get("sample_stride", SAMPLE_STRIDE)),
                seed=int(merged.get("seed", SEED)),
                profile=profile,
                output_dir=Path(merged.get("output_dir", OUTPUT_DIR)),
                jobs=int(merged.get("jobs", JOBS)),
                strict_cfl=bool(merged.get("strict_cfl", STRICT_CFL)),
                single_domain_rom=bool(merged.get("single_domain_rom", False)),
                extra={k: v for k, v in merged.items() if k not in known},
            )
        except KeyError as e:
            raise ValueError(f"Missing configuration key {e}") from e

    @classmethod
    def load(cls, path: Optional[Path] = None, profile: Optional[str] = None, **overrides: Any) -> "ExperimentConfig":
        """Reads the YAML experiment file"""
        path = Path(path or CONFIG_PATH)
        if not path.exists():
            raise ValueError(f"Configuration file {path} does not exist")
        with open(path, "r", encoding="utf-8") as config_file:
            raw = yaml.safe_load(config_file) or {}
        return cls.from_dict(raw, profile, **overrides)

    def as_dict(self) -> Dict[str, Any]:
        """Parameters that determine the numerical results"""
        data = asdict(self)
        for key in ("output_dir", "jobs", "extra"):
            data.pop(key)
        return data

    @property
    def hash(self) -> str:
        """Provenance hash written to every CSV"""
        return config_hash(self.as_dict())

    def path(self, *parts: str) -> Path:
        """Path below the output directory"""
        return Path(self.output_dir).joinpath(*parts)

    def problem(
        self, kappa1: Optional[float] = None, kappa2: Optional[float] = None, dt: Optional[float] = None
    ) -> ProblemConfig:
        """Solid body rotation problem of this experiment"""
        return solid_body_rotation_config(
            kappa1=self.kappa1 if kappa1 is None else kappa1,
            kappa2=self.kappa2 if kappa2 is None else kappa2,
            nx=self.nx,
            dt=self.dt if dt is None else dt,
            final_time=self.final_time,
            sample_stride=self.sample_stride,
            cfl_safety=self.cfl_safety,
        )

    def cells(self) -> List[Tuple[str, Optional[int]]]:
        """Sweep cells: FF once, every other formulation once per basis size, then the single-domain ROMs"""
        cells: List[Tuple[str, Optional[int]]] = []
        for tag in self.formulations:
            if tag == FF_FLM:
                cells.append((tag, None))
            else:
                cells.extend((tag, d) for d in self.d_sweep)
        if self.single_domain_rom:
            cells.extend((SD_ROM, d) for d in self.d_sweep)
        return cells


def _optional_float(value: Any) -> Optional[float]:
    return None if value is None else float(value)


def _map(func: Callable, tasks: Sequence[Any], jobs: int) -> List[Any]:
    if jobs <= 1 or len(tasks) <= 1:
        return [func(task) for task in tasks]
    with Pool(processes=min(jobs, len(tasks))) as pool:
        return pool.map(func, tasks)


def _snapshot_task(task: Tuple[ExperimentConfig, int, SnapshotRun]) -> Path:
    config, index, snapshot_run = task
    cfg = config.problem(snapshot_run.kappa1, snapshot_run.kappa2, snapshot_run.dt)
    traj = run_single_domain(cfg, sample_stride=1, strict_cfl=config.strict_cfl)
    path = save_trajectory(config.path("snapshots", f"run_{index}"), traj)
    logger.info("Snapshot run %d (kappa=%g/%g): %d snapshots", index, *cfg.fields.kappa, traj.snapshots().shape[1])
    return path


def cmd_snapshots(config: ExperimentConfig) -> List[Path]:
    """Runs the single-domain FOM for every snapshot run"""
    if not config.snapshot_runs:
        raise ValueError("The snapshot run list is empty")
    tasks = [(config, i, r) for i, r in enumerate(config.snapshot_runs)]
    return _map(_snapshot_task, tasks, config.jobs)


def _snapshot_sets(config: ExperimentConfig) -> Tuple[SnapshotSet, SnapshotSet]:
    subs = config.problem().partition()
    per_side: Tuple[List[SnapshotSet], List[SnapshotSet]] = ([], [])
    for i in range(len(config.snapshot_runs)):
        path = config.path("snapshots", f"run_{i}.npz")
        if not path.exists():
            raise ValueError(f"Snapshot file {path} is missing, run the snapshots command first")
        sets = restrict_to_subdomains(load_trajectory(path), subs)
        per_side[0].append(sets[0])
        per_side[1].append(sets[1])
    return SnapshotSet.concatenate(per_side[0]), SnapshotSet.concatenate(per_side[1])


def cmd_offline(config: ExperimentConfig) -> List[Path]:
    """POD of the interface and interior snapshots of both subdomains"""
    if not config.snapshot_runs:
        raise ValueError("The snapshot run list is empty")
    paths = []
    dims_rows = []
    _, ops = config.problem().coupled_operators()
    for index, snaps in enumerate(_snapshot_sets(config), start=1):
        pod = PodDecomposition.from_snapshots(snaps)
        paths.append(save_decomposition(config.path("offline", f"side{index}_pod"), pod))

        basis = pod.basis(delta_interior=config.delta0, delta_interface=config.deltagamma)
        save_basis(config.path("offline", f"side{index}_basis"), basis)
        save_rom_operators(config.path("offline", f"side{index}_rom"), project_operators(ops[index - 1], basis))
        dims_rows.append(
            [
                index,
                snaps.num_snapshots,
                config.delta0,
                basis.d_interior,
                basis.d_interface,
                basis.d_max_interface,
            ]
        )

        interior = energy_curve(pod.interior.sigma) if pod.interior.rank else np.zeros(0)
        interface = energy_curve(pod.interface.sigma)
        length = max(interior.size, interface.size)
        rows = [
            [
                d + 1,
                float(interior[d]) if d < interior.size else "",
                float(interface[d]) if d < interface.size else "",
            ]
            for d in range(length)
        ]
        write_csv(
            config.path("offline", f"energy_side{index}.csv"),
            ["d", "interior_energy", "interface_energy"],
            rows,
            config.hash,
        )
        logger.info(
            "Side %d: %d snapshots, delta0=%g gives d_0=%d (interior rank %d), d_gamma=%d (rank %d)",
            index,
            snaps.num_snapshots,
            config.delta0,
            select_dim(pod.interior.sigma, config.delta0) if pod.interior.rank else 0,
            pod.interior.rank,
            basis.d_interface,
            pod.interface.rank,
        )
    write_csv(
        config.path("offline", "dims.csv"),
        ["side", "snapshots", "delta0", "d_interior", "d_interface", "d_max_interface"],
        dims_rows,
        config.hash,
    )
    return paths


def _simulate_cell(  # pylint: disable=too-many-locals
    config: ExperimentConfig, tag: str, d_interior: Optional[int], directory: Path, summary: Dict[str, Any]
) -> Tuple[float, float]:
    """Fills summary in place; the conditioning columns are set before time stepping"""
    cfg = config.problem()
    mesh = cfg.build_mesh()
    subs, ops = cfg.coupled_operators(mesh)
    form = Formulation.from_tag(tag)
    bases: List[Optional[CompositeBasis]] = [None, None]
    for i in range(2):
        if form.reduced[i]:
            pod = load_decomposition(config.path("offline", f"side{i + 1}_pod"))
            bases[i] = pod.basis(d_interior=d_interior, delta_interface=config.deltagamma)

    system = build_coupled_system(form, ops, (bases[0], bases[1]))
    dims = system.dims
    summary.update(
        {
            **{k: dims[k] for k in ("d1_gamma", "d1_0", "d2_gamma", "d2_0", "multiplier")},
            "trace_compatible": form.trace_compatible,
            "spd": system.schur.spd,
            "cond2": float(system.schur.condition),
        }
    )
    result = run(system, cfg.time_grid(mesh), config.sample_stride)
    benchmark = load_trajectory(config.path("benchmark"))
    errors = error_series(result, benchmark, subs, BrokenNorm.from_operators(ops))

    write_csv(
        directory / "errors.csv",
        ["time", "relative_error"],
        zip(errors.times.tolist(), errors.values.tolist()),
        config.hash,
    )
    write_csv(
        directory / "residuals.csv",
        ["step", "time", "interface_residual", "rhs1_norm", "rhs2_norm", "rhs_gamma_norm"],
        (
            [n + 1, float(result.step_times[n]), float(result.residual_norms[n]), *map(float, result.rhs_norms[n])]
            for n in range(result.residual_norms.size)
        ),
        config.hash,
    )

    final1, final2 = result.state_at(-1)
    y, trace1 = interface_trace(final1, subs[0])
    _, trace2 = interface_trace(final2, subs[1])
    _, reference = interface_trace(restrict_state(benchmark.at_step(int(benchmark.steps[-1])), subs[0]), subs[0])
    line = subs[0].interface_line
    multiplier = result.multipliers[:, -1]
    lam = [float(multiplier[k]) if k < subs[0].n_gamma else "" for k in line]
    write_csv(
        directory / "trace.csv",
        ["y", "u1", "u2", "benchmark", "multiplier"],
        zip(y.tolist(), trace1.tolist(), trace2.tolist(), reference.tolist(), lam),
        config.hash,
    )

    summary.update(
        {
            "final_error": errors.final,
            "max_error": float(np.max(errors.values)),
            "max_residual": float(np.max(result.residual_norms)) if result.residual_norms.size else 0.0,
            "status": STATUS_OK,
        }
    )
    return result.offline_seconds, result.online_seconds


def _simulate_baseline_cell(
    config: ExperimentConfig, dim: int, directory: Path, summary: Dict[str, Any]
) -> Tuple[float, float]:
    cfg = config.problem()
    subs, ops = cfg.coupled_operators()
    runs = []
    for i in range(len(config.snapshot_runs)):
        path = config.path("snapshots", f"run_{i}.npz")
        if not path.exists():
            raise ValueError(f"Snapshot file {path} is missing, run the snapshots command first")
        runs.append(load_trajectory(path))

    start = time.perf_counter()
    rom = SingleDomainRom.from_trajectory(cfg, runs, dim=dim)
    offline = time.perf_counter() - start
    start = time.perf_counter()
    traj = rom.run(cfg.time_grid(), config.sample_stride)
    online = time.perf_counter() - start

    benchmark = load_trajectory(config.path("benchmark"))
    norm = BrokenNorm.from_operators(ops)
    common = np.intersect1d(traj.steps, benchmark.steps)
    values = [
        relative_error(
            norm,
            [restrict_state(traj.at_step(int(n)), sub) for sub in subs],
            [restrict_state(benchmark.at_step(int(n)), sub) for sub in subs],
        )
        for n in common
    ]
    times = [float(traj.times[np.flatnonzero(traj.steps == n)[0]]) for n in common]
    write_csv(directory / "errors.csv", ["time", "relative_error"], zip(times, values), config.hash)

    summary.update({"final_error": values[-1], "max_error": float(np.max(values)), "status": STATUS_OK})
    return offline, online


def run_cell(task: Tuple[ExperimentConfig, str, Optional[int]]) -> Dict[str, Any]:
    """Runs one (formulation, basis size) cell and writes its files; failures are recorded, not raised"""
    config, tag, d_interior = task
    name = cell_name(tag, d_interior)
    directory = config.path("cells", name)
    logger.info("Cell %s started", name)
    timing = (float("nan"), float("nan"))
    summary: Dict[str, Any] = {key: "" for key in SUMMARY_HEADER}
    summary.update({"tag": tag, "d_interior": "" if d_interior is None else d_interior})
    try:
        if tag == SD_ROM:
            timing = _simulate_baseline_cell(config, int(d_interior or 0), directory, summary)
        else:
            timing = _simulate_cell(config, tag, d_interior, directory, summary)
        logger.info("Cell %s finished: final error %.3e", name, summary["final_error"])
    except SingularSchurError as e:
        logger.warning("Cell %s has a singular Schur complement: %s", name, e)
        summary.update({"status": STATUS_SINGULAR, "message": str(e)})
    except (ValueError, RuntimeError) as e:
        logger.error("Cell %s failed: %s\n%s", name, e, traceback.format_exc())
        summary.update({"status": STATUS_FAILED, "message": f"{type(e).__name__}: {e}"})
    write_csv(directory / "summary.csv", SUMMARY_HEADER, [[summary[k] for k in SUMMARY_HEADER]], config.hash)
    write_csv(
        directory / "timing.csv",
        TIMING_HEADER,
        [[tag, summary["d_interior"], float(timing[0]), float(timing[1])]],
        config.hash,
    )
    return summary


def cmd_run(config: ExperimentConfig) -> List[Dict[str, Any]]:
    """Benchmark run followed by the partitioned sweep"""
    needs_pod = any(Formulation.from_tag(tag).reduced != (False, False) for tag in config.formulations)
    if needs_pod and not config.path("offline", "side1_pod.npz").exists():
        raise ValueError("Reduced bases are missing, run the offline command first")
    if config.single_domain_rom and not config.path("snapshots", "run_0.npz").exists():
        raise ValueError("Snapshots are missing, run the snapshots command first")

    benchmark = run_single_domain(config.problem(), strict_cfl=config.strict_cfl)
    save_trajectory(config.path("benchmark"), benchmark)

    tasks = [(config, tag, d) for tag, d in config.cells()]
    summaries = _map(run_cell, tasks, config.jobs)
    failed = [s for s in summaries if s["status"] == STATUS_FAILED]
    singular = [s for s in summaries if s["status"] == STATUS_SINGULAR]
    logger.info(
        "Sweep finished: %d cells, %d failed, %d with a singular Schur complement",
        len(summaries),
        len(failed),
        len(singular),
    )
    return summaries


def _short(value: str) -> str:
    """Three significant digits for numeric report cells"""
    if value in ("", "True", "False") or value.lstrip("-").isdigit():
        return value
    try:
        return f"{float(value):.3e}"
    except ValueError:
        return value


def _format_row(values: Sequence[str], widths: Sequence[int]) -> str:
    return "  ".join(str(v).ljust(w) for v, w in zip(values, widths)).rstrip()


def cmd_report(config: ExperimentConfig) -> Path:
    """Aggregates the cell summaries into report.csv, report.txt and timings.csv"""
    rows: List[Dict[str, str]] = []
    timings: List[Dict[str, str]] = []
    for tag, d in config.cells():
        directory = config.path("cells", cell_name(tag, d))
        if not (directory / "summary.csv").exists():
            raise ValueError(f"Cell {directory.name} has no summary, run the sweep first")
        rows.extend(read_csv(directory / "summary.csv")[1])
        if (directory / "timing.csv").exists():
            timings.extend(read_csv(directory / "timing.csv")[1])

    report = write_csv(
        config.path("report.csv"), SUMMARY_HEADER, ([row[k] for k in SUMMARY_HEADER] for row in rows), config.hash
    )
    write_csv(
        config.path("timings.csv"), TIMING_HEADER, ([t[k] for k in TIMING_HEADER] for t in timings), config.hash
    )

    columns = ["tag", "d_interior", "d1_gamma", "d2_gamma", "cond2", "final_error", "status"]
    table = [columns] + [[_short(row[k]) for k in columns] for row in rows]
    widths = [max(len(line[i]) for line in table) for i in range(len(columns))]
    lines = [f"Experiment report (profile {config.profile}, config {config.hash})", ""]
    lines += [_format_row(line, widths) for line in table]
    if timings:
        lines += ["", "Online runtimes (s):"]
        lines += [
            f"  {cell_name(t['tag'], int(t['d_interior']) if t['d_interior'] else None)}: {_short(t['online_seconds'])}"
            for t in timings
        ]
    text = "\n".join(lines) + "\n"
    with open(config.path("report.txt"), "w", encoding="utf-8") as file:
        file.write(text)
    logger.info("Report written to %s\n%s", report, text)
    return report
