"""Storage Module
Matrix files for trajectories and bases: a NumPy .npz archive with one column
per snapshot and a ``times`` row, plus a JSON metadata sidecar."""

import csv
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from janus.fom import Trajectory
from janus.numerics import Matrix, SvdResult, Vector
from janus.pod import CompositeBasis, PodDecomposition, RomOperators
from janus.tools import format_float

FORMAT_VERSION = 1


def _paths(path: Path) -> Tuple[Path, Path]:
    path = Path(path)
    stem = path.with_suffix("") if path.suffix in (".npz", ".json") else path
    return stem.with_suffix(".npz"), stem.with_suffix(".json")


def save_matrix(
    path: Path,
    matrix: Matrix,
    times: Optional[Vector] = None,
    metadata: Optional[Dict[str, Any]] = None,
    **arrays: Any,
) -> Path:
    """Writes a matrix (columns are snapshots), optional times and metadata"""
    archive, sidecar = _paths(path)
    archive.parent.mkdir(parents=True, exist_ok=True)
    payload = {"matrix": np.asarray(matrix, dtype=np.float64)}
    if times is not None:
        if len(times) != payload["matrix"].shape[1]:
            raise ValueError(f"{len(times)} times for {payload['matrix'].shape[1]} columns")
        payload["times"] = np.asarray(times, dtype=np.float64)
    payload.update({k: np.asarray(v) for k, v in arrays.items()})
    np.savez(archive, **payload)

    info = {"format": FORMAT_VERSION, "shape": list(payload["matrix"].shape), **(metadata or {})}
    with open(sidecar, "w", encoding="utf-8") as file:
        json.dump(info, file, indent=2, sort_keys=True, default=str)
    return archive


def load_matrix(path: Path) -> Tuple[Matrix, Optional[Vector], Dict[str, Any], Dict[str, np.ndarray]]:
    """Reads a matrix file: (matrix, times, metadata, extra arrays)"""
    archive, sidecar = _paths(path)
    if not archive.exists():
        raise ValueError(f"Matrix file {archive} does not exist")
    with np.load(archive) as data:
        arrays = {k: data[k] for k in data.files}
    metadata: Dict[str, Any] = {}
    if sidecar.exists():
        with open(sidecar, "r", encoding="utf-8") as file:
            metadata = json.load(file)
    matrix = arrays.pop("matrix")
    times = arrays.pop("times", None)
    return matrix, times, metadata, arrays


def save_trajectory(path: Path, traj: Trajectory) -> Path:
    """Trajectory states with their times and step indices"""
    metadata = {"kind": "trajectory", "dt": traj.dt, "provenance": traj.provenance}
    return save_matrix(path, traj.states, traj.times, metadata, steps=traj.steps)


def load_trajectory(path: Path) -> Trajectory:
    """Inverse of save_trajectory"""
    states, times, metadata, arrays = load_matrix(path)
    if times is None or "steps" not in arrays:
        raise ValueError(f"{path} is not a trajectory file")
    return Trajectory(
        times=times,
        steps=arrays["steps"].astype(np.int64),
        states=states,
        dt=float(metadata.get("dt", 0.0)),
        provenance=metadata.get("provenance", {}),
    )


def save_rom_operators(path: Path, rom: RomOperators) -> Path:
    """Projected operators of one side: M as the matrix, F, the coupling and constraint blocks alongside"""
    metadata = {"kind": "rom_operators", "d_interface": rom.d_interface, "d_interior": rom.d_interior}
    return save_matrix(
        path,
        rom.mass,
        metadata=metadata,
        flux=rom.flux,
        mass_coupling=rom.mass_coupling,
        flux_coupling=rom.flux_coupling,
        constraint=rom.constraint,
        constraint_dirichlet=rom.constraint_dirichlet,
    )


def save_decomposition(path: Path, pod: PodDecomposition) -> Path:
    """Left singular vectors up to numerical rank of both splits, with singular values"""
    interface, interior = pod.interface, pod.interior
    rank_gamma, rank_0 = interface.rank, interior.rank
    metadata = {
        "kind": "pod",
        "rank_interface": rank_gamma,
        "rank_interior": rank_0,
        "provenance": pod.provenance,
    }
    return save_matrix(
        path,
        interior.u[:, :rank_0],
        metadata=metadata,
        interface=interface.u[:, :rank_gamma],
        sigma_interface=interface.sigma,
        sigma_interior=interior.sigma,
    )


def load_decomposition(path: Path) -> PodDecomposition:
    """Inverse of save_decomposition (right singular vectors are not stored)"""
    interior, _, metadata, arrays = load_matrix(path)
    if metadata.get("kind") != "pod":
        raise ValueError(f"{path} is not a POD file")
    sigma_gamma, sigma_0 = arrays["sigma_interface"], arrays["sigma_interior"]
    return PodDecomposition(
        interface=SvdResult(arrays["interface"], sigma_gamma, np.zeros((0, sigma_gamma.size))),
        interior=SvdResult(interior, sigma_0, np.zeros((0, sigma_0.size))),
        provenance=metadata.get("provenance", {}),
    )


def save_basis(path: Path, basis: CompositeBasis) -> Path:
    """Composite basis: Phi_0 as the matrix, Phi_gamma and singular values alongside"""
    metadata = {
        "kind": "basis",
        "d_interior": basis.d_interior,
        "d_interface": basis.d_interface,
        "d_max_interface": basis.d_max_interface,
        "delta_interior": basis.delta_interior,
        "delta_interface": basis.delta_interface,
        "provenance": basis.provenance,
    }
    return save_matrix(
        path,
        basis.interior,
        metadata=metadata,
        interface=basis.interface,
        sigma_interface=basis.sigma_interface,
        sigma_interior=basis.sigma_interior,
    )


def load_basis(path: Path) -> CompositeBasis:
    """Inverse of save_basis"""
    interior, _, metadata, arrays = load_matrix(path)
    if metadata.get("kind") != "basis":
        raise ValueError(f"{path} is not a basis file")
    return CompositeBasis(
        interface=arrays["interface"],
        interior=interior,
        sigma_interface=arrays["sigma_interface"],
        sigma_interior=arrays["sigma_interior"],
        d_max_interface=int(metadata["d_max_interface"]),
        delta_interior=metadata.get("delta_interior"),
        delta_interface=metadata.get("delta_interface"),
        provenance=metadata.get("provenance", {}),
    )


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]], config_hash: str) -> Path:
    """CSV with a provenance comment line, a header row and full precision floats"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as file:
        file.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(file)
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def read_csv(path: Path) -> Tuple[List[str], List[Dict[str, str]]]:
    """Header and rows (as dicts) of a CSV written by write_csv"""
    with open(path, "r", encoding="utf-8", newline="") as file:
        lines = [line for line in file if not line.startswith("#")]
    reader = csv.DictReader(lines)
    rows = list(reader)
    return list(reader.fieldnames or []), rows
