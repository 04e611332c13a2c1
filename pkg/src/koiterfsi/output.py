"""Run artifacts: shell trace, field snapshots and the key-value summary."""
from __future__ import annotations

import csv
import platform
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .coupled import CoupledProblem
from .geometry import flat_kinematics


def trace_points(problem: CoupledProblem) -> np.ndarray:
    return np.linspace(0.0, problem.model.geom.length, problem.cfg.trace_points)


def write_shell_trace(path, problem: CoupledProblem, times, eta_coeffs, rate_coeffs) -> np.ndarray:
    """``t, eta_q0.., deta_q0..`` at evenly spaced shell points (returned)."""
    q = trace_points(problem)
    Y = problem.model.shell.eval(q)
    n = len(q)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"eta_q{i}" for i in range(n)] + [f"deta_q{i}" for i in range(n)])
        for t, c, r in zip(times, eta_coeffs, rate_coeffs):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in Y @ c] + [repr(float(v)) for v in Y @ r])
    return q


def nodal_fields(problem: CoupledProblem, z, geometry) -> dict:
    """Physical node positions, velocities and pressure-node positions for coefficients ``z``."""
    model = problem.model
    mesh, geom = model.mesh, model.geom
    prof = model.gspace.profile(geometry)
    X = mesh.vcoords
    d = tuple(prof.eval(X[:, 0], k) for k in range(3))
    kin = flat_kinematics(geom, X[:, 1], d)
    nv = mesh.n_vnodes
    u = problem.basis.fluid(z)
    U = np.column_stack([u[:nv], u[nv:]])
    vel = np.einsum("nij,nj->ni", kin["F"], U) / kin["J"][:, None]
    pos = X + np.column_stack([np.zeros(nv), geom.beta_hat(X[:, 1] - geom.height) * d[0]])
    P = mesh.pcoords
    dp = prof.eval(P[:, 0])
    ppos = P + np.column_stack([np.zeros(len(P)), geom.beta_hat(P[:, 1] - geom.height) * dp])
    return {"positions": pos, "velocity": vel, "pressure_positions": ppos}


def write_snapshot(path, problem: CoupledProblem, t: float, z, geometry, pressure=None) -> None:
    """Plain-text field file: nodes with velocity, Q2 connectivity, pressure nodes."""
    f = nodal_fields(problem, z, geometry)
    space = problem.model.space
    conn = space.elem_udofs[:, :9]
    npres = len(f["pressure_positions"])
    p = np.asarray(pressure, dtype=float) if pressure is not None else np.zeros(npres)
    if p.size != npres:  # the modal path carries no pressure
        p = np.zeros(npres)
    with open(path, "w") as fh:
        fh.write(f"# time {t!r}\n")
        fh.write(f"NODES {len(f['positions'])}\n")
        for row in np.column_stack([f["positions"], f["velocity"]]):
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")
        fh.write(f"ELEMENTS {len(conn)} 9\n")
        for row in conn:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")
        fh.write(f"PRESSURE {len(p)}\n")
        for row in np.column_stack([f["pressure_positions"], p]):
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def write_snapshots(outdir, problem: CoupledProblem, times, Z, geometry, pressure) -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    every = problem.cfg.snapshot_every
    paths = []
    for k in range(0, len(times), every):
        path = outdir / f"step_{k:05d}.txt"
        write_snapshot(path, problem, float(times[k]), Z[k], geometry[k], pressure[k] if pressure else None)
        paths.append(path)
    return paths


def provenance(problem: CoupledProblem, mode: str, eps_schedule) -> dict:
    cfg, model, basis = problem.cfg, problem.model, problem.basis
    return {
        "mode": mode,
        "config_sha256": cfg.digest(),
        "code_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "seed": cfg.seed,
        "eps_schedule": ",".join(repr(float(e)) for e in eps_schedule),
        "eps0": repr(float(problem.eps0)),
        "mesh_elements": model.mesh.n_elements,
        "velocity_dofs": model.space.n_u,
        "pressure_dofs": model.space.n_p,
        "shell_modes": model.shell.n_modes,
        "coupled_unknowns": basis.n,
        "galerkin_path": basis.path,
        "time_steps": problem.n_steps,
        "dt": repr(float(problem.dt)),
    }


def write_summary(path, blocks: dict) -> None:
    """``[block]`` headers followed by ``key = value`` lines."""
    with open(path, "w") as fh:
        for name, items in blocks.items():
            fh.write(f"[{name}]\n")
            for k, v in items.items():
                if isinstance(v, (float, np.floating)):
                    v = repr(float(v))
                elif isinstance(v, np.bool_):
                    v = bool(v)
                fh.write(f"{k} = {v}\n")
            fh.write("\n")
