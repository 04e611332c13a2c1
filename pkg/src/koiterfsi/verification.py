"""Run state to checkpoint and back, and the read-only checks on a stored state."""
from __future__ import annotations

import numpy as np

from . import __version__
from .checkpoint import Checkpoint, encode_config
from .config import RunConfig, parse_config
from .coupled import (CoupledProblem, EnergyLedger, PicardIterate, ResumePoint, ShellTrajectory, StepState,
                      VelocityHistory, trace_residual_fields)
from .coupled.stepper import LEDGER_COLUMNS, RESIDUAL_TOL
from .discretization import GeometryState
from .errors import FormatError, KoiterFSIError
from .suite import Check

FORMAT_VERSION = "1"


def _ledger_array(ledger: EnergyLedger) -> np.ndarray:
    return np.array(ledger.rows, dtype=float).reshape(-1, len(LEDGER_COLUMNS))


def ledger_from_array(rows: np.ndarray) -> EnergyLedger:
    rows = np.asarray(rows, dtype=float).reshape(-1, len(LEDGER_COLUMNS))
    led = EnergyLedger()
    e0 = rows[0, 5] if rows.size else 0.0
    for r in rows:
        led.rows.append(tuple(float(v) for v in r))
        led.work.append(float(r[5] - e0 - r[7]))
    return led


def make_checkpoint(problem: CoupledProblem, mode: str, state: StepState, step_index: int, ledger: EnergyLedger,
                    eps: float, picard_iter: int = 0, iterate: PicardIterate | None = None,
                    status: str = "complete") -> Checkpoint:
    """Everything needed to verify the state or to continue the run."""
    cfg, basis = problem.cfg, problem.basis
    header = {
        "format": FORMAT_VERSION, "code_version": __version__, "mode": mode, "status": status,
        "config_sha256": cfg.digest(), "config": encode_config(cfg.to_ini()),
    }
    rows = _ledger_array(ledger)
    fields = {
        "t": np.array(state.t), "eps": np.array(eps), "picard_iter": np.array(float(picard_iter)),
        "step_index": np.array(float(step_index)),
        "z": state.z, "u": basis.fluid(state.z), "a": basis.shell(state.z), "d": state.d,
        "geometry": state.geometry, "ledger": rows,
        "E": np.array(rows[-1, 5] if rows.size else 0.0),
        "envelope": np.array(rows[-1, 6] if rows.size else 0.0),
    }
    if iterate is not None:
        fields["delta_times"] = iterate.delta.times
        fields["delta"] = iterate.delta.coeffs
        fields["velocity_times"] = iterate.velocity.times
        fields["velocity"] = iterate.velocity.values
        fields["picard_history"] = np.asarray(iterate.history, dtype=float)
    return Checkpoint(header, fields)


def checkpoint_config(ckpt: Checkpoint) -> RunConfig:
    text = ckpt.config_text
    if not text:
        raise FormatError("checkpoint header carries no configuration", 0)
    return parse_config(text, "<checkpoint config>")


def resume_point(ckpt: Checkpoint) -> ResumePoint:
    state = StepState(ckpt.scalar("t"), np.array(ckpt["z"]), np.array(ckpt["d"]), np.array(ckpt["geometry"]))
    return ResumePoint(int(ckpt.scalar("step_index")), state, ledger_from_array(ckpt["ledger"]))


def picard_iterate(ckpt: Checkpoint, problem: CoupledProblem) -> PicardIterate | None:
    if "delta" not in ckpt.fields:
        return None
    delta = ShellTrajectory(np.array(ckpt["delta_times"]), np.array(ckpt["delta"]), problem.model.shell)
    template = problem.zero_velocity()
    vel = VelocityHistory(template.xs, template.ys, np.array(ckpt["velocity_times"]), np.array(ckpt["velocity"]))
    hist = list(np.asarray(ckpt.fields.get("picard_history", np.zeros(0))).ravel())
    return PicardIterate(int(ckpt.scalar("picard_iter")), delta, vel, hist)


def verify_checkpoint(ckpt: Checkpoint, problem: CoupledProblem | None = None, slack: float = 0.02,
                      tol: float = RESIDUAL_TOL) -> list[Check]:
    """Divergence, trace compatibility, admissibility and the energy bound of a stored state."""
    problem = problem or CoupledProblem(checkpoint_config(ckpt))
    model = problem.model
    need = ("u", "a", "d", "geometry", "ledger")
    missing = [k for k in need if k not in ckpt.fields]
    if missing:
        raise FormatError(f"checkpoint lacks the fields {missing}", 0)
    u, a, d, geo = (np.asarray(ckpt[k], dtype=float).ravel() for k in ("u", "a", "d", "geometry"))
    if u.size != model.space.n_u or a.size != model.shell.n_modes or geo.size != model.gspace.n:
        raise FormatError("field sizes do not match the stored configuration", 0)
    out = []
    div = float(np.max(np.abs(model.asm.divergence_reference() @ u))) if np.all(np.isfinite(u)) else np.inf
    out.append(Check("verify", "divergence residual", div, tol, div <= tol))
    try:
        tr = trace_residual_fields(model, u, a, GeometryState(geo, np.zeros_like(geo)))
    except KoiterFSIError:
        tr = np.inf
    tr = tr if np.isfinite(tr) else np.inf
    out.append(Check("verify", "trace compatibility residual", tr, tol, tr <= tol))
    sup = model.shell_sup(d) if np.all(np.isfinite(d)) else np.inf
    out.append(Check("verify", "sup |eta| against alpha", sup, model.geom.alpha, sup <= model.geom.alpha))
    try:
        kin = model.asm.kinematics(GeometryState(geo, np.zeros_like(geo)), with_rate=False)
        jmin = float(np.min(kin["J"]))
    except KoiterFSIError:
        jmin = -np.inf
    out.append(Check("verify", "min Jacobian of the regularized domain", jmin, 0.0, jmin > 0.0))
    led = ledger_from_array(ckpt["ledger"])
    ratio = led.groenwall_ratio() if led.rows else np.nan
    ok = bool(led.rows) and led.finite() and led.groenwall_ok(slack)
    out.append(Check("verify", "sqrt(E) over the envelope", ratio, 1.0 + slack, ok))
    if "z" in ckpt.fields and np.asarray(ckpt["z"]).size == problem.basis.n:
        z = np.asarray(ckpt["z"], dtype=float)
        gap = float(np.max(np.abs(problem.basis.fluid(z) - u))) if u.size else 0.0
        gap = max(gap, float(np.max(np.abs(problem.basis.shell(z) - a))) if a.size else 0.0)
        gap = gap if np.isfinite(gap) else np.inf
        out.append(Check("verify", "velocity matches the coupled coefficients", gap, tol, gap <= tol))
    return out
