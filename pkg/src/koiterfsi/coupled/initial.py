"""Initial data on the regularized initial domain."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..discretization import GeometryState
from ..errors import ParameterError
from ..extension import fiber_factor
from ..geometry import FunctionProfile, pseudonormal_gamma, scaled_pseudonormal
from ..quadrature import gauss_unit
from .model import FlowModel
from .mollify import MollifiedDisplacement
from .problem import ProblemData


@dataclass
class AdaptedData:
    u0_eps: Callable
    eta1_eps: np.ndarray
    lifted_boundary: np.ndarray      # R_eps delta(0, .) at the shell quadrature nodes
    min_gap: float
    norms: dict = field(default_factory=dict)


def _l2_on_domain(model: FlowModel, boundary_coeffs, fn) -> float:
    kin = model.asm.kinematics(GeometryState(boundary_coeffs, np.zeros_like(boundary_coeffs)), with_rate=False)
    return model.asm.l2_norm_points(kin, fn(kin["x"]))


def _gap_norm(model: FlowModel, lower, upper, q, w, fn, n: int = 8) -> float:
    """L2 norm of ``fn`` between the graphs ``H + lower`` and ``H + upper`` (flat shell)."""
    t, wt = gauss_unit(n)
    s = lower[:, None] + (upper - lower)[:, None] * t[None, :]
    pts = np.stack([np.broadcast_to(q[:, None], s.shape), model.geom.height + s], axis=-1)
    vals = (np.asarray(fn(pts)) ** 2).sum(axis=-1)
    return float(np.sqrt(np.sum(vals * wt[None, :] * ((upper - lower) * w)[:, None])))


def adapt_initial_data(model: FlowModel, data: ProblemData, R: MollifiedDisplacement) -> AdaptedData:
    """Continue the initial velocity into the gap and rescale the initial shell velocity.

    Between the initial boundary and the regularized one the velocity is the
    extension of ``eta1``; there the shell velocity is transported by the
    fiber factor, which equals one on a flat shell.
    """
    geom, shell = model.geom, model.shell
    q, w = shell.quad_nodes, shell.quad_weights
    eta0 = shell.function(data.eta0)
    e0 = eta0.eval(q)
    r0 = R.eval(0.0, q)
    gap = r0 - e0
    if np.min(gap) <= 0.0:
        raise ParameterError(f"regularized initial boundary lies below eta0 (min gap {np.min(gap):.3e}); "
                             "eps is too large")
    e1 = shell.function(data.eta1).eval(q)
    eta1_fn = shell.function(data.eta1)
    eta1_eps = shell.project(FunctionProfile(
        lambda qq: fiber_factor(geom, eta0, qq, R.eval(0.0, qq)) * eta1_fn.eval(qq)))

    def u0_eps(x):
        x = np.asarray(x, dtype=float)
        below = x[..., 1] <= geom.height + eta0.eval(x[..., 0])
        out = np.zeros(x.shape)
        if np.any(below):
            out[below] = data.u0(x[below])
        if np.any(~below):
            out[~below] = data.gap_field(x[~below])
        return out

    norms = {}
    c_eta0 = model.geometry_fit(eta0)
    c_r0 = model.geometry_fit(R.eval(0.0, model.gspace.fit_points))
    norms["u0"] = _l2_on_domain(model, c_eta0, data.u0)
    norms["u0_eps"] = _l2_on_domain(model, c_r0, u0_eps)
    norms["u0_diff"] = _gap_norm(model, e0, r0, q, w, data.gap_field)
    e1e = shell.function(eta1_eps).eval(q)
    norms["eta1"] = float(np.sqrt(np.sum(e1 * e1 * w)))
    norms["eta1_eps"] = float(np.sqrt(np.sum(e1e * e1e * w)))
    norms["eta1_diff"] = float(np.sqrt(np.sum((e1e - e1) ** 2 * w)))
    return AdaptedData(u0_eps, eta1_eps, r0, float(np.min(gap)), norms)


def compatibility_residual(model: FlowModel, data: ProblemData) -> float:
    """``max_j |<tr u0, Y_j> - int eta1 gamma(eta0) Y_j|`` with the normal trace on the initial boundary."""
    geom, shell = model.geom, model.shell
    q, w = shell.quad_nodes, shell.quad_weights
    eta0 = shell.function(data.eta0)
    pts = np.column_stack([q, geom.height + eta0.eval(q)])
    un = (data.u0(pts) * scaled_pseudonormal(geom, eta0, q)).sum(axis=-1)
    rhs = shell.function(data.eta1).eval(q) * pseudonormal_gamma(geom, eta0, q)
    Y = shell.values[0]
    return float(np.max(np.abs(Y.T @ ((un - rhs) * w)))) if Y.size else 0.0
