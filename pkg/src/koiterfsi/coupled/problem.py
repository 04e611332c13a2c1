"""Closed-form data of the bundled scenarios, bound to a discrete model."""
from __future__ import annotations

import numpy as np

from ..config import RunConfig
from ..extension import extend
from ..geometry import FunctionProfile
from .model import FlowModel


def clamped_shape(length: float) -> FunctionProfile:
    """``sin^2(pi q / L)``: value and slope vanish at both ends."""
    k = np.pi / length
    return FunctionProfile(lambda q: np.sin(k * q) ** 2,
                           lambda q: k * np.sin(2 * k * q),
                           lambda q: 2 * k * k * np.cos(2 * k * q))


def _quartic_bump(t):
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    v = np.where(inside, 16.0 * t * t * (1 - t) ** 2, 0.0)
    dv = np.where(inside, 32.0 * t * (1 - t) * (1 - 2 * t), 0.0)
    return v, dv


class ProblemData:
    """Initial data and forcing.

    ``eta0`` and ``eta1`` are projected onto the shell basis, so the
    displacement is exactly representable.  The initial velocity is a
    vortex below the tube plus the extension of ``eta1``, which makes the
    data compatible by construction.
    """

    def __init__(self, model: FlowModel, cfg: RunConfig):
        self.model, self.cfg = model, cfg
        geom, shell = model.geom, model.shell
        self.shape = clamped_shape(geom.length)
        unit = shell.project(self.shape)
        self.shape_coeffs = unit
        self.eta0 = cfg.eta0_amp * unit
        self.eta1 = cfg.eta1_amp * unit
        self.vortex_height = geom.height - geom.alpha
        self._ext = None

    # ------------------------------------------------------------------
    def eta0_field(self):
        return self.model.shell.function(self.eta0)

    def eta1_field(self):
        return self.model.shell.function(self.eta1)

    @property
    def extension_of_eta1(self):
        if self._ext is None:
            self._ext = extend(self.model.geom, self.eta0_field(), self.eta1_field(), self.model.lift)
        return self._ext

    def vortex(self, x) -> np.ndarray:
        """Divergence-free field ``curl psi`` with ``psi`` a product bump below the tube."""
        x = np.asarray(x, dtype=float)
        L, h, a = self.model.geom.length, self.vortex_height, self.cfg.vortex_amp
        bx, dbx = _quartic_bump(x[..., 0] / L)
        by, dby = _quartic_bump(x[..., 1] / h)
        return a * np.stack([bx * dby / h, -dbx * by / L], axis=-1)

    def u0(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = self.vortex(x) if self.cfg.vortex_amp else np.zeros(x.shape)
        if np.any(self.eta1):
            out = out + self.extension_of_eta1(x)
        return out

    def gap_field(self, x) -> np.ndarray:
        """Field used between the original and the regularized initial boundary."""
        x = np.asarray(x, dtype=float)
        if not np.any(self.eta1):
            return np.zeros(x.shape)
        return self.extension_of_eta1(x)

    # ------------------------------------------------------------------
    @property
    def has_forcing(self) -> bool:
        return bool(self.cfg.f_amp or self.cfg.g_amp)

    def f(self, t: float, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not self.cfg.f_amp:
            return np.zeros(x.shape)
        L = self.model.geom.length
        s = self.cfg.f_amp * np.sin(np.pi * t)
        return s * np.stack([np.sin(np.pi * x[..., 0] / L), 0.5 * np.cos(np.pi * x[..., 1])], axis=-1)

    def g(self, t: float, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if not self.cfg.g_amp:
            return np.zeros(q.shape)
        return self.cfg.g_amp * np.sin(np.pi * t) * self.shape.eval(q)

    def prescribed_delta(self, times) -> np.ndarray:
        """Shell coefficients of ``eta0 + delta_amp sin(pi t / T) shape`` at ``times``."""
        times = np.asarray(times, dtype=float)
        T = times[-1] if times[-1] > 0 else 1.0
        return self.eta0[None, :] + self.cfg.delta_amp * np.sin(np.pi * times / T)[:, None] * self.shape_coeffs[None, :]
