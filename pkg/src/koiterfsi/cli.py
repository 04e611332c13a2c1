"""Command line front end.

Exit status: 0 success, 2 configuration or input error, 3 numerical failure,
4 invariant violation.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import read_checkpoint, write_checkpoint
from .config import RunConfig, load_config
from .coupled import (CoupledProblem, DecoupledResult, PicardResult, epsilon_continuation,
                      picard_couple, solve_decoupled)
from .errors import ConfigurationError, InvariantViolation, KoiterFSIError, SolverFailure
from .output import provenance, write_shell_trace, write_snapshots, write_summary
from .suite import identity_suite
from .verification import (checkpoint_config, make_checkpoint, picard_iterate, resume_point,
                           verify_checkpoint)

MODES = ("identity-suite", "decoupled", "coupled", "continuation", "verify")
GROENWALL_SLACK = 0.02
log = logging.getLogger("koiterfsi")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="koiterfsi", description=__doc__.splitlines()[0])
    p.add_argument("--config", type=Path, help="INI configuration (defaults are used without it)")
    p.add_argument("--mode", choices=MODES, required=True)
    p.add_argument("--checkpoint", type=Path,
                   help="checkpoint to verify (verify mode) or to resume from (other modes)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--seed", type=int, help="unsigned 64-bit seed overriding [run] seed")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


class Run:
    def __init__(self, cfg: RunConfig, out: Path, mode: str, checkpoint: Path | None):
        self.cfg, self.out, self.mode, self.checkpoint = cfg, out, mode, checkpoint
        self.problem: CoupledProblem | None = None
        self.eps_schedule: list[float] = []

    # ------------------------------------------------------------------
    def execute(self) -> int:
        self.out.mkdir(parents=True, exist_ok=True)
        return getattr(self, "_" + self.mode.replace("-", "_"))()

    def _problem(self) -> CoupledProblem:
        if self.problem is None:
            self.problem = CoupledProblem(self.cfg)
        return self.problem

    def _resume(self):
        if self.checkpoint is None:
            return None
        ckpt = read_checkpoint(self.checkpoint)
        stored = checkpoint_config(ckpt)
        if stored.digest() != self.cfg.digest():
            raise ConfigurationError(f"{self.checkpoint}: checkpoint was written for a different configuration "
                                     f"(sha256 {stored.digest()[:12]} vs {self.cfg.digest()[:12]})")
        return ckpt

    # ------------------------------------------------------------------
    def _identity_suite(self) -> int:
        rep = identity_suite(self.cfg.seed)
        lines = rep.lines()
        (self.out / "identity_report.txt").write_text("\n".join(lines) + "\n")
        print("\n".join(lines))
        self.eps_schedule = []
        write_summary(self.out / "summary.txt", {
            "provenance": provenance(self._problem(), self.mode, []),
            "result": {"checks": len(rep.checks), "failed": sum(not c.passed for c in rep.checks),
                       "passed": rep.passed},
        })
        return 0 if rep.passed else InvariantViolation.exit_code

    def _decoupled(self) -> int:
        pb = self._problem()
        ckpt = self._resume()
        eps = pb.epsilon()
        self.eps_schedule = [eps]
        delta = pb.prescribed_delta() if self.cfg.delta_amp else pb.initial_delta()
        start = resume_point(ckpt) if ckpt is not None else None
        res = solve_decoupled(pb, delta, None, eps, start=start)
        ok = res.ledger.groenwall_ok(GROENWALL_SLACK)
        self._write_solution(pb, res, eps, {"groenwall_ok": ok})
        return self._verdict(ok, "the energy exceeds the Groenwall envelope")

    def _coupled(self) -> int:
        pb = self._problem()
        ckpt = self._resume()
        eps = pb.epsilon()
        self.eps_schedule = [eps]
        initial = picard_iterate(ckpt, pb) if ckpt is not None else None
        res = picard_couple(pb, eps, initial=initial)
        self._write_picard(res)
        ok = res.solution.ledger.groenwall_ok(GROENWALL_SLACK)
        extra = self._picard_items(res)
        extra["groenwall_ok"] = ok
        self._write_solution(pb if res.horizon == pb.T else pb.with_steps(len(res.solution.times) - 1),
                             res.solution, eps, extra, res)
        if not res.converged:
            self._report_failure(SolverFailure(res.message), None)
            return SolverFailure.exit_code
        return self._verdict(ok, "the energy exceeds the Groenwall envelope")

    def _continuation(self) -> int:
        pb = self._problem()
        cont = epsilon_continuation(pb)
        self.eps_schedule = [lv.eps for lv in cont.levels]
        table = cont.table()
        with open(self.out / "continuation.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(table[0]))
            w.writeheader()
            for row in table:
                w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
        de, du = cont.differences()
        monotone = bool(len(de) >= 2 and np.all(np.diff(de) < 0) and np.all(np.diff(du) < 0))
        extra = {"levels": len(cont.levels), "complete": cont.complete, "monotone_differences": monotone,
                 "groenwall_ok_all": all(lv.groenwall_ok for lv in cont.levels if lv.picard is not None),
                 "min_gap_all": min((lv.min_gap for lv in cont.levels if lv.picard is not None), default=np.nan)}
        final = cont.final
        if final is not None:
            if self.cfg.plot:
                from .plotting import plot_continuation
                plot_continuation(cont.levels, self.out / "continuation.png")
            self._write_solution(pb, final.solution, final.solution.eps, extra, final)
        else:
            self._summary({"result": extra})
        for row in table:
            print(f"level {row['level']}: eps={row['eps']:.4g} iterations={row['iterations']} "
                  f"diff_eta={row['diff_eta']:.3e} diff_u={row['diff_u']:.3e} "
                  f"groenwall_ratio={row['groenwall_ratio']:.4f} {row['failure']}")
        if not cont.complete:
            last = cont.levels[-1]
            self._report_failure(SolverFailure(last.failure or "continuation stopped"), None)
            return SolverFailure.exit_code
        return self._verdict(extra["groenwall_ok_all"], "a level exceeds its Groenwall envelope")

    def _verify(self) -> int:
        if self.checkpoint is None:
            raise ConfigurationError("--mode verify needs --checkpoint")
        ckpt = read_checkpoint(self.checkpoint)
        self.cfg = checkpoint_config(ckpt)
        checks = verify_checkpoint(ckpt, CoupledProblem(self.cfg))
        lines = [c.line() for c in checks]
        (self.out / "verify_report.txt").write_text("\n".join(lines) + "\n")
        print("\n".join(lines))
        return 0 if all(c.passed for c in checks) else InvariantViolation.exit_code

    # ------------------------------------------------------------------
    def _verdict(self, ok: bool, message: str) -> int:
        if ok:
            return 0
        self._report_failure(InvariantViolation(message), None)
        return InvariantViolation.exit_code

    def _picard_items(self, res: PicardResult) -> dict:
        out = {"converged": res.converged, "iterations": res.iterations, "bisections": res.bisections,
               "horizon": res.horizon}
        if res.self_consistency is not None:
            out["self_consistency"] = res.self_consistency
        if res.history:
            out["final_difference"] = res.history[-1]
        return out

    def _write_picard(self, res: PicardResult) -> None:
        with open(self.out / "picard.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "difference"])
            for i, h in enumerate(res.history, start=1):
                w.writerow([i, repr(float(h))])
        if self.cfg.plot and res.history:
            from .plotting import plot_picard
            plot_picard(res.history, self.out / "picard.png")

    def _summary(self, blocks: dict) -> None:
        pb = self._problem()
        write_summary(self.out / "summary.txt", {"provenance": provenance(pb, self.mode, self.eps_schedule), **blocks})

    def _write_solution(self, pb: CoupledProblem, res: DecoupledResult, eps: float, extra: dict,
                        picard: PicardResult | None = None) -> None:
        out = self.out
        res.ledger.write_csv(out / "ledger.csv")
        q = write_shell_trace(out / "shell_trace.csv", pb, res.times, res.eta.coeffs, res.shell_velocity)
        write_snapshots(out / "snapshots", pb, res.times, res.z, res.geometry, res.pressure)
        if self.cfg.plot:
            from .plotting import plot_energy
            plot_energy(res.ledger, out / "energy.png", f"{self.mode}, eps = {eps:.3g}")
        from .coupled import PicardIterate
        iterate = None
        if picard is not None:
            iterate = PicardIterate(picard.iterations, picard.delta, picard.velocity, list(picard.history))
        final = res.final_state()
        ck = make_checkpoint(pb, self.mode, final, len(res.times) - 1, res.ledger, eps,
                             picard.iterations if picard else 0, iterate)
        write_checkpoint(out / "checkpoint.kfsi", ck)
        led = res.ledger
        result = {
            "eps": eps, "E0": led.E0, "E_final": led.rows[-1][5], "groenwall_ratio": led.groenwall_ratio(),
            "drift_rate": led.drift_rate(), "max_abs_defect": float(np.max(np.abs(led.column("defect")))),
            "max_divergence_residual": res.residuals["divergence"],
            "max_trace_residual": res.residuals["trace"],
            "max_solve_residual": res.residuals["solve_residual"],
            "min_initial_gap": res.adapted.min_gap,
            "sup_eta": float(max(pb.model.shell_sup(d) for d in res.eta.coeffs)),
            "trace_q": ",".join(repr(float(v)) for v in q),
            **extra,
        }
        norms = {k: float(v) for k, v in res.adapted.norms.items()}
        self._summary({"result": result, "initial_data": norms})
        for k, v in result.items():
            print(f"{k} = {v}")

    def _report_failure(self, exc: BaseException, tb: str | None) -> None:
        lines = [f"mode = {self.mode}", f"error = {type(exc).__name__}", f"message = {exc}",
                 f"exit_code = {getattr(exc, 'exit_code', 3)}"]
        partial = getattr(exc, "partial", None)
        iterate = getattr(exc, "iterate", None)
        if partial is not None and self.problem is not None:
            eps = self.eps_schedule[-1] if self.eps_schedule else self.problem.epsilon()
            ck = make_checkpoint(self.problem, self.mode, partial.state, partial.index, partial.ledger, eps,
                                 iterate.iteration if iterate else 0, iterate, status="failed")
            path = write_checkpoint(self.out / "checkpoint_failed.kfsi", ck)
            lines += [f"checkpoint = {path}", f"last_time = {partial.state.t!r}",
                      f"last_step = {partial.index}"]
        if tb:
            lines += ["", tb]
        (self.out / "failure_report.txt").write_text("\n".join(lines) + "\n")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.seed is not None:
            cfg = cfg.replace(seed=args.seed)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return exc.exit_code
    run = Run(cfg, args.out, args.mode, args.checkpoint)
    try:
        return run.execute()
    except KoiterFSIError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        try:
            args.out.mkdir(parents=True, exist_ok=True)
            run._report_failure(exc, traceback.format_exc())
        except Exception as inner:  # the report must not mask the original failure
            print(f"could not write the failure report: {inner}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
