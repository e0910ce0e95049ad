"""Batch experiment harness.

Loads a problem from a JSON config, runs the requested solver, and
writes ``trace.csv`` (17-significant-digit columns, byte-stable for a
fixed config and seed), ``certificates.json``, and ``summary.txt``.
Exit status is 0 exactly when every emitted certificate passes.

``--compare`` runs both recursions from the mapped initialization and
certifies their lockstep agreement instead of a single solver.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .applications import (build_least_gradient_problem, build_tv_problem,
                           make_least_gradient_instance, make_tv_instance)
from .asb import (SplitProblem, asb_iterate, asb_iterate_approx, dual_resolvents,
                  initial_state, run_drs)
from .diagnostics import (Certificate, RunTrace, certificates_to_json, dual_certificate,
                          duality_gap, equivalence_report, primal_recovery_check)
from .drs import StoppingRule, inclusion_defect
from .functionals import (functional_from_label, geometric_schedule, harmonic_schedule,
                          prox_l1, prox_quadratic, zero_schedule)
from .linops import identity_operator, load_matrix_csv, matrix_operator
from .oracles import (interior_stationarity_defect, soft_threshold_optimum,
                      taut_string_denoise, taut_string_dirichlet, tv_dual_solve)

__all__ = ["ConfigError", "RunConfig", "SummaryRow", "parse_config", "run",
           "compare_solvers", "main"]

PROBLEMS = ("lasso", "tv1d", "tv2d", "least_gradient", "custom_matrix")
SOLVERS = ("asb", "drs", "asb_approx")
OUTPUT_KINDS = ("trace_csv", "certificates_json", "summary")

_COMMON_KEYS = {"lambda", "tol", "max_iter", "seed", "schedule",
                "allow_nonsummable", "debug_drs_lambda"}
_PROBLEM_KEYS = {
    "lasso": {"n", "y", "mu"},
    "tv1d": {"grid_shape", "spacing", "noise_sigma", "boundary", "mu"},
    "tv2d": {"grid_shape", "spacing", "noise_sigma", "boundary", "mu"},
    "least_gradient": {"grid_shape", "spacing", "conductivity", "inclusion", "axis"},
    "custom_matrix": {"matrix_csv", "g", "f"},
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    problem: str
    solver: str
    params: dict
    outputs: tuple


@dataclass(frozen=True)
class SummaryRow:
    instance_id: str
    iterations: int
    final_residual: float
    final_energy: float
    duality_gap: float
    certificates_passed: int
    certificates_total: int
    wall_time: float

    def line(self) -> str:
        return (
            f"instance={self.instance_id} iterations={self.iterations} "
            f"final_residual={self.final_residual:.6e} final_energy={self.final_energy:.12e} "
            f"duality_gap={self.duality_gap:.6e} "
            f"certificates={self.certificates_passed}/{self.certificates_total} "
            f"wall_time={self.wall_time:.3f}s"
        )


def parse_config(payload: dict) -> RunConfig:
    """Validate the config document; unknown keys are rejected."""
    allowed_top = {"problem", "solver", "params", "outputs"}
    for key in payload:
        if key not in allowed_top:
            raise ConfigError(f"unknown config key {key!r}")
    problem = payload.get("problem")
    if problem not in PROBLEMS:
        raise ConfigError(f"key 'problem' must be one of {PROBLEMS}, got {problem!r}")
    solver = payload.get("solver", "asb")
    if solver not in SOLVERS:
        raise ConfigError(f"key 'solver' must be one of {SOLVERS}, got {solver!r}")
    params = dict(payload.get("params", {}))
    allowed = _COMMON_KEYS | _PROBLEM_KEYS[problem]
    for key in params:
        if key not in allowed:
            raise ConfigError(f"unknown params key {key!r} for problem {problem!r}")
    lam = float(params.get("lambda", 1.0))
    if not lam > 0:
        raise ConfigError(f"key 'lambda' must be positive, got {lam}")
    max_iter = int(params.get("max_iter", 100_000))
    if max_iter < 0:
        raise ConfigError(f"key 'max_iter' must be >= 0, got {max_iter}")
    tol = params.get("tol", 1e-9)
    if tol is not None and float(tol) < 0:
        raise ConfigError(f"key 'tol' must be nonnegative or null, got {tol}")
    sched = params.get("schedule")
    if sched is not None:
        _parse_schedule(sched, bool(params.get("allow_nonsummable", False)))
    outputs = tuple(payload.get("outputs", OUTPUT_KINDS))
    for out in outputs:
        if out not in OUTPUT_KINDS:
            raise ConfigError(f"unknown output kind {out!r}")
    return RunConfig(problem=problem, solver=solver, params=params, outputs=outputs)


def _parse_schedule(spec: dict, allow_nonsummable: bool):
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError("key 'schedule' must be an object with a 'type'")
    kind = spec["type"]
    extra = set(spec) - {"type", "ratio", "scale"}
    if extra:
        raise ConfigError(f"unknown schedule keys {sorted(extra)}")
    if kind == "geometric":
        return geometric_schedule(float(spec.get("ratio", 0.5)), float(spec.get("scale", 1.0)))
    if kind == "zero":
        return zero_schedule()
    if kind == "harmonic":
        if not allow_nonsummable:
            raise ConfigError(
                "key 'schedule': harmonic magnitudes are not summable; "
                "set 'allow_nonsummable' to run this negative control anyway"
            )
        return harmonic_schedule(float(spec.get("scale", 1.0)))
    raise ConfigError(f"unknown schedule type {kind!r}")


def _build_problem(config: RunConfig):
    """Returns (problem, instance_id, oracle) with oracle possibly None.

    ``oracle(problem)`` must return the independently computed optimal
    value of the instance.
    """
    p = config.params
    lam = float(p.get("lambda", 1.0))
    seed = int(p.get("seed", 0))

    if config.problem == "lasso":
        n = int(p.get("n", 10))
        mu = float(p.get("mu", 1.0))
        if "y" in p:
            y = np.asarray(p["y"], dtype=float)
            n = y.shape[0]
        else:
            y = 2.0 * np.random.default_rng(seed).standard_normal(n)
        problem = SplitProblem(g=prox_quadratic(y, 1.0), f=prox_l1(mu, dim=n),
                               L=identity_operator(n), lam=lam)

        def oracle(prob):
            u_star = soft_threshold_optimum(y, mu)
            return prob.g.value(u_star) + prob.f.value(prob.L.apply(u_star))

        return problem, f"lasso_n{n}_seed{seed}", oracle

    if config.problem in ("tv1d", "tv2d"):
        default_shape = (32,) if config.problem == "tv1d" else (16, 16)
        shape = tuple(p.get("grid_shape", default_shape))
        inst = make_tv_instance(shape=shape, mu=float(p.get("mu", 0.15)), seed=seed,
                                noise_sigma=p.get("noise_sigma"),
                                spacing=p.get("spacing", 1.0))
        boundary = p.get("boundary", "dirichlet")
        problem = build_tv_problem(inst, lam=lam, boundary=boundary)
        shape_id = "x".join(str(s) for s in shape)

        if config.problem == "tv1d":
            def oracle(prob):
                h = inst.grid.spacing[0]
                mu_eff = inst.mu / h
                if boundary == "dirichlet":
                    u_star = taut_string_dirichlet(inst.noisy_signal, mu_eff)
                else:
                    u_star = taut_string_denoise(inst.noisy_signal, mu_eff)
                return prob.g.value(u_star) + prob.f.value(prob.L.apply(u_star))
        else:
            def oracle(prob):
                return tv_dual_solve(prob, gap_tol=1e-10).primal_value

        return problem, f"{config.problem}_{shape_id}_seed{seed}", oracle

    if config.problem == "least_gradient":
        shape = tuple(p.get("grid_shape", (16, 16)))
        kind = p.get("conductivity", "linear")
        inst = make_least_gradient_instance(shape=shape, kind=kind,
                                            spacing=p.get("spacing", 1.0),
                                            inclusion=float(p.get("inclusion", 2.0)),
                                            axis=int(p.get("axis", 0)))
        problem = build_least_gradient_problem(inst, lam=lam)
        shape_id = "x".join(str(s) for s in shape)

        def oracle(prob):
            # u_true is certified optimal when the dual-field stationarity
            # defect vanishes; otherwise no independent value exists here.
            defect = interior_stationarity_defect(prob, inst.u_true)
            if defect <= 1e-10:
                return prob.g.value(inst.u_true) + prob.f.value(prob.L.apply(inst.u_true))
            return None

        return problem, f"least_gradient_{kind}_{shape_id}", oracle

    # custom_matrix
    try:
        entries = load_matrix_csv(p["matrix_csv"])
    except KeyError:
        raise ConfigError("custom_matrix requires key 'matrix_csv'")
    L = matrix_operator(entries)
    g_spec = dict(p.get("g", {"label": "quadratic"}))
    f_spec = dict(p.get("f", {"label": "l1"}))
    g = functional_from_label(g_spec.pop("label"), L.domain_dim, g_spec)
    f = functional_from_label(f_spec.pop("label"), L.codomain_dim, f_spec)
    problem = SplitProblem(g=g, f=f, L=L, lam=lam)
    return problem, f"custom_{L.domain_dim}x{L.codomain_dim}", None


def _dual_value(problem: SplitProblem, b_hat: np.ndarray) -> float:
    beta = problem.lam * b_hat
    return -(problem.g.conjugate_value(-problem.L.adjoint_apply(beta))
             + problem.f.conjugate_value(beta))


def _stopping(config: RunConfig) -> StoppingRule:
    p = config.params
    tol = p.get("tol", 1e-9)
    return StoppingRule(tol=None if tol is None else float(tol),
                        max_iter=int(p.get("max_iter", 100_000)))


def write_trace_csv(path, trace: RunTrace) -> None:
    with open(path, "w") as fh:
        fh.write("k,residual,energy,setzer_defect,x_increment\n")
        for j in range(trace.n_iter):
            fh.write(
                f"{j + 1},{trace.residuals[j]:.17g},{trace.energies[j]:.17g},"
                f"{trace.setzer_defects[j]:.17g},{trace.x_increments[j]:.17g}\n"
            )


def _certificates_for_run(config: RunConfig, problem: SplitProblem, trace: RunTrace,
                          oracle) -> list:
    final = trace.final
    lam = problem.lam
    certs = [dual_certificate(problem, final.b, final.d, tol=1e-7)]

    if oracle is not None:
        v_star = oracle(problem)
    else:
        v_star = None
    if v_star is None:
        v_star = _dual_value(problem, final.b)
        details_src = "reference value: weak-duality bound at the converged dual point"
    else:
        details_src = "reference value: independent oracle"
    cert_primal = primal_recovery_check(problem, final.u, final.d, v_star, tol=1e-6)
    certs.append(Certificate(kind=cert_primal.kind, defect=cert_primal.defect,
                             tolerance=cert_primal.tolerance, passed=cert_primal.passed,
                             details=f"{cert_primal.details}; {details_src}"))

    pair = dual_resolvents(problem)
    certs.append(Certificate.from_defect(
        "inclusion", inclusion_defect(pair, final.x, final.p, lam), 1e-7,
        details="resolvent residuals of the optimality inclusion at (x, p)"))

    if config.solver != "asb_approx":
        k_cmp = min(trace.n_iter, 200)
        certs.append(_equivalence_certificate(config, problem, k_cmp))
    return certs


def _equivalence_certificate(config: RunConfig, problem: SplitProblem, n_iters: int,
                             tol: float = 1e-9) -> Certificate:
    stop = StoppingRule(tol=None, max_iter=n_iters)
    init = initial_state(problem)
    trace_a = asb_iterate(problem, init=init, stop=stop, record_stride=1)
    lam_dbg = config.params.get("debug_drs_lambda")
    trace_d = run_drs(problem, init=init, stop=stop, record_stride=1,
                      lam_override=None if lam_dbg is None else float(lam_dbg))
    return equivalence_report(trace_a, trace_d, problem.lam, tol=tol)


def run(config: RunConfig, out_dir) -> int:
    """Execute one solver run; write artifacts; exit 0 iff all certificates pass."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    problem, instance_id, oracle = _build_problem(config)
    stop = _stopping(config)
    t0 = time.perf_counter()
    if config.solver == "asb":
        trace = asb_iterate(problem, stop=stop)
    elif config.solver == "drs":
        trace = run_drs(problem, stop=stop)
    else:
        schedule = _parse_schedule(config.params.get("schedule", {"type": "geometric", "ratio": 0.5}),
                                   bool(config.params.get("allow_nonsummable", False)))
        trace = asb_iterate_approx(problem, schedule, stop=stop,
                                   seed=int(config.params.get("seed", 0)))
    wall = time.perf_counter() - t0

    certs = _certificates_for_run(config, problem, trace, oracle)
    gap = duality_gap(problem, trace.final.u, problem.lam * trace.final.b)
    row = SummaryRow(
        instance_id=f"{instance_id}_{config.solver}",
        iterations=trace.n_iter,
        final_residual=float(trace.residuals[-1]) if trace.n_iter else 0.0,
        final_energy=float(trace.energies[-1]) if trace.n_iter else float("nan"),
        duality_gap=gap,
        certificates_passed=sum(c.passed for c in certs),
        certificates_total=len(certs),
        wall_time=wall,
    )
    _emit(config, out, row, certs, {"trace.csv": trace})
    return 0 if all(c.passed for c in certs) else 1


def compare_solvers(config: RunConfig, out_dir) -> int:
    """Run both recursions from the mapped initialization; certify agreement."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    problem, instance_id, _oracle = _build_problem(config)
    n_iters = min(int(config.params.get("max_iter", 200)), 200)
    stop = StoppingRule(tol=None, max_iter=n_iters)
    init = initial_state(problem)
    t0 = time.perf_counter()
    trace_a = asb_iterate(problem, init=init, stop=stop, record_stride=1)
    lam_dbg = config.params.get("debug_drs_lambda")
    trace_d = run_drs(problem, init=init, stop=stop, record_stride=1,
                      lam_override=None if lam_dbg is None else float(lam_dbg))
    wall = time.perf_counter() - t0
    cert = equivalence_report(trace_a, trace_d, problem.lam, tol=1e-9)
    row = SummaryRow(
        instance_id=f"{instance_id}_compare",
        iterations=n_iters,
        final_residual=float(trace_a.residuals[-1]) if n_iters else 0.0,
        final_energy=float(trace_a.energies[-1]) if n_iters else float("nan"),
        duality_gap=cert.defect,
        certificates_passed=int(cert.passed),
        certificates_total=1,
        wall_time=wall,
    )
    _emit(config, out, row, [cert], {"trace_asb.csv": trace_a, "trace_drs.csv": trace_d})
    return 0 if cert.passed else 1


def _emit(config: RunConfig, out: Path, row: SummaryRow, certs, traces: dict) -> None:
    if "trace_csv" in config.outputs:
        for name, trace in traces.items():
            write_trace_csv(out / name, trace)
    if "certificates_json" in config.outputs:
        (out / "certificates.json").write_text(certificates_to_json(certs))
    if "summary" in config.outputs:
        (out / "summary.txt").write_text(row.line() + "\n")
    print(row.line())


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="splitbreg",
        description="Run splitting-solver experiments from a JSON config.",
    )
    parser.add_argument("--config", required=True, help="path to the JSON run config")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--solver", choices=SOLVERS, help="override config solver")
    parser.add_argument("--compare", action="store_true",
                        help="run both solvers and certify their equivalence")
    parser.add_argument("--seed", type=int, help="override config seed")
    parser.add_argument("--max-iter", type=int, help="override config max_iter")
    parser.add_argument("--tol", type=float, help="override config tol")
    args = parser.parse_args(argv)

    try:
        payload = json.loads(Path(args.config).read_text())
        if args.solver:
            payload["solver"] = args.solver
        params = payload.setdefault("params", {})
        if args.seed is not None:
            params["seed"] = args.seed
        if args.max_iter is not None:
            params["max_iter"] = args.max_iter
        if args.tol is not None:
            params["tol"] = args.tol
        config = parse_config(payload)
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.compare:
            return compare_solvers(config, args.out)
        return run(config, args.out)
    except Exception as exc:  # solver-level failure: report and signal
        print(f"run failed: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
