"""Projected gradient ascent over precoders for the weighted sum rate.

The objective is Monte Carlo based, so each outer iteration freezes one
noise pool and evaluates everything inside the iteration (objective,
gradients, line-search trials) against that pool.  Armijo comparisons
are then between deterministic numbers and the accepted weighted sum
rate can only increase within an iteration.  The pool is refreshed
between iterations so the precoders do not overfit a single noise draw,
and the final ranking of all starts uses one large fresh pool.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import PrecoderSet
from .errors import ValidationError
from .fixed_point import MacSystem, SolveOptions, WsrResult, wsr_objective
from .gradient import wsr_gradient
from .sampling import complex_normal, derived_int, rng_for

log = logging.getLogger(__name__)


@dataclass
class OptimizerConfig:
    """Knobs for the multi-start projected gradient ascent."""

    backtrack_theta: float = 0.1
    backtrack_omega: float = 0.5
    tol: float = 1e-4  # bits gained per outer sweep below which a start stops
    max_outer: int = 100
    c_threshold: float = 1e-8
    n_starts: int = 5
    seed: int = 0
    mc_objective: int = 500
    mc_gradient: int = 500
    mc_report: int = 5000
    fp_tol: float = 1e-6
    fp_max_iter: int = 200
    fp_damping: float = 0.5
    threads: int = 1

    def __post_init__(self):
        if not 0.0 < self.backtrack_theta < 0.5:
            raise ValidationError("backtrack_theta must lie in (0, 0.5)")
        if not 0.0 < self.backtrack_omega < 1.0:
            raise ValidationError("backtrack_omega must lie in (0, 1)")
        if self.tol <= 0 or self.c_threshold <= 0:
            raise ValidationError("tol and c_threshold must be positive")
        if self.max_outer < 1 or self.n_starts < 1 or self.threads < 1:
            raise ValidationError("max_outer, n_starts and threads must be >= 1")
        if min(self.mc_objective, self.mc_gradient, self.mc_report) < 1:
            raise ValidationError("Monte Carlo sample counts must be >= 1")

    def solve_options(self, n_noise: int, seed: int) -> SolveOptions:
        return SolveOptions(
            tol=self.fp_tol,
            max_iter=self.fp_max_iter,
            damping=self.fp_damping,
            n_noise=n_noise,
            seed=seed,
        )


@dataclass
class IterationRecord:
    """One outer iteration of one start, evaluated under a single pool."""

    iteration: int
    wsr_start: float
    wsr: float
    step_sizes: list
    trial_counts: list
    residual: float
    seconds: float


@dataclass
class StartRecord:
    """Full trajectory of one initialization."""

    index: int
    label: str
    records: list = field(default_factory=list)
    converged: bool = False
    final_wsr: float = 0.0
    report_wsr: float = 0.0
    report_residual: float = 0.0


@dataclass
class OptimizerTrace:
    """Everything the optimizer did, for reporting and tests."""

    starts: list = field(default_factory=list)
    baseline_report: float = 0.0
    best_start: int = -1  # -1 means the unoptimized baseline won the ranking
    best_label: str = "baseline"
    best_wsr: float = 0.0
    report_residual: float = 0.0
    converged: bool = False
    seconds: float = 0.0


# Relative slack on the power comparison; without it a freshly projected
# matrix can sit a few ulps above the budget and get rescaled again,
# breaking bitwise idempotence.
_PROJECT_TOL = 1e-12


def project_power(b: np.ndarray, p: float) -> np.ndarray:
    """Scale b back onto the power ball tr(B B^H) <= p; feasible inputs pass through."""
    if p <= 0:
        raise ValidationError("power budget must be positive")
    used = float(np.real(np.trace(b @ b.conj().T)))
    if used > p * (1.0 + _PROJECT_TOL):
        return b * np.sqrt(p / used)
    return b


def baseline_np(n_tx: int, p: float) -> np.ndarray:
    """Uniform full-power diagonal precoder sqrt(p / n_tx) * I."""
    if p <= 0:
        raise ValidationError("power budget must be positive")
    return np.sqrt(p / n_tx) * np.eye(n_tx, dtype=np.complex128)


def _full_power(b: np.ndarray, p: float) -> np.ndarray:
    used = float(np.real(np.trace(b @ b.conj().T)))
    if used <= 0:
        raise ValidationError("cannot scale a zero precoder to full power")
    return b * np.sqrt(p / used)


def backtrack_update(
    user: int,
    precoders: PrecoderSet,
    grad: np.ndarray,
    current: WsrResult,
    objective,
    config: OptimizerConfig,
):
    """Armijo backtracking for one user's precoder.

    Starting at unit step, the candidate precoder is the projection of
    B + u * grad; it is accepted when the objective improves by at least
    c = theta * u * ||grad||_F^2.  Once c falls below c_threshold the
    current precoder is kept.  `objective` maps (PrecoderSet, warm
    states) to a WsrResult under the iteration's frozen pool; trials
    whose fixed points fail to converge are rejected.

    Returns (precoders, accepted step, WsrResult, trial count).
    """
    gnorm2 = float(np.real(np.vdot(grad, grad)))
    u = 1.0
    trials = 0
    while True:
        c = config.backtrack_theta * u * gnorm2
        if c < config.c_threshold:
            return precoders, 0.0, current, trials
        candidate = project_power(
            precoders.matrices[user] + u * grad, precoders.powers[user]
        )
        trial_set = precoders.replace_matrix(user, candidate)
        trial = objective(trial_set, current.states)
        trials += 1
        solved = all(s is None or s.converged for s in trial.states)
        if solved and trial.value >= current.value + c:
            return trial_set, u, trial, trials
        u *= config.backtrack_omega


def _run_start(
    system: MacSystem,
    init: PrecoderSet,
    record: StartRecord,
    config: OptimizerConfig,
) -> PrecoderSet:
    """Iterate one start to convergence; mutates its StartRecord."""
    precoders = init
    warm = None
    current = None
    for n in range(1, config.max_outer + 1):
        tic = time.perf_counter()
        pool_seed = derived_int(config.seed, "pool", record.index, n)
        opts = config.solve_options(config.mc_objective, pool_seed)

        def objective(pset, warm_states):
            return wsr_objective(system, pset, opts, warm_states=warm_states)

        current = objective(precoders, warm)
        wsr_start = current.value
        if config.mc_gradient == config.mc_objective:
            grads = wsr_gradient(system, precoders, opts, result=current)
        else:
            gopts = config.solve_options(config.mc_gradient, pool_seed)
            grads = wsr_gradient(system, precoders, gopts)

        steps = []
        trial_counts = []
        for user in range(system.n_users):
            precoders, step, current, trials = backtrack_update(
                user, precoders, grads[user], current, objective, config
            )
            steps.append(step)
            trial_counts.append(trials)
        warm = current.states
        residual = max(
            (s.residual for s in current.states if s is not None), default=0.0
        )
        record.records.append(
            IterationRecord(
                iteration=n,
                wsr_start=wsr_start,
                wsr=current.value,
                step_sizes=steps,
                trial_counts=trial_counts,
                residual=residual,
                seconds=time.perf_counter() - tic,
            )
        )
        gain = current.value - wsr_start
        log.debug(
            "start %d iter %d: wsr %.6f (+%.2e bits)",
            record.index,
            n,
            current.value,
            gain,
        )
        if gain <= config.tol:
            record.converged = True
            break
    record.final_wsr = current.value if current is not None else 0.0
    return precoders


def optimize(
    system: MacSystem,
    powers,
    weights,
    config: OptimizerConfig,
    warm_start: PrecoderSet | None = None,
):
    """Multi-start weighted-sum-rate maximization over linear precoders.

    Starts: an optional warm start (scaled to the new budgets), the
    uniform diagonal baseline, then random full-power initializations up
    to n_starts.  Every start runs projected gradient ascent with
    backtracking; all resulting precoders plus the raw baseline are then
    re-evaluated under one large fresh pool and the best one is
    returned, so the result never ranks below the baseline under the
    reporting pool.

    Returns (PrecoderSet, OptimizerTrace).
    """
    tic = time.perf_counter()
    powers = [float(p) for p in powers]
    weights = [float(w) for w in weights]
    if len(powers) != system.n_users or len(weights) != system.n_users:
        raise ValidationError("powers and weights must match the user count")

    np_set = PrecoderSet(
        matrices=[
            baseline_np(stats.n_tx, p) for stats, p in zip(system.users, powers)
        ],
        powers=powers,
        weights=weights,
    )
    inits: list[tuple[str, PrecoderSet]] = []
    if warm_start is not None:
        mats = [
            _full_power(b, p) for b, p in zip(warm_start.matrices, powers)
        ]
        inits.append(
            ("warm", PrecoderSet(matrices=mats, powers=powers, weights=weights))
        )
    inits.append(("uniform", np_set))
    inits = inits[: config.n_starts]
    while len(inits) < config.n_starts:
        i = len(inits)
        rng = rng_for(config.seed, "init", i)
        mats = [
            _full_power(complex_normal(rng, (stats.n_tx, stats.n_tx)), p)
            for stats, p in zip(system.users, powers)
        ]
        inits.append(
            (f"random-{i}", PrecoderSet(matrices=mats, powers=powers, weights=weights))
        )

    records = [
        StartRecord(index=i, label=label) for i, (label, _) in enumerate(inits)
    ]
    if config.threads > 1 and len(inits) > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            finals = list(
                pool.map(
                    lambda args: _run_start(system, args[0][1], args[1], config),
                    zip(inits, records),
                )
            )
    else:
        finals = [
            _run_start(system, init, rec, config)
            for (_, init), rec in zip(inits, records)
        ]

    report_opts = config.solve_options(
        config.mc_report, derived_int(config.seed, "report")
    )

    def _residual(res: WsrResult) -> float:
        return max((s.residual for s in res.states if s is not None), default=0.0)

    for rec, pset in zip(records, finals):
        res = wsr_objective(system, pset, report_opts)
        rec.report_wsr = res.value
        rec.report_residual = _residual(res)
    baseline_res = wsr_objective(system, np_set, report_opts)
    baseline_report = baseline_res.value

    best = int(np.argmax([rec.report_wsr for rec in records]))
    trace = OptimizerTrace(
        starts=records,
        baseline_report=baseline_report,
        seconds=time.perf_counter() - tic,
    )
    if baseline_report > records[best].report_wsr:
        trace.best_start = -1
        trace.best_label = "baseline"
        trace.best_wsr = baseline_report
        trace.report_residual = _residual(baseline_res)
        trace.converged = True
        return np_set, trace
    trace.best_start = best
    trace.best_label = records[best].label
    trace.best_wsr = records[best].report_wsr
    trace.report_residual = records[best].report_residual
    trace.converged = records[best].converged
    if not any(rec.converged for rec in records):
        log.warning("no start reached the tolerance; returning best effort")
    return finals[best], trace
