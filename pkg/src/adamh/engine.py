"""Metropolis-Hastings driver: the accept/reject loop, two-stage adaptation
control, update schedules, the stage-1 safety rule and history recording."""
from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .mixfit import fit_mixture
from .proposals import (ImhMnState, ImhTctState, RwState, imh_mn_adapt,
                        imh_mn_logpdf, imh_mn_propose, imh_mn_stage_transition,
                        imh_tct_adapt, imh_tct_logpdf, imh_tct_propose,
                        make_rw_state, make_tct_state, rw_propose,
                        update_running_moments)

SAMPLERS = ("rwm", "rwm3c", "imh_mn", "imh_tct", "imh_tct_anti")

_SAFETY_WINDOW = 100  # stage-1 rule: adapt if <1 acceptance in 100 iterations


@dataclass
class RunConfig:
    target: object
    sampler: str
    iterations: int
    burn_in: int
    seed: int
    stage1_end: int = 0
    schedule: tuple = ()
    x0: np.ndarray | None = None
    n0: int | None = None
    kappa3: float = 25.0
    prelim_iterations: int = 1000
    label: str = ""

    def __post_init__(self):
        if self.sampler not in SAMPLERS:
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must be smaller than iterations")
        sched = tuple(int(s) for s in self.schedule)
        if any(b <= a for a, b in zip(sched, sched[1:])):
            raise ValueError("schedule must be strictly ascending")
        if sched and sched[-1] > self.iterations:
            raise ValueError("schedule points must not exceed iterations")
        if self.stage1_end > self.burn_in:
            raise ValueError("stage1_end must not exceed burn_in")
        self.schedule = sched


@dataclass
class ChainHistory:
    names: list
    iterates: np.ndarray       # (iterations, d)
    accepted: np.ndarray       # bool
    log_target: np.ndarray
    times: np.ndarray          # seconds per iteration
    events: list = field(default_factory=list)  # (iteration, str)


class _RwDriver:
    independence = False

    def __init__(self, st: RwState):
        self.st = st

    def propose(self, x, n, rng):
        return rw_propose(x, self.st, n, rng), 0.0

    def logq(self, x):
        return 0.0

    def post_step(self, x):
        update_running_moments(self.st, x)

    def adapt(self, history, accepted_count, rng):
        return True  # covariance adapts continuously through the moments

    def stage_transition(self):
        pass


class _MnDriver:
    independence = True

    def __init__(self, st: ImhMnState):
        self.st = st

    def propose(self, x, n, rng):
        z = imh_mn_propose(self.st, rng)
        return z, imh_mn_logpdf(z, self.st)

    def logq(self, x):
        return imh_mn_logpdf(x, self.st)

    def post_step(self, x):
        pass

    def adapt(self, history, accepted_count, rng):
        return imh_mn_adapt(self.st, history, accepted_count, rng)

    def stage_transition(self):
        imh_mn_stage_transition(self.st)


class _TctDriver:
    independence = True

    def __init__(self, st: ImhTctState):
        self.st = st

    def propose(self, x, n, rng):
        return imh_tct_propose(x, self.st, rng)

    def logq(self, x):
        return imh_tct_logpdf(x, self.st)

    def post_step(self, x):
        pass

    def adapt(self, history, accepted_count, rng):
        return imh_tct_adapt(self.st, history, rng)

    def stage_transition(self):
        pass


def mh_step(x, logpi_x, driver, target, rng, n=1):
    """One accept/reject step; returns (x_next, accepted, logpi_next, logq_next)."""
    z, logq_z = driver.propose(x, n, rng)
    logpi_z = target.logpdf(z, rng)
    if not np.isfinite(logpi_z):
        return x, False, logpi_x, None
    log_alpha = logpi_z - logpi_x
    if driver.independence and logq_z is not None:
        log_alpha += driver.logq(x) - logq_z
    if log_alpha >= 0.0 or np.log(rng.random()) < log_alpha:
        return z, True, logpi_z, logq_z
    return x, False, logpi_x, None


def _run_prelim_rw3c(target, x0, config, rng):
    """Short three-component random-walk run used to seed the independence
    proposals (initial estimate of the target)."""
    n_iter = max(config.prelim_iterations, 10 * target.dim)
    st = make_rw_state(target.dim, three_component=True,
                       n0=min(100 * target.dim, n_iter // 4),
                       kappa3=config.kappa3 if config.sampler == "rwm3c" else 25.0)
    driver = _RwDriver(st)
    x = np.asarray(x0, float).copy()
    logpi = target.logpdf(x, rng)
    if not np.isfinite(logpi):
        raise RuntimeError("target evaluation failed at the starting point")
    out = np.empty((n_iter, target.dim))
    for n in range(1, n_iter + 1):
        x, _, logpi, _ = mh_step(x, logpi, driver, target, rng, n)
        driver.post_step(x)
        out[n - 1] = x
    return out


def _make_driver(config, target, x, rng):
    """Build the proposal driver; independence samplers are seeded from a
    preliminary run.  Returns (driver, start point)."""
    if config.sampler in ("rwm", "rwm3c"):
        st = make_rw_state(target.dim, config.sampler == "rwm3c",
                           n0=config.n0, kappa3=config.kappa3)
        return _RwDriver(st), x
    prelim = _run_prelim_rw3c(target, x, config, rng)
    if config.sampler == "imh_mn":
        st = ImhMnState(stage=1, g1=fit_mixture(prelim, 1, rng))
        return _MnDriver(st), prelim[-1]
    st = make_tct_state(prelim, rng,
                        antithetic=(config.sampler == "imh_tct_anti"))
    return _TctDriver(st), prelim[-1]


def run_chain(config: RunConfig) -> ChainHistory:
    """Run one chain; deterministic (bit-identical history) under a fixed seed."""
    rng = np.random.default_rng(config.seed)
    target = config.target
    d = target.dim
    x = np.asarray(config.x0, float) if config.x0 is not None else target.start()

    events = []
    driver, x = _make_driver(config, target, x, rng)
    logpi_x = target.logpdf(x, rng)
    if not np.isfinite(logpi_x):
        raise RuntimeError("target evaluation failed at the starting point")

    it = config.iterations
    iterates = np.empty((it, d))
    accepted = np.zeros(it, dtype=bool)
    log_target = np.empty(it)
    times = np.empty(it)

    schedule_set = set(config.schedule)
    stage = 1 if config.stage1_end > 0 else 2
    accepted_count = 0
    window_start = 0
    accepted_in_window = 0
    accepted_thetas: list = []
    last_refresh_counter = 0
    stochastic = getattr(target, "stochastic", False)

    for n in range(1, it + 1):
        t0 = time.perf_counter()
        x, acc, logpi_x, _ = mh_step(x, logpi_x, driver, target, rng, n)
        if acc:
            accepted_count += 1
            accepted_in_window += 1
            if stochastic:
                accepted_thetas.append(x)
        iterates[n - 1] = x
        accepted[n - 1] = acc
        log_target[n - 1] = logpi_x
        driver.post_step(x)

        due = n in schedule_set
        if due:
            events.append((n, "update"))
        if (driver.independence and stage == 1
                and n - window_start >= _SAFETY_WINDOW and accepted_in_window < 1):
            due = True
            events.append((n, "safety_rule"))
        if due and driver.independence:
            start = config.stage1_end if stage == 2 else 0
            history = iterates[start:n]
            if history.shape[0] > 0:
                if not driver.adapt(history, accepted_count, rng):
                    events.append((n, "fit_failure"))
        if due:
            window_start = n
            accepted_in_window = 0

        if n == config.stage1_end and config.stage1_end > 0:
            driver.stage_transition()
            stage = 2
            events.append((n, "stage_transition"))

        if stochastic:
            interval = target.state.refresh_interval
            counter = accepted_count if target.refresh_by == "accepted" else n
            if counter - last_refresh_counter >= interval and accepted_count >= 1:
                recent = (accepted_thetas[-interval:]
                          if target.refresh_by == "accepted"
                          else list(iterates[max(0, n - interval):n]))
                target.refresh(recent, rng)
                logpi_x = target.logpdf(x, rng)
                last_refresh_counter = counter
                events.append((n, "importance_refresh"))
        times[n - 1] = time.perf_counter() - t0

    return ChainHistory(names=list(target.names), iterates=iterates,
                        accepted=accepted, log_target=log_target,
                        times=times, events=events)


def run_matrix(configs, jobs: int = 1) -> list:
    """Run independent configs; failures are isolated and returned in place
    of their history.  Results match sequential execution exactly because
    every chain owns its seed."""
    if jobs <= 1 or len(configs) <= 1:
        out = []
        for cfg in configs:
            try:
                out.append(run_chain(cfg))
            except Exception as exc:  # noqa: BLE001 - isolate per config
                out.append(exc)
        return out
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(run_chain, cfg) for cfg in configs]
        out = []
        for fut in futures:
            try:
                out.append(fut.result())
            except Exception as exc:  # noqa: BLE001
                out.append(exc)
        return out
