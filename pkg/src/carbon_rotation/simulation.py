"""Monte Carlo over chains of rotations with Poisson damage.

Each path starts from bare land.  Rotation ``n`` of a path draws a damage age
``Z_n ~ Exp(lam)`` from the counter-based stream ``(seed, path, n)`` and ends
at ``min(Z_n, T)``.  Paths are simulated in fixed-size chunks so that every
number is independent of how chunks are spread over worker processes.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import rng
from .carbon import EventCarbonProfile, integrated_remaining_stock, remaining_stock_fraction
from .economics import RotationProblem, damage_revenue, harvest_revenue
from .growth import discounted_increment_integral, stem_volume, volume_time_integral

Z95 = 1.959963984540054


@dataclass(frozen=True)
class SimulationConfig:
    n_paths: int = 100_000
    horizon: float = 2000.0  # NPV accumulation horizon
    rng_seed: int = 0
    time_step: float = 1.0  # sampling step for stock trajectories
    stock_horizon: float = 10_000.0  # averaging window for carbon stock and harvest
    workers: int = 1
    chunk_size: int = 8192

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if not self.horizon > 0 or not self.stock_horizon > 0:
            raise ValueError("horizons must be > 0")
        if not self.time_step > 0:
            raise ValueError("time_step must be > 0")
        if self.workers < 1 or self.chunk_size < 1:
            raise ValueError("workers and chunk_size must be >= 1")


@dataclass
class SimulationSummary:
    mean_npv: float
    rel_std_npv: float
    avg_carbon_stock: float
    avg_harvest: float
    harvest_frequency: float
    mean_rotation_length: float
    n_paths: int
    rotation_length: float
    rng_seed: int
    ci_halfwidths: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RotationEvent:
    start: float  # calendar time the rotation began
    age: float  # stand age when it ended
    kind: str  # "harvest" | "damage" | "none" (never ends)

    @property
    def end(self) -> float:
        return self.start + self.age


def _check_rotation(T: float) -> float:
    T = float(T)
    if not (T > 0):
        raise ValueError(f"rotation length must be > 0 or inf, got {T}")
    return T


def sample_rotation_chain(problem: RotationProblem, T: float, config: SimulationConfig,
                          path_index: int, horizon: float | None = None) -> list[RotationEvent]:
    """Rotations of one path up to and including the one that crosses ``horizon``."""
    T = _check_rotation(T)
    horizon = max(config.horizon, config.stock_horizon) if horizon is None else horizon
    key = rng.path_keys(config.rng_seed, [path_index])
    events, t0, n = [], 0.0, 0
    while t0 < horizon:
        z = float(rng.exponentials(key, n, problem.damage_rate)[0])
        if z < T:
            ev = RotationEvent(t0, z, "damage")
        elif math.isfinite(T):
            ev = RotationEvent(t0, T, "harvest")
        else:
            events.append(RotationEvent(t0, math.inf, "none"))
            break
        events.append(ev)
        t0 = ev.end
        n += 1
    return events


def _require_profiles(problem: RotationProblem) -> tuple[EventCarbonProfile, EventCarbonProfile]:
    if problem.damage_profile is None or problem.harvest_profile is None:
        raise ValueError("carbon-stock simulation needs damage_profile and harvest_profile")
    return problem.damage_profile, problem.harvest_profile


def _simulate_chunk(problem: RotationProblem, T: float, config: SimulationConfig,
                    start: int, stop: int, track_stock: bool) -> dict[str, np.ndarray]:
    g, e = problem.growth, problem.econ
    lam, r, alpha = problem.damage_rate, e.r, problem.carbon.alpha
    cv = problem.carbon_value
    h_npv = config.horizon
    h_stock = config.stock_horizon
    h_end = max(h_npv, h_stock)
    if track_stock:
        dmg_profile, harv_profile = _require_profiles(problem)
    v_T = float(stem_volume(g, T)) if math.isfinite(T) else 0.0
    H_T = float(harvest_revenue(problem, T)) if math.isfinite(T) else 0.0

    n = stop - start
    keys_all = rng.path_keys(config.rng_seed, np.arange(start, stop))
    out = {k: np.zeros(n) for k in ("npv", "harvest_volume", "cycle_time", "stock_integral",
                                     "n_harvest", "n_damage")}
    idx = np.arange(n)
    t0 = np.zeros(n)
    counter = 0
    while idx.size:
        z = rng.exponentials(keys_all[idx], counter, lam)
        damaged = z < T
        age = np.where(damaged, z, T)
        t_end = t0 + age
        start_disc = np.exp(-r * t0)

        # cash flows: whole rotation if its event falls inside the horizon, else growth payments up to it
        npv = np.zeros(idx.size)
        done_in = t_end <= h_npv
        dm = done_in & damaged
        hv = done_in & ~damaged
        if dm.any():
            npv[dm] = damage_revenue(problem, age[dm])
        npv[hv] = H_T
        cut = ~done_in & (t0 < h_npv)
        if cut.any() and cv:
            npv[cut] = cv * discounted_increment_integral(g, h_npv - t0[cut], r)
        out["npv"][idx] += start_disc * npv

        # renewal counts: every drawn rotation is counted, including the one crossing the horizon
        finite_age = np.isfinite(age)
        out["harvest_volume"][idx] += np.where(~damaged & finite_age, v_T, 0.0)
        out["cycle_time"][idx] += np.where(finite_age, age, 0.0)
        out["n_harvest"][idx] += ~damaged & finite_age
        out["n_damage"][idx] += damaged

        if track_stock:
            live = np.clip(np.minimum(age, h_stock - t0), 0.0, None)
            stock = alpha * volume_time_integral(g, live)
            ends = t_end <= h_stock
            if ends.any():
                left = h_stock - t_end[ends]
                event_stock = alpha * np.where(damaged[ends], stem_volume(g, age[ends]), v_T)
                frac = np.where(damaged[ends], integrated_remaining_stock(dmg_profile, left),
                                integrated_remaining_stock(harv_profile, left))
                stock[ends] += event_stock * frac
            out["stock_integral"][idx] += stock

        t0 = t_end
        keep = t_end < h_end
        idx, t0 = idx[keep], t0[keep]
        counter += 1
    return out


def _chunk_bounds(n_paths: int, chunk_size: int) -> list[tuple[int, int]]:
    return [(s, min(s + chunk_size, n_paths)) for s in range(0, n_paths, chunk_size)]


def _run_chunk(args):
    return _simulate_chunk(*args)


def simulate_paths(problem: RotationProblem, T: float, config: SimulationConfig,
                   track_stock: bool = True) -> dict[str, np.ndarray]:
    """Per-path totals, concatenated in path order."""
    T = _check_rotation(T)
    jobs = [(problem, T, config, a, b, track_stock) for a, b in _chunk_bounds(config.n_paths, config.chunk_size)]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(j) for j in jobs]
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}


def _mean(x: np.ndarray) -> float:
    return math.fsum(x.tolist()) / x.size


def _std(x: np.ndarray, mean: float) -> float:
    if x.size < 2:
        return 0.0
    return math.sqrt(math.fsum(((x - mean) ** 2).tolist()) / (x.size - 1))


def _horizon_warnings(problem: RotationProblem, config: SimulationConfig) -> list[str]:
    if math.exp(-problem.econ.r * config.horizon) > 1e-3:
        return [f"NPV horizon {config.horizon} yr is short: discount factor at horizon exceeds 1e-3"]
    return []


def simulate(problem: RotationProblem, T: float, config: SimulationConfig = SimulationConfig(),
             track_stock: bool = True) -> SimulationSummary:
    """NPV, harvest and carbon-stock statistics for rotation length ``T`` (may be inf)."""
    paths = simulate_paths(problem, T, config, track_stock)
    n = config.n_paths
    npv = paths["npv"]
    mean = _mean(npv)
    sd = _std(npv, mean)
    rel = sd / abs(mean) if mean != 0 else (0.0 if sd == 0 else math.inf)

    vol, cyc = paths["harvest_volume"], paths["cycle_time"]
    tot_cyc = math.fsum(cyc.tolist())
    if math.isfinite(T) and tot_cyc > 0:
        ratio = math.fsum(vol.tolist()) / tot_cyc
        resid = vol - ratio * cyc
        se_h = math.sqrt(math.fsum((resid**2).tolist()) / max(n * (n - 1), 1)) / (tot_cyc / n)
    else:
        ratio, se_h = 0.0, 0.0

    nh, nd = math.fsum(paths["n_harvest"].tolist()), math.fsum(paths["n_damage"].tolist())
    freq = nh / (nh + nd) if nh + nd else 0.0
    mean_len = tot_cyc / (nh + nd) if nh + nd else math.inf

    if track_stock:
        stock = paths["stock_integral"] / config.stock_horizon
        stock_mean = _mean(stock)
        stock_ci = Z95 * _std(stock, stock_mean) / math.sqrt(n)
    else:
        stock_mean, stock_ci = math.nan, math.nan

    return SimulationSummary(
        mean_npv=mean,
        rel_std_npv=rel,
        avg_carbon_stock=stock_mean,
        avg_harvest=ratio,
        harvest_frequency=freq,
        mean_rotation_length=mean_len,
        n_paths=n,
        rotation_length=float(T),
        rng_seed=config.rng_seed,
        ci_halfwidths={
            "mean_npv": Z95 * sd / math.sqrt(n),
            # normal-theory standard error of a coefficient of variation
            "rel_std_npv": Z95 * rel * math.sqrt(1.0 / (2 * n) + rel**2 / n) if math.isfinite(rel) else math.nan,
            "avg_carbon_stock": stock_ci,
            "avg_harvest": Z95 * se_h,
            "harvest_frequency": Z95 * math.sqrt(freq * (1 - freq) / (nh + nd)) if nh + nd else 0.0,
        },
        warnings=_horizon_warnings(problem, config),
    )


def npv_statistics(problem: RotationProblem, T: float, config: SimulationConfig = SimulationConfig()) -> tuple[float, float]:
    """(mean NPV, relative standard deviation) of per-path returns over the horizon."""
    s = simulate(problem, T, config, track_stock=False)
    for w in s.warnings:
        warnings.warn(w, stacklevel=2)
    return s.mean_npv, s.rel_std_npv


def long_term_carbon_stock(problem: RotationProblem, T: float, config: SimulationConfig = SimulationConfig()) -> float:
    """Monte Carlo time-average of total carbon (t CO2/ha) over ``[0, stock_horizon]``."""
    return simulate(problem, T, config, track_stock=True).avg_carbon_stock


def average_harvest_analytic(problem: RotationProblem, T: float) -> float:
    """Long-run harvest (m3/ha/yr): expected felled volume per rotation over expected rotation length."""
    T = _check_rotation(T)
    if not math.isfinite(T):
        return 0.0
    lam = problem.damage_rate
    v = float(stem_volume(problem.growth, T))
    if lam == 0:
        return v / T
    x = lam * T
    if x < 1e-3:
        # 1 - e^-x (1 + x), by series to avoid cancellation
        head = x * x / 2 - x**3 / 3 + x**4 / 8 - x**5 / 30
    else:
        head = 1.0 - math.exp(-x) * (1.0 + x)
    denom = head / lam + math.exp(-x) * T
    return math.exp(-x) * v / denom


def stationary_carbon_stock(problem: RotationProblem, T: float) -> float:
    """Long-run mean carbon stock by renewal-reward, without sampling.

    Each rotation contributes its live-stand carbon over its length plus the
    full future decay integral of the pools its ending event creates; the
    stationary mean is the expected contribution over the expected length.
    """
    T = _check_rotation(T)
    dmg, harv = _require_profiles(problem)
    g, lam, alpha = problem.growth, problem.damage_rate, problem.carbon.alpha

    def residence(profile: EventCarbonProfile) -> float:
        total = 0.0
        for p in profile.pools:
            if p.release == "permanent" and p.share > 0:
                return math.inf
            if p.release == "exponential":
                total += p.share / p.rate
        return total

    if lam == 0:
        if not math.isfinite(T):
            return alpha * g.asymptotic_volume
        v = float(stem_volume(g, T))
        return alpha * (float(volume_time_integral(g, T)) + v * residence(harv)) / T
    J = float(discounted_increment_integral(g, T, lam))
    tail = math.exp(-lam * T) * float(stem_volume(g, T)) if math.isfinite(T) else 0.0
    live = (J - tail) / lam  # integral of survival-weighted volume
    damaged = J - tail  # E[v(Z); Z < T]
    length = -math.expm1(-lam * T) / lam if math.isfinite(T) else 1.0 / lam
    return alpha * (live + damaged * residence(dmg) + tail * residence(harv)) / length


def carbon_stock_trajectory(problem: RotationProblem, T: float, config: SimulationConfig,
                            path_index: int = 0) -> dict[str, np.ndarray]:
    """Total carbon stock of one path sampled every ``time_step`` years over the stock horizon."""
    dmg, harv = _require_profiles(problem)
    times = np.arange(0.0, config.stock_horizon + 0.5 * config.time_step, config.time_step)
    live = np.zeros_like(times)
    dead = np.zeros_like(times)
    alpha, g = problem.carbon.alpha, problem.growth
    for ev in sample_rotation_chain(problem, T, config, path_index, horizon=config.stock_horizon):
        inside = (times >= ev.start) & (times < ev.end)
        live[inside] = alpha * stem_volume(g, times[inside] - ev.start)
        if ev.kind != "none" and ev.end <= config.stock_horizon:
            after = times >= ev.end
            profile = dmg if ev.kind == "damage" else harv
            dead[after] += alpha * float(stem_volume(g, ev.age)) * remaining_stock_fraction(profile, times[after] - ev.end)
    return {"time_years": times, "live_t_co2_ha": live, "dead_and_products_t_co2_ha": dead,
            "total_t_co2_ha": live + dead}
