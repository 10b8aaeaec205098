"""Experiment environments: simplex regression and battery power allocation.

The battery pack uses an equivalent-circuit proxy (open-circuit voltage
curve plus series resistance per cell). Discharging a cell at power P
solves P = V*I with V = ocv(soc) - I*R; the pack terminates the episode
when any terminal voltage crosses the end-of-discharge threshold. Steps
are value-semantic: they consume a state and return a new one.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .distributions import as_simplex

__all__ = [
    "BatteryEnv",
    "EPISODE_CAP",
    "EpisodeResult",
    "InitSpec",
    "LoadProfile",
    "PackState",
    "RULE_WEIGHTS",
    "V_EOD",
    "baseline_equal",
    "baseline_rule",
    "cell_step",
    "BatteryCell",
    "gen_regression_batch",
    "init_spec",
    "normalize_observation",
    "ocv",
    "pack_reset",
    "pack_step",
    "regression_loss",
    "run_episode",
    "solve_discharge_current",
    "write_trace_csv",
]

V_EOD = 3.0
DT = 1.0
EPISODE_CAP = 2000
HEALTHY_CAPACITY = 3600.0
HEALTHY_RESISTANCE = 0.05
SECONDLIFE_CAPACITY_SCALE = (0.8, 0.6, 0.45, 0.35)
SECONDLIFE_RESISTANCE_SCALE = (1.5, 2.0, 2.5, 3.0)
P_MIN = 20.0
P_MAX = 60.0
LOAD_HOLD_STEPS = 50
SOC_INIT_LOW, SOC_INIT_HIGH = 0.3, 1.0
V_NORM = 4.2
I_NORM = 20.0


# ---------------------------------------------------------------------------
# Regression task
# ---------------------------------------------------------------------------


def gen_regression_batch(k: int, n: int, rng: np.random.Generator):
    """Simplex reconstruction samples.

    Targets are uniform on the K-simplex (normalized iid exponentials);
    the input drops one uniformly chosen coordinate, keeping the original
    order, and the target is the same simplex sorted ascending.
    Returns (inputs (n, k-1), targets (n, k)).
    """
    if k < 2:
        raise ValueError("need k >= 2")
    raw = rng.standard_exponential((n, k))
    raw /= raw.sum(axis=1, keepdims=True)
    drop = rng.integers(0, k, size=n)
    keep = np.ones((n, k), dtype=bool)
    keep[np.arange(n), drop] = False
    inputs = raw[keep].reshape(n, k - 1)
    targets = np.sort(raw, axis=1)
    return inputs, targets


def regression_loss(prediction, target) -> float:
    """Mean absolute error across coordinates."""
    p = np.asarray(prediction, dtype=float)
    t = np.asarray(target, dtype=float)
    if p.shape != t.shape:
        raise ValueError("prediction/target shape mismatch")
    return float(np.abs(p - t).mean())


# ---------------------------------------------------------------------------
# Battery cells
# ---------------------------------------------------------------------------


def ocv(soc):
    """Open-circuit voltage curve: 3.0 + 1.2*z - 0.4*exp(-15*z).

    Monotone on [0, 1], about 4.2 at full charge and 2.6 (below the
    end-of-discharge cutoff) at zero.
    """
    z = np.asarray(soc, dtype=float)
    if np.any(z < 0.0) or np.any(z > 1.0):
        raise ValueError("soc out of range [0, 1]")
    out = 3.0 + 1.2 * z - 0.4 * np.exp(-15.0 * z)
    return float(out) if out.ndim == 0 else out


def solve_discharge_current(v_oc, r, power):
    """Current drawn at a given power: the smaller root of R*I^2 - V_oc*I + P.

    Written as 2P / (V_oc + sqrt(V_oc^2 - 4RP)) so the R -> 0 limit is
    stable. When the requested power exceeds the cell maximum
    V_oc^2 / (4R), the cell delivers that maximum (shortfall).
    """
    v_oc = np.asarray(v_oc, dtype=float)
    r = np.asarray(r, dtype=float)
    power = np.asarray(power, dtype=float)
    if np.any(power < 0):
        raise ValueError("discharge power must be non-negative")
    disc = v_oc * v_oc - 4.0 * r * power
    shortfall = disc < 0.0
    current = np.where(
        shortfall,
        v_oc / (2.0 * r),
        2.0 * power / (v_oc + np.sqrt(np.maximum(disc, 0.0))),
    )
    if current.ndim == 0:
        return float(current), bool(shortfall)
    return current, shortfall


@dataclass(frozen=True)
class BatteryCell:
    capacity_q: float
    r_internal: float
    soc: float
    last_current: float = 0.0
    last_voltage: float | None = None


def cell_step(cell: BatteryCell, power: float, dt: float = DT):
    """Discharge one cell for dt at the requested power.

    Returns (new cell, shortfall flag). Voltage is evaluated at the
    pre-step state of charge; soc drains by I*dt/capacity.
    """
    v_oc = ocv(cell.soc)
    current, shortfall = solve_discharge_current(v_oc, cell.r_internal, power)
    voltage = v_oc - current * cell.r_internal
    soc = max(0.0, cell.soc - current * dt / cell.capacity_q)
    return (
        replace(cell, soc=soc, last_current=current, last_voltage=voltage),
        shortfall,
    )


# ---------------------------------------------------------------------------
# Pack environment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LoadProfile:
    """Piecewise-constant total power demand, deterministic given seed."""

    seed: int
    p_min: float = P_MIN
    p_max: float = P_MAX
    hold: int = LOAD_HOLD_STEPS
    n_segments: int = EPISODE_CAP // LOAD_HOLD_STEPS + 1

    def levels(self) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        return rng.uniform(self.p_min, self.p_max, size=self.n_segments)

    def level_at(self, step: int) -> float:
        levels = self.levels()
        return float(levels[min(step // self.hold, self.n_segments - 1)])


@dataclass(frozen=True)
class InitSpec:
    name: str
    capacities: np.ndarray
    resistances: np.ndarray

    @property
    def n_cells(self) -> int:
        return len(self.capacities)


def init_spec(name: str) -> InitSpec:
    """Named pack presets: healthy4, healthy8, secondlife4."""
    if name == "healthy4":
        n = 4
        caps = np.full(n, HEALTHY_CAPACITY)
        res = np.full(n, HEALTHY_RESISTANCE)
    elif name == "healthy8":
        n = 8
        caps = np.full(n, HEALTHY_CAPACITY)
        res = np.full(n, HEALTHY_RESISTANCE)
    elif name == "secondlife4":
        caps = HEALTHY_CAPACITY * np.asarray(SECONDLIFE_CAPACITY_SCALE)
        res = HEALTHY_RESISTANCE * np.asarray(SECONDLIFE_RESISTANCE_SCALE)
    else:
        raise ValueError(f"unknown pack preset {name!r}")
    return InitSpec(name=name, capacities=caps, resistances=res)


@dataclass(frozen=True)
class PackState:
    capacities: np.ndarray
    resistances: np.ndarray
    soc: np.ndarray
    voltage: np.ndarray
    current: np.ndarray
    demand_p: float
    step_index: int
    done: bool
    profile: LoadProfile

    @property
    def n_cells(self) -> int:
        return len(self.soc)


def observation(state: PackState) -> np.ndarray:
    """Observable projection [V_1..V_N, I_1..I_N, P]."""
    return np.concatenate([state.voltage, state.current, [state.demand_p]])


def normalize_observation(obs: np.ndarray, n_cells: int, p_max: float = P_MAX):
    """Scale voltages, currents and power demand to unit range."""
    obs = np.asarray(obs, dtype=float)
    out = obs.copy()
    out[..., :n_cells] /= V_NORM
    out[..., n_cells : 2 * n_cells] /= I_NORM
    out[..., 2 * n_cells] /= p_max
    return out


def pack_reset(spec: InitSpec, profile: LoadProfile, rng: np.random.Generator) -> PackState:
    """Fresh pack with per-cell soc ~ Uniform[0.3, 1.0]."""
    soc = rng.uniform(SOC_INIT_LOW, SOC_INIT_HIGH, size=spec.n_cells)
    return PackState(
        capacities=spec.capacities.copy(),
        resistances=spec.resistances.copy(),
        soc=soc,
        voltage=ocv(soc),
        current=np.zeros(spec.n_cells),
        demand_p=profile.level_at(0),
        step_index=0,
        done=False,
        profile=profile,
    )


def pack_step(state: PackState, action, dt: float = DT):
    """Allocate the current demand across cells and advance one step.

    Reward is 1 while every terminal voltage stays at or above the
    end-of-discharge threshold; the first crossing (or the step cap)
    terminates the episode. Returns (state, reward, done, observation).
    """
    if state.done:
        raise ValueError("cannot step a finished episode")
    a = as_simplex(action)
    if len(a) != state.n_cells:
        raise ValueError("action dimension != number of cells")
    powers = a * state.demand_p
    v_oc = ocv(state.soc)
    current, _shortfall = solve_discharge_current(v_oc, state.resistances, powers)
    voltage = v_oc - current * state.resistances
    soc = np.clip(state.soc - current * dt / state.capacities, 0.0, 1.0)
    alive = bool(np.all(voltage >= V_EOD))
    step_index = state.step_index + 1
    done = (not alive) or step_index >= EPISODE_CAP
    new_state = PackState(
        capacities=state.capacities,
        resistances=state.resistances,
        soc=soc,
        voltage=voltage,
        current=current,
        demand_p=state.profile.level_at(step_index),
        step_index=step_index,
        done=done,
        profile=state.profile,
    )
    reward = 1.0 if alive else 0.0
    return new_state, reward, done, observation(new_state)


# ---------------------------------------------------------------------------
# Baseline controllers
# ---------------------------------------------------------------------------

RULE_WEIGHTS = {
    "rule1": (0.15, 0.25, 0.25, 0.35),
    "rule2": (0.1, 0.2, 0.3, 0.4),
    "rule3": (0.1, 0.2, 0.2, 0.5),
    "rule4": (0.05, 0.2, 0.35, 0.45),
}


def baseline_equal(state: PackState) -> np.ndarray:
    """Uniform allocation across all cells."""
    n = state.n_cells
    return np.full(n, 1.0 / n)


def baseline_rule(state: PackState, weights) -> np.ndarray:
    """Assign fixed weights to cells ordered by voltage, low to high.

    Ties break by cell index (stable sort).
    """
    w = np.asarray(weights, dtype=float)
    if len(w) != state.n_cells:
        raise ValueError("rule weight count != number of cells")
    order = np.argsort(state.voltage, kind="stable")
    out = np.empty_like(w)
    out[order] = w
    return out


# ---------------------------------------------------------------------------
# Episode running
# ---------------------------------------------------------------------------


@dataclass
class EpisodeResult:
    steps_survived: int
    episode_return: float
    eod_times: np.ndarray | None
    trace: list | None


def _episode_seeds(seed: int):
    seq = np.random.SeedSequence(seed)
    soc_seed, profile_seed = seq.spawn(2)
    return np.random.default_rng(soc_seed), int(profile_seed.generate_state(1)[0])


def episode_start(spec: InitSpec, seed: int) -> PackState:
    """Deterministic episode initialization: soc draw + load profile."""
    rng, profile_seed = _episode_seeds(seed)
    return pack_reset(spec, LoadProfile(seed=profile_seed), rng)


def run_episode(
    spec: InitSpec,
    controller,
    seed: int,
    record_trace: bool = False,
    measure_eod_spread: bool = False,
) -> EpisodeResult:
    """Roll one episode under ``controller(obs_normalized, state) -> action``.

    With ``measure_eod_spread`` the rollout continues past the episode's
    terminal step so every cell's first end-of-discharge crossing gets a
    timestamp (cells still alive at the step cap are censored at the cap).
    """
    state = episode_start(spec, seed)
    n = spec.n_cells
    steps_survived = 0
    total_reward = 0.0
    eod_times = np.full(n, EPISODE_CAP, dtype=float)
    crossed = np.zeros(n, dtype=bool)
    trace = [] if record_trace else None
    episode_over = False
    while True:
        obs = normalize_observation(observation(state), n)
        action = controller(obs, state)
        demand = state.demand_p
        state, reward, done, _ = pack_step(state, action)
        if not episode_over:
            total_reward += reward
            if reward > 0:
                steps_survived += 1
        if record_trace and not episode_over:
            trace.append(
                {
                    "step": state.step_index,
                    "voltage": state.voltage.copy(),
                    "current": state.current.copy(),
                    "soc": state.soc.copy(),
                    "action": np.asarray(action, dtype=float),
                    "power": demand,
                    "reward": reward,
                }
            )
        newly = (state.voltage < V_EOD) & ~crossed
        eod_times[newly] = state.step_index
        crossed |= newly
        if done:
            episode_over = True
            if not measure_eod_spread or bool(crossed.all()) or state.step_index >= EPISODE_CAP:
                break
            state = replace(state, done=False)
    return EpisodeResult(
        steps_survived=steps_survived,
        episode_return=total_reward,
        eod_times=eod_times if measure_eod_spread else None,
        trace=trace,
    )


def write_trace_csv(result: EpisodeResult, path) -> None:
    """Trace rows: step, per-cell V/I/soc, action weights, power, reward."""
    if result.trace is None:
        raise ValueError("episode was run without record_trace")
    n = len(result.trace[0]["voltage"]) if result.trace else 0
    header = (
        ["step"]
        + [f"v{i}" for i in range(n)]
        + [f"i{i}" for i in range(n)]
        + [f"soc{i}" for i in range(n)]
        + [f"a{i}" for i in range(n)]
        + ["power", "reward"]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in result.trace:
            writer.writerow(
                [row["step"]]
                + [repr(v) for v in row["voltage"]]
                + [repr(v) for v in row["current"]]
                + [repr(v) for v in row["soc"]]
                + [repr(v) for v in row["action"]]
                + [repr(row["power"]), repr(row["reward"])]
            )


class BatteryEnv:
    """Stateful adapter over the pure pack functions for the trainer.

    Observations are normalized; raw values stay available in the info
    dict. Each reset(seed) draws fresh initial charge and a fresh load
    profile, both deterministic in the seed.
    """

    def __init__(self, spec: InitSpec | str):
        self.spec = init_spec(spec) if isinstance(spec, str) else spec
        self.state: PackState | None = None

    @property
    def n_cells(self) -> int:
        return self.spec.n_cells

    @property
    def obs_dim(self) -> int:
        return 2 * self.spec.n_cells + 1

    @property
    def action_dim(self) -> int:
        return self.spec.n_cells

    def reset(self, seed: int) -> np.ndarray:
        self.state = episode_start(self.spec, seed)
        return normalize_observation(observation(self.state), self.n_cells)

    def step(self, action):
        if self.state is None:
            raise RuntimeError("reset() before step()")
        self.state, reward, done, raw_obs = pack_step(self.state, action)
        obs = normalize_observation(raw_obs, self.n_cells)
        info = {"raw_observation": raw_obs, "soc": self.state.soc.copy()}
        return obs, reward, done, info
