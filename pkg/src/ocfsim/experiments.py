"""Experiment drivers, reward accounting, and CSV emission.

Four experiments: one-class vs two-class replay comparison, the two staged
scaling experiments (exploitation reward after T_s similarity steps plotted
against T_s/pf^2, and after T_r preference steps against T_r/pf), and the
synthetic run compared against the closed-form reward lower bound.

The staged experiments bypass the scheduler and drive the algorithm state
directly: a block of random recommendations from one item half, a scripted
similarity walk over the other half, then a single exploitation step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import bounds as bd
from .algorithm import (
    EXHAUSTED,
    AlgoParams,
    AlgoState,
    RunTrace,
    exploit_pick,
    init_state,
    run,
)
from .model import (
    ONE_CLASS,
    TWO_CLASS,
    Environment,
    ModelParams,
    ParameterError,
    PreferenceMatrix,
    generate_model,
    sample_response,
)
from .rng import stream


class DispatchError(TypeError):
    """Reward accessor used with the wrong environment kind."""


class ConfigError(ValueError):
    pass


@dataclass
class CurveRow:
    x: float
    mean: float
    stderr: float
    n: int
    label: str


@dataclass
class CurveTable:
    rows: list[CurveRow] = field(default_factory=list)

    def add(self, x, mean, stderr, n, label) -> None:
        self.rows.append(CurveRow(float(x), float(mean), float(stderr),
                                  int(n), str(label)))

    def labels(self) -> list[str]:
        seen = []
        for r in self.rows:
            if r.label not in seen:
                seen.append(r.label)
        return seen

    def curve(self, label: str) -> tuple[np.ndarray, np.ndarray]:
        pts = sorted((r.x, r.mean) for r in self.rows if r.label == label)
        xs = np.array([p[0] for p in pts])
        ys = np.array([p[1] for p in pts])
        return xs, ys


@dataclass
class ExperimentConfig:
    experiment: str = "bound-consistency"
    seed: int = 0
    replicates: int = 20
    pf_list: tuple[float, ...] = (1.0, 0.75, 0.5)
    ts_grid: tuple[int, ...] = (0, 1, 2, 4, 8, 16, 32, 64)
    tr_grid: tuple[int, ...] = (0, 1, 2, 4, 8, 16, 32, 64)
    horizon: int = 100
    model: ModelParams | None = None
    corpus_path: str | None = None
    alpha: float = 0.5
    eta: float = 0.15
    batch_size: int = 20
    k_neighbors: int = 10
    confidence_delta: float = 0.1
    use_recommended_params: bool = False
    pf_one_class: float = 1.0  # reveal probability for the one-class arm
    allow_repeat: bool = True
    output: str | None = None

    def algo_params(self, feedback_mode: str = ONE_CLASS) -> AlgoParams:
        return AlgoParams(
            alpha=self.alpha, eta=self.eta, batch_size=self.batch_size,
            k_neighbors=self.k_neighbors, feedback_mode=feedback_mode,
            allow_repeat=self.allow_repeat,
        )


# ---------------------------------------------------------------------------
# Reward accounting


def reward_at(trace: RunTrace, t: int) -> float:
    """Per-step replay reward: mean stored signed entry of the recommended
    items; users without a recommendation contribute 0."""
    if trace.env.synthetic:
        raise DispatchError("replay reward on a synthetic environment; "
                            "use likable_reward_at")
    items = trace.items[t]
    safe = np.where(items == EXHAUSTED, 0, items)
    vals = trace.env.ratings[np.arange(len(items)), safe].astype(float)
    vals[items == EXHAUSTED] = 0.0
    return float(vals.sum()) / len(items)


def likable_reward_at(trace: RunTrace, t: int) -> float:
    """Per-step synthetic reward: fraction of users whose recommended item
    is truly likable (p_ui > 1/2)."""
    if not trace.env.synthetic:
        raise DispatchError("likable reward on a replay environment; "
                            "use reward_at")
    items = trace.items[t]
    probs = trace.env.preferences.probs
    safe = np.where(items == EXHAUSTED, 0, items)
    lik = (probs[np.arange(len(items)), safe] > 0.5) & (items != EXHAUSTED)
    return float(lik.sum()) / len(items)


def acc_reward(trace: RunTrace) -> np.ndarray:
    """Cumulative replay reward, acc[T-1] = sum_{t<T} reward_at(t)."""
    return np.cumsum([reward_at(trace, t) for t in range(trace.horizon)])


def _step_reward(env: Environment, items: np.ndarray) -> float:
    """Reward of one simultaneous recommendation outside a full trace."""
    safe = np.where(items == EXHAUSTED, 0, items)
    idx = (np.arange(len(items)), safe)
    if env.synthetic:
        vals = (env.preferences.probs[idx] > 0.5).astype(float)
    else:
        vals = env.ratings[idx].astype(float)
    vals = np.where(items == EXHAUSTED, 0.0, vals)
    return float(vals.sum()) / len(items)


# ---------------------------------------------------------------------------
# Scripted staging (bypasses the scheduler)


def scripted_preference_block(
    state: AlgoState,
    env: Environment,
    items_pool: np.ndarray,
    n_per_user: int,
    rng: np.random.Generator,
) -> None:
    """Recommend n_per_user distinct items, uniform from items_pool, to each
    user; responses recorded as preference (non-similarity) observations."""
    if n_per_user > len(items_pool):
        raise ConfigError(
            f"{n_per_user} preference recommendations exceed pool size "
            f"{len(items_pool)}")
    for u in range(state.n_users):
        chosen = rng.choice(items_pool, size=n_per_user, replace=False)
        for i in chosen:
            resp = sample_response(env, u, int(i), rng)
            state.record(u, int(i), resp, similarity=False)


def scripted_similarity_walk(
    state: AlgoState,
    env: Environment,
    ordered_items: np.ndarray,
    n_steps: int,
    rng: np.random.Generator,
) -> None:
    """n_steps similarity steps recommending ordered_items[t] to every user."""
    if n_steps > len(ordered_items):
        raise ConfigError(
            f"{n_steps} similarity steps exceed the {len(ordered_items)} "
            "items in the walk")
    for t in range(n_steps):
        i = int(ordered_items[t])
        for u in range(state.n_users):
            resp = sample_response(env, u, i, rng)
            state.record(u, i, resp, similarity=True)


def _item_halves(n_items: int, rng: np.random.Generator):
    order = rng.permutation(n_items)
    half = n_items // 2
    return order[:half], order[half:]


def _make_env(cfg: ExperimentConfig, pf: float, rep: int, entries=None,
              pm: PreferenceMatrix | None = None) -> Environment:
    if entries is not None:
        return Environment(pf=pf, feedback_mode=ONE_CLASS, ratings=entries)
    if pm is None:
        if cfg.model is None:
            raise ConfigError("experiment needs a corpus or model params")
        pm = generate_model(cfg.model, cfg.seed)
    return Environment(pf=pf, feedback_mode=ONE_CLASS, preferences=pm)


def _mean_stderr(vals: list[float]) -> tuple[float, float]:
    a = np.asarray(vals, dtype=float)
    if len(a) == 1:
        return float(a[0]), 0.0
    return float(a.mean()), float(a.std(ddof=1) / math.sqrt(len(a)))


def _staged_replicate(
    cfg: ExperimentConfig,
    pf: float,
    rep: int,
    n_sim: int,
    n_pref: int,
    sim_first: bool,
    entries,
    pm,
) -> float:
    """One staged run: preference block + similarity walk (either order),
    then a single exploitation step restricted to the preference half;
    returns its reward."""
    env = _make_env(cfg, pf, rep, entries, pm)
    n, m = env.n_users, env.n_items
    params = cfg.algo_params()
    state = init_state(params, n, m, seed=cfg.seed)
    rng_split = stream(cfg.seed, "split", rep)
    rng_script = stream(cfg.seed, "script", rep, int(pf * 1000), n_sim, n_pref)
    i1, i2 = _item_halves(m, rng_split)
    if sim_first:
        scripted_similarity_walk(state, env, i1, n_sim, rng_script)
        scripted_preference_block(state, env, i2, n_pref, rng_script)
    else:
        scripted_preference_block(state, env, i2, n_pref, rng_script)
        scripted_similarity_walk(state, env, i1, n_sim, rng_script)
    # The exploitation step is scored on the preference half only, so the
    # reward measures what the walk taught about neighbors, not leftovers
    # of the walk itself.
    outside = np.ones(m, dtype=bool)
    outside[i2] = False
    state.rated[:, outside] = True
    items = exploit_pick(state, params)
    return _step_reward(env, items)


def _load_staging_inputs(cfg: ExperimentConfig, entries,
                         preferences: PreferenceMatrix | None = None):
    if preferences is not None:
        return None, preferences
    pm = None
    if entries is None:
        if cfg.model is None:
            raise ConfigError("staged experiments need a corpus or model params")
        pm = generate_model(cfg.model, cfg.seed)
    return entries, pm


def run_sim_scaling(cfg: ExperimentConfig, entries=None,
                    preferences: PreferenceMatrix | None = None) -> CurveTable:
    """Exploitation reward as a function of the similarity budget, preceded
    by a pf-compensated block of 3M/(k*pf) random preference recommendations.

    ts_grid holds pf-normalized budgets: at grid value x every pf runs
    T_s = round(x/pf^2) similarity steps, so the curves share the axis
    x = T_s*pf^2 (steps in units of the 1/pf^2 cold-start scale) and lie on
    top of each other when the cold start scales as 1/pf^2."""
    entries, pm = _load_staging_inputs(cfg, entries, preferences)
    table = CurveTable()
    for pf in cfg.pf_list:
        for x in cfg.ts_grid:
            m = entries.shape[1] if entries is not None else cfg.model.n_items
            n_pref = round(3.0 * m / (cfg.k_neighbors * pf))
            n_sim = round(x / pf**2)
            vals = [
                _staged_replicate(cfg, pf, rep, n_sim=n_sim, n_pref=n_pref,
                                  sim_first=False, entries=entries, pm=pm)
                for rep in range(cfg.replicates)
            ]
            mean, se = _mean_stderr(vals)
            table.add(x, mean, se, cfg.replicates, f"pf={pf:g}")
    return table


def run_pref_scaling(cfg: ExperimentConfig, entries=None,
                     preferences: PreferenceMatrix | None = None) -> CurveTable:
    """Exploitation reward as a function of the preference budget, preceded
    by 25/pf^2 scripted similarity steps.

    tr_grid holds pf-normalized budgets: at grid value x every pf draws
    T_r = round(x/pf) preference recommendations, so the curves share the
    axis x = T_r*pf (recommendations in units of the 1/pf learning scale)."""
    entries, pm = _load_staging_inputs(cfg, entries, preferences)
    table = CurveTable()
    for pf in cfg.pf_list:
        n_sim = round(25.0 / pf**2)
        for x in cfg.tr_grid:
            vals = [
                _staged_replicate(cfg, pf, rep, n_sim=n_sim,
                                  n_pref=round(x / pf),
                                  sim_first=True, entries=entries, pm=pm)
                for rep in range(cfg.replicates)
            ]
            mean, se = _mean_stderr(vals)
            table.add(x, mean, se, cfg.replicates, f"pf={pf:g}")
    return table


def run_one_vs_two(cfg: ExperimentConfig, entries: np.ndarray) -> CurveTable:
    """Full scheduled runs on a replayed signed matrix, horizon T = M,
    each item recommended at most once per user. The one-class arm applies
    the pf coin to positive stored entries; the two-class arm receives the
    stored entry directly (pf = 1)."""
    if entries is None:
        raise ConfigError("one-vs-two needs a replay matrix")
    m = entries.shape[1]
    table = CurveTable()
    arms = [
        ("one-class", ONE_CLASS, cfg.pf_one_class),
        ("two-class", TWO_CLASS, 1.0),
    ]
    for label, mode, pf in arms:
        params = replace(cfg.algo_params(mode), allow_repeat=False)
        accs = []
        for rep in range(cfg.replicates):
            env = Environment(pf=pf, feedback_mode=mode, ratings=entries,
                              rng_seed=cfg.seed)
            seed = int(stream(cfg.seed, rep).integers(2**62))
            trace = run(env, params, horizon=m, seed=seed)
            accs.append(acc_reward(trace))
        accs = np.vstack(accs)
        ses = (accs.std(axis=0, ddof=1) / math.sqrt(len(accs))
               if len(accs) > 1 else np.zeros(m))
        for t in range(m):
            table.add(t + 1, accs[:, t].mean(), ses[t], cfg.replicates, label)
    return table


def run_bound_consistency(cfg: ExperimentConfig) -> tuple[CurveTable, dict]:
    """Scheduled runs on a synthetic model; emits the cumulative likable
    fraction per horizon plus overlay rows for the closed-form lower bound
    and the cold-start marker."""
    if cfg.model is None:
        raise ConfigError("bound-consistency needs model params")
    pm = generate_model(cfg.model, cfg.seed)
    mp = cfg.model
    binput = bd.BoundsInput(
        n_users=mp.n_users, n_items=mp.n_items, n_types=mp.n_types,
        delta_gap=mp.delta, nu=mp.nu, pf=mp.pf, gamma=pm.achieved_gamma,
        alpha=cfg.alpha, eta=cfg.eta, batch_size=cfg.batch_size,
        k_neighbors=cfg.k_neighbors, confidence_delta=cfg.confidence_delta,
        horizon=cfg.horizon,
    )
    if cfg.use_recommended_params:
        eta, k, q, _ = bd.recommended_params(binput)
        cfg = replace(cfg, eta=eta, k_neighbors=k, batch_size=max(q, 1))
        binput = replace(binput, eta=eta, k_neighbors=k, batch_size=max(q, 1))
    flags = bd.condition_flags(binput)
    params = cfg.algo_params()
    fracs = []
    for rep in range(cfg.replicates):
        env = Environment(pf=mp.pf, feedback_mode=ONE_CLASS, preferences=pm)
        seed = int(stream(cfg.seed, rep).integers(2**62))
        trace = run(env, params, horizon=cfg.horizon, seed=seed)
        per_step = np.array([likable_reward_at(trace, t)
                             for t in range(cfg.horizon)])
        fracs.append(np.cumsum(per_step) / np.arange(1, cfg.horizon + 1))
    fracs = np.vstack(fracs)
    ses = (fracs.std(axis=0, ddof=1) / math.sqrt(len(fracs))
           if len(fracs) > 1 else np.zeros(cfg.horizon))
    table = CurveTable()
    for t in range(cfg.horizon):
        table.add(t + 1, fracs[:, t].mean(), ses[t], cfg.replicates,
                  "likable_frac")
    try:
        ts = bd.t_start(binput)
        table.add(ts, ts, 0.0, 1, "t_start")
        for t in range(cfg.horizon):
            if t + 1 >= ts:
                b = bd.reward_lower_bound(replace(binput, horizon=t + 1))
                table.add(t + 1, b, 0.0, 1, "reward_lower_bound")
    except bd.BoundsDomainError:
        pass
    return table, flags


# ---------------------------------------------------------------------------
# Auxiliary constructions


def low_feedback_instance(n_users: int, n_types: int, n_items: int) -> PreferenceMatrix:
    """Deterministic {0, 1} preferences with non-overlapping likable blocks:
    type j likes exactly the j-th block of M/K items."""
    if n_items % n_types:
        raise ConfigError("n_items must be divisible by n_types")
    block = n_items // n_types
    type_of = np.arange(n_users) % n_types
    probs = np.zeros((n_users, n_items))
    for u in range(n_users):
        j = type_of[u]
        probs[u, j * block:(j + 1) * block] = 1.0
    params = ModelParams(n_users, n_items, n_types, delta=0.5,
                         nu=block / n_items, pf=1.0)
    return PreferenceMatrix(probs=probs, type_of=type_of, achieved_gamma=0.0,
                            params=params)


def overlap_controlled_model(params: ModelParams, seed: int) -> PreferenceMatrix:
    """Preference model whose likable sets overlap pairwise by the minimum
    amount the item budget allows, with no item likable by more than two
    types.

    Each type's likable set is one exclusive item block plus one shared
    block per other type; the shared-block size is the smallest integer
    that fits K sets of ceil(nu*M) items into M items. Compared to
    independently drawn likable sets this removes universally likable
    items, which otherwise dominate exploitation with arbitrary neighbors
    and mask the effect of similarity learning."""
    from .model import check_separation

    k = params.n_types
    m = params.n_items
    size = math.ceil(params.nu * m)
    if k == 1:
        return generate_model(params, seed)
    pair_overlap = max(0, math.ceil(2.0 * (k * size - m) / (k * (k - 1))))
    exclusive = size - (k - 1) * pair_overlap
    if exclusive < 0:
        raise ConfigError(
            f"cannot fit {k} likable sets of {size} items into {m} items "
            "with only pairwise sharing")
    rng = stream(seed, "model")
    items = rng.permutation(m)
    likable = np.zeros((k, m), dtype=bool)
    pos = 0
    for t in range(k):
        likable[t, items[pos:pos + exclusive]] = True
        pos += exclusive
    for a in range(k):
        for b in range(a + 1, k):
            block = items[pos:pos + pair_overlap]
            likable[a, block] = True
            likable[b, block] = True
            pos += pair_overlap
    type_of = np.arange(params.n_users) % k
    lo, hi = 0.5 - params.delta, 0.5 + params.delta
    probs = np.where(
        likable[type_of],
        rng.uniform(hi, 1.0, (params.n_users, m)),
        rng.uniform(0.0, lo, (params.n_users, m)),
    )
    pm = PreferenceMatrix(probs=probs, type_of=type_of, achieved_gamma=0.0,
                          params=params)
    return PreferenceMatrix(probs=probs, type_of=type_of,
                            achieved_gamma=check_separation(pm), params=params)


def synthetic_clustered_matrix(
    params: ModelParams, seed: int, missing_fraction: float = 0.3
) -> np.ndarray:
    """Signed {-1, 0, 1} matrix drawn from a generated preference model;
    a random fraction of entries is blanked to 0 to resemble a sparse
    ratings corpus."""
    pm = generate_model(params, seed)
    rng = stream(seed, "hidden")
    signs = np.where(rng.random(pm.probs.shape) < pm.probs, 1, -1)
    mask = rng.random(pm.probs.shape) < missing_fraction
    return np.where(mask, 0, signs).astype(np.int8)


# ---------------------------------------------------------------------------
# Collapse statistic and CSV


def collapse_gap(table: CurveTable, labels=None) -> tuple[float, float]:
    """Max vertical gap between curves after linear interpolation onto the
    union of x-values in the common x-range; returns (gap, dynamic_range)."""
    labels = labels or table.labels()
    curves = [table.curve(lb) for lb in labels]
    lo = max(c[0].min() for c in curves)
    hi = min(c[0].max() for c in curves)
    if hi <= lo:
        raise ConfigError("curves share no common x-range")
    grid = np.unique(np.concatenate(
        [c[0][(c[0] >= lo) & (c[0] <= hi)] for c in curves]))
    interp = np.vstack([np.interp(grid, xs, ys) for xs, ys in curves])
    gap = float((interp.max(axis=0) - interp.min(axis=0)).max())
    dyn = float(interp.max() - interp.min())
    return gap, dyn


def write_csv(table: CurveTable, path) -> None:
    """Deterministic CSV: header x,mean,stderr,n,label; rows ordered by
    (label, x); 10 significant digits."""
    if not table.rows:
        raise ConfigError("refusing to write an empty curve table")
    rows = sorted(table.rows, key=lambda r: (r.label, r.x))
    with open(path, "w") as f:
        f.write("x,mean,stderr,n,label\n")
        for r in rows:
            f.write(f"{r.x:.10g},{r.mean:.10g},{r.stderr:.10g},{r.n},{r.label}\n")


def read_csv(path) -> CurveTable:
    table = CurveTable()
    with open(path) as f:
        header = f.readline().strip()
        if header != "x,mean,stderr,n,label":
            raise ConfigError(f"unexpected header {header!r}")
        for line in f:
            x, mean, se, n, label = line.rstrip("\n").split(",", 4)
            table.add(float(x), float(mean), float(se), int(n), label)
    return table


def write_metadata(cfg: ExperimentConfig, path, extra: dict | None = None) -> None:
    """Sidecar echoing the fully resolved configuration."""
    with open(path, "w") as f:
        for name, val in vars(cfg).items():
            if name == "model" and val is not None:
                for k, v in vars(val).items():
                    f.write(f"model.{k} = {v}\n")
            else:
                f.write(f"{name} = {val}\n")
        f.write("staged_exploitation_steps = 1\n")
        for k, v in (extra or {}).items():
            f.write(f"{k} = {v}\n")
