"""Independent verification oracles and a Monte Carlo rollout estimator.

Nothing here reuses solver reasoning: the water-fill certificate only probes
candidate points of the ball, the finite-horizon check enumerates policies
outright, and the rollout estimates values by simulation. These are the
package's cross-examination tools; the acceptance tests are built on them.
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .finite import evaluate_policy_finite, solve_finite
from .model import ModelError, dumps_canonical
from .oracle import as_distribution, waterfill_maximize

log = logging.getLogger("tvdp.verify")

OPTIMALITY_TOL = 1e-9
FEASIBILITY_TOL = 1e-12
GRID_STEPS = 200


@dataclass(frozen=True)
class CertifyReport:
    """Outcome of a certification campaign (one instance or many merged)."""

    check: str
    instances: int
    failures: int
    max_violation: float
    seed: int

    @property
    def passed(self):
        return self.failures == 0

    def to_json(self):
        return dumps_canonical(
            {
                "check": self.check,
                "instances": self.instances,
                "failures": self.failures,
                "max_violation": self.max_violation,
                "seed": self.seed,
            }
        ) + "\n"


def certify_waterfill(mu, levels, radius, candidate, trials=1000, seed=0):
    """Probe a claimed ball maximizer with random and grid candidates.

    The candidate (a WaterfillResult or a bare vector) fails when it leaves
    the simplex, leaves the TV ball, or is beaten by any probed feasible
    point by more than 1e-9. Probes are random zero-sum mass transfers from
    ``mu`` scaled to the ball boundary or interior, plus an exhaustive
    simplex grid of step 1/200 for alphabets of up to three points.
    """
    p = as_distribution(mu)
    lv = np.asarray(levels, dtype=np.float64)
    r = float(radius)
    nu = np.asarray(getattr(candidate, "maximizer", candidate), dtype=np.float64)
    if nu.shape != p.shape:
        raise ValueError("candidate shape does not match mu")
    achieved = float(lv @ nu)
    value = float(getattr(candidate, "value", achieved))

    failed = False
    if abs(value - achieved) > OPTIMALITY_TOL:
        log.warning("claimed value %s disagrees with <levels, maximizer> %s", value, achieved)
        failed = True
    if nu.min() < -FEASIBILITY_TOL or abs(nu.sum() - 1.0) > FEASIBILITY_TOL:
        log.warning("candidate is not a distribution (min %s, sum %s)", nu.min(), nu.sum())
        failed = True
    if float(np.abs(nu - p).sum()) > r + FEASIBILITY_TOL:
        log.warning("candidate leaves the TV ball: %s > %s", np.abs(nu - p).sum(), r)
        failed = True

    rng = np.random.default_rng(seed)
    probes = [p[None, :], nu[None, :], _random_ball_points(rng, p, r, trials)]
    if p.size <= 3:
        grid = _simplex_grid(p.size)
        inside = np.abs(grid - p).sum(axis=1) <= r + FEASIBILITY_TOL
        probes.append(grid[inside])
    best = max(float((c @ lv).max()) for c in probes if c.size)
    violation = max(best - value, 0.0)
    if violation > OPTIMALITY_TOL:
        log.warning("candidate beaten by %.3e", violation)
        failed = True
    return CertifyReport(
        check="waterfill_optimality",
        instances=1,
        failures=int(failed),
        max_violation=violation,
        seed=seed,
    )


def fuzz_waterfill(instances=10000, trials=1000, seed=0, max_size=8):
    """Fuzz the water-fill oracle: random instances, certify each maximizer."""
    rng = np.random.default_rng(seed)
    failures = 0
    max_violation = 0.0
    for _ in range(instances):
        mu, lv, r = _random_instance(rng, max_size)
        result = waterfill_maximize(mu, lv, r)
        sub = certify_waterfill(
            mu, lv, r, result, trials=trials, seed=int(rng.integers(2**63))
        )
        failures += sub.failures
        max_violation = max(max_violation, sub.max_violation)
    report = CertifyReport(
        check="waterfill_optimality",
        instances=instances,
        failures=failures,
        max_violation=max_violation,
        seed=seed,
    )
    log.info("fuzz_waterfill: %s", report)
    return report


def two_point_max_value(mu, levels, radius):
    """Closed-form ball maximum for a two-point alphabet.

    ``<levels, mu> + min(radius/2, mu(argmin), 1 - mu(argmax)) * spread``;
    independent of the water-fill code path.
    """
    p = as_distribution(mu)
    lv = np.asarray(levels, dtype=np.float64)
    if p.size != 2 or lv.size != 2:
        raise ValueError("two_point_max_value needs exactly two outcomes")
    base = float(lv @ p)
    if lv[0] == lv[1]:
        return base
    hi = int(np.argmax(lv))
    lo = 1 - hi
    shift = min(0.5 * float(radius), float(p[lo]), 1.0 - float(p[hi]))
    return base + shift * float(lv[hi] - lv[lo])


# ---------------------------------------------------------------------------
# exhaustive finite-horizon checks


@dataclass(frozen=True)
class BruteForceResult:
    values: np.ndarray
    policies: tuple
    enumerated: int


def brute_force_finite(model, budget=10**6):
    """Componentwise-minimal worst-case values over all Markov policies.

    Enumerates every deterministic per-stage action assignment and evaluates
    each with the fixed-policy adversary; no backward-induction shortcut.
    ``policies[i]`` records a policy attaining the minimum at start state i.
    """
    if not model.is_finite:
        raise ModelError("brute_force_finite needs a model with a horizon")
    stage_space = list(itertools.product(*[range(len(a)) for a in model.actions]))
    total = len(stage_space) ** model.horizon
    if total > budget:
        raise ModelError(f"enumeration of {total} policies exceeds budget {budget}")
    n = model.n_states
    best = np.full(n, np.inf)
    best_pol = [None] * n
    for assignment in itertools.product(stage_space, repeat=model.horizon):
        vals = evaluate_policy_finite(model, assignment)[0]
        for i in range(n):
            if vals[i] < best[i]:
                best[i] = vals[i]
                best_pol[i] = assignment
    return BruteForceResult(values=best, policies=tuple(best_pol), enumerated=total)


@dataclass(frozen=True)
class MarkovSufficiencyReport:
    markov_values: np.ndarray
    history_values: np.ndarray
    max_gap: float
    policies_enumerated: int
    passed: bool


def markov_sufficiency_check(model, atol=1e-9, budget=2**17):
    """History-dependent policies cannot beat the Markov optimum.

    Enumerates every deterministic history-dependent policy of a tiny model
    (an action choice per state-history node), evaluates each against the
    per-stage adversary, and compares the componentwise minimum with the
    backward-induction values. Oracle evaluations are memoized by
    (stage, state, action, child values), which dedupes identical pure
    computations without skipping any policy.
    """
    if not model.is_finite:
        raise ModelError("markov_sufficiency_check needs a model with a horizon")
    n = model.n_states
    n_stage = model.horizon
    radii = model.stage_radii()
    alpha = model.discount
    terminal = model.terminal_cost

    nodes = []     # nodes[j]: list of state-index histories of length j+1
    for j in range(n_stage):
        nodes.append(list(itertools.product(range(n), repeat=j + 1)))
    flat = [(j, h) for j in range(n_stage) for h in nodes[j]]
    choice_sizes = [len(model.actions[h[-1]]) for _, h in flat]
    total = 1
    for m in choice_sizes:
        total *= m
    if total > budget:
        raise ModelError(f"enumeration of {total} history policies exceeds budget {budget}")
    node_pos = {key: k for k, key in enumerate(flat)}

    memo = {}

    def backed_up(j, x, a, child_vals):
        key = (j, x, a, child_vals)
        out = memo.get(key)
        if out is None:
            cv = model.cost_vector[x]
            payoff = alpha * np.asarray(child_vals)
            if cv is not None:
                payoff = cv[a] + payoff
            res = waterfill_maximize(model.kernels[x][a], payoff, radii[j + 1])
            out = float(model.cost_scalar[x][a]) + res.value
            memo[key] = out
        return out

    history_best = np.full(n, np.inf)
    terminal_tuple = tuple(float(t) for t in terminal)
    for policy in itertools.product(*[range(m) for m in choice_sizes]):
        vals = {}
        for j in range(n_stage - 1, -1, -1):
            for h in nodes[j]:
                x = h[-1]
                a = policy[node_pos[(j, h)]]
                if j + 1 == n_stage:
                    children = terminal_tuple
                else:
                    children = tuple(vals[(j + 1, h + (z,))] for z in range(n))
                vals[(j, h)] = backed_up(j, x, a, children)
        for x in range(n):
            root = vals[(0, (x,))]
            if root < history_best[x]:
                history_best[x] = root

    markov = solve_finite(model)[0].values
    gap = float(np.abs(history_best - markov).max())
    report = MarkovSufficiencyReport(
        markov_values=markov,
        history_values=history_best,
        max_gap=gap,
        policies_enumerated=total,
        passed=bool(gap <= atol),
    )
    log.info("markov_sufficiency_check: gap %.3e over %d policies", gap, total)
    return report


# ---------------------------------------------------------------------------
# Monte Carlo rollout


@dataclass(frozen=True)
class RolloutConfig:
    """Simulation settings.

    ``horizon_cap=None`` derives the smallest cap with truncation bias
    ``discount**cap * f_max / (1 - discount) <= stat_tol / 10``. Episodes are
    simulated in fixed-size chunks whose generators spawn deterministically
    from the seed, so results are bit-identical for a given config no matter
    how many worker threads run the chunks.
    """

    episodes: int
    horizon_cap: object = None
    seed: int = 0
    kernel_choice: str = "nominal"
    stat_tol: float = 1e-5
    chunk_size: int = 16384
    jobs: int = 1


@dataclass(frozen=True)
class RolloutSummary:
    means: np.ndarray
    std_errors: np.ndarray
    episodes: int
    horizon_cap: int
    seed: int
    kernel_choice: str


def monte_carlo_rollout(model, policy, config, kernels=None):
    """Estimate discounted policy cost from every start state by simulation.

    ``kernels`` supplies the (n, n) transition matrix under the policy when
    ``config.kernel_choice`` is "worst" or "custom" (for "worst", pass a
    solved StationarySolution's ``worst_kernel_matrix``); the nominal matrix
    is assembled from the model otherwise.
    """
    if model.is_finite:
        raise ModelError("monte_carlo_rollout needs a stationary model")
    if config.episodes < 1:
        raise ModelError("need at least one episode per start state")
    idx = model.policy_indices(policy) if all(isinstance(a, str) for a in policy) \
        else np.asarray(policy, dtype=np.intp)
    n = model.n_states

    if config.kernel_choice == "nominal":
        mat = np.array([model.kernels[i][a] for i, a in enumerate(idx)])
    elif config.kernel_choice in ("worst", "custom"):
        if kernels is None:
            raise ModelError(
                f"kernel_choice={config.kernel_choice!r} requested but no kernel "
                "matrix provided; solve the model first"
            )
        mat = np.asarray(kernels, dtype=np.float64)
        if mat.shape != (n, n):
            raise ModelError("kernel matrix must be n-by-n")
        mat = np.array([as_distribution(row, sum_tol=1e-9, entry_tol=1e-9) for row in mat])
    else:
        raise ModelError(f"unknown kernel_choice {config.kernel_choice!r}")

    cap = config.horizon_cap
    if cap is None:
        cap = _auto_cap(model.discount, model.max_stage_cost(), config.stat_tol)
    cost = model.transition_cost_matrix(idx)
    cum = mat.cumsum(axis=1)
    cum[:, -1] = 1.0

    n_chunks = -(-config.episodes // config.chunk_size)
    seeds = np.random.SeedSequence(config.seed).spawn(n_chunks)
    sizes = [
        min(config.chunk_size, config.episodes - c * config.chunk_size)
        for c in range(n_chunks)
    ]

    def run_chunk(args):
        seq, n_eps = args
        rng = np.random.default_rng(seq)
        state = np.repeat(np.arange(n), n_eps)
        ret = np.zeros(state.size)
        disc = 1.0
        for _ in range(cap):
            draw = rng.random(state.size)
            nxt = (draw[:, None] > cum[state]).sum(axis=1)
            ret += disc * cost[state, nxt]
            state = nxt
            disc *= model.discount
        per_start = ret.reshape(n, n_eps)
        return per_start.sum(axis=1), (per_start**2).sum(axis=1)

    tasks = list(zip(seeds, sizes))
    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            parts = list(pool.map(run_chunk, tasks))
    else:
        parts = [run_chunk(t) for t in tasks]

    total = np.zeros(n)
    total_sq = np.zeros(n)
    for s, sq in parts:
        total += s
        total_sq += sq
    e = config.episodes
    means = total / e
    variance = np.maximum(total_sq - e * means**2, 0.0) / max(e - 1, 1)
    std_errors = np.sqrt(variance / e)
    return RolloutSummary(
        means=means,
        std_errors=std_errors,
        episodes=e,
        horizon_cap=cap,
        seed=config.seed,
        kernel_choice=config.kernel_choice,
    )


# ---------------------------------------------------------------------------
# helpers


def _auto_cap(alpha, f_max, stat_tol):
    if f_max <= 0.0:
        return 1
    target = (stat_tol / 10.0) * (1.0 - alpha) / f_max
    if target >= 1.0:
        return 1
    return max(1, math.ceil(math.log(target) / math.log(alpha)))


def _random_ball_points(rng, mu, radius, trials):
    """Feasible probes near and inside the ball boundary.

    Half are single pairwise transfers (mass t from one outcome onto
    another, t capped by radius/2 and the donor's mass), half are random
    zero-sum directions scaled to the ball and the simplex.
    """
    if trials <= 0 or mu.size < 2:
        return np.empty((0, mu.size))
    n_pair = trials // 2
    n_dir = trials - n_pair

    donor = rng.integers(0, mu.size, size=n_pair)
    shift = rng.integers(1, mu.size, size=n_pair)
    receiver = (donor + shift) % mu.size
    cap = np.minimum(0.5 * radius, mu[donor])
    amount = cap * np.where(np.arange(n_pair) % 2 == 0, 1.0, rng.random(n_pair))
    pairs = np.tile(mu, (n_pair, 1))
    rows = np.arange(n_pair)
    pairs[rows, donor] -= amount
    pairs[rows, receiver] += amount

    d = rng.standard_normal((n_dir, mu.size))
    d -= d.mean(axis=1, keepdims=True)
    norm = np.abs(d).sum(axis=1)
    norm[norm == 0.0] = np.inf
    with np.errstate(divide="ignore"):
        s_ball = radius / norm
        ratio = np.where(d < 0.0, mu / np.maximum(-d, 1e-300), np.inf)
    s_feas = ratio.min(axis=1)
    scale = np.minimum(s_ball, s_feas)
    # half of these sit on the boundary, half explore the interior
    interior = rng.random(n_dir)
    scale = np.where(np.arange(n_dir) % 2 == 0, scale, scale * interior)
    dirs = mu + scale[:, None] * d
    dirs = np.maximum(dirs, 0.0)
    dirs /= dirs.sum(axis=1, keepdims=True)
    return np.vstack([pairs, dirs])


@lru_cache(maxsize=None)
def _simplex_grid(n, steps=GRID_STEPS):
    if n == 1:
        return np.ones((1, 1))
    if n == 2:
        i = np.arange(steps + 1, dtype=np.float64)
        return np.column_stack([i, steps - i]) / steps
    pts = [
        (i, j, steps - i - j)
        for i in range(steps + 1)
        for j in range(steps + 1 - i)
    ]
    return np.asarray(pts, dtype=np.float64) / steps


def _random_instance(rng, max_size):
    """One fuzz instance: distribution, levels (ties injected), radius."""
    n = int(rng.integers(2, max_size + 1))
    concentration = rng.choice([0.3, 1.0, 3.0])
    mu = rng.dirichlet(np.full(n, concentration))
    if rng.random() < 0.15:   # park some outcomes at exactly zero mass
        kill = rng.integers(0, n, size=max(1, n // 3))
        mu[kill] = 0.0
        mu /= mu.sum()
    lv = rng.normal(0.0, 10.0, n)
    if rng.random() < 0.3 and n >= 3:
        lv[int(rng.integers(0, n))] = lv[int(rng.integers(0, n))]
    pick = rng.random()
    if pick < 0.1:
        r = 0.0
    elif pick < 0.2:
        r = 2.0
    else:
        r = float(rng.uniform(0.0, 2.0))
    return mu, lv, r
