"""Finite-horizon robust backward induction.

The recursion runs in normalized time-to-go form: ``v`` holds the cost still
to be paid from the current stage onward, and one backup is

    v_new(x) = min_u [ f(x,u) + max_{nu in B_R(Q(.|x,u))} <c(x,u,.) + g*v, nu> ]

with ``g`` the discount: the next-state cost vector ``c`` is folded into the
oracle's payoff before maximizing, the scalar part ``f`` added after. Stage j's
backup perturbs kernel Q_{j+1} and therefore uses radius R_{j+1}. The
stage-indexed values ``discount**j * v`` are kept alongside for reporting;
both coincide for undiscounted models.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._backend import waterfill as _waterfill
from .model import ModelError, SolutionRecord, SweepPoint
from .oracle import DEFAULT_TIE_TOL, waterfill_maximize

log = logging.getLogger("tvdp.finite")


@dataclass(frozen=True)
class StagePlan:
    """One stage of a finite-horizon solution.

    ``values`` are normalized time-to-go costs; ``reported_values`` carry the
    stage-indexed weighting ``discount**stage``. The terminal plan has no
    policy and no kernels.
    """

    stage: int
    values: np.ndarray
    reported_values: np.ndarray
    policy: tuple
    policy_idx: object
    worst_kernels: object


def stage_backup(model, next_values, stage_radius, *, stage=None, tie_tol=DEFAULT_TIE_TOL):
    """One robust backup of ``next_values`` with the given kernel radius.

    Returns a StagePlan holding the backed-up values, the per-state argmin
    actions (ties to the lowest declared index), and the maximizing kernel
    row per state under the chosen action.
    """
    v = np.asarray(next_values, dtype=np.float64)
    n = model.n_states
    if v.shape != (n,) or not np.all(np.isfinite(v)):
        raise ModelError("next_values must be a finite vector over the states")
    r = float(stage_radius)
    if not 0.0 <= r <= 2.0:
        raise ModelError(f"stage radius {r} outside [0, 2]")

    base = model.discount * v
    values = np.empty(n)
    policy_idx = np.empty(n, dtype=np.intp)
    worst = np.empty((n, n))
    for i in range(n):
        rows = model.kernels[i]
        f = model.cost_scalar[i]
        cv = model.cost_vector[i]
        best = np.inf
        for a in range(rows.shape[0]):
            payoff = base if cv is None else cv[a] + base
            nu, wf_value, _, _ = _waterfill(rows[a], payoff, r, tie_tol)
            val = f[a] + wf_value
            if val < best:
                best = val
                policy_idx[i] = a
                worst[i, :] = nu
        values[i] = best

    weight = 1.0 if stage is None else model.discount ** stage
    return StagePlan(
        stage=-1 if stage is None else stage,
        values=values,
        reported_values=weight * values,
        policy=model.policy_labels(policy_idx),
        policy_idx=policy_idx,
        worst_kernels=worst,
    )


def solve_finite(model, tie_tol=DEFAULT_TIE_TOL):
    """Backward induction over the full horizon.

    Returns plans for stages 0..n in ascending order; ``plans[n]`` carries
    the terminal costs with no policy attached.
    """
    if not model.is_finite:
        raise ModelError("solve_finite needs a model with a horizon")
    n_stage = model.horizon
    radii = model.stage_radii()
    alpha = model.discount

    v = model.terminal_cost.astype(np.float64).copy()
    plans = [None] * (n_stage + 1)
    plans[n_stage] = StagePlan(
        stage=n_stage,
        values=v,
        reported_values=(alpha ** n_stage) * v,
        policy=None,
        policy_idx=None,
        worst_kernels=None,
    )
    for j in range(n_stage - 1, -1, -1):
        plan = stage_backup(model, v, radii[j + 1], stage=j, tie_tol=tie_tol)
        v = plan.values
        plans[j] = plan
    log.debug("solve_finite: horizon %d, stage-0 values %s", n_stage, plans[0].values)
    return plans


def evaluate_policy_finite(model, policy_seq, tie_tol=DEFAULT_TIE_TOL):
    """Worst-case values of a fixed per-stage Markov policy.

    ``policy_seq[j]`` gives the stage-j action per state (labels or indices).
    Returns normalized value vectors for stages 0..n; only the adversary
    optimizes.
    """
    if not model.is_finite:
        raise ModelError("evaluate_policy_finite needs a model with a horizon")
    n_stage = model.horizon
    if len(policy_seq) != n_stage:
        raise ModelError(f"policy_seq needs {n_stage} stages, got {len(policy_seq)}")
    radii = model.stage_radii()
    n = model.n_states

    values = [None] * (n_stage + 1)
    v = model.terminal_cost.astype(np.float64).copy()
    values[n_stage] = v
    for j in range(n_stage - 1, -1, -1):
        idx = _as_policy_idx(model, policy_seq[j])
        base = model.discount * v
        new_v = np.empty(n)
        for i in range(n):
            a = idx[i]
            cv = model.cost_vector[i]
            payoff = base if cv is None else cv[a] + base
            _, wf_value, _, _ = _waterfill(
                model.kernels[i][a], payoff, radii[j + 1], tie_tol
            )
            new_v[i] = model.cost_scalar[i][a] + wf_value
        v = new_v
        values[j] = v
    return values


def sweep_radius_finite(model, radii, jobs=1):
    """Stage-0 values and policies across a grid of scalar radii.

    Points are independent solves; ``jobs`` runs them on worker threads
    with results kept in grid order.
    """
    if not model.is_finite:
        raise ModelError("sweep_radius_finite needs a model with a horizon")

    def solve_one(r):
        plans = solve_finite(model.with_radius(float(r)))
        return SweepPoint(radius=float(r), values=plans[0].values, policy=plans[0].policy)

    rads = [float(r) for r in radii]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(solve_one, rads))
    return [solve_one(r) for r in rads]


def initial_worst_value(model, plans, radius=None, tie_tol=DEFAULT_TIE_TOL):
    """Worst-case total cost when the initial distribution is ambiguous too.

    Optional post-processing: maximizes ``<plans[0].values, nu>`` over the TV
    ball of radius ``R_0`` (or ``radius``) around the model's ``initial``
    distribution. The model must declare ``"initial"``.
    """
    if model.initial is None:
        raise ModelError("model declares no initial distribution")
    r0 = model.stage_radii()[0] if radius is None else float(radius)
    res = waterfill_maximize(model.initial, plans[0].values, r0, tie_tol)
    return res.value


def finite_solution_record(model, plans):
    """Bundle solve_finite output into a serializable SolutionRecord."""
    return SolutionRecord(
        kind="finite",
        states=model.states,
        values=tuple(p.reported_values for p in plans),
        policies=tuple(p.policy for p in plans),
        worst_kernels=tuple(p.worst_kernels for p in plans),
        metadata={
            "discount": model.discount,
            "horizon": model.horizon,
            "radius": list(model.radius) if isinstance(model.radius, tuple) else model.radius,
        },
    )


def _as_policy_idx(model, stage_policy):
    entries = list(stage_policy)
    if len(entries) != model.n_states:
        raise ModelError(
            f"stage policy has {len(entries)} entries for {model.n_states} states"
        )
    if all(isinstance(e, str) for e in entries):
        return model.policy_indices(entries)
    idx = np.asarray(entries, dtype=np.intp)
    for i, a in enumerate(idx):
        if not 0 <= a < len(model.actions[i]):
            raise ModelError(f"action index {a} out of range for state {model.states[i]!r}")
    return idx
