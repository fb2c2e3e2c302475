"""Model file format, solution records, and deterministic serialization.

A model is a single JSON object::

    {
      "states":  ["running", "broken"],
      "actions": {"running": ["m", "nm"], "broken": ["r", "s"]},
      "kernel":  {"running": {"m": [0.6, 0.4], ...}, ...},
      "cost":    {"running": {"m": [20.0, 120.0], "nm": 0.0, ...}, ...},
      "terminal_cost": [0.0, 0.0],          # optional, defaults to zeros
      "discount": 1.0,
      "radius": 0.85,                        # scalar or per-stage list
      "horizon": 3                           # omit for stationary models
    }

Stage costs may be scalars ``f(x, u)`` or per-next-state vectors
``c(x, u, z)``. Kernel rows are renormalized when their sums drift from 1 by
at most 1e-6 and rejected beyond that. An optional ``"initial"`` distribution
supports the initial-ambiguity post-processing step in :mod:`tvdp.finite`.

All writers here are deterministic: sorted JSON keys, floats at 12
significant digits, LF line endings. Serializing a parsed document a second
time is byte-identical.
"""

import csv
import io
import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .oracle import as_distribution

SOLUTION_CSV_HEADER = "stage,state,action,value"
SWEEP_CSV_HEADER = "radius,state,value,action"

_MODEL_KEYS = {
    "states", "actions", "kernel", "cost",
    "terminal_cost", "discount", "radius", "horizon", "initial",
}


class ModelError(ValueError):
    """Invalid model document or solution document."""


@dataclass(frozen=True)
class RobustMdpModel:
    """A finite MDP with a TV ambiguity ball around its nominal kernel.

    States and actions are kept as labels; everything numeric is indexed.
    ``kernels[i]`` stacks the nominal rows ``Q(.|x_i, u)`` for the actions of
    state ``i``; ``cost_scalar[i]`` and ``cost_vector[i]`` split each stage
    cost into its ``f(x, u)`` part and optional ``c(x, u, z)`` part.
    """

    states: tuple
    actions: tuple
    kernels: tuple
    cost_scalar: tuple
    cost_vector: tuple
    discount: float
    radius: object
    horizon: object
    terminal_cost: np.ndarray
    initial: object = None

    @property
    def n_states(self):
        return len(self.states)

    @property
    def is_finite(self):
        return self.horizon is not None

    @property
    def has_vector_cost(self):
        return any(cv is not None for cv in self.cost_vector)

    def scalar_radius(self):
        """The single radius of a stationary model (or a broadcast scalar)."""
        if isinstance(self.radius, tuple):
            raise ModelError("model carries per-stage radii, not a scalar radius")
        return float(self.radius)

    def stage_radii(self):
        """Radii (R_0, ..., R_n) indexed by the kernel they perturb."""
        if not self.is_finite:
            raise ModelError("stage radii only exist for finite-horizon models")
        if isinstance(self.radius, tuple):
            return self.radius
        return (float(self.radius),) * (self.horizon + 1)

    def with_radius(self, radius):
        """Copy of the model with its radius replaced (scalar or per-stage)."""
        return replace(self, radius=_parse_radius(radius, self.horizon))

    def with_horizon(self, horizon):
        """Copy with a new horizon; a per-stage radius list must still fit."""
        if horizon is not None:
            horizon = _parse_horizon(horizon)
        if isinstance(self.radius, tuple):
            _parse_radius(list(self.radius), horizon)
        _check_discount(self.discount, horizon)
        return replace(self, horizon=horizon)

    def action_index(self, state_idx, label):
        try:
            return self.actions[state_idx].index(label)
        except ValueError:
            state = self.states[state_idx]
            raise ModelError(f"unknown action {label!r} for state {state!r}") from None

    def policy_indices(self, labels):
        """Per-state action indices for a sequence of action labels."""
        if len(labels) != self.n_states:
            raise ModelError(
                f"policy has {len(labels)} entries for {self.n_states} states"
            )
        return np.array(
            [self.action_index(i, a) for i, a in enumerate(labels)], dtype=np.intp
        )

    def policy_labels(self, idx):
        return tuple(self.actions[i][a] for i, a in enumerate(idx))

    def transition_cost_matrix(self, policy_idx):
        """Total per-transition cost ``f(x, g(x)) + c(x, g(x), z)`` as (n, n)."""
        n = self.n_states
        mat = np.zeros((n, n))
        for i, a in enumerate(policy_idx):
            mat[i, :] = self.cost_scalar[i][a]
            if self.cost_vector[i] is not None:
                mat[i, :] += self.cost_vector[i][a]
        return mat

    def max_stage_cost(self):
        """Largest per-transition stage cost appearing anywhere in the model."""
        worst = 0.0
        for i in range(self.n_states):
            top = float(self.cost_scalar[i].max())
            if self.cost_vector[i] is not None:
                top = float((self.cost_scalar[i][:, None] + self.cost_vector[i]).max())
            worst = max(worst, top)
        return worst


def parse_model(source):
    """Parse a model document (dict or JSON text) into a RobustMdpModel.

    Raises ModelError on any structural or numeric violation: unknown keys,
    missing state/action entries, kernel rows off by more than 1e-6,
    negative costs, discount or radius outside their domains.
    """
    if isinstance(source, (str, bytes)):
        try:
            doc = json.loads(source)
        except json.JSONDecodeError as exc:
            raise ModelError(f"invalid JSON: {exc}") from None
    else:
        doc = source
    if not isinstance(doc, dict):
        raise ModelError("model document must be a JSON object")
    unknown = set(doc) - _MODEL_KEYS
    if unknown:
        raise ModelError(f"unknown model keys: {sorted(unknown)}")
    for key in ("states", "actions", "kernel", "cost", "discount", "radius"):
        if key not in doc:
            raise ModelError(f"model is missing required key {key!r}")

    states = _parse_labels(doc["states"], "states")
    n = len(states)
    horizon = _parse_horizon(doc.get("horizon"))
    discount = _check_discount(doc["discount"], horizon)
    radius = _parse_radius(doc["radius"], horizon)

    actions = []
    for s in states:
        acts = _lookup(doc["actions"], s, "actions")
        actions.append(_parse_labels(acts, f"actions[{s!r}]"))
    _reject_extra_states(doc["actions"], states, "actions")

    kernels, cost_scalar, cost_vector = [], [], []
    for i, s in enumerate(states):
        krows = _lookup(doc["kernel"], s, "kernel")
        crows = _lookup(doc["cost"], s, "cost")
        rows, f_sc, f_vec = [], [], []
        any_vec = False
        for a in actions[i]:
            row = _lookup(krows, a, f"kernel[{s!r}]")
            try:
                dist = as_distribution(row, sum_tol=1e-6, entry_tol=1e-9)
            except ValueError as exc:
                raise ModelError(f"kernel[{s!r}][{a!r}]: {exc}") from None
            if dist.size != n:
                raise ModelError(
                    f"kernel[{s!r}][{a!r}] has {dist.size} entries for {n} states"
                )
            rows.append(dist)
            cval = _lookup(crows, a, f"cost[{s!r}]")
            sc, vec = _parse_cost(cval, n, s, a)
            f_sc.append(sc)
            f_vec.append(vec)
            any_vec = any_vec or vec is not None
        _reject_extra_actions(krows, actions[i], f"kernel[{s!r}]")
        _reject_extra_actions(crows, actions[i], f"cost[{s!r}]")
        kernels.append(np.array(rows))
        cost_scalar.append(np.array(f_sc))
        if any_vec:
            stacked = np.array([
                vec if vec is not None else np.zeros(n) for vec in f_vec
            ])
            cost_vector.append(stacked)
        else:
            cost_vector.append(None)

    terminal = doc.get("terminal_cost")
    if terminal is None:
        terminal = np.zeros(n)
    else:
        terminal = _parse_cost_vector(terminal, n, "terminal_cost")

    initial = doc.get("initial")
    if initial is not None:
        try:
            initial = as_distribution(initial, sum_tol=1e-6, entry_tol=1e-9)
        except ValueError as exc:
            raise ModelError(f"initial: {exc}") from None
        if initial.size != n:
            raise ModelError("initial distribution length does not match states")

    return RobustMdpModel(
        states=states,
        actions=tuple(actions),
        kernels=tuple(kernels),
        cost_scalar=tuple(cost_scalar),
        cost_vector=tuple(cost_vector),
        discount=discount,
        radius=radius,
        horizon=horizon,
        terminal_cost=terminal,
        initial=initial,
    )


def load_model(path):
    """Read and parse a model JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ModelError(f"cannot read model file {path}: {exc}") from None
    return parse_model(text)


def example_names():
    """Names of the bundled example models."""
    return ("machine", "threestate")


def example_model_text(name):
    """Raw JSON text of a bundled example model."""
    if name not in example_names():
        raise ModelError(f"unknown example model {name!r}; have {example_names()}")
    from importlib.resources import files

    return files("tvdp").joinpath(f"examples/{name}.json").read_text(encoding="utf-8")


def load_example(name):
    """Parse one of the bundled example models by name."""
    return parse_model(example_model_text(name))


# ---------------------------------------------------------------------------
# solution records


@dataclass(frozen=True)
class SolutionRecord:
    """Serializable result of a solve.

    ``kind`` is "finite" (``values[j]`` per stage j, terminal policy None) or
    "stationary" (single entry, stage written as -1 in CSV). ``worst_kernels``
    holds one (n, n) matrix per entry, row i the maximizing kernel row at
    state i under the chosen action, or None where there is no decision.
    """

    kind: str
    states: tuple
    values: tuple
    policies: tuple
    worst_kernels: tuple
    metadata: dict


@dataclass(frozen=True)
class SweepPoint:
    """One radius on a sweep curve: values and policy at that radius."""

    radius: float
    values: np.ndarray
    policy: tuple


def serialize_solution(record):
    """Render a SolutionRecord as canonical JSON text.

    Deterministic: sorted keys, 12 significant digits, trailing newline.
    Serializing the result of :func:`read_solution` reproduces the exact
    bytes.
    """
    doc = dict(record.metadata)
    doc["kind"] = record.kind
    doc["states"] = list(record.states)
    if record.kind == "stationary":
        doc["values"] = _listify(record.values[0])
        doc["policy"] = list(record.policies[0])
        doc["worst_kernel_matrix"] = _listify(record.worst_kernels[0])
    elif record.kind == "finite":
        doc["stages"] = [
            {
                "stage": j,
                "values": _listify(record.values[j]),
                "policy": None if record.policies[j] is None else list(record.policies[j]),
                "worst_kernels": _listify(record.worst_kernels[j]),
            }
            for j in range(len(record.values))
        ]
    else:
        raise ModelError(f"unknown solution kind {record.kind!r}")
    return dumps_canonical(doc) + "\n"


def read_solution(text):
    """Parse serialized solution JSON back into a SolutionRecord."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"invalid solution JSON: {exc}") from None
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ModelError("solution document must be an object with a 'kind'")
    kind = doc.pop("kind")
    states = tuple(doc.pop("states"))
    if kind == "stationary":
        values = (np.asarray(doc.pop("values"), dtype=np.float64),)
        policies = (tuple(doc.pop("policy")),)
        kernels = (_read_kernels(doc.pop("worst_kernel_matrix"), len(states)),)
    elif kind == "finite":
        stages = sorted(doc.pop("stages"), key=lambda st: st["stage"])
        values, policies, kernels = [], [], []
        for st in stages:
            values.append(np.asarray(st["values"], dtype=np.float64))
            policies.append(None if st["policy"] is None else tuple(st["policy"]))
            kernels.append(_read_kernels(st["worst_kernels"], len(states)))
        values, policies, kernels = tuple(values), tuple(policies), tuple(kernels)
    else:
        raise ModelError(f"unknown solution kind {kind!r}")
    for v in values:
        if v.shape != (len(states),) or not np.all(np.isfinite(v)):
            raise ModelError("solution values malformed")
    return SolutionRecord(
        kind=kind,
        states=states,
        values=values,
        policies=policies,
        worst_kernels=kernels,
        metadata=doc,
    )


def solution_csv(record):
    """Render a SolutionRecord as ``stage,state,action,value`` CSV text.

    Stationary solutions use stage -1; terminal stages have an empty action
    column. LF line endings, 12 significant digits.
    """
    lines = [SOLUTION_CSV_HEADER]
    if record.kind == "stationary":
        entries = [(-1, record.values[0], record.policies[0])]
    else:
        entries = [
            (j, record.values[j], record.policies[j])
            for j in range(len(record.values))
        ]
    for stage, vals, policy in entries:
        for i, state in enumerate(record.states):
            action = "" if policy is None else policy[i]
            lines.append(f"{stage},{state},{action},{format_float(vals[i])}")
    return "\n".join(lines) + "\n"


def sweep_csv(points, states):
    """Render sweep points as ``radius,state,value,action`` CSV text."""
    lines = [SWEEP_CSV_HEADER]
    for pt in points:
        for i, state in enumerate(states):
            lines.append(
                f"{format_float(pt.radius)},{state},"
                f"{format_float(pt.values[i])},{pt.policy[i]}"
            )
    return "\n".join(lines) + "\n"


def read_csv_rows(text):
    """Parse CSV text into a list of row dicts (used by tests and tooling)."""
    return list(csv.DictReader(io.StringIO(text)))


# ---------------------------------------------------------------------------
# canonical JSON


def format_float(x):
    """Format a float at 12 significant digits (canonical across writers)."""
    x = float(x)
    if not math.isfinite(x):
        raise ModelError("cannot serialize non-finite number")
    return "%.12g" % x


def dumps_canonical(obj):
    """Deterministic JSON: sorted keys, 12-significant-digit floats."""
    out = io.StringIO()
    _dump(obj, out)
    return out.getvalue()


def _dump(obj, out):
    if obj is None:
        out.write("null")
    elif obj is True:
        out.write("true")
    elif obj is False:
        out.write("false")
    elif isinstance(obj, str):
        out.write(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, (int, np.integer)):
        out.write(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.write(format_float(obj))
    elif isinstance(obj, dict):
        out.write("{")
        for k, key in enumerate(sorted(obj)):
            if not isinstance(key, str):
                raise ModelError("JSON object keys must be strings")
            if k:
                out.write(",")
            out.write(json.dumps(key, ensure_ascii=False))
            out.write(":")
            _dump(obj[key], out)
        out.write("}")
    elif isinstance(obj, (list, tuple)) or isinstance(obj, np.ndarray):
        items = obj.tolist() if isinstance(obj, np.ndarray) else obj
        out.write("[")
        for k, item in enumerate(items):
            if k:
                out.write(",")
            _dump(item, out)
        out.write("]")
    else:
        raise ModelError(f"cannot serialize {type(obj).__name__}")


# ---------------------------------------------------------------------------
# parsing helpers


def _parse_labels(obj, where):
    if not isinstance(obj, (list, tuple)) or not obj:
        raise ModelError(f"{where} must be a non-empty list of labels")
    labels = []
    for item in obj:
        if not isinstance(item, str) or not item:
            raise ModelError(f"{where} labels must be non-empty strings")
        if any(ch in item for ch in ",\n\r"):
            raise ModelError(f"{where} label {item!r} contains a comma or newline")
        labels.append(item)
    if len(set(labels)) != len(labels):
        raise ModelError(f"{where} labels are not unique")
    return tuple(labels)


def _lookup(mapping, key, where):
    if not isinstance(mapping, dict):
        raise ModelError(f"{where} must be an object")
    if key not in mapping:
        raise ModelError(f"{where} is missing an entry for {key!r}")
    return mapping[key]


def _reject_extra_states(mapping, states, where):
    extra = set(mapping) - set(states)
    if extra:
        raise ModelError(f"{where} references unknown states: {sorted(extra)}")


def _reject_extra_actions(mapping, acts, where):
    extra = set(mapping) - set(acts)
    if extra:
        raise ModelError(f"{where} references unknown actions: {sorted(extra)}")


def _parse_cost(val, n, state, action):
    where = f"cost[{state!r}][{action!r}]"
    if isinstance(val, (int, float)) and not isinstance(val, bool):
        sc = float(val)
        if not math.isfinite(sc) or sc < 0.0:
            raise ModelError(f"{where} must be finite and non-negative")
        return sc, None
    if isinstance(val, (list, tuple)):
        return 0.0, _parse_cost_vector(val, n, where)
    raise ModelError(f"{where} must be a number or a length-{n} list")


def _parse_cost_vector(val, n, where):
    vec = np.asarray(val, dtype=np.float64)
    if vec.shape != (n,):
        raise ModelError(f"{where} must have length {n}")
    if not np.all(np.isfinite(vec)) or vec.min() < 0.0:
        raise ModelError(f"{where} must be finite and non-negative")
    return vec


def _parse_horizon(value):
    if value is None:
        return None
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ModelError(f"horizon must be a positive integer, got {value!r}")
    return value


def _check_discount(value, horizon):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ModelError(f"discount must be a number, got {value!r}")
    a = float(value)
    if horizon is not None:
        if not 0.0 < a <= 1.0:
            raise ModelError(f"finite-horizon discount must be in (0, 1], got {a}")
    elif not 0.0 < a < 1.0:
        raise ModelError(f"stationary discount must be in (0, 1), got {a}")
    return a


def _check_one_radius(value, where="radius"):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ModelError(f"{where} must be a number, got {value!r}")
    r = float(value)
    if not math.isfinite(r) or not 0.0 <= r <= 2.0:
        raise ModelError(f"{where} must lie in [0, 2], got {r}")
    return r


def _parse_radius(value, horizon):
    if isinstance(value, (list, tuple)):
        if horizon is None:
            raise ModelError("per-stage radii require a horizon")
        if len(value) != horizon + 1:
            raise ModelError(
                f"per-stage radii need {horizon + 1} entries (R_0..R_n), got {len(value)}"
            )
        return tuple(_check_one_radius(v, f"radius[{k}]") for k, v in enumerate(value))
    return _check_one_radius(value)


def _listify(arr):
    if arr is None:
        return None
    return np.asarray(arr, dtype=np.float64).tolist()


def _read_kernels(obj, n):
    if obj is None:
        return None
    mat = np.asarray(obj, dtype=np.float64)
    if mat.shape != (n, n):
        raise ModelError("worst kernels must be an n-by-n matrix")
    for row in mat:
        try:
            as_distribution(row, sum_tol=1e-9, entry_tol=1e-9)
        except ValueError as exc:
            raise ModelError(f"worst kernel row invalid: {exc}") from None
    return mat
