"""Monte-Carlo harness for group selection experiments.

A :class:`Scenario` bundles a design recipe, a signal rule, a penalty
method and a replicate budget.  :func:`run_scenario` fits every
replicate of every (q, k) cell and reduces the selection counts into
group-FDR and power estimates with their standard errors, plus the
size composition of the correctly selected groups when group sizes
vary.

Replicates are seeded independently from the scenario's master seed,
so reports are reproducible bit for bit, for any worker count.
"""

import json
import math
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .groups import build_partition, group_effects, standardize
from .lambdas import (GroupSpec, lambda_corrected_equal,
                      lambda_corrected_general, lambda_max, lambda_mean,
                      signal_strength)
from .sigma import estimate_sigma_gslope
from .solver import (GSlopeProblem, SolverConfig, cross_group_coherence,
                     solve, solve_orthogonal)

_DESIGN_KINDS = ("identity", "gaussian")
_WEIGHT_MODES = ("sqrt-rank", "unit", "rank")
_LAMBDA_METHODS = ("max", "mean", "corrected-equal", "corrected-general")
_SIGNAL_RULES = ("sqrt-calibrated", "size-matched", "mean-matched")
_SIGMA_MODES = ("known", "estimated")


@dataclass(frozen=True)
class Scenario:
    """Declarative description of one simulation study.

    Group sizes come either from ``sizes`` (a fixed list, cycled to m
    entries) or from ``binomial_sizes = (trials, prob)`` with zero draws
    redrawn.  ``k`` and ``q`` are grids; every pair becomes one report
    row.  The noise is always standard normal; ``sigma`` only decides
    whether the fit is told the true scale or must estimate it.
    """

    design_kind: str
    m: int
    sizes: tuple = ()
    binomial_sizes: tuple = ()
    n: int = 0
    standardize_columns: bool = False
    weights: str = "sqrt-rank"
    k: tuple = (5,)
    q: tuple = (0.1,)
    lambda_method: str = "max"
    signal: str = "sqrt-calibrated"
    sigma: str = "known"
    replicates: int = 100
    seed: int = 0
    name: str = ""

    def __post_init__(self):
        if self.design_kind not in _DESIGN_KINDS:
            raise ValueError("unknown design_kind %r; expected one of %s"
                             % (self.design_kind, list(_DESIGN_KINDS)))
        if self.m < 1:
            raise ValueError("scenario field 'm' must be a positive count")
        if bool(self.sizes) == bool(self.binomial_sizes):
            raise ValueError("give exactly one of 'sizes' and "
                             "'binomial_sizes'")
        if self.sizes and any(int(s) < 1 for s in self.sizes):
            raise ValueError("scenario field 'sizes' must be positive "
                             "integers")
        if self.binomial_sizes:
            if len(self.binomial_sizes) != 2:
                raise ValueError("'binomial_sizes' takes (trials, prob)")
            trials, prob = self.binomial_sizes
            if int(trials) < 1 or not 0.0 < float(prob) <= 1.0:
                raise ValueError("'binomial_sizes' needs trials >= 1 and "
                                 "prob in (0, 1]")
        if self.design_kind == "identity":
            if self.n:
                raise ValueError("identity designs take no 'n'; rows equal "
                                 "columns by construction")
            if self.standardize_columns:
                raise ValueError("'standardize' applies to gaussian "
                                 "designs only")
        else:
            if self.n < 1:
                raise ValueError("gaussian designs need 'n' >= 1")
        if self.weights not in _WEIGHT_MODES:
            raise ValueError("unknown weights mode %r; expected one of %s"
                             % (self.weights, list(_WEIGHT_MODES)))
        for k in self.k:
            if not 0 <= int(k) <= self.m:
                raise ValueError("sparsity k = %r outside [0, m]" % (k,))
        for q in self.q:
            if not 0.0 < float(q) < 1.0:
                raise ValueError("q = %r outside (0, 1)" % (q,))
        if self.lambda_method not in _LAMBDA_METHODS:
            raise ValueError("unknown lambda_method %r; expected one of %s"
                             % (self.lambda_method, list(_LAMBDA_METHODS)))
        if self.signal not in _SIGNAL_RULES:
            raise ValueError("unknown signal rule %r; expected one of %s"
                             % (self.signal, list(_SIGNAL_RULES)))
        if self.sigma not in _SIGMA_MODES:
            raise ValueError("unknown sigma mode %r; expected one of %s"
                             % (self.sigma, list(_SIGMA_MODES)))
        if self.replicates < 1:
            raise ValueError("scenario field 'replicates' must be >= 1")
        if self.seed < 0:
            raise ValueError("scenario field 'seed' must be a nonnegative "
                             "integer")

    @classmethod
    def from_dict(cls, raw, full_size=False):
        """Build a validated scenario from a plain mapping.

        ``full_size`` applies the optional ``full_size`` override block,
        which desk-scaled scenario files use to carry their original
        problem dimensions.
        """
        if not isinstance(raw, dict):
            raise ValueError("scenario document must be a mapping")
        raw = dict(raw)
        overrides = raw.pop("full_size", None)
        if full_size and overrides:
            if not isinstance(overrides, dict):
                raise ValueError("scenario field 'full_size' must be a "
                                 "mapping of overrides")
            raw.update(overrides)

        kwargs = {}
        for key in ("design_kind", "weights", "lambda_method", "signal",
                    "sigma", "name"):
            if key in raw:
                kwargs[key] = raw.pop(key)
        for key in ("m", "n", "replicates", "seed"):
            if key in raw:
                kwargs[key] = int(raw.pop(key))
        if "standardize" in raw:
            kwargs["standardize_columns"] = bool(raw.pop("standardize"))
        if "sizes" in raw:
            sizes = raw.pop("sizes")
            if isinstance(sizes, dict):
                if set(sizes) != {"binomial"}:
                    raise ValueError("scenario field 'sizes' must be a list "
                                     "or {\"binomial\": [trials, prob]}")
                trials, prob = sizes["binomial"]
                kwargs["binomial_sizes"] = (int(trials), float(prob))
            else:
                kwargs["sizes"] = tuple(int(s) for s in sizes)
        for key, cast in (("k", int), ("q", float)):
            if key in raw:
                value = raw.pop(key)
                if np.isscalar(value):
                    value = [value]
                kwargs[key] = tuple(cast(v) for v in value)
        if raw:
            raise ValueError("unknown scenario field(s): %s"
                             % ", ".join(sorted(raw)))
        return cls(**kwargs)

    def to_dict(self):
        out = {"design_kind": self.design_kind, "m": self.m,
               "weights": self.weights, "k": list(self.k),
               "q": list(self.q), "lambda_method": self.lambda_method,
               "signal": self.signal, "sigma": self.sigma,
               "replicates": self.replicates, "seed": self.seed}
        if self.sizes:
            out["sizes"] = list(self.sizes)
        else:
            out["sizes"] = {"binomial": list(self.binomial_sizes)}
        if self.design_kind == "gaussian":
            out["n"] = self.n
            out["standardize"] = self.standardize_columns
        if self.name:
            out["name"] = self.name
        return out


@dataclass(frozen=True)
class CellStats:
    """One (q, k) row of a report."""

    q: float
    k: int
    gfdr: float
    gfdr_se: float
    power: float
    power_se: float
    mean_rg: float
    replicates: int
    failures: int
    bound: float


@dataclass(frozen=True)
class SimReport:
    """Reduced simulation output.

    ``strg`` lists, per group size, how many truly relevant groups of
    that size were available and selected across all cells, plus the
    share of the selected-truly-relevant total; it is empty when all
    groups share one size.
    """

    rows: tuple
    strg: tuple = ()
    warnings: tuple = ()

    _COLUMNS = ("q", "k", "gfdr", "gfdr_se", "power", "power_se",
                "mean_rg", "replicates", "bound")

    def to_csv(self):
        lines = [",".join(self._COLUMNS)]
        for row in self.rows:
            lines.append(",".join(_fmt(getattr(row, c))
                                  for c in self._COLUMNS))
        return "\n".join(lines) + "\n"

    def strg_to_csv(self):
        if not self.strg:
            return ""
        lines = ["size,relevant,selected,fraction"]
        for size, relevant, selected, fraction in self.strg:
            lines.append("%d,%d,%d,%s" % (size, relevant, selected,
                                          _fmt(fraction)))
        return "\n".join(lines) + "\n"


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(int(value))


def bundled_scenarios():
    """Names of the scenario files shipped with the package."""
    from importlib import resources
    root = resources.files(__package__) / "scenarios"
    return tuple(sorted(entry.name[:-5] for entry in root.iterdir()
                        if entry.name.endswith(".json")))


def load_scenario(source, full_size=False):
    """Load a scenario from a file path or a bundled name.

    A path that exists on disk wins; otherwise ``source`` is looked up
    among the bundled scenarios.
    """
    if os.path.exists(source):
        with open(source) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as err:
                raise ValueError("%s is not valid JSON: %s" % (source, err))
        return Scenario.from_dict(raw, full_size=full_size)
    if source in bundled_scenarios():
        from importlib import resources
        text = (resources.files(__package__) / "scenarios"
                / (source + ".json")).read_text()
        return Scenario.from_dict(json.loads(text), full_size=full_size)
    raise ValueError("no scenario file %r and no bundled scenario of that "
                     "name (available: %s)"
                     % (source, ", ".join(bundled_scenarios())))


def _fixed_sizes(scenario):
    return np.resize(np.asarray(scenario.sizes, dtype=int), scenario.m)


def _weights_for(mode, sizes):
    sizes = np.asarray(sizes, dtype=float)
    if mode == "sqrt-rank":
        return np.sqrt(sizes)
    if mode == "unit":
        return np.ones_like(sizes)
    return sizes.copy()


def _draw_sizes(rng, scenario):
    trials, prob = scenario.binomial_sizes
    sizes = rng.binomial(int(trials), float(prob), size=scenario.m)
    while True:
        zero = sizes == 0
        if not zero.any():
            return sizes
        # empty groups are meaningless; redraw them
        sizes[zero] = rng.binomial(int(trials), float(prob),
                                   size=int(zero.sum()))


def gen_design(scenario, replicate_seed):
    """Draw one design matrix and its grouping.

    Parameters
    ----------
    scenario : Scenario
    replicate_seed : int, SeedSequence or Generator
        Same seed, same matrix, bit for bit.

    Returns
    -------
    X : ndarray of shape (n, p)
    partition : GroupPartition
        Carries the scenario's weight choice.
    """
    rng = np.random.default_rng(replicate_seed)
    if scenario.sizes:
        sizes = _fixed_sizes(scenario)
    else:
        sizes = _draw_sizes(rng, scenario)
    labels = np.repeat(np.arange(scenario.m), sizes)
    partition = build_partition(labels,
                                weights=_weights_for(scenario.weights, sizes))
    p = int(sizes.sum())
    if scenario.design_kind == "identity":
        return np.eye(p), partition
    n = scenario.n
    X = rng.standard_normal((n, p)) / math.sqrt(n)
    if scenario.standardize_columns:
        X = X - X.mean(axis=0)
        norms = np.linalg.norm(X, axis=0)
        if np.any(norms == 0.0):
            raise ValueError("cannot standardize a zero column")
        X = X / norms
    return X, partition


def _effect_targets(rule, m, sizes):
    by_size = {l: signal_strength(m, int(l)) for l in np.unique(sizes)}
    strengths = np.array([by_size[l] for l in sizes])
    if rule == "sqrt-calibrated":
        # one scale for all groups, chosen so the average target matches
        # the average detectability threshold
        root = np.sqrt(np.asarray(sizes, dtype=float))
        return strengths.sum() / root.sum() * root
    if rule == "size-matched":
        return strengths
    return np.full(len(sizes), strengths.mean())


def gen_signal(design, k, scenario, replicate_seed):
    """Draw the k relevant groups and build the true coefficients.

    The relevant set is uniform over groups.  Within a group the
    coefficients point along the first standardized direction, scaled so
    the group's fitted-contribution norm hits the scenario's target
    exactly.

    Returns
    -------
    beta : ndarray of shape (p,)
    """
    rng = np.random.default_rng(replicate_seed)
    partition = design.partition
    m = partition.m
    if k > m:
        raise ValueError("k exceeds the number of groups")
    beta = np.zeros(partition.p)
    if k == 0:
        return beta
    sizes = np.array([g.size for g in partition.groups])
    targets = _effect_targets(scenario.signal, m, sizes)
    relevant = np.sort(rng.choice(m, size=k, replace=False))
    for i in relevant:
        R = design.factors[i]
        target = np.zeros(R.shape[0])
        target[0] = targets[i]
        beta[partition.groups[i]] = np.linalg.pinv(R) @ target
    return beta


def score(fit, true_beta, X, partition):
    """Count selections against the truth.

    Returns
    -------
    rg : int
        Selected groups.
    vg : int
        Selected groups whose true fitted contribution is zero.
    true_positives : int
    """
    true_effects = group_effects(X, true_beta, partition)
    truly = true_effects > 0.0
    rg = int(fit.selected.size)
    vg = int(np.count_nonzero(~truly[fit.selected]))
    return rg, vg, rg - vg


@lru_cache(maxsize=None)
def _cached_design(scenario):
    # identity designs with fixed sizes never change across replicates
    X, partition = gen_design(scenario, 0)
    design = standardize(X, partition)
    coherence = cross_group_coherence(design)
    if coherence > 1e-8:
        raise RuntimeError("cached design lost orthogonality: %g"
                           % coherence)
    return X, design


@lru_cache(maxsize=None)
def _lambda_for(method, weights_mode, sizes, n, q):
    sizes = np.asarray(sizes, dtype=int)
    spec = GroupSpec(q=q, ranks=sizes,
                     weights=_weights_for(weights_mode, sizes), n=n)
    if method == "max":
        return lambda_max(spec)
    if method == "mean":
        return lambda_mean(spec)
    if method == "corrected-equal":
        return lambda_corrected_equal(spec)
    return lambda_corrected_general(spec)


def _run_replicate(scenario, q, k, rep):
    seq = np.random.SeedSequence(entropy=scenario.seed, spawn_key=(rep,))
    rng = np.random.default_rng(seq)
    cacheable = scenario.design_kind == "identity" and bool(scenario.sizes)
    if cacheable:
        X, design = _cached_design(scenario)
    else:
        X, partition = gen_design(scenario, rng)
        design = standardize(X, partition)
    partition = design.partition
    beta = gen_signal(design, k, scenario, rng)
    n = X.shape[0]
    y = X @ beta + rng.standard_normal(n)

    sizes = np.array([g.size for g in partition.groups])
    lam = _lambda_for(scenario.lambda_method, scenario.weights,
                      tuple(int(s) for s in sizes), n, q)
    if scenario.sigma == "estimated":
        fit, _ = estimate_sigma_gslope(y, design, lam)
    elif scenario.design_kind == "identity":
        # exactly orthogonal by construction; skip the quadratic check
        problem = GSlopeProblem(y=y, design=design, lam=lam, sigma=1.0)
        fit = solve_orthogonal(problem, check=False)
    else:
        problem = GSlopeProblem(y=y, design=design, lam=lam, sigma=1.0)
        fit = solve(problem)

    rg, vg, tp = score(fit, beta, X, partition)
    true_effects = group_effects(X, beta, partition)
    truly = true_effects > 0.0
    strg_sizes = tuple(int(sizes[g]) for g in fit.selected if truly[g])
    relevant_sizes = tuple(int(s) for s in sizes[truly])
    return fit.converged, rg, vg, tp, strg_sizes, relevant_sizes


def _resolve_workers(workers):
    if workers is None:
        env = os.environ.get("GSLOPE_THREADS", "").strip()
        if env:
            workers = int(env)
        else:
            workers = os.cpu_count() or 1
    workers = int(workers)
    if workers < 1:
        raise ValueError("worker count must be >= 1")
    return workers


def run_scenario(scenario, workers=None, progress=None):
    """Run every replicate of every (q, k) cell and reduce.

    Parameters
    ----------
    scenario : Scenario
    workers : int, optional
        Process count; defaults to GSLOPE_THREADS or the CPU count.
        Results are reduced in replicate order, so the worker count
        never changes the report.
    progress : callable, optional
        Receives one status line per finished cell.

    Returns
    -------
    SimReport
    """
    workers = _resolve_workers(workers)
    cells = [(q, k) for q in scenario.q for k in scenario.k]
    R = scenario.replicates

    def reduce_cell(q, k, records):
        kept = [r for r in records if r[0]]
        failures = len(records) - len(kept)
        used = len(kept)
        fdp = np.array([vg / max(rg, 1) for _, rg, vg, _, _, _ in kept])
        power = np.array([tp / k if k else 0.0
                          for _, _, _, tp, _, _ in kept])
        rgs = np.array([rg for _, rg, _, _, _, _ in kept], dtype=float)
        if used > 1:
            gfdr_se = float(np.std(fdp, ddof=1) / math.sqrt(used))
            power_se = float(np.std(power, ddof=1) / math.sqrt(used))
        else:
            gfdr_se = power_se = 0.0
        bound = q * (scenario.m - k) / scenario.m \
            if scenario.design_kind == "identity" else q
        return CellStats(q=float(q), k=int(k),
                         gfdr=float(fdp.mean()) if used else float("nan"),
                         gfdr_se=gfdr_se,
                         power=float(power.mean()) if used else float("nan"),
                         power_se=power_se,
                         mean_rg=float(rgs.mean()) if used else float("nan"),
                         replicates=used, failures=failures,
                         bound=float(bound))

    rows = []
    warnings = []
    selected_by_size = Counter()
    relevant_by_size = Counter()
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for q, k in cells:
            if pool is None:
                records = [_run_replicate(scenario, q, k, rep)
                           for rep in range(R)]
            else:
                futures = [pool.submit(_run_replicate, scenario, q, k, rep)
                           for rep in range(R)]
                records = [f.result() for f in futures]
            row = reduce_cell(q, k, records)
            rows.append(row)
            for _, _, _, _, strg_sizes, relevant_sizes in records:
                selected_by_size.update(strg_sizes)
                relevant_by_size.update(relevant_sizes)
            if row.failures:
                warnings.append("cell q=%s k=%d: dropped %d non-converged "
                                "replicate(s)" % (_fmt(q), k, row.failures))
            if progress is not None:
                progress("cell q=%s k=%d done: gfdr=%.4f power=%.4f (%d "
                         "replicates)" % (_fmt(q), k, row.gfdr, row.power,
                                          row.replicates))
    finally:
        if pool is not None:
            pool.shutdown()

    if R == 1:
        warnings.append("single replicate: standard errors degenerate to 0")

    strg = ()
    if len(relevant_by_size) > 1:
        total = sum(selected_by_size.values())
        strg = tuple((size, relevant_by_size[size],
                      selected_by_size.get(size, 0),
                      selected_by_size.get(size, 0) / total if total else 0.0)
                     for size in sorted(relevant_by_size))
    return SimReport(rows=tuple(rows), strg=strg, warnings=tuple(warnings))
