"""Synthetic data generation from noisy marginals.

Two strategies stand behind one entry point:

  "brute"   minimize the maximum l1 distance to the noisy marginals over
            size-n multisets of the joint domain.  Exhaustive enumeration when
            the multiset count fits the configured cap, otherwise a
            deterministic greedy descent over single-row reassignments
            minimizing the same objective.
  "fitted"  least-squares fit of a dense joint distribution to the noisy
            marginals (projected gradient on the probability simplex),
            followed by attribute-by-attribute conditional sampling with
            floor/remainder count conservation.

The synthesizer sees only the noisy marginals, the target size and the
schema; diagnostics against the real data are assembled outside it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

from .dataset import Dataset, Schema
from .marginals import (Marginal, MarginalQuery, compute_marginal, enumerate_queries,
                        l1_distance, normalized_l1)
from .privacy import PrivacyParams, add_noise_to_set, calibrate, synthesis_l1_bound

DEFAULT_CANDIDATE_CAP = 10_000_000
DENSE_CELL_CAP = 1_000_000


class SynthesisError(ValueError):
    """Synthesis request outside the supported regime."""


@dataclass(frozen=True)
class NoisyMarginalSet:
    """Noisy marginal measurements for a unique, schema-valid query set."""

    schema: Schema
    marginals: tuple[Marginal, ...]
    sigma: float
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "marginals", tuple(self.marginals))
        queries = [m.query for m in self.marginals]
        if len(set(queries)) != len(queries):
            raise SynthesisError("duplicate queries in marginal set")
        for q in queries:
            q.validate(self.schema)


def _joint_shape(schema: Schema) -> tuple[int, ...]:
    return schema.sizes


def num_joint_cells(schema: Schema) -> int:
    return int(np.prod(schema.sizes))


def _bin_map(schema: Schema, query: MarginalQuery) -> np.ndarray:
    """Map from flat joint-cell index to the query's flat marginal bin."""
    cells = num_joint_cells(schema)
    codes = np.stack(np.unravel_index(np.arange(cells), _joint_shape(schema)), axis=1)
    sub = codes[:, list(query.attrs)]
    return np.ravel_multi_index(tuple(sub.T), schema.shape(query.attrs))


def _counts_to_dataset(counts: np.ndarray, schema: Schema) -> Dataset:
    cell_ids = np.repeat(np.arange(counts.shape[0]), counts.astype(np.int64))
    codes = np.stack(np.unravel_index(cell_ids, _joint_shape(schema)), axis=1)
    return Dataset(schema, codes)


def _max_l1_objective(counts: np.ndarray, bin_maps, targets) -> float:
    worst = 0.0
    for bm, t in zip(bin_maps, targets):
        seg = np.bincount(bm, weights=counts, minlength=t.shape[0])
        worst = max(worst, float(np.abs(t - seg).sum()))
    return worst


def brute_force_synth(n: int, nm: NoisyMarginalSet,
                      cap: int = DEFAULT_CANDIDATE_CAP) -> Dataset:
    """Exhaustive minimizer of max_q ||h_q - M_q(D)||_1 over size-n multisets.

    Ties are broken by the lexicographically smallest multiset encoding
    (candidates are scanned in that order and only strict improvements are
    kept).  Candidate count C(|cells|+n-1, n) must not exceed `cap`.
    """
    if not nm.marginals:
        raise SynthesisError("empty query set")
    if n < 0:
        raise SynthesisError("n must be non-negative")
    cells = num_joint_cells(nm.schema)
    n_candidates = math.comb(cells + n - 1, n)
    if n_candidates > cap:
        raise SynthesisError(
            f"{n_candidates} candidate multisets exceed the cap {cap}; "
            "use the greedy or fitted path for this size"
        )
    bin_maps = [_bin_map(nm.schema, m.query) for m in nm.marginals]
    targets = [m.counts for m in nm.marginals]
    best_counts = None
    best_obj = math.inf
    for combo in combinations_with_replacement(range(cells), n):
        counts = np.bincount(np.asarray(combo, dtype=np.int64), minlength=cells).astype(np.float64)
        obj = _max_l1_objective(counts, bin_maps, targets)
        if obj < best_obj:
            best_obj = obj
            best_counts = counts
    return _counts_to_dataset(best_counts, nm.schema)


def _largest_remainder_round(mu: np.ndarray, n: int) -> np.ndarray:
    """Integer counts summing to n, each within one of mu (after scaling to n)."""
    mu = np.maximum(np.asarray(mu, dtype=np.float64), 0.0)
    total = mu.sum()
    mu = np.full_like(mu, n / mu.shape[0]) if total <= 0 else mu * (n / total)
    floors = np.floor(mu).astype(np.int64)
    r = n - int(floors.sum())
    if r > 0:
        frac = mu - floors
        extra = np.argsort(-frac, kind="stable")[:r]
        floors[extra] += 1
    return floors


def _greedy_minmax(n: int, nm: NoisyMarginalSet, max_steps: int | None = None) -> np.ndarray:
    """Deterministic single-row-reassignment descent on the max-l1 objective.

    Runs from two starts (uniform counts, and the product of the clipped
    one-way noisy marginals) and keeps the better local minimum.
    """
    schema = nm.schema
    cells = num_joint_cells(schema)
    if cells * cells * max(1, len(nm.marginals)) > 200_000_000:
        raise SynthesisError("joint domain too large for the greedy path; use fitted mode")
    bin_maps = [_bin_map(schema, m.query) for m in nm.marginals]
    targets = [m.counts for m in nm.marginals]
    eq_masks = [bm[:, None] == bm[None, :] for bm in bin_maps]
    if max_steps is None:
        max_steps = 200 + 40 * n

    def descend(counts: np.ndarray) -> tuple[np.ndarray, float]:
        counts = counts.astype(np.float64)
        resid = []
        l1 = []
        for bm, t in zip(bin_maps, targets):
            seg = np.bincount(bm, weights=counts, minlength=t.shape[0])
            resid.append(t - seg)
            l1.append(float(np.abs(t - seg).sum()))
        l1 = np.asarray(l1)
        for _ in range(max_steps):
            obj = float(l1.max())
            cand = None
            for qi, (bm, r) in enumerate(zip(bin_maps, resid)):
                rb = r[bm]
                d_remove = np.abs(rb + 1.0) - np.abs(rb)  # take one row out of cell i
                d_add = np.abs(rb - 1.0) - np.abs(rb)     # put one row into cell j
                mq = l1[qi] + d_remove[:, None] + d_add[None, :]
                mq[eq_masks[qi]] = l1[qi]
                cand = mq if cand is None else np.maximum(cand, mq)
            cand[counts <= 0, :] = math.inf
            np.fill_diagonal(cand, math.inf)
            flat = int(np.argmin(cand))
            i, j = divmod(flat, cells)
            if not cand[i, j] < obj - 1e-12:
                break
            counts[i] -= 1.0
            counts[j] += 1.0
            for qi, bm in enumerate(bin_maps):
                bi, bj = bm[i], bm[j]
                if bi != bj:
                    r = resid[qi]
                    l1[qi] += (abs(r[bi] + 1.0) - abs(r[bi])) + (abs(r[bj] - 1.0) - abs(r[bj]))
                    r[bi] += 1.0
                    r[bj] -= 1.0
        return counts, float(l1.max())

    starts = [_largest_remainder_round(np.ones(cells), n)]
    one_way = {m.query.attrs[0]: m for m in nm.marginals if m.query.order == 1}
    if len(one_way) == schema.num_attributes:
        probs = np.ones(1)
        for j in range(schema.num_attributes):
            col = np.maximum(one_way[j].counts, 0.0)
            col = np.full(schema.sizes[j], 1.0 / schema.sizes[j]) if col.sum() <= 0 else col / col.sum()
            probs = np.multiply.outer(probs, col).ravel()
        starts.append(_largest_remainder_round(probs, n))

    best_counts, best_obj = None, math.inf
    for start in starts:
        counts, obj = descend(start)
        if obj < best_obj:
            best_counts, best_obj = counts, obj
    return best_counts


# ---------------------------------------------------------------------------
# Distribution fitting (dense joint, least squares on the simplex)


@dataclass(frozen=True)
class DistributionEstimate:
    """Dense joint probability vector explaining the noisy marginals."""

    schema: Schema
    probs: np.ndarray
    objective_trace: tuple[float, ...]

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64).copy()
        if probs.ndim != 1 or probs.shape[0] != num_joint_cells(self.schema):
            raise SynthesisError("probs must be a flat vector over the joint domain")
        if (probs < -1e-12).any() or abs(float(probs.sum()) - 1.0) > 1e-9:
            raise SynthesisError("probs must be a normalized non-negative distribution")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    def marginal_probs(self, query: MarginalQuery) -> np.ndarray:
        query.validate(self.schema)
        shape = _joint_shape(self.schema)
        keep = set(query.attrs)
        drop = tuple(i for i in range(len(shape)) if i not in keep)
        table = self.probs.reshape(shape)
        if drop:
            table = table.sum(axis=drop)
        return table.ravel()


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {p >= 0, sum p = 1} (sort-based, O(n log n))."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u * np.arange(1, v.shape[0] + 1) > css)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def fit_distribution(nm: NoisyMarginalSet, n: float | None = None,
                     iters: int = 2000, tol: float = 1e-10) -> DistributionEstimate:
    """Minimize sum_q ||n * M_q(p) - h_q||_2^2 over the probability simplex.

    Projected gradient from the uniform distribution with the fixed step
    1/L, L being the gradient's Lipschitz constant, so the objective is
    non-increasing.  Stops at the iteration cap or when the relative
    objective improvement falls below tol.  Negative noisy entries need no
    pre-clamping; the simplex projection resolves them.
    """
    if not nm.marginals:
        raise SynthesisError("empty query set")
    cells = num_joint_cells(nm.schema)
    if cells > DENSE_CELL_CAP:
        raise SynthesisError(f"joint domain of {cells} cells exceeds dense-mode cap {DENSE_CELL_CAP}")
    if n is None:
        n = max(1.0, float(np.mean([m.total for m in nm.marginals])))
    bin_maps = [_bin_map(nm.schema, m.query) for m in nm.marginals]
    targets = [m.counts for m in nm.marginals]

    lipschitz = 2.0 * n * n * sum(cells / t.shape[0] for t in targets)
    step = 1.0 / lipschitz

    def objective_and_grad(p):
        obj = 0.0
        grad = np.zeros_like(p)
        for bm, t in zip(bin_maps, targets):
            diff = n * np.bincount(bm, weights=p, minlength=t.shape[0]) - t
            obj += float(diff @ diff)
            grad += 2.0 * n * diff[bm]
        return obj, grad

    p = np.full(cells, 1.0 / cells)
    obj, grad = objective_and_grad(p)
    trace = [obj]
    for _ in range(iters):
        p = _project_simplex(p - step * grad)
        obj_new, grad = objective_and_grad(p)
        trace.append(obj_new)
        if obj - obj_new <= tol * max(obj, 1.0):
            obj = obj_new
            break
        obj = obj_new
    return DistributionEstimate(nm.schema, p, tuple(trace))


# ---------------------------------------------------------------------------
# Sampling


def sample_column(mu: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Emit exactly n codes with per-value counts in {floor(mu_t), floor(mu_t)+1}.

    Each value first receives floor(mu_t) copies; the remaining slots are
    drawn without replacement with probability proportional to the fractional
    parts, and the column is shuffled.  If sum(mu) exceeds n or falls more
    than one below it, mu is rescaled to sum to n first (the envelope then
    refers to the rescaled vector).
    """
    mu = np.asarray(mu, dtype=np.float64)
    if (mu < 0).any():
        raise SynthesisError("fractional counts must be non-negative")
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    total = float(mu.sum())
    if total <= 0.0:
        raise SynthesisError("all-zero fractional counts with n > 0")
    if total > n or n - total > 1.0:
        mu = mu * (n / total)
    floors = np.floor(mu).astype(np.int64)
    counts = floors.copy()
    r = n - int(floors.sum())
    assert r >= 0, "floor counts cannot exceed n after rescaling"
    if r > 0:
        frac = mu - floors
        chosen = _draw_without_replacement(frac, mu, r, rng)
        counts[chosen] += 1
    column = np.repeat(np.arange(mu.shape[0]), counts)
    rng.shuffle(column)
    return column


def _draw_without_replacement(frac: np.ndarray, mu: np.ndarray, r: int,
                              rng: np.random.Generator) -> np.ndarray:
    """r distinct indices, fractional parts first, mu-weighted fallback after."""
    positive = np.nonzero(frac > 0)[0]
    if positive.shape[0] >= r:
        p = frac[positive] / frac[positive].sum()
        return positive[rng.choice(positive.shape[0], size=r, replace=False, p=p)]
    chosen = positive
    rest = np.setdiff1d(np.arange(frac.shape[0]), positive, assume_unique=True)
    w = mu[rest]
    w = np.full(rest.shape[0], 1.0) if w.sum() <= 0 else w
    extra = rest[rng.choice(rest.shape[0], size=r - positive.shape[0], replace=False, p=w / w.sum())]
    return np.concatenate([chosen, extra])


def sample_dataset(dist: DistributionEstimate, n: int, rng: np.random.Generator) -> Dataset:
    """Draw a size-n dataset column by column from the joint estimate.

    Attributes are processed in order; rows are grouped by their already
    assigned prefix and each group's column is drawn via sample_column from
    the conditional fractional counts, so group totals are conserved exactly.
    """
    schema = dist.schema
    shape = _joint_shape(schema)
    k = len(shape)
    joint = dist.probs.reshape(shape)
    prefix_tables = [joint.sum(axis=tuple(range(i + 1, k))) for i in range(k)]
    codes = np.zeros((n, k), dtype=np.int64)
    groups: dict[tuple[int, ...], np.ndarray] = {(): np.arange(n)}
    for i in range(k):
        table = prefix_tables[i]
        next_groups: dict[tuple[int, ...], np.ndarray] = {}
        for prefix in sorted(groups):
            rows = groups[prefix]
            weights = np.asarray(table[prefix], dtype=np.float64)
            mass = float(weights.sum())
            if mass <= 0.0:
                mu = np.full(shape[i], rows.shape[0] / shape[i])
            else:
                mu = rows.shape[0] * weights / mass
            column = sample_column(mu, rows.shape[0], rng)
            codes[rows, i] = column
            for v in range(shape[i]):
                sel = rows[column == v]
                if sel.shape[0]:
                    next_groups[prefix + (v,)] = sel
        groups = next_groups
    return Dataset(schema, codes)


# ---------------------------------------------------------------------------
# End-to-end mechanism


def synthesize(n: int, nm: NoisyMarginalSet, mode: str,
               rng: np.random.Generator | None = None,
               cap: int = DEFAULT_CANDIDATE_CAP,
               fit_iters: int = 2000, fit_tol: float = 1e-10) -> tuple[Dataset, dict]:
    """Build a size-n dataset from noisy marginals only (no access to real data).

    mode "brute" uses exhaustive search when the candidate count fits `cap`
    and the greedy descent otherwise; mode "fitted" fits a dense joint
    distribution and samples from it (requires rng).
    """
    if mode == "brute":
        cells = num_joint_cells(nm.schema)
        if math.comb(cells + n - 1, n) <= cap:
            ds = brute_force_synth(n, nm, cap=cap)
        else:
            ds = _counts_to_dataset(_greedy_minmax(n, nm), nm.schema)
    elif mode == "fitted":
        if rng is None:
            raise SynthesisError("fitted mode needs a random generator")
        dist = fit_distribution(nm, n=n, iters=fit_iters, tol=fit_tol)
        ds = sample_dataset(dist, n, rng)
    else:
        raise SynthesisError(f"unknown mode {mode!r}; expected 'brute' or 'fitted'")

    dists = [l1_distance(m, compute_marginal(ds, m.query)) for m in nm.marginals]
    stats = {"l1_to_noisy_max": max(dists), "l1_to_noisy_mean": float(np.mean(dists))}
    return ds, stats


@dataclass(frozen=True)
class GenReport:
    """Provenance of one synthetic dataset.

    The `nonprivate_*` entries compare against the real marginals; they are
    evaluation-only diagnostics computed outside the mechanism and must not be
    released alongside the synthetic data.
    """

    n: int
    d: int
    mode: str
    seed: int
    sigma: float
    sensitivity: float | None
    sensitivity_mode: str | None
    epsilon: float | None
    delta: float | None
    epsilon_above_stated_range: bool
    query_count: int
    lam: float | None
    l1_bound_at_lam: float | None
    l1_to_noisy_max: float
    l1_to_noisy_mean: float
    nonprivate_l1_to_real_max: float
    nonprivate_l1_to_real_mean: float
    nonprivate_normalized_l1_max: float
    nonprivate_normalized_l1_mean: float

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def generate_synthetic(ds_real: Dataset, d: int, privacy: PrivacyParams | None = None,
                       mode: str = "fitted", seed: int = 0,
                       sensitivity_mode: str = "exact",
                       cap: int = DEFAULT_CANDIDATE_CAP,
                       sigma_override: float | None = None,
                       fit_iters: int = 2000, fit_tol: float = 1e-10) -> tuple[Dataset, GenReport]:
    """Measure all order-<=d marginals, noise them, synthesize, and report.

    sigma comes from the Gaussian-mechanism calibration of `privacy` under the
    chosen sensitivity mode; sigma_override (testing hook) bypasses that.
    Fixed seed gives a bit-identical dataset on one platform.
    """
    if privacy is None and sigma_override is None:
        raise SynthesisError("need privacy parameters or an explicit sigma_override")
    schema = ds_real.schema
    m = schema.num_features
    queries = enumerate_queries(m, d)
    exact = [compute_marginal(ds_real, q) for q in queries]

    if sigma_override is not None:
        sigma, sensitivity, sens_mode = float(sigma_override), None, None
    else:
        calib = calibrate(m, d, privacy, sensitivity_mode)
        sigma, sensitivity, sens_mode = calib.sigma, calib.sensitivity, calib.sensitivity_mode

    noisy = add_noise_to_set(exact, sigma, seed)
    nm = NoisyMarginalSet(schema, tuple(noisy), sigma, seed)
    rng = np.random.default_rng([seed, 1])
    ds_s, stats = synthesize(ds_real.n, nm, mode, rng=rng, cap=cap,
                             fit_iters=fit_iters, fit_tol=fit_tol)

    # evaluation-only diagnostics, outside the mechanism boundary
    synth_margs = [compute_marginal(ds_s, q) for q in queries]
    real_l1 = [l1_distance(e, s) for e, s in zip(exact, synth_margs)]
    norm_l1 = [normalized_l1(e, s, ds_real.n) for e, s in zip(exact, synth_margs)] if ds_real.n else [0.0]

    lam = privacy.lam if privacy is not None else None
    report = GenReport(
        n=ds_real.n, d=d, mode=mode, seed=seed, sigma=sigma,
        sensitivity=sensitivity, sensitivity_mode=sens_mode,
        epsilon=privacy.epsilon if privacy else None,
        delta=privacy.delta if privacy else None,
        epsilon_above_stated_range=bool(privacy and privacy.epsilon > 1.0),
        query_count=len(queries),
        lam=lam,
        l1_bound_at_lam=(synthesis_l1_bound(sigma, d, m, schema.max_domain_size, lam)
                         if lam is not None else None),
        l1_to_noisy_max=stats["l1_to_noisy_max"],
        l1_to_noisy_mean=stats["l1_to_noisy_mean"],
        nonprivate_l1_to_real_max=max(real_l1),
        nonprivate_l1_to_real_mean=float(np.mean(real_l1)),
        nonprivate_normalized_l1_max=max(norm_l1),
        nonprivate_normalized_l1_mean=float(np.mean(norm_l1)),
    )
    return ds_s, report
