"""Condition & Round, its derandomized greedy variant, the CR-val / ind-val
subgraph statistics, and the partial-to-full assignment driver.

Condition & Round: sample a vertex u from the stationary measure, condition
the pseudodistribution on X_u = 0, then round every vertex independently from
its conditioned marginal.  The expected value of this procedure is available
in closed form from degree-4 moments, which both the derandomized variant and
the test suite lean on.

The partial-to-full driver repeatedly asks a caller-supplied subroutine for a
high-CR-value subgraph, rounds its still-unassigned vertices greedily, then
rerandomizes the pseudodistribution on those vertices so later iterations see
them as independent uniform noise.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from ugsos.errors import NullEventError, ParameterError
from ugsos.instances import UgInstance, value
from ugsos.potentials import check_shift_symmetric
from ugsos.sos import (COND_FLOOR, PseudoExpectation, canon_key,
                       rerandomize, symmetrize, ug_objective_poly)

RESYM_TOL = 1e-8


# ---------------------------------------------------------------------------
# Outcome types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IterationRecord:
    subgraph: tuple
    cr_val: float | None
    newly_assigned: tuple
    subgraph_value: float
    val_before: float
    val_after: float
    resymmetrized: bool = False
    subcube: object = None

    @property
    def drop(self) -> float:
        return self.val_before - self.val_after


@dataclass(frozen=True)
class RoundingOutcome:
    """assignment uses -1 for never-assigned vertices (callers complete with
    label 0 where relevant)."""

    assignment: np.ndarray
    achieved_value: float
    expected_value: float | None
    trace: tuple = ()
    seed: object = None

    def __post_init__(self):
        if not (-1e-12 <= self.achieved_value <= 1.0 + 1e-12):
            raise ParameterError(
                f"achieved value {self.achieved_value} outside [0,1]")

    def to_json(self) -> str:
        return json.dumps({
            "assignment": [int(a) for a in self.assignment],
            "achieved_value": self.achieved_value,
            "expected_value": self.expected_value,
            "seed": self.seed,
            "trace": [
                {"subgraph": list(r.subgraph),
                 "cr_val": r.cr_val,
                 "newly_assigned": list(r.newly_assigned),
                 "subgraph_value": r.subgraph_value,
                 "val_before": r.val_before,
                 "val_after": r.val_after,
                 "drop": r.drop,
                 "resymmetrized": r.resymmetrized,
                 "subcube": (list(r.subcube) if r.subcube is not None
                             else None)}
                for r in self.trace],
        })


# ---------------------------------------------------------------------------
# Conditioned marginals and closed forms
# ---------------------------------------------------------------------------

def cond_marginals(pE: PseudoExpectation, inst: UgInstance, u: int,
                   cond_floor: float = COND_FLOOR) -> np.ndarray:
    """(n, k) matrix of Pr[X_v = a | X_u = 0]; row u is the delta at 0.

    Tiny negative entries from an approximately-PSD table are clipped and the
    rows renormalized."""
    n, k = inst.num_vertices, inst.k
    mass = pE.moment(((u, 0, 0),))
    if mass <= cond_floor:
        raise NullEventError(
            f"pE[X_{u},0] = {mass:.3e} below floor {cond_floor}")
    q = np.zeros((n, k))
    for v in range(n):
        if v == u:
            q[u, 0] = 1.0
            continue
        for a in range(k):
            q[v, a] = pE.moment(canon_key(((v, a, 0), (u, 0, 0)))) / mass
    q = np.clip(q, 0.0, None)
    rows = q.sum(axis=1, keepdims=True)
    bad = rows[:, 0] <= 0.0
    q[bad] = 1.0 / k
    rows[bad] = 1.0
    return q / rows


def _edge_arrays(inst: UgInstance, H=None):
    """(eu, ev, w, s) restricted to H-internal edges, weights normalized."""
    if H is None:
        eu, ev, w, s = inst._arrays
    else:
        hset = set(int(v) for v in H)
        rows = [(u, v, w, s) for (u, v, w, s) in inst.edges
                if u in hset and v in hset]
        if not rows:
            raise ParameterError("subgraph has no internal edges")
        eu = np.array([r[0] for r in rows], dtype=np.int64)
        ev = np.array([r[1] for r in rows], dtype=np.int64)
        w = np.array([r[2] for r in rows])
        s = np.array([r[3] for r in rows], dtype=np.int64)
    return eu, ev, w / w.sum(), s


def _ind_val_from_marginals(marg: np.ndarray, inst: UgInstance,
                            edges) -> float:
    """E_e sum_a marg[u,a] marg[v,(a-s)%k] for independent rounding."""
    eu, ev, w, s = edges
    k = inst.k
    a = np.arange(k)
    # sat prob per edge: sum_a marg[eu,a]*marg[ev,(a-s)%k]
    probs = np.einsum("ea,ea->e", marg[eu][:, a],
                      marg[ev][np.arange(len(ev))[:, None], (a[None, :] - s[:, None]) % k])
    return float(w @ probs)


def ind_val(pE: PseudoExpectation, inst: UgInstance, H=None) -> float:
    """Independent-rounding value from unconditioned marginals, over the
    H-internal (default: all) edges."""
    n, k = inst.num_vertices, inst.k
    marg = np.array([[pE.moment(((v, a, 0),)) for a in range(k)]
                     for v in range(n)])
    marg = np.clip(marg, 0.0, None)
    rows = marg.sum(axis=1, keepdims=True)
    marg = np.where(rows > 0, marg / np.maximum(rows, 1e-300), 1.0 / k)
    return _ind_val_from_marginals(marg, inst, _edge_arrays(inst, H))


def expected_cr_value(pE: PseudoExpectation, inst: UgInstance, u: int,
                      H=None) -> float:
    """Closed-form independent-rounding value after conditioning on X_u = 0."""
    return _ind_val_from_marginals(cond_marginals(pE, inst, u), inst,
                                   _edge_arrays(inst, H))


def closed_form_cr(pE: PseudoExpectation, inst: UgInstance) -> float:
    """E_{u~pi} of the conditioned independent-rounding value."""
    pi = inst.stationary
    edges = _edge_arrays(inst)
    total = 0.0
    for u in range(inst.num_vertices):
        if pi[u] > 0:
            total += pi[u] * _ind_val_from_marginals(
                cond_marginals(pE, inst, u), inst, edges)
    return total


def cr_val(pE: PseudoExpectation, inst: UgInstance, H=None) -> float:
    """E_{u uniform in V(H)} of the conditioned independent-rounding value of
    H's internal edges (Condition & Round restricted to H)."""
    if H is None:
        H = range(inst.num_vertices)
    H = sorted(set(int(v) for v in H))
    if not H:
        raise ParameterError("subgraph H is empty")
    edges = _edge_arrays(inst, H)
    vals = [_ind_val_from_marginals(cond_marginals(pE, inst, u), inst, edges)
            for u in H]
    return float(np.mean(vals))


# ---------------------------------------------------------------------------
# Randomized rounding
# ---------------------------------------------------------------------------

def condition_and_round(pE: PseudoExpectation, inst: UgInstance,
                        seed=None) -> RoundingOutcome:
    """Algorithm: sample u ~ pi, condition on X_u = 0, round all vertices
    independently.  Reports both the sampled value and the exact closed-form
    expectation E_u E_Y[val(Y)]."""
    if pE.degree < 2:
        raise ParameterError("condition_and_round needs degree >= 2")
    rng = np.random.default_rng(seed)
    pi = inst.stationary
    n = inst.num_vertices
    q = None
    for _ in range(4 * n):
        u = int(rng.choice(n, p=pi))
        try:
            q = cond_marginals(pE, inst, u)
            break
        except NullEventError:
            continue  # shift-symmetric tables have mass 1/k; this flags a bad pE
    if q is None:
        raise NullEventError("no vertex with conditionable label mass")
    cum = q.cumsum(axis=1)
    y = (rng.random(n)[:, None] > cum).sum(axis=1)
    return RoundingOutcome(
        assignment=y.astype(np.int64),
        achieved_value=value(inst, y),
        expected_value=closed_form_cr(pE, inst),
        seed=seed)


def monte_carlo_cr(pE: PseudoExpectation, inst: UgInstance, n_samples: int,
                   seed=None) -> np.ndarray:
    """Vectorized Condition & Round over many seeds; returns the sampled
    values."""
    rng = np.random.default_rng(seed)
    pi = inst.stationary
    n = inst.num_vertices
    eu, ev, w, s = _edge_arrays(inst)
    us = rng.choice(n, size=n_samples, p=pi)
    out = np.empty(n_samples)
    for u in np.unique(us):
        sel = us == u
        b = int(sel.sum())
        cum = cond_marginals(pE, inst, int(u)).cumsum(axis=1)
        y = (rng.random((b, n))[:, :, None] > cum[None, :, :]).sum(axis=2)
        sat = (y[:, eu] - y[:, ev]) % inst.k == s[None, :]
        out[sel] = sat @ w
    return out


# ---------------------------------------------------------------------------
# Derandomized rounding
# ---------------------------------------------------------------------------

def _greedy_round(marg: np.ndarray, inst: UgInstance, H, edges) -> np.ndarray:
    """Method of conditional expectations under independent rounding with
    per-vertex marginals `marg`; vertices fixed in descending order of their
    max marginal.  Returns labels for H (full-length array, -1 outside)."""
    k = inst.k
    hset = set(H)
    inc = {v: [] for v in H}
    eu, ev, w, s = edges
    for i in range(len(eu)):
        inc[int(eu[i])].append((int(ev[i]), w[i], int(s[i])))
        inc[int(ev[i])].append((int(eu[i]), w[i], int(-s[i]) % k))
    order = sorted(H, key=lambda v: (-marg[v].max(), v))
    x = np.full(inst.num_vertices, -1, dtype=np.int64)
    for v in order:
        scores = np.zeros(k)
        for a in range(k):
            for (nb, wt, sh) in inc[v]:
                if x[nb] >= 0:
                    scores[a] += wt * (1.0 if (a - x[nb]) % k == sh else 0.0)
                else:
                    scores[a] += wt * marg[nb, (a - sh) % k]
        x[v] = int(np.argmax(scores))  # argmax takes the smallest label on ties
    return x


def derandomized_round(pE: PseudoExpectation, inst: UgInstance,
                       H=None) -> RoundingOutcome:
    """Deterministic Condition & Round: pick the conditioning vertex u
    maximizing the closed-form expectation, then fix labels greedily by
    conditional expectations.  The achieved value on H's internal edges is
    never below the best closed-form expectation (up to 1e-9)."""
    if pE.degree < 2:
        raise ParameterError("derandomized_round needs degree >= 2")
    whole = H is None
    H = (list(range(inst.num_vertices)) if whole
         else sorted(set(int(v) for v in H)))
    if not H:
        raise ParameterError("subgraph H is empty")
    try:
        edges = _edge_arrays(inst, None if whole else H)
    except ParameterError:
        # no internal edges: fall back to per-vertex marginal argmax
        x = np.full(inst.num_vertices, -1, dtype=np.int64)
        for v in H:
            marg = [pE.moment(((v, a, 0),)) for a in range(inst.k)]
            x[v] = int(np.argmax(marg))
        return RoundingOutcome(x, 0.0, 0.0)
    best_u, best_exp, best_q = None, -1.0, None
    for u in H:
        try:
            q = cond_marginals(pE, inst, u)
        except NullEventError:
            continue
        e = _ind_val_from_marginals(q, inst, edges)
        if e > best_exp + 1e-15:
            best_u, best_exp, best_q = u, e, q
    if best_u is None:
        raise NullEventError("no vertex with conditionable label mass")
    x = _greedy_round(best_q, inst, H, edges)
    eu, ev, w, s = edges
    achieved = float(w @ ((x[eu] - x[ev]) % inst.k == s))
    assert achieved >= best_exp - 1e-9
    return RoundingOutcome(x, achieved, best_exp)


# ---------------------------------------------------------------------------
# Partial to full
# ---------------------------------------------------------------------------

def partial_to_full(inst: UgInstance, pE0: PseudoExpectation, subroutine,
                    eps: float, degree: int | None = None) -> RoundingOutcome:
    """Iteratively round subroutine-chosen subgraphs and rerandomize.

    `subroutine(mu)` returns (vertex iterable, info dict) or None; `info` may
    carry "cr_val" and "subcube" for the trace.  The loop stops when the
    running pseudodistribution's value falls below 1 - 2*eps, the subroutine
    gives up, or it returns only already-assigned vertices twice in a row.
    Unassigned vertices are completed with label 0 (shift-symmetry makes any
    constant equivalent in expectation)."""
    n = inst.num_vertices
    obj = ug_objective_poly(inst)
    mu = pE0
    assigned = np.full(n, -1, dtype=np.int64)
    trace = []
    stall = 0
    aborted = False
    for _ in range(n + 2):
        val_mu = mu.pe(obj)
        if val_mu < 1.0 - 2.0 * eps:
            break
        sub = subroutine(mu)
        if sub is None:
            break
        H, info = sub
        H = sorted(set(int(v) for v in H))
        S = [v for v in H if assigned[v] < 0]
        if not S:
            stall += 1
            if stall >= 2:
                aborted = True
                break
            continue
        stall = 0
        out = derandomized_round(mu, inst, S)
        for v in S:
            assigned[v] = out.assignment[v]
        mu_next = rerandomize(mu, S)
        resym = False
        dev = check_shift_symmetric(mu_next, strict=False)
        if dev > RESYM_TOL:
            warnings.warn(f"re-symmetrizing after rerandomize "
                          f"(deviation {dev:.2e})", stacklevel=2)
            mu_next = symmetrize(mu_next)
            resym = True
        val_after = mu_next.pe(obj)
        trace.append(IterationRecord(
            subgraph=tuple(H),
            cr_val=info.get("cr_val"),
            newly_assigned=tuple(S),
            subgraph_value=out.achieved_value,
            val_before=val_mu,
            val_after=val_after,
            resymmetrized=resym,
            subcube=info.get("subcube")))
        mu = mu_next
    completed = np.where(assigned < 0, 0, assigned)
    outcome = RoundingOutcome(
        assignment=completed,
        achieved_value=value(inst, completed),
        expected_value=None,
        trace=tuple(trace))
    if aborted:
        object.__setattr__(outcome, "seed", "aborted:stalled-subroutine")
    return outcome
