"""Degree-D sum-of-squares moment relaxation of the unique-games integer
program, an operator-splitting SDP solver, and the pseudodistribution
calculus (evaluation, symmetrization, conditioning, independent copies,
rerandomization, validity checking).

Monomials
---------
The integer program's variables are indicators X_{u,a} ("vertex u gets label
a") with Booleanity X^2 = X, disjointness X_{u,a} X_{u,b} = 0 for a != b, and
the partition constraint sum_a X_{u,a} = 1.  A canonical monomial key is a
sorted tuple of (vertex, label, copy) triples with at most one label per
(vertex, copy); any product with two labels at one vertex is the zero
monomial (represented as None and never stored).  `copy` is 0 except after
`product_copy`, which introduces an independent second copy X'.

Solver
------
`build_relaxation` exposes the full-basis moment-matrix SDP (dimension,
aliasing/partition equality constraints, objective over matrix entries).
Internally the solver works in a *reduced* basis: the partition constraint
eliminates the label k-1 via X_{u,k-1} = 1 - sum_{a<k-1} X_{u,a}, after
which every linear constraint except pE[1] = 1 is structural.  The reduced
feasible set maps onto the full one exactly (the full basis spans the same
polynomial space modulo the constraint ideal), so PSD-ness and feasibility
transfer.  The SDP itself is solved by ADMM: a diagonal least-squares
y-update, projection onto the PSD cone by eigendecomposition,
over-relaxation 1.6, iteration cap 100000.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ugsos.errors import DegreeError, NullEventError, ParameterError, SizeCapError
from ugsos.instances import UgInstance

DIM_CAP = 4000
COND_FLOOR = 1e-9
ADMM_MAX_ITERS = 100_000
ADMM_OVER_RELAX = 1.6


# ---------------------------------------------------------------------------
# Monomial algebra
# ---------------------------------------------------------------------------

def canon_key(pairs):
    """Canonical form of a product of indicator variables.

    `pairs` is an iterable of (vertex, label) or (vertex, label, copy).
    Returns the sorted, collapsed key, or None for the zero monomial (two
    different labels at the same vertex/copy)."""
    seen = {}
    for p in pairs:
        if len(p) == 2:
            v, a = p
            c = 0
        else:
            v, a, c = p
        if (v, c) in seen:
            if seen[(v, c)] != a:
                return None
        else:
            seen[(v, c)] = a
    return tuple(sorted((v, a, c) for (v, c), a in seen.items()))


def key_mul(k1, k2):
    """Product of two canonical keys (None = zero monomial)."""
    if k1 is None or k2 is None:
        return None
    return canon_key(k1 + k2)


def poly_mul(p: dict, q: dict) -> dict:
    out: dict = {}
    for k1, c1 in p.items():
        for k2, c2 in q.items():
            km = key_mul(k1, k2)
            if km is not None:
                out[km] = out.get(km, 0.0) + c1 * c2
    return out


def poly_add(p: dict, q: dict, scale: float = 1.0) -> dict:
    out = dict(p)
    for k, c in q.items():
        out[k] = out.get(k, 0.0) + scale * c
    return out


def shift_key(key, s: int, k: int):
    """Apply a global label shift of s (mod k) to every pair of the key."""
    return tuple(sorted((v, (a + s) % k, c) for (v, a, c) in key))


def all_canonical_keys(n: int, k: int, max_degree: int, copies: int = 1):
    """All canonical keys of degree <= max_degree (single copy by default)."""
    slots = [(v, c) for c in range(copies) for v in range(n)]
    for d in range(max_degree + 1):
        for chosen in itertools.combinations(slots, d):
            for labels in itertools.product(range(k), repeat=d):
                yield tuple(sorted((v, a, c) for (v, c), a in zip(chosen, labels)))


# -- standard polynomials ---------------------------------------------------

def ug_objective_poly(inst: UgInstance, copy: int = 0) -> dict:
    """E_{(u,v)~E} sum_a X_{u,a} X_{v,a - shift}: the UG value polynomial."""
    out: dict = {}
    k = inst.k
    for (u, v, w, s) in inst.edges:
        cw = w / inst.total_weight
        for a in range(k):
            key = canon_key(((u, a, copy), (v, (a - s) % k, copy)))
            out[key] = out.get(key, 0.0) + cw
    return out


def local_value_poly(inst: UgInstance, u: int, copy: int = 0) -> dict:
    """val_u(X): weighted fraction of edges at u that are satisfied."""
    inc = inst.incident[u]
    if not inc:
        raise ParameterError(f"vertex {u} is isolated")
    wtot = sum(w for (_, w, _) in inc)
    out: dict = {}
    for (v, w, s) in inc:
        for a in range(inst.k):
            key = canon_key(((u, a, copy), (v, (a - s) % inst.k, copy)))
            out[key] = out.get(key, 0.0) + w / wtot
    return out


def z_var_poly(u: int, s: int, k: int) -> dict:
    """Z_{u,s} = sum_a X_{u,a} X'_{u,a+s}: shift-s indicator at u."""
    out: dict = {}
    for a in range(k):
        key = canon_key(((u, a, 0), (u, (a + s) % k, 1)))
        out[key] = out.get(key, 0.0) + 1.0
    return out


# ---------------------------------------------------------------------------
# PseudoExpectation
# ---------------------------------------------------------------------------

@dataclass
class PseudoExpectation:
    """Moment table of a degree-D pseudoexpectation over canonical keys.

    `dense` means the table holds *every* canonical key of degree <= D (the
    solver and the symmetrize/condition/rerandomize operations produce dense
    tables); missing keys then cannot occur.  Sparse tables (point masses,
    genuine mixtures) treat missing keys as 0.  Immutable by convention: all
    calculus operations return new objects.
    """

    degree: int
    k: int
    num_vertices: int
    moments: dict
    copy_count: int = 1
    dense: bool = True
    flags: dict = field(default_factory=dict)
    _base: "PseudoExpectation | None" = None  # set for product-copy views

    def moment(self, key) -> float:
        if key is None:
            return 0.0
        if self._base is not None:
            # a product of degree-D tables defines mixed moments with degree
            # up to D in *each* copy
            left = tuple((v, a, 0) for (v, a, c) in key if c == 0)
            right = tuple((v, a, 0) for (v, a, c) in key if c == 1)
            return self._base.moment(left) * self._base.moment(right)
        if len(key) > self.degree:
            raise DegreeError(
                f"monomial degree {len(key)} exceeds budget {self.degree}")
        return self.moments.get(key, 0.0)

    def pe(self, poly: dict) -> float:
        """Linear extension of the moment mapping to a polynomial."""
        return sum(c * self.moment(k) for k, c in poly.items())

    # -- serialization ------------------------------------------------------

    def to_json(self) -> str:
        items = sorted(self.moments.items())
        return json.dumps({
            "degree": self.degree,
            "k": self.k,
            "n": self.num_vertices,
            "copy_count": self.copy_count,
            "dense": self.dense,
            "moments": [[[list(p) for p in key], val] for key, val in items],
        })

    @classmethod
    def from_json(cls, text: str) -> "PseudoExpectation":
        d = json.loads(text)
        moments = {tuple(tuple(p) for p in key): val for key, val in d["moments"]}
        return cls(degree=d["degree"], k=d["k"], num_vertices=d["n"],
                   moments=moments, copy_count=d.get("copy_count", 1),
                   dense=d.get("dense", True))


def evaluate(pE: PseudoExpectation, poly) -> float:
    """Linear extension of the moment mapping; canonicalizes raw monomials.

    `poly` is a mapping from monomials (canonical keys or raw pair tuples)
    to coefficients.  Degree overflow raises DegreeError."""
    total = 0.0
    for mono, coef in poly.items():
        key = canon_key(mono)
        if key is None:
            continue
        total += coef * pE.moment(key)
    return total


def point_mass_pe(num_vertices: int, k: int, x, degree: int = 4) -> PseudoExpectation:
    """Moment table of the point mass on the integral assignment x (a genuine
    distribution: all stored moments are products of indicators)."""
    x = [int(v) for v in x]
    moments = {}
    for d in range(degree + 1):
        for verts in itertools.combinations(range(num_vertices), d):
            moments[tuple(sorted((v, x[v], 0) for v in verts))] = 1.0
    return PseudoExpectation(degree, k, num_vertices, moments, dense=False,
                             flags={"mixture": ((1.0, tuple(x)),)})


def mixture_pe(num_vertices: int, k: int, weighted_assignments,
               degree: int = 4) -> PseudoExpectation:
    """Moment table of a finite mixture of point masses."""
    acc: dict = {}
    total = sum(w for (w, _) in weighted_assignments)
    for (w, x) in weighted_assignments:
        pm = point_mass_pe(num_vertices, k, x, degree)
        for key, val in pm.moments.items():
            acc[key] = acc.get(key, 0.0) + (w / total) * val
    comps = tuple((w / total, tuple(int(v) for v in x))
                  for (w, x) in weighted_assignments)
    return PseudoExpectation(degree, k, num_vertices, acc, dense=False,
                             flags={"mixture": comps})


# ---------------------------------------------------------------------------
# Relaxation
# ---------------------------------------------------------------------------

def _reduce_poly(poly: dict, k: int) -> dict:
    """Rewrite a polynomial over full labels into the reduced basis (labels
    0..k-2) via X_{u,k-1} = 1 - sum_{a<k-1} X_{u,a}."""
    out: dict = {}
    stack = list(poly.items())
    while stack:
        key, coef = stack.pop()
        hit = next(((i, p) for i, p in enumerate(key) if p[1] == k - 1), None)
        if hit is None:
            out[key] = out.get(key, 0.0) + coef
            continue
        i, (v, _, c) = hit
        rest = key[:i] + key[i + 1:]
        stack.append((rest, coef))
        for b in range(k - 1):
            km = key_mul(rest, ((v, b, c),))
            if km is not None:
                stack.append((km, -coef))
    return out


@dataclass
class SdpProblem:
    """Full-basis description of the degree-D moment relaxation plus the
    reduced internal structures the solver consumes.

    `dimension`/`basis` describe the full-basis moment matrix (all canonical
    monomials of degree <= D/2 over the full label set); equality constraints
    (entry aliasing, scaling, partition) are exposed as a generator to avoid
    materializing the O(dimension^2) list."""

    inst: UgInstance
    degree: int
    basis: list                   # full-basis monomials, degree <= D/2
    dimension: int
    objective_entries: list       # sparse (i, j, coef) over full matrix entries
    # reduced internals
    rbasis: list
    rmoments: list
    rindex: dict
    entry_map: np.ndarray         # dim_r x dim_r -> reduced moment id (-1 = zero)
    objective_vec: np.ndarray     # over reduced moments (maximize c.y)

    def constraints_iter(self):
        """Yield (entries, rhs) equality constraints over the full moment
        matrix: scaling, entry aliasing/structural zeros, and partition."""
        idx = {m: i for i, m in enumerate(self.basis)}
        # scaling
        yield ([(0, 0, 1.0)], 1.0)
        # aliasing: representative entry per monomial; zero monomials pinned
        rep: dict = {}
        for i, a in enumerate(self.basis):
            for j, b in enumerate(self.basis[: i + 1]):
                km = key_mul(a, b)
                if km is None:
                    yield ([(i, j, 1.0)], 0.0)
                elif km in rep:
                    ri, rj = rep[km]
                    yield ([(i, j, 1.0), (ri, rj, -1.0)], 0.0)
                else:
                    rep[km] = (i, j)
        # partition: sum_a pE[X_{u,a} m] = pE[m] for monomials m of degree <= D-1
        # expressed over representative entries where both sides are entries
        k = self.inst.k
        for m in self.basis:
            if len(m) > self.degree // 2 - 1:
                continue
            for u in range(self.inst.num_vertices):
                entries = []
                ok = True
                for a in range(k):
                    km = key_mul(m, ((u, a, 0),))
                    if km is None:
                        continue
                    if km not in rep:
                        ok = False
                        break
                    entries.append((*rep[km], 1.0))
                mi = idx[m]
                if ok:
                    entries.append((mi, 0, -1.0) if len(m) else (0, 0, -1.0))
                    yield (entries, 0.0)


def build_relaxation(inst: UgInstance, D: int) -> SdpProblem:
    """Degree-D moment relaxation of the UG integer program."""
    if D not in (2, 4, 6):
        raise ParameterError("D must be one of {2, 4, 6}")
    n, k = inst.num_vertices, inst.k
    half = D // 2
    basis = list(all_canonical_keys(n, k, half))
    if len(basis) > DIM_CAP:
        raise SizeCapError(
            f"moment-matrix dimension {len(basis)} exceeds cap {DIM_CAP}")
    # reduced structures
    rbasis = [m for m in all_canonical_keys(n, k - 1, half)]
    rmoments = list(all_canonical_keys(n, k - 1, D))
    rindex = {m: i for i, m in enumerate(rmoments)}
    dim_r = len(rbasis)
    entry_map = np.full((dim_r, dim_r), -1, dtype=np.int64)
    for i, a in enumerate(rbasis):
        for j in range(i + 1):
            km = key_mul(a, rbasis[j])
            if km is not None:
                entry_map[i, j] = entry_map[j, i] = rindex[km]
    obj_full = ug_objective_poly(inst)
    obj_red = _reduce_poly(obj_full, k)
    c = np.zeros(len(rmoments))
    for key, coef in obj_red.items():
        c[rindex[key]] += coef
    # objective as a sparse functional over full matrix entries
    full_idx = {m: i for i, m in enumerate(basis)}
    objective_entries = []
    for key, coef in obj_full.items():
        if len(key) == 0:
            objective_entries.append((0, 0, coef))
        elif len(key) == 1:
            objective_entries.append((full_idx[key], 0, coef))
        else:
            a, b = (key[0],), (key[1],)
            objective_entries.append((full_idx[a], full_idx[b], coef))
    return SdpProblem(inst=inst, degree=D, basis=basis, dimension=len(basis),
                      objective_entries=objective_entries, rbasis=rbasis,
                      rmoments=rmoments, rindex=rindex, entry_map=entry_map,
                      objective_vec=c)


def _full_moments_from_reduced(yvals: dict, n: int, k: int, D: int) -> dict:
    """Materialize every canonical full-label moment of degree <= D from the
    reduced table by substituting X_{u,k-1} = 1 - sum_{a<k-1} X_{u,a}."""
    memo = dict(yvals)

    def get(key):
        val = memo.get(key)
        if val is not None:
            return val
        for i, (v, a, c) in enumerate(key):
            if a == k - 1:
                rest = key[:i] + key[i + 1:]
                val = get(rest)
                for b in range(k - 1):
                    val -= get(tuple(sorted(rest + ((v, b, c),))))
                memo[key] = val
                return val
        raise KeyError(key)

    out = {}
    for key in all_canonical_keys(n, k, D):
        out[key] = get(key)
    return out


def solve_sdp(problem: SdpProblem, tol: float = 1e-7,
              max_iters: int = ADMM_MAX_ITERS) -> PseudoExpectation:
    """Maximize the UG objective over degree-D pseudoexpectations by ADMM.

    Splitting: X = A(y) with X constrained PSD and y the reduced moment
    vector (y[1] pinned to 1).  A^T A is diagonal (each matrix entry reads a
    single moment), so the y-update is closed-form; the X-update is a PSD
    projection; over-relaxation 1.6; residual-balanced penalty.  Returns a
    PseudoExpectation carrying the SDP objective in flags["sdp_value"] and
    "unconverged": True if the iteration cap was hit."""
    E = problem.entry_map
    valid = E >= 0
    flat_idx = E[valid]
    M = len(problem.rmoments)
    counts = np.bincount(flat_idx, minlength=M).astype(float)
    c = problem.objective_vec
    i_one = problem.rindex[()]
    dim = len(problem.rbasis)

    rho = 1.0
    # start from the uniform independent distribution (feasible, interior)
    y = np.array([problem.inst.k ** (-len(m)) for m in problem.rmoments])
    y[i_one] = 1.0
    X = np.zeros((dim, dim))
    X[valid] = y[flat_idx]
    U = np.zeros((dim, dim))
    gamma = ADMM_OVER_RELAX
    pri = dua = np.inf
    converged = False
    for it in range(max_iters):
        # y-update: diagonal normal equations over the valid entries
        R = X - U
        y_new = (c / rho + np.bincount(flat_idx, weights=R[valid], minlength=M))
        y_new /= np.maximum(counts, 1.0)
        y_new[i_one] = 1.0
        Ay = np.zeros((dim, dim))
        Ay[valid] = y_new[flat_idx]
        AY = gamma * Ay + (1.0 - gamma) * X
        # X-update: PSD projection
        lam, Q = np.linalg.eigh(AY + U)
        lam_clip = np.clip(lam, 0.0, None)
        X_new = (Q * lam_clip) @ Q.T
        U = U + AY - X_new
        pri = float(np.linalg.norm(Ay - X_new))
        dua = rho * float(np.linalg.norm(
            np.bincount(flat_idx, weights=(X_new - X)[valid], minlength=M)))
        X = X_new
        y = y_new
        if pri <= tol and dua <= tol:
            converged = True
            break
        if it % 50 == 49:
            if pri > 10.0 * dua:
                rho *= 2.0
                U /= 2.0
            elif dua > 10.0 * pri:
                rho /= 2.0
                U *= 2.0
    inst = problem.inst
    yvals = {m: float(y[i]) for i, m in enumerate(problem.rmoments)}
    moments = _full_moments_from_reduced(yvals, inst.num_vertices, inst.k,
                                         problem.degree)
    flags = {"sdp_value": float(c @ y), "iterations": it + 1,
             "primal_residual": pri, "dual_residual": dua}
    if not converged:
        flags["unconverged"] = True
    return PseudoExpectation(problem.degree, inst.k, inst.num_vertices,
                             moments, flags=flags)


# ---------------------------------------------------------------------------
# Calculus
# ---------------------------------------------------------------------------

def symmetrize(pE: PseudoExpectation) -> PseudoExpectation:
    """Uniform mixture over global label shifts: pE_sym[m] =
    (1/k) sum_s pE[m shifted by -s].  Preserves the objective; marginals
    become uniform."""
    if pE.copy_count != 1:
        raise ParameterError("symmetrize requires copy_count = 1")
    k = pE.k
    new: dict = {}
    for key in pE.moments:
        for s in range(k):
            skey = shift_key(key, s, k)
            if skey in new:
                continue
            new[skey] = sum(pE.moment(shift_key(skey, -t, k))
                            for t in range(k)) / k
    flags = dict(pE.flags)
    if "mixture" in flags:
        # the symmetrized distribution is the shift-spread mixture
        flags["mixture"] = tuple(
            (w / k, tuple((xi + s) % k for xi in x))
            for (w, x) in flags["mixture"] for s in range(k))
    return PseudoExpectation(pE.degree, k, pE.num_vertices, new,
                             dense=pE.dense, flags=flags)


def condition(pE: PseudoExpectation, event,
              cond_floor: float = COND_FLOOR) -> PseudoExpectation:
    """Reweigh by the indicator monomial `event`: pE'[m] = pE[m event]/pE[event].

    The result has degree D - 2*deg(event).  Conditioning on an event with
    pseudo-probability below `cond_floor` raises NullEventError (the
    "pPr = 0 means conditional = 0" convention lives inside the potential
    formulas, not here)."""
    event = canon_key(event)
    if event is None:
        raise NullEventError("conditioning on the zero monomial")
    p_event = pE.moment(event)
    if p_event < cond_floor:
        raise NullEventError(
            f"pE[event] = {p_event:.3e} below floor {cond_floor}")
    new_deg = pE.degree - 2 * len(event)
    if new_deg < 0:
        raise DegreeError("event too large for the degree budget")
    new: dict = {}
    if pE.dense:
        for m in all_canonical_keys(pE.num_vertices, pE.k, new_deg,
                                    copies=pE.copy_count):
            km = key_mul(m, event)
            new[m] = pE.moment(km) / p_event if km is not None else 0.0
    else:
        ev = set(event)
        for skey, val in pE.moments.items():
            if not ev.issubset(skey) or len(skey) - len(event) > new_deg:
                continue
            core = tuple(p for p in skey if p not in ev)
            for r in range(len(event) + 1):
                for extra in itertools.combinations(sorted(ev), r):
                    m = tuple(sorted(core + extra))
                    if len(m) <= new_deg:
                        new[m] = val / p_event
    return PseudoExpectation(new_deg, pE.k, pE.num_vertices, new,
                             copy_count=pE.copy_count, dense=pE.dense)


def product_copy(pE: PseudoExpectation) -> PseudoExpectation:
    """Independent second copy: pE_{X,X'}[X^a (X')^b] = pE[X^a] pE[X^b].

    Moments are computed on demand from the base table (the tagged key space
    is quadratically larger); the result is a valid degree-D
    pseudoexpectation."""
    if pE.copy_count != 1:
        raise ParameterError("product_copy requires copy_count = 1")
    return PseudoExpectation(pE.degree, pE.k, pE.num_vertices, {},
                             copy_count=2, dense=pE.dense,
                             flags=dict(pE.flags), _base=pE)


def rerandomize(pE: PseudoExpectation, S) -> PseudoExpectation:
    """Replace the moments on the vertex set S with uniform independent
    marginals: pE'[m] = (1/k^t) pE[m with S-pairs removed], t = #S-pairs.
    Shift-symmetry is preserved."""
    if pE.copy_count != 1:
        raise ParameterError("rerandomize requires copy_count = 1")
    S = set(S)
    if not S:
        return PseudoExpectation(pE.degree, pE.k, pE.num_vertices,
                                 dict(pE.moments), dense=pE.dense,
                                 flags=dict(pE.flags))
    new: dict = {}
    for m in all_canonical_keys(pE.num_vertices, pE.k, pE.degree):
        rest = tuple(p for p in m if p[0] not in S)
        t = len(m) - len(rest)
        new[m] = pE.moment(rest) / pE.k**t
    return PseudoExpectation(pE.degree, pE.k, pE.num_vertices, new, dense=True)


@dataclass(frozen=True)
class ValidationReport:
    min_eigenvalue: float
    max_partition_residual: float
    aliasing_residual: float
    scaling_deviation: float
    tol: float

    @property
    def passed(self) -> bool:
        return (self.min_eigenvalue >= -self.tol
                and self.max_partition_residual <= self.tol
                and self.aliasing_residual <= self.tol
                and self.scaling_deviation <= self.tol)


def moment_matrix(pE: PseudoExpectation, basis=None) -> np.ndarray:
    """Moment matrix over canonical monomials of degree <= D/2 (both copies
    for product pseudoexpectations)."""
    if basis is None:
        basis = list(all_canonical_keys(pE.num_vertices, pE.k,
                                        pE.degree // 2, copies=pE.copy_count))
    dim = len(basis)
    Mm = np.zeros((dim, dim))
    for i, a in enumerate(basis):
        for j in range(i + 1):
            km = key_mul(a, basis[j])
            val = pE.moment(km) if km is not None else 0.0
            Mm[i, j] = Mm[j, i] = val
    return Mm


def validate(pE: PseudoExpectation, tol: float = 1e-6) -> ValidationReport:
    """Check the pseudoexpectation axioms numerically.

    Booleanity/disjointness and moment-matrix entry aliasing hold
    structurally (moments live in a canonical-key table, so two entries with
    the same product read the same number); the aliasing residual is reported
    as the structural 0."""
    scaling = abs(pE.moment(()) - 1.0)
    Mm = moment_matrix(pE)
    min_eig = float(np.linalg.eigvalsh(Mm)[0])
    max_part = 0.0
    for m in all_canonical_keys(pE.num_vertices, pE.k, pE.degree - 1,
                                copies=pE.copy_count):
        for u in range(pE.num_vertices):
            for cpy in range(pE.copy_count):
                tot = 0.0
                for a in range(pE.k):
                    km = key_mul(m, ((u, a, cpy),))
                    if km is not None:
                        tot += pE.moment(km)
                max_part = max(max_part, abs(tot - pE.moment(m)))
    return ValidationReport(min_eig, max_part, 0.0, scaling, tol)
