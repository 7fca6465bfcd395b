"""Constraint-graph generators and spectral utilities.

Families: the noisy hypercube, the short-code graph, the Johnson graph, and
its Cayley approximation on [n]^l.  Spectral utilities: eigendecomposition of
the random-walk matrix in the stationary inner product, expansion / Dirichlet
forms, exhaustive small-set expansion profiles, and a gradient-ascent search
for 2->4 hypercontractivity lower bounds.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb

import numpy as np

from ugsos import _kernels
from ugsos.errors import ParameterError, SizeCapError

SPECTRAL_CAP = 10**4
SSE_EXHAUSTIVE_CAP = 10**7
SSE_SAMPLE_COUNT = 10**6


@dataclass(frozen=True)
class WeightedGraph:
    """Symmetric weighted graph; self-loops allowed (noisy families have them).

    `labels` carries family-specific vertex semantics (bit tuples, subsets,
    coordinate tuples); `meta` records the generating family and parameters.
    """

    num_vertices: int
    W: np.ndarray
    labels: tuple = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        if W.shape != (self.num_vertices, self.num_vertices):
            raise ParameterError("weight matrix shape mismatch")
        if not np.allclose(W, W.T, atol=1e-12):
            raise ParameterError("weight matrix must be symmetric")
        if np.any(W < -1e-15):
            raise ParameterError("negative edge weight")
        if W.sum() <= 0:
            raise ParameterError("graph has zero total weight")
        object.__setattr__(self, "W", W)

    @property
    def degrees(self) -> np.ndarray:
        return self.W.sum(axis=1)

    def transition(self) -> np.ndarray:
        deg = self.degrees
        if np.any(deg <= 0):
            raise ParameterError("graph has an isolated vertex")
        return self.W / deg[:, None]


@dataclass(frozen=True)
class SpectralData:
    """Eigendecomposition of the random-walk matrix in the pi inner product.

    `eigenvalues` are descending; `eigenvectors` columns are right
    eigenvectors of the transition matrix, orthonormal under <.,.>_pi.
    """

    pi: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    transition: np.ndarray

    def inner(self, f, g) -> float:
        return float(np.sum(self.pi * np.asarray(f) * np.asarray(g)))

    def norm(self, f, p: int = 2) -> float:
        return float(np.sum(self.pi * np.abs(np.asarray(f)) ** p) ** (1.0 / p))

    def apply_walk(self, f) -> np.ndarray:
        return self.transition @ np.asarray(f)

    def project_low(self, f, lam: float) -> np.ndarray:
        """Project f onto the span of walk eigenvectors with eigenvalue
        >= 1 - lam (Laplacian eigenvalue <= lam)."""
        keep = self.eigenvalues >= 1.0 - lam
        V = self.eigenvectors[:, keep]
        coords = V.T @ (self.pi * np.asarray(f))
        return V @ coords

    def low_basis(self, lam: float) -> np.ndarray:
        return self.eigenvectors[:, self.eigenvalues >= 1.0 - lam]


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

def noisy_hypercube(d: int, eps: float) -> WeightedGraph:
    """Noise graph on {+-1}^d: w(u,v) = eps^h (1-eps)^(d-h) with h the Hamming
    distance, realized as the d-fold Kronecker power of the one-bit noise
    matrix.  Contains self-loops; rows already sum to 1."""
    if d < 1:
        raise ParameterError("d must be >= 1")
    if d > 16:
        raise SizeCapError("noisy_hypercube caps at d <= 16")
    if not 0.0 <= eps < 1.0:
        raise ParameterError("eps must lie in [0, 1)")
    base = np.array([[1.0 - eps, eps], [eps, 1.0 - eps]])
    W = np.array([[1.0]])
    for _ in range(d):
        W = np.kron(W, base)
    labels = tuple(itertools.product((1, -1), repeat=d))
    return WeightedGraph(2**d, W, labels, {"family": "hypercube", "d": d, "eps": eps})


def _affine_products(d: int, n: int):
    """All products of d affine forms over F_2^n with linearly independent
    linear parts, as multilinear monomial-sets (frozensets of variable sets)."""

    def rank(masks):
        rows = list(masks)
        r = 0
        for bit in range(n):
            piv = None
            for i in range(r, len(rows)):
                if rows[i] >> bit & 1:
                    piv = i
                    break
            if piv is None:
                continue
            rows[r], rows[piv] = rows[piv], rows[r]
            for i in range(len(rows)):
                if i != r and rows[i] >> bit & 1:
                    rows[i] ^= rows[r]
            r += 1
        return r

    def multiply(poly: frozenset, a: int, b: int) -> frozenset:
        # poly * (sum_{i in a} x_i + b) in the multilinear quotient (x^2 = x)
        acc = set()
        for mono in poly:
            for i in range(n):
                if a >> i & 1:
                    m = mono | {i}
                    acc ^= {frozenset(m)}
            if b:
                acc ^= {mono}
        return frozenset(acc)

    forms = [(a, b) for a in range(1, 1 << n) for b in (0, 1)]
    products = set()
    for combo in itertools.combinations(forms, d):
        if rank([a for (a, _) in combo]) < d:
            continue
        poly = frozenset({frozenset()})
        for (a, b) in combo:
            poly = multiply(poly, a, b)
        if poly:
            products.add(poly)
    return products


def shortcode_graph(d: int, n: int, noise_steps: int = 1) -> WeightedGraph:
    """Short-code graph: vertices are degree-<=d multilinear polynomials over
    F_2^n; p and q are adjacent in the base graph when p - q factors as a
    product of d linearly independent affine forms.  Returns the
    `noise_steps`-step random-walk matrix of the base graph."""
    if not (1 <= d < n <= 4):
        raise SizeCapError("shortcode_graph requires 1 <= d < n <= 4")
    if noise_steps < 0:
        raise ParameterError("noise_steps must be >= 0")
    monos = [frozenset(c) for r in range(d + 1)
             for c in itertools.combinations(range(n), r)]
    if len(monos) > 12:
        raise SizeCapError("short-code vertex count exceeds 2^12")
    mono_bit = {m: i for i, m in enumerate(monos)}

    def mask(poly: frozenset) -> int:
        out = 0
        for m in poly:
            out |= 1 << mono_bit[m]
        return out

    diff_masks = {mask(p) for p in _affine_products(d, n)}
    N = 1 << len(monos)
    A = np.zeros((N, N))
    for p in range(N):
        for dm in diff_masks:
            A[p, p ^ dm] = 1.0
    T = A / A.sum(axis=1, keepdims=True)
    W = np.linalg.matrix_power(T, noise_steps)
    labels = tuple(range(N))
    return WeightedGraph(N, W, labels,
                         {"family": "shortcode", "d": d, "n": n, "t": noise_steps})


def johnson_graph(n: int, l: int, alpha: float) -> WeightedGraph:
    """Johnson graph J_{n,l,alpha}: vertices are l-subsets of [n], adjacency
    iff the intersection has size (1-alpha)l.  Unit weights."""
    _check_alpha(l, alpha)
    if not l < n:
        raise ParameterError("need l < n")
    if comb(n, l) > 10**5:
        raise SizeCapError("johnson_graph caps at C(n,l) <= 1e5")
    target = round((1.0 - alpha) * l)
    verts = list(itertools.combinations(range(n), l))
    sets = [frozenset(v) for v in verts]
    N = len(verts)
    W = np.zeros((N, N))
    for i in range(N):
        for j in range(i + 1, N):
            if len(sets[i] & sets[j]) == target:
                W[i, j] = W[j, i] = 1.0
    return WeightedGraph(N, W, tuple(verts),
                         {"family": "johnson", "n": n, "l": l, "alpha": alpha})


def johnson_cayley_graph(n: int, l: int, alpha: float) -> WeightedGraph:
    """Cayley approximation C_{n,l,alpha} on [n]^l: resample a uniformly
    random set of alpha*l coordinates with fresh uniform values.  Weights are
    the transition probabilities (the walk is doubly stochastic); self-loops
    arise because a resampled coordinate may repeat its old value."""
    _check_alpha(l, alpha)
    if n**l > 10**5:
        raise SizeCapError("johnson_cayley_graph caps at n^l <= 1e5")
    m = round(alpha * l)
    verts = list(itertools.product(range(n), repeat=l))
    N = len(verts)
    W = np.zeros((N, N))
    denom = comb(l, m)
    for i, x in enumerate(verts):
        for j, z in enumerate(verts):
            diff = sum(1 for a, b in zip(x, z) if a != b)
            if diff <= m:
                W[i, j] = comb(l - diff, m - diff) / denom * n**(-m)
    return WeightedGraph(N, W, tuple(verts),
                         {"family": "cayley", "n": n, "l": l, "alpha": alpha})


def _check_alpha(l: int, alpha: float):
    if not (0.0 < alpha <= 1.0):
        raise ParameterError("alpha must lie in (0, 1]")
    if abs(alpha * l - round(alpha * l)) > 1e-9:
        raise ParameterError(f"alpha*l = {alpha * l} must be an integer")


# ---------------------------------------------------------------------------
# Spectral utilities
# ---------------------------------------------------------------------------

def spectral_decompose(g: WeightedGraph) -> SpectralData:
    """Eigendecomposition of the walk matrix via the symmetrized form
    D^(1/2) T D^(-1/2); eigenvalues within 1e-9 of [-1,1] are clamped."""
    if g.num_vertices > SPECTRAL_CAP:
        raise SizeCapError("spectral_decompose caps at 1e4 vertices")
    deg = g.degrees
    total = deg.sum()
    if total <= 0:
        raise ParameterError("degenerate graph: zero total weight")
    if np.any(deg <= 0):
        raise ParameterError("degenerate graph: isolated vertex")
    pi = deg / total
    s = np.sqrt(deg)
    S = g.W / np.outer(s, s)
    lam, phi = np.linalg.eigh(S)
    order = np.argsort(lam)[::-1]
    lam = lam[order]
    phi = phi[:, order]
    lam = np.where(np.abs(lam) > 1.0, np.clip(lam, -1.0, 1.0), lam)
    if np.any(np.abs(lam) > 1.0 + 1e-9):
        raise ParameterError("walk eigenvalue outside [-1,1] beyond tolerance")
    V = (phi / s[:, None]) * np.sqrt(total)
    return SpectralData(pi=pi, eigenvalues=lam, eigenvectors=V,
                        transition=g.W / deg[:, None])


@dataclass(frozen=True)
class ExpansionReport:
    dirichlet: float      # <f, Lf>_pi
    mean: float           # E_pi[f]
    phi: float | None     # edge expansion, for 0/1-valued f


def expansion(g: WeightedGraph, spectral: SpectralData, f) -> ExpansionReport:
    """Dirichlet form <f, Lf>_pi, mean E_pi[f], and (for 0/1-valued f) the
    edge expansion phi(S) = <f, Lf>_pi / E_pi[f]."""
    f = np.asarray(f, dtype=float)
    dirichlet = spectral.inner(f, f) - spectral.inner(f, spectral.apply_walk(f))
    mean = float(np.sum(spectral.pi * f))
    is_indicator = np.all((np.abs(f) < 1e-12) | (np.abs(f - 1.0) < 1e-12))
    phi = None
    if is_indicator:
        if mean == 0.0:
            raise ParameterError("expansion ratio undefined: E_pi[f] = 0")
        phi = dirichlet / mean
    return ExpansionReport(float(dirichlet), mean, phi)


@dataclass(frozen=True)
class SseProfile:
    min_phi_by_size: dict
    exhaustive: bool
    argmin_by_size: dict


def sse_profile(g: WeightedGraph, delta: float, seed=None) -> SseProfile:
    """Minimum edge expansion over vertex sets of pi-measure <= delta, keyed
    by cardinality.  Exhaustive when the number of candidate sets is below
    1e7; otherwise a uniform sample of 1e6 sets, flagged as an estimate."""
    deg = g.degrees
    total = deg.sum()
    pi = deg / total
    n = g.num_vertices
    order = np.sort(pi)
    cmax = 0
    acc = 0.0
    for c in range(1, n + 1):
        acc += order[c - 1]
        if acc <= delta + 1e-15:
            cmax = c
        else:
            break
    count = sum(comb(n, c) for c in range(1, cmax + 1))
    W = g.W
    by_size, arg_by_size = {}, {}
    if count <= SSE_EXHAUSTIVE_CAP:
        for c in range(1, cmax + 1):
            combos = np.array(list(itertools.combinations(range(n), c)),
                              dtype=np.int64)
            mass = pi[combos].sum(axis=1)
            combos = combos[mass <= delta + 1e-15]
            if combos.size == 0:
                continue
            phis = _kernels.subset_cut_scan(combos, W, deg)
            i = int(np.argmin(phis))
            by_size[c] = float(phis[i])
            arg_by_size[c] = tuple(int(v) for v in combos[i])
        return SseProfile(by_size, True, arg_by_size)
    rng = np.random.default_rng(seed)
    best: dict[int, float] = {}
    arg: dict[int, tuple] = {}
    for _ in range(SSE_SAMPLE_COUNT // 1000):
        c = int(rng.integers(1, cmax + 1))
        batch = np.array([rng.choice(n, size=c, replace=False)
                          for _ in range(1000)], dtype=np.int64)
        mass = pi[batch].sum(axis=1)
        batch = batch[mass <= delta + 1e-15]
        if batch.size == 0:
            continue
        phis = _kernels.subset_cut_scan(batch, W, deg)
        i = int(np.argmin(phis))
        if c not in best or phis[i] < best[c]:
            best[c] = float(phis[i])
            arg[c] = tuple(int(v) for v in batch[i])
    return SseProfile(best, False, arg)


def hypercontractivity_search(g: WeightedGraph, spectral: SpectralData,
                              lam: float, restarts: int = 64,
                              seed=None) -> float:
    """Lower bound on the 2->4 hypercontractivity constant of the span of
    walk eigenvectors with eigenvalue >= 1 - lam: the max over
    gradient-ascended random starts of ||f||_{pi,4}^4 / ||f||_{pi,2}^4.

    Projected gradient ascent on the sphere ||f||_{pi,2} = 1: step 0.05,
    500 iterations, per-restart derived seeds (deterministic given
    (seed, restarts))."""
    if not (0.0 < lam < 2.0):
        raise ParameterError("lam must lie in (0, 2)")
    V = spectral.low_basis(lam)
    pi = spectral.pi
    dim = V.shape[1]
    if dim <= 1:
        return 1.0
    best = 1.0
    seeds = np.random.SeedSequence(seed).spawn(restarts)
    for ss in seeds:
        rng = np.random.default_rng(ss)
        c = rng.standard_normal(dim)
        c /= np.linalg.norm(c)
        for _ in range(500):
            f = V @ c
            grad = 4.0 * (V.T @ (pi * f**3))
            c = c + 0.05 * grad
            c /= np.linalg.norm(c)
        f = V @ c
        ratio = float(np.sum(pi * f**4))  # ||f||_2 = 1 on the sphere
        best = max(best, ratio)
    return best


def graph_to_instance_json(g: WeightedGraph, k: int = 1) -> str:
    """Export the graph in the instance JSON edge-list format (all shifts 0)."""
    import json
    edges = []
    for u in range(g.num_vertices):
        for v in range(u + 1, g.num_vertices):
            if g.W[u, v] > 0:
                edges.append({"u": u, "v": v,
                              "w": float(f"{g.W[u, v]:.17g}"), "shift": 0})
    return json.dumps({"k": k, "n": g.num_vertices, "edges": edges})


def spectral_report_json(spectral: SpectralData) -> str:
    import json
    lam = spectral.eigenvalues
    return json.dumps({
        "eigenvalues": [float(f"{x:.17g}") for x in lam],
        "spectral_gap": float(f"{1.0 - lam[1]:.17g}") if lam.size > 1 else None,
    })
