"""Quantitative verification suites for the refinement machinery.

Three empirical questions are answered here: how fast the shape measure
sigma_q washes out under uniform refinement of a quadratic (sigma_study),
whether the product N * ||f - f_N||_Lp stabilizes against the hessian
tau-norm that governs the optimal rate (convergence_study), and how tight
the equivalence between local errors and sigma_q * ||sqrt(det q)||_Ltau is
in practice (equivalence_constant_probe).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import approx, engine
from .engine import GreedyConfig, RefinementForest, StopRule
from .fields import QuadraticField, ScalarField
from .geometry import QuadForm, Triangle, cross2, edge_vectors_of, sigma, sigma_batch

__all__ = [
    "R0",
    "SIGMA_THRESHOLD",
    "tau_from_p",
    "gamma_factor",
    "SigmaStats",
    "ConvergencePoint",
    "hessian_tau_norm",
    "sigma_study",
    "convergence_study",
    "equivalence_constant_probe",
    "random_pd_form",
    "random_triangle",
    "hessian_oscillation",
    "sigma_csv",
    "convergence_csv",
    "trace_csv",
]

# Exponent for which three refinement levels contract the mean of sigma^r.
R0 = math.log(2.0) / (math.log(4.0) - math.log(3.0))

# Shape-measure level below which a triangle counts as well adapted.
SIGMA_THRESHOLD = 5.0

# Spread constant of the delta-near bisection perturbation bounds.
C2 = 61.0 / 4.0


def tau_from_p(p) -> float:
    """The exponent tau with 1/tau = 1/p + 1."""
    p = float(p)
    if not p >= 1.0:
        raise ValueError(f"p must satisfy 1 <= p <= inf, got {p}")
    return 1.0 if math.isinf(p) else p / (p + 1.0)


def gamma_factor(r: float, mu: float = 0.0) -> float:
    """Contraction rate of the mean of sigma^r per 3-bisection level.

    ``(0.69 (1+C2 mu))^r / 8 + 7 (1+C2 mu)^r / 8``; below 1 for mu small.
    """
    u = 0.69 * (1.0 + C2 * mu)
    v = 1.0 + C2 * mu
    return (u ** r + 7.0 * v ** r) / 8.0


@dataclass(frozen=True)
class SigmaStats:
    """Distribution summary of sigma_q over the leaves at one level."""

    level: int
    count: int
    mean: float
    max: float
    fraction_above: float  # share of leaves with sigma >= threshold
    mean_pow_r0: float     # mean of sigma ** R0
    threshold: float = SIGMA_THRESHOLD


@dataclass(frozen=True)
class ConvergencePoint:
    """One checkpoint of a greedy run against the optimal-rate target."""

    n: int
    error: float
    product: float  # n * error
    target: float   # || sqrt|det d2f| ||_{L^tau(Omega)}
    ratio: float    # product / target


def _leaf_stats(form: QuadForm, verts: np.ndarray, level: int,
                threshold: float) -> SigmaStats:
    s = sigma_batch(form, verts)
    return SigmaStats(level, len(s), float(s.mean()), float(s.max()),
                      float((s >= threshold).mean()), float((s ** R0).mean()),
                      threshold)


def sigma_study(f: QuadraticField, roots=None, levels: int = 5,
                threshold: float = SIGMA_THRESHOLD,
                config: GreedyConfig | None = None) -> list[SigmaStats]:
    """Track sigma_q while uniformly refining every triangle.

    One reported level is three bisection sweeps (the leaf count grows by
    8 per level).  The field must be quadratic with positive-definite
    form; the refinement uses the same L1 decision as the greedy engine.
    """
    if not isinstance(f, QuadraticField) or not f.form.is_positive_definite:
        raise ValueError("sigma study needs a quadratic field with PD form")
    if levels < 0:
        raise ValueError("levels must be >= 0")
    roots = engine.initial_mesh(roots if roots is not None else "ref-triangle")
    config = config or GreedyConfig(initial=tuple(roots))
    forest = RefinementForest(roots)
    stats = [_leaf_stats(f.form, forest.leaf_vertex_array(), 0, threshold)]
    for level in range(1, levels + 1):
        engine.uniform_refine(forest, f, config, 3)
        stats.append(_leaf_stats(f.form, forest.leaf_vertex_array(), level, threshold))
    return stats


def _uniform_background(roots, depth: int) -> np.ndarray:
    """Vertex batch (n, 3, 2) from `depth` euclidean longest-edge sweeps."""
    verts = np.array([t.vertices for t in roots])
    for _ in range(depth):
        e = edge_vectors_of(verts)
        longest = np.argmax((e * e).sum(axis=2), axis=1)
        n = len(verts)
        rows = np.arange(n)
        vi = verts[rows, longest]
        vj = verts[rows, (longest + 1) % 3]
        vk = verts[rows, (longest + 2) % 3]
        mid = 0.5 * (vj + vk)
        child1 = np.stack([vi, vj, mid], axis=1)
        child2 = np.stack([vi, mid, vk], axis=1)
        verts = np.concatenate([child1, child2])
    return verts


def hessian_tau_norm(f: ScalarField, domain, tau: float, depth: int = 9) -> float:
    """``|| sqrt|det d2f| ||_{L^tau}`` over a domain of triangles.

    Integrates ``|det d2f|^(tau/2)`` by per-triangle quadrature on a
    uniform background mesh obtained from ``depth`` bisection sweeps of
    the domain triangles.
    """
    if not 0.5 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [1/2, 1], got {tau}")
    if not f.has_hessian:
        raise ValueError(f"field {f.label!r} has no analytic hessian")
    if isinstance(domain, RefinementForest):
        roots = domain.leaf_triangles()
    elif isinstance(domain, Triangle):
        roots = [domain]
    else:
        roots = list(domain)
    verts = _uniform_background(roots, depth)
    areas = 0.5 * cross2(verts[:, 1] - verts[:, 0], verts[:, 2] - verts[:, 0])
    rule = approx.DEFAULT_RULE
    xy = rule.nodes @ verts  # (n_tri, n_nodes, 2) via batched matmul
    h = f.hessian(xy[..., 0], xy[..., 1])
    dets = np.abs(h[..., 0, 0] * h[..., 1, 1] - h[..., 0, 1] * h[..., 1, 0])
    integral = float((areas[:, None] * rule.weights * dets ** (tau / 2.0)).sum())
    return integral ** (1.0 / tau)


def convergence_study(f: ScalarField, config: GreedyConfig,
                      checkpoints) -> list[ConvergencePoint]:
    """Greedy refinement with the product N * error recorded at checkpoints.

    The field must be convexity-tagged (the regime where the greedy
    algorithm provably meets the optimal rate) and carry a hessian for the
    target norm.  Checkpoints are increasing leaf counts.
    """
    checkpoints = [int(n) for n in checkpoints]
    if not checkpoints or any(b <= a for a, b in zip(checkpoints, checkpoints[1:])):
        raise ValueError("checkpoints must be strictly increasing")
    if not f.is_convex:
        raise ValueError("convergence study expects a convexity-tagged field")
    target = hessian_tau_norm(f, engine.initial_mesh(config.initial),
                              tau_from_p(config.p))
    run_cfg = GreedyConfig(p=config.p, operator=config.operator,
                           decision=config.decision,
                           stop=StopRule("target-count", max(checkpoints)),
                           initial=config.initial, node_cap=config.node_cap)
    _, trace = engine.greedy_run(f, run_cfg, record_at=checkpoints)
    by_n = {}
    for rec in trace:
        by_n.setdefault(rec.n_leaves, rec)
    points = []
    for n in checkpoints:
        rec = by_n.get(n)
        if rec is None:
            raise ValueError(f"checkpoint {n} below the initial leaf count")
        product = n * rec.global_error
        ratio = product / target if target > 0 else math.nan
        points.append(ConvergencePoint(n, rec.global_error, product, target, ratio))
    return points


def random_pd_form(rng: np.random.Generator) -> QuadForm:
    """Random positive-definite form: rotated diag(10^u1, 10^u2), u in [-3, 3].

    Condition numbers reach 1e6, covering the strongly anisotropic regime.
    """
    theta = rng.uniform(0.0, math.pi)
    d = 10.0 ** rng.uniform(-3.0, 3.0, 2)
    c, s = math.cos(theta), math.sin(theta)
    r = np.array([[c, -s], [s, c]])
    return QuadForm.from_matrix((r * d) @ r.T)


def random_triangle(rng: np.random.Generator) -> Triangle:
    """Random triangle with unit-square vertices, area >= 0.01, rho <= 100."""
    while True:
        v = rng.uniform(0.0, 1.0, (3, 2))
        area2 = cross2(v[1] - v[0], v[2] - v[0])
        if area2 < 0:
            v = v[[0, 2, 1]]
            area2 = -area2
        area = 0.5 * area2
        if area < 0.01:
            continue
        e = edge_vectors_of(v)
        if (e * e).sum(axis=1).max() / area > 100.0:
            continue
        return Triangle(v)


def equivalence_constant_probe(samples: int = 1000, seed: int = 0,
                               op: str = "interpolation"):
    """Empirical bracket of e_T(q)_p / (sigma_q(T) ||sqrt(det q)||_Ltau(T)).

    Samples random PD forms and triangles and evaluates the ratio for
    p in {1, 2, inf}; returns (lower, upper) over all samples.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    lo, hi = math.inf, -math.inf
    for _ in range(samples):
        q = random_pd_form(rng)
        t = random_triangle(rng)
        qf = QuadraticField("probe", q.a20, q.a11, q.a02)
        s = sigma(q, t)
        for p in (1.0, 2.0, math.inf):
            denom = s * math.sqrt(q.det) * t.area ** (1.0 / tau_from_p(p))
            ratio = approx.local_error(t, qf, p, op) / denom
            lo = min(lo, ratio)
            hi = max(hi, ratio)
    return lo, hi


def hessian_oscillation(f: ScalarField, t: Triangle) -> float:
    """Relative spread of d2f over a triangle, measured at sample points.

    Returns the smallest mu such that the hessians at the sample points
    (vertices, edge midpoints, quadrature nodes) satisfy
    ``H_lo <= d2f(x) <= (1 + mu) H_lo`` for the sampled lower envelope; the
    field must be strictly convex on the triangle.
    """
    bary = np.vstack([np.eye(3), approx.EDGE_MIDPOINT_RULE.nodes,
                      approx.DEFAULT_RULE.nodes, [[1 / 3, 1 / 3, 1 / 3]]])
    xy = bary @ t.vertices
    h = f.hessian(xy[:, 0], xy[:, 1])
    hb = h[-1]  # centroid
    w, r = np.linalg.eigh(hb)
    if w[0] <= 0:
        raise ValueError("hessian not positive definite at the centroid")
    b = (r / np.sqrt(w)) @ r.T  # hb^(-1/2)
    m = b @ h @ b
    eigs = np.linalg.eigvalsh(m)
    lo, hi = float(eigs.min()), float(eigs.max())
    if lo <= 0:
        raise ValueError("hessian not positive definite on the triangle")
    return hi / lo - 1.0


def _row(values) -> str:
    return ",".join(repr(float(v)) if isinstance(v, float) else str(v)
                    for v in values)


def sigma_csv(stats) -> str:
    """CSV with one row per refinement level, in level order."""
    lines = ["level,count,mean_sigma,max_sigma,fraction_above,mean_sigma_pow_r0"]
    for s in stats:
        lines.append(_row([s.level, s.count, s.mean, s.max,
                           s.fraction_above, s.mean_pow_r0]))
    return "\n".join(lines) + "\n"


def convergence_csv(points) -> str:
    """CSV with one row per checkpoint, in checkpoint order."""
    lines = ["n,error,product,target,ratio"]
    for c in points:
        lines.append(_row([c.n, c.error, c.product, c.target, c.ratio]))
    return "\n".join(lines) + "\n"


def trace_csv(trace) -> str:
    """CSV with one row per trace record of a greedy run."""
    lines = ["step,n_leaves,global_error,max_diam,sigma_mean,sigma_max"]
    for r in trace:
        lines.append(_row([r.step, r.n_leaves, r.global_error, r.max_diam,
                           r.sigma_mean, r.sigma_max]))
    return "\n".join(lines) + "\n"
