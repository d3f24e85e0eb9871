"""Local piecewise-linear approximation operators and bisection decisions.

Two linear operators map a function to an affine polynomial on a triangle:
vertex interpolation and L2 projection.  Both reproduce affine functions
and commute with affine changes of variables, so the local Lp error
scales as ``|det L|^(1/p)`` under a map with linear part L.

The edge-decision functions score the three possible bisections of a
triangle.  For convex integrands the L1-interpolation error reduction has
the closed form ``|T|/3 * (midpoint convexity gap)``, which the refinement
engine uses whenever the field is convexity-tagged; otherwise decisions
fall back to quadrature over the children.
"""
from __future__ import annotations

import math

import numpy as np

from .geometry import Triangle, bisect
from .fields import QuadraticField

__all__ = [
    "AffinePoly",
    "QuadratureRule",
    "DEFAULT_RULE",
    "EDGE_MIDPOINT_RULE",
    "OPERATORS",
    "interpolate",
    "project_l2",
    "local_error",
    "local_error_quadratic_exact",
    "decision_l1",
    "decision_gain_convex",
    "decision_gains_convex",
    "decision_gain_quadrature",
    "decision_lp_split",
]

OPERATORS = ("interpolation", "l2-projection")

# Triangles flatter than this (area relative to diam^2) make the operators
# numerically meaningless; bisection of valid parents never produces them.
FLAT_RTOL = 1e-14


class AffinePoly:
    """Affine polynomial ``c0 + c1 x + c2 y``."""

    __slots__ = ("c0", "c1", "c2")

    def __init__(self, c0: float, c1: float, c2: float):
        self.c0, self.c1, self.c2 = float(c0), float(c1), float(c2)
        if not all(map(math.isfinite, (self.c0, self.c1, self.c2))):
            raise ValueError("affine coefficients must be finite")

    @property
    def coefficients(self) -> tuple[float, float, float]:
        return self.c0, self.c1, self.c2

    def __call__(self, x, y):
        out = self.c0 + self.c1 * np.asarray(x, dtype=float) + self.c2 * np.asarray(y, dtype=float)
        return float(out) if np.ndim(out) == 0 else out

    def __repr__(self):
        return f"AffinePoly({self.c0:g}, {self.c1:g}, {self.c2:g})"


class QuadratureRule:
    """Quadrature nodes in barycentric coordinates with weights summing to 1.

    ``integrate(g) over T ~= area(T) * sum_k w_k g(x_k)``.  The rule is
    exact for polynomials up to ``degree`` on any triangle.
    """

    __slots__ = ("nodes", "weights", "degree")

    def __init__(self, nodes, weights, degree: int):
        nodes = np.array(nodes, dtype=float)
        weights = np.array(weights, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != 3 or len(weights) != len(nodes):
            raise ValueError("nodes must be (n, 3) barycentric with matching weights")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        self.nodes = nodes
        self.weights = weights
        self.degree = int(degree)

    def points_on(self, t: Triangle) -> np.ndarray:
        """Cartesian node coordinates on a triangle, shape (n, 2)."""
        return self.nodes @ t.vertices

    def _key(self):
        return (self.degree, self.nodes.tobytes(), self.weights.tobytes())


def _symmetric_rule(groups, degree):
    import itertools

    nodes, weights = [], []
    for w, bary in groups:
        for pm in sorted(set(itertools.permutations(bary))):
            nodes.append(pm)
            weights.append(w)
    return QuadratureRule(nodes, weights, degree)


# 16-point symmetric rule, exact to total degree 8 (Lyness-Jespersen family).
DEFAULT_RULE = _symmetric_rule(
    [
        (0.1443156076777871682510911104890646, (1 / 3, 1 / 3, 1 / 3)),
        (0.0950916342672846247938961043885843, (0.4592925882927231560288155144941693,
                                                0.4592925882927231560288155144941693,
                                                0.0814148234145536879423689710116614)),
        (0.1032173705347182502817915502921290, (0.1705693077517602066222935014914645,
                                                0.1705693077517602066222935014914645,
                                                0.6588613844964795867554129970170710)),
        (0.0324584976231980803109259283417806, (0.0505472283170309754584235505965989,
                                                0.0505472283170309754584235505965989,
                                                0.8989055433659380490831528988068022)),
        (0.0272303141744349942648446900739089, (0.2631128296346381134217857862846436,
                                                0.0083947774099576053372138345392944,
                                                0.7284923929554042812409993791760620)),
    ],
    degree=8,
)

# Edge-midpoint rule: exact to degree 2, used for the closed-form L1 error.
EDGE_MIDPOINT_RULE = QuadratureRule(
    [(0.5, 0.5, 0.0), (0.0, 0.5, 0.5), (0.5, 0.0, 0.5)],
    [1 / 3, 1 / 3, 1 / 3],
    degree=2,
)

_SUBDIV_CACHE: dict = {}
_LATTICE_CACHE: dict = {}


def _subdivided(rule: QuadratureRule, subdiv: int):
    """Barycentric nodes/weights of `rule` on 4**subdiv congruent subtriangles.

    The |f - I_T f| integrand is only piecewise smooth (a curve of kinks for
    sign-changing residuals), so error integrals subdivide once by default.
    """
    key = (rule._key(), subdiv)
    hit = _SUBDIV_CACHE.get(key)
    if hit is not None:
        return hit
    corners = [np.eye(3)]
    for _ in range(subdiv):
        refined = []
        for s in corners:
            m01, m12, m20 = 0.5 * (s[0] + s[1]), 0.5 * (s[1] + s[2]), 0.5 * (s[2] + s[0])
            refined += [
                np.array([s[0], m01, m20]),
                np.array([m01, s[1], m12]),
                np.array([m20, m12, s[2]]),
                np.array([m01, m12, m20]),
            ]
        corners = refined
    n_sub = len(corners)
    bary = np.vstack([rule.nodes @ s for s in corners])
    weights = np.tile(rule.weights / n_sub, n_sub)
    _SUBDIV_CACHE[key] = (bary, weights)
    return bary, weights


def _lattice(order: int = 16) -> np.ndarray:
    """Barycentric lattice {(i, j, k)/order : i+j+k = order}, (m, 3)."""
    pts = _LATTICE_CACHE.get(order)
    if pts is None:
        pts = np.array([(i / order, j / order, (order - i - j) / order)
                        for i in range(order + 1) for j in range(order + 1 - i)])
        _LATTICE_CACHE[order] = pts
    return pts


def _check_shape(t: Triangle, what: str) -> None:
    d = t.diameter
    if t.area < FLAT_RTOL * d * d:
        raise ValueError(f"{what}: triangle too flat (area {t.area}, diam {d})")


def _check_p(p) -> float:
    p = float(p)
    if not (p >= 1.0):
        raise ValueError(f"Lp exponent must satisfy p >= 1, got {p}")
    return p


def _check_op(op: str) -> str:
    if op not in OPERATORS:
        raise ValueError(f"unknown operator {op!r}; expected one of {OPERATORS}")
    return op


def interpolate(t: Triangle, f) -> AffinePoly:
    """The affine function matching ``f`` at the three vertices."""
    _check_shape(t, "interpolate")
    v = t.vertices
    a = np.column_stack([np.ones(3), v[:, 0], v[:, 1]])
    coeff = np.linalg.solve(a, np.asarray(f(v[:, 0], v[:, 1]), dtype=float))
    return AffinePoly(*coeff)


def _projection_local(t: Triangle, f, rule: QuadratureRule, subdiv: int):
    """L2 projection in the centered local basis {1, (x-cx)/h, (y-cy)/h}.

    Returns (alpha, cx, cy, h); the centered basis keeps the Gram matrix
    well conditioned on thin triangles.
    """
    _check_shape(t, "project_l2")
    cx, cy = t.centroid
    h = t.diameter
    bary, w = _subdivided(rule, subdiv)
    xy = bary @ t.vertices
    phi = np.column_stack([np.ones(len(xy)), (xy[:, 0] - cx) / h, (xy[:, 1] - cy) / h])
    gram = (phi * w[:, None]).T @ phi
    load = (phi * w[:, None]).T @ np.asarray(f(xy[:, 0], xy[:, 1]), dtype=float)
    try:
        alpha = np.linalg.solve(gram, load)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"project_l2: singular Gram matrix on {t}") from exc
    return alpha, cx, cy, h


def project_l2(t: Triangle, f, rule: QuadratureRule = DEFAULT_RULE,
               subdiv: int = 1) -> AffinePoly:
    """L2(T)-orthogonal projection of ``f`` onto affine functions.

    ``rule`` must be exact to degree >= 2 so the Gram matrix is exact; the
    load integrals use the same rule on 4**subdiv congruent subtriangles.
    """
    if rule.degree < 2:
        raise ValueError("projection needs a rule exact to degree >= 2")
    alpha, cx, cy, h = _projection_local(t, f, rule, subdiv)
    return AffinePoly(alpha[0] - alpha[1] * cx / h - alpha[2] * cy / h,
                      alpha[1] / h, alpha[2] / h)


def _operator_node_values(t: Triangle, f, op: str, bary: np.ndarray,
                          rule: QuadratureRule, subdiv: int) -> np.ndarray:
    """Values of A_T f at barycentric nodes, evaluated stably."""
    if op == "interpolation":
        v = t.vertices
        fv = np.asarray(f(v[:, 0], v[:, 1]), dtype=float)
        return bary @ fv
    alpha, cx, cy, h = _projection_local(t, f, rule, subdiv)
    xy = bary @ t.vertices
    return alpha[0] + alpha[1] * (xy[:, 0] - cx) / h + alpha[2] * (xy[:, 1] - cy) / h


def local_error(t: Triangle, f, p, op: str = "interpolation",
                rule: QuadratureRule = DEFAULT_RULE, subdiv: int = 1) -> float:
    """Local Lp error ``||f - A_T f||_{Lp(T)}``.

    Finite p uses quadrature on 4**subdiv congruent subtriangles; p = inf
    takes the maximum over the quadrature nodes and a barycentric lattice
    of order 16.
    """
    _check_op(op)
    _check_shape(t, "local_error")
    bary, w = _subdivided(rule, subdiv)
    if math.isinf(p):
        bary = np.vstack([bary, _lattice(16)])
    xy = bary @ t.vertices
    res = np.asarray(f(xy[:, 0], xy[:, 1]), dtype=float) \
        - _operator_node_values(t, f, op, bary, rule, subdiv)
    if math.isinf(p):
        return float(np.abs(res).max())
    p = _check_p(p)
    return float((t.area * (w * np.abs(res[: len(w)]) ** p).sum()) ** (1.0 / p))


def local_error_quadratic_exact(t: Triangle, qf: QuadraticField) -> float:
    """Exact ``||q - I_T q||_{L1(T)}`` for a convex (or concave) quadratic.

    Convexity makes ``I_T q - q`` one-signed, so the L1 norm is the plain
    integral of a quadratic, computed exactly by the edge-midpoint rule;
    equals ``|T| * |q(a) + q(b) + q(c)| / 12`` in terms of the form.
    """
    if not isinstance(qf, QuadraticField):
        raise TypeError("expects a QuadraticField")
    lo, hi = np.linalg.eigvalsh(qf.form.matrix)
    tol = 1e-12 * max(qf.form.scale, 1e-300)
    if lo < -tol and hi > tol:
        raise ValueError("exact L1 error needs a semidefinite homogeneous part")
    _check_shape(t, "local_error_quadratic_exact")
    mids = EDGE_MIDPOINT_RULE.nodes @ t.vertices
    v = t.vertices
    fv = np.asarray(qf(v[:, 0], v[:, 1]), dtype=float)
    gaps = EDGE_MIDPOINT_RULE.nodes @ fv - np.asarray(qf(mids[:, 0], mids[:, 1]))
    return abs(t.area * float(gaps.sum()) / 3.0)


def decision_l1(t: Triangle, f, edge_index: int,
                rule: QuadratureRule = DEFAULT_RULE, subdiv: int = 1) -> float:
    """L1 interpolation error summed over the two children of a bisection."""
    c1, c2 = bisect(t, edge_index)
    return (local_error(c1, f, 1, "interpolation", rule, subdiv)
            + local_error(c2, f, 1, "interpolation", rule, subdiv))


def decision_gain_convex(t: Triangle, f, edge_index: int) -> float:
    """Reduction of the L1 interpolation error when bisecting one edge.

    Valid for convex ``f`` (caller-asserted): ``|T|/3`` times the midpoint
    convexity gap of the edge; for a quadratic this is ``|T| q(e) / 12``.
    """
    return float(decision_gains_convex(t, f)[edge_index])


def decision_gains_convex(t: Triangle, f) -> np.ndarray:
    """Convex-case error reductions for all three edges at once."""
    v = t.vertices
    mids = 0.5 * (v[[1, 2, 0]] + v[[2, 0, 1]])  # midpoint of edge i
    xs = np.concatenate([v[:, 0], mids[:, 0]])
    ys = np.concatenate([v[:, 1], mids[:, 1]])
    vals = np.asarray(f(xs, ys), dtype=float)
    fv, fm = vals[:3], vals[3:]
    gaps = 0.5 * (fv[[1, 2, 0]] + fv[[2, 0, 1]]) - fm
    return t.area / 3.0 * gaps


def decision_gain_quadrature(t: Triangle, f, edge_index: int,
                             rule: QuadratureRule = DEFAULT_RULE,
                             subdiv: int = 1) -> float:
    """The same error reduction measured by child quadrature.

    ``||f - I_T f||_{L1(T)} - d_T(e, f)``; agrees with the closed form for
    convex fields up to quadrature accuracy.
    """
    return (local_error(t, f, 1, "interpolation", rule, subdiv)
            - decision_l1(t, f, edge_index, rule, subdiv))


def decision_lp_split(t: Triangle, f, p, edge_index: int,
                      op: str = "interpolation",
                      rule: QuadratureRule = DEFAULT_RULE, subdiv: int = 1) -> float:
    """Error mass after bisection: sum of child errors to the p-th power.

    For p = inf, the maximum of the two child errors.
    """
    _check_op(op)
    c1, c2 = bisect(t, edge_index)
    e1 = local_error(c1, f, p, op, rule, subdiv)
    e2 = local_error(c2, f, p, op, rule, subdiv)
    if math.isinf(p):
        return max(e1, e2)
    p = _check_p(p)
    return e1 ** p + e2 ** p
