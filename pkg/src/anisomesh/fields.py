"""Target scalar fields with values, analytic hessians and convexity tags.

Fields are defined on all of the plane; the initial triangulation of a run
fixes the domain actually meshed.  Evaluation callables are vectorized:
``field(x, y)`` accepts broadcastable arrays, ``field.hessian(x, y)``
returns an array of symmetric 2x2 matrices with shape ``(..., 2, 2)``.

Convexity tags are declared, not inferred; ``check_box`` is the rectangle
on which the declaration is grid-checked (and on which demo runs make
sense for fields that are only locally convex).
"""
from __future__ import annotations

import numpy as np

from .geometry import QuadForm

__all__ = [
    "ScalarField",
    "QuadraticField",
    "builtin_catalog",
    "get_field",
    "hessian_fd",
]

CONVEXITY_TAGS = ("strictly-convex", "convex", "general")


class ScalarField:
    """Evaluatable scalar function of the plane.

    Parameters
    ----------
    label : str
        Catalog identifier.
    func : callable
        ``func(x, y) -> values``, vectorized over broadcastable arrays.
    hess : callable, optional
        ``hess(x, y) -> (..., 2, 2)`` analytic hessian.
    convexity : {'strictly-convex', 'convex', 'general'}
    convexity_margin : float
        Lower bound m with ``d2f >= m I`` for strictly convex fields.
    check_box : ((xmin, xmax), (ymin, ymax))
        Rectangle on which the convexity declaration is spot-checked.
    """

    def __init__(self, label, func, hess=None, convexity="general",
                 convexity_margin=0.0, check_box=((0.0, 1.0), (0.0, 1.0))):
        if convexity not in CONVEXITY_TAGS:
            raise ValueError(f"unknown convexity tag {convexity!r}")
        if convexity == "strictly-convex" and not convexity_margin > 0.0:
            raise ValueError("strictly convex fields need a positive margin")
        self.label = label
        self._func = func
        self._hess = hess
        self.convexity = convexity
        self.convexity_margin = float(convexity_margin)
        self.check_box = check_box

    def __call__(self, x, y):
        return self._func(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    @property
    def has_hessian(self) -> bool:
        return self._hess is not None

    def hessian(self, x, y) -> np.ndarray:
        """Analytic hessian at (x, y); raises if the field has none."""
        if self._hess is None:
            raise ValueError(f"field {self.label!r} has no analytic hessian")
        return self._hess(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    @property
    def is_convex(self) -> bool:
        return self.convexity in ("strictly-convex", "convex")

    def __repr__(self):
        return f"<ScalarField {self.label!r} ({self.convexity})>"


class QuadraticField(ScalarField):
    """Polynomial of degree two; the homogeneous part is a QuadForm.

    ``q(x, y) = a20 x^2 + 2 a11 x y + a02 y^2 + a10 x + a01 y + a00``.
    The convexity tag is derived from the eigenvalues of the form.
    """

    def __init__(self, label, a20, a11, a02, a10=0.0, a01=0.0, a00=0.0,
                 check_box=((0.0, 1.0), (0.0, 1.0))):
        self.coeffs = tuple(float(c) for c in (a20, a11, a02, a10, a01, a00))
        form = QuadForm(a20, a11, a02)
        lo, hi = np.linalg.eigvalsh(form.matrix)
        tol = 1e-14 * max(form.scale, 1e-300)
        if lo > tol:
            tag, margin = "strictly-convex", 2.0 * lo  # d2q = 2 Q
        elif lo >= -tol:
            tag, margin = "convex", 0.0
        else:
            tag, margin = "general", 0.0
        self.form = form
        hess_const = 2.0 * form.matrix

        def func(x, y, c=self.coeffs):
            a20_, a11_, a02_, a10_, a01_, a00_ = c
            return (a20_ * x * x + 2.0 * a11_ * x * y + a02_ * y * y
                    + a10_ * x + a01_ * y + a00_)

        def hess(x, y, h=hess_const):
            shape = np.broadcast(x, y).shape
            return np.broadcast_to(h, shape + (2, 2))

        super().__init__(label, func, hess, convexity=tag,
                         convexity_margin=margin, check_box=check_box)

    def __repr__(self):
        return f"<QuadraticField {self.label!r} coeffs={self.coeffs}>"


def _expbump():
    def func(x, y):
        return np.exp(x * x + 2.0 * y * y)

    def hess(x, y):
        g = np.exp(x * x + 2.0 * y * y)
        h = np.empty(np.broadcast(x, y).shape + (2, 2))
        h[..., 0, 0] = (2.0 + 4.0 * x * x) * g
        h[..., 0, 1] = h[..., 1, 0] = 8.0 * x * y * g
        h[..., 1, 1] = (4.0 + 16.0 * y * y) * g
        return h

    return ScalarField("expbump", func, hess, convexity="strictly-convex",
                       convexity_margin=2.0)


def _gauss_ridge():
    # convex only away from the diagonal x = y; the check box keeps u >= 1/2
    def func(x, y):
        u = x - y
        return np.exp(-u * u) + x * x + y * y

    def hess(x, y):
        u = x - y
        g = (4.0 * u * u - 2.0) * np.exp(-u * u)
        h = np.empty(np.broadcast(x, y).shape + (2, 2))
        h[..., 0, 0] = 2.0 + g
        h[..., 0, 1] = h[..., 1, 0] = -g
        h[..., 1, 1] = 2.0 + g
        return h

    return ScalarField("gauss-ridge", func, hess, convexity="strictly-convex",
                       convexity_margin=0.4, check_box=((1.0, 2.0), (0.0, 0.5)))


def builtin_catalog() -> list[ScalarField]:
    """The named fields used by the demos, the CLI and the test suites."""
    fields = [
        QuadraticField("disk", 1.0, 0.0, 1.0),
        QuadraticField("aniso-2", 1.0, 0.0, 2.0),
        QuadraticField("aniso-10", 1.0, 0.0, 10.0),
        QuadraticField("aniso-100", 1.0, 0.0, 100.0),
        _expbump(),
        QuadraticField("mixed-saddle", 1.0, 0.0, -1.0),
        _gauss_ridge(),
    ]
    return fields


def get_field(label: str) -> ScalarField:
    """Look up a catalog field by label."""
    for f in builtin_catalog():
        if f.label == label:
            return f
    known = ", ".join(f.label for f in builtin_catalog())
    raise ValueError(f"unknown field {label!r}; available: {known}")


def hessian_fd(f: ScalarField, point, h: float = 1e-4) -> np.ndarray:
    """Central second differences of ``f`` at one point.

    Test oracle for the analytic hessians; ``h`` must leave a margin of 2h
    inside the region where ``f`` is defined (catalog fields are global).
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    x, y = float(point[0]), float(point[1])
    f00 = float(f(x, y))
    fxx = (float(f(x + h, y)) - 2.0 * f00 + float(f(x - h, y))) / (h * h)
    fyy = (float(f(x, y + h)) - 2.0 * f00 + float(f(x, y - h))) / (h * h)
    fxy = (float(f(x + h, y + h)) - float(f(x + h, y - h))
           - float(f(x - h, y + h)) + float(f(x - h, y - h))) / (4.0 * h * h)
    return np.array([[fxx, fxy], [fxy, fyy]])
