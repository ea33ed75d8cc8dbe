"""Knot vectors, B-spline evaluation and tensor-product rational spline spaces.

Univariate B-splines are evaluated with the Cox-de Boor recursion; terms with a
zero denominator are dropped, which is the convention that makes the recursion
well defined on knot vectors with repeated knots.  Only open knot vectors are
supported: the first and last knot are repeated ``degree + 1`` times, so the
basis is interpolatory at both ends of the parameter interval [0, 1].

Two-dimensional spaces are tensor products of two univariate bases, optionally
divided by a fixed positive weight function (a tensor-product spline itself).
Dividing by the geometry's own denominator reproduces rational (NURBS) spaces
without re-deriving weights after refinement: the span of ``B_i / W`` equals
the span of the knot-inserted rational basis because the refined numerator
weights are positive constants absorbed into the coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

__all__ = [
    "KnotVector",
    "SplineSpace2D",
    "TensorWeight",
    "DiscreteFunction",
    "DiscreteVectorField",
    "VectorSpaceLayout",
    "LocalBasis2D",
    "make_open_knot_vector",
    "find_span",
    "eval_basis",
    "eval_rational_basis_2d",
    "dof_count",
    "refine_uniform",
    "refine_marked",
    "coarsen_by_factor",
    "elevate_degree",
    "greville_abscissae",
    "eval_spline_grid",
]


# ---------------------------------------------------------------------------
# knot vectors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KnotVector:
    """Open knot vector on [0, 1] with an associated polynomial degree."""

    degree: int
    knots: np.ndarray

    def __post_init__(self):
        knots = np.ascontiguousarray(self.knots, dtype=float)
        knots.flags.writeable = False
        object.__setattr__(self, "knots", knots)
        p = self.degree
        if p < 0:
            raise ValueError("degree must be non-negative")
        if np.any(np.diff(knots) < 0.0):
            raise ValueError("knots must be non-decreasing")
        if len(knots) < 2 * (p + 1):
            raise ValueError("too few knots for an open knot vector")
        if not (knots[0] == 0.0 and knots[p] == 0.0 and knots[p + 1] > 0.0):
            raise ValueError("first knot must be 0 with multiplicity degree+1")
        if not (knots[-1] == 1.0 and knots[-p - 1] == 1.0 and knots[-p - 2] < 1.0):
            raise ValueError("last knot must be 1 with multiplicity degree+1")
        interior = knots[p + 1:len(knots) - p - 1]
        if interior.size:
            _, counts = np.unique(interior, return_counts=True)
            if np.any(counts > p):
                raise ValueError("interior knot multiplicity exceeds degree")
        if self.n < p + 1:
            raise ValueError("knot vector spans no valid basis")

    @property
    def n(self) -> int:
        """Number of basis functions."""
        return len(self.knots) - self.degree - 1

    @property
    def breakpoints(self) -> np.ndarray:
        return np.unique(self.knots)

    @property
    def span_count(self) -> int:
        """Interior knot spans, counting zero-length spans at repeated knots."""
        return len(self.knots) - 2 * self.degree - 1

    @property
    def nonempty_spans(self) -> np.ndarray:
        """Start indices of the non-empty spans (the mesh cells)."""
        lo = self.degree
        hi = self.n
        idx = np.arange(lo, hi)
        return idx[self.knots[idx] < self.knots[idx + 1]]

    @property
    def num_cells(self) -> int:
        return len(self.nonempty_spans)

    def cell_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        spans = self.nonempty_spans
        return self.knots[spans], self.knots[spans + 1]


def make_open_knot_vector(breakpoints, degree, interior_multiplicities=None) -> KnotVector:
    """Build an open knot vector from breakpoints and interior multiplicities.

    Parameters
    ----------
    breakpoints : array_like
        Strictly increasing values in [0, 1] including 0 and 1.
    degree : int
        Polynomial degree; boundary knots are repeated ``degree + 1`` times.
    interior_multiplicities : array_like of int, optional
        One entry per interior breakpoint, each in [1, degree].  Defaults to 1.
    """
    bp = np.asarray(breakpoints, dtype=float)
    if bp.ndim != 1 or len(bp) < 2:
        raise ValueError("need at least the two boundary breakpoints")
    if bp[0] != 0.0 or bp[-1] != 1.0:
        raise ValueError("breakpoints must start at 0 and end at 1")
    if np.any(np.diff(bp) <= 0.0):
        raise ValueError("breakpoints must be strictly increasing")
    interior = bp[1:-1]
    if interior_multiplicities is None:
        mult = np.ones(len(interior), dtype=int)
    else:
        mult = np.asarray(interior_multiplicities, dtype=int)
        if np.isscalar(interior_multiplicities) or mult.ndim == 0:
            mult = np.full(len(interior), int(interior_multiplicities))
        if len(mult) != len(interior):
            raise ValueError("one multiplicity per interior breakpoint expected")
    if np.any(mult < 1) or np.any(mult > degree):
        raise ValueError("interior multiplicities must lie in [1, degree]")
    knots = np.concatenate([
        np.zeros(degree + 1),
        np.repeat(interior, mult),
        np.ones(degree + 1),
    ])
    return KnotVector(degree, knots)


def find_span(kv: KnotVector, x: float) -> int:
    """Index i of the non-empty span with knots[i] <= x < knots[i+1].

    x = 1 maps to the last non-empty span; empty (zero-length) spans are
    never returned.
    """
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"parameter {x} outside [0, 1]")
    if x >= 1.0:
        return int(self_last_nonempty(kv))
    return int(np.searchsorted(kv.knots, x, side="right") - 1)


def self_last_nonempty(kv: KnotVector) -> int:
    return int(kv.nonempty_spans[-1])


def _find_spans(kv: KnotVector, x: np.ndarray) -> np.ndarray:
    spans = np.searchsorted(kv.knots, x, side="right") - 1
    spans[x >= 1.0] = self_last_nonempty(kv)
    return spans


# ---------------------------------------------------------------------------
# univariate evaluation
# ---------------------------------------------------------------------------

def _value_triangle(knots, degree, x, spans):
    """Values of the degree+1 non-vanishing B-splines at each point.

    ``x`` and ``spans`` are arrays of equal length; every x must lie in the
    (non-empty) span given by the matching entry of ``spans``.  Returns an
    array of shape (npts, degree + 1); column a holds B_{span-degree+a}.
    """
    npts = len(x)
    vals = np.zeros((npts, degree + 1))
    vals[:, 0] = 1.0
    left = np.empty((npts, degree + 1))
    right = np.empty((npts, degree + 1))
    for j in range(1, degree + 1):
        left[:, j] = x - knots[spans + 1 - j]
        right[:, j] = knots[spans + j] - x
        saved = np.zeros(npts)
        for r in range(j):
            den = right[:, r + 1] + left[:, j - r]
            temp = vals[:, r] / den
            vals[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        vals[:, j] = saved
    return vals


def _shifted_lower_table(low_vals, degree):
    """Embed degree-(p-1) local values into the p+1 slots used by the
    derivative formula: entry a holds B_{first+a, p-1}, where first is the
    first active degree-p index.  The lowest-degree function active on the
    span starts one index later, hence the shift."""
    npts = low_vals.shape[0]
    out = np.zeros((npts, degree + 2))
    out[:, 1:degree + 1] = low_vals
    return out


def _derivative_from_lower(knots, degree, spans, lower):
    """Apply d/dx B_{i,p} = p*(B_{i,p-1}/(k_{i+p}-k_i) - B_{i+1,p-1}/(k_{i+p+1}-k_{i+1})).

    Terms with a zero denominator are dropped.  ``lower`` holds values (or
    derivatives) of the degree-(p-1) functions aligned to degree-p indexing,
    shape (npts, degree + 2) with one trailing slot for the i+1 term.
    """
    npts = lower.shape[0]
    out = np.zeros((npts, degree + 1))
    first = spans - degree
    for a in range(degree + 1):
        i = first + a
        d1 = knots[i + degree] - knots[i]
        d2 = knots[i + degree + 1] - knots[i + 1]
        t1 = np.where(d1 > 0.0, lower[:, a] / np.where(d1 > 0.0, d1, 1.0), 0.0)
        t2 = np.where(d2 > 0.0, lower[:, a + 1] / np.where(d2 > 0.0, d2, 1.0), 0.0)
        out[:, a] = degree * (t1 - t2)
    return out


def basis_table(kv: KnotVector, x: np.ndarray, spans: np.ndarray | None = None,
                max_deriv: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Tabulate non-vanishing basis values and derivatives at many points.

    Returns ``(spans, table)`` with ``table[m, d, a]`` the d-th derivative of
    basis function ``spans[m] - degree + a`` at ``x[m]``.
    """
    p = kv.degree
    if not 0 <= max_deriv <= 2:
        raise ValueError("max_deriv must be 0, 1 or 2")
    if max_deriv > p:
        raise ValueError("derivative order exceeds degree")
    x = np.asarray(x, dtype=float)
    if np.any((x < 0.0) | (x > 1.0)):
        raise ValueError("parameters outside [0, 1]")
    if spans is None:
        spans = _find_spans(kv, x)
    spans = np.asarray(spans, dtype=int)
    knots = kv.knots
    table = np.zeros((len(x), max_deriv + 1, p + 1))
    table[:, 0, :] = _value_triangle(knots, p, x, spans)
    if max_deriv >= 1:
        low1 = _value_triangle(knots, p - 1, x, spans)
        table[:, 1, :] = _derivative_from_lower(
            knots, p, spans, _shifted_lower_table(low1, p))
    if max_deriv >= 2:
        # derivatives of the degree-(p-1) functions via the same formula one
        # level down, aligned to degree-p indexing with the i+1 slot appended
        low2 = _value_triangle(knots, p - 2, x, spans)
        d_low1 = np.zeros((len(x), p + 2))
        first = spans - p
        for a in range(1, p + 1):
            i = first + a
            d1 = knots[i + p - 1] - knots[i]
            d2 = knots[i + p] - knots[i + 1]
            # degree-(p-2) table column c holds index first + 2 + c
            left_val = low2[:, a - 2] if a >= 2 else np.zeros(len(x))
            right_val = low2[:, a - 1] if a <= p - 1 else np.zeros(len(x))
            t1 = np.where(d1 > 0.0, left_val / np.where(d1 > 0.0, d1, 1.0), 0.0)
            t2 = np.where(d2 > 0.0, right_val / np.where(d2 > 0.0, d2, 1.0), 0.0)
            d_low1[:, a] = (p - 1) * (t1 - t2)
        table[:, 2, :] = _derivative_from_lower(knots, p, spans, d_low1)
    return spans, table


def eval_basis(kv: KnotVector, x: float, max_deriv: int = 0) -> tuple[int, np.ndarray]:
    """Evaluate the degree+1 possibly non-zero basis functions at one point.

    Returns ``(first_index, table)`` where ``table`` has shape
    (degree + 1, max_deriv + 1): row a holds value and derivatives of basis
    function ``first_index + a``.
    """
    span = find_span(kv, x)
    _, table = basis_table(kv, np.array([x]), np.array([span]), max_deriv)
    return span - kv.degree, table[0].T.copy()


def greville_abscissae(kv: KnotVector) -> np.ndarray:
    """Knot averages; coefficients at these points reproduce linear functions."""
    p = kv.degree
    if p == 0:
        return 0.5 * (kv.knots[:-1] + kv.knots[1:])
    out = np.empty(kv.n)
    for i in range(kv.n):
        out[i] = kv.knots[i + 1:i + p + 1].sum() / p
    return out


# ---------------------------------------------------------------------------
# space-construction operators
# ---------------------------------------------------------------------------

def refine_uniform(kv: KnotVector) -> KnotVector:
    """Insert the midpoint of every non-empty span with multiplicity one."""
    lo, hi = kv.cell_bounds()
    mids = 0.5 * (lo + hi)
    return KnotVector(kv.degree, np.sort(np.concatenate([kv.knots, mids])))


def refine_marked(kv1: KnotVector, kv2: KnotVector,
                  marked_cells) -> tuple[KnotVector, KnotVector]:
    """Bisect every mesh column/row that contains a marked cell.

    ``marked_cells`` is an iterable of (i, j) indices into the non-empty
    spans of ``kv1`` and ``kv2``.  The tensor-product structure forces a
    full column/row split for each marked cell.
    """
    cols = sorted({int(c[0]) for c in marked_cells})
    rows = sorted({int(c[1]) for c in marked_cells})
    return _bisect_cells(kv1, cols), _bisect_cells(kv2, rows)


def _bisect_cells(kv: KnotVector, cells) -> KnotVector:
    if not cells:
        return kv
    lo, hi = kv.cell_bounds()
    cells = np.asarray(cells, dtype=int)
    if np.any(cells < 0) or np.any(cells >= len(lo)):
        raise ValueError("marked cell index out of range")
    mids = 0.5 * (lo[cells] + hi[cells])
    return KnotVector(kv.degree, np.sort(np.concatenate([kv.knots, mids])))


def coarsen_by_factor(kv: KnotVector, K: int) -> KnotVector:
    """Keep every K-th unique interior breakpoint, counting from the first.

    Boundary breakpoints are always kept and the result has interior
    multiplicity one.  On a uniform mesh whose span count is divisible by K
    this multiplies the span size by K; K larger than the number of interior
    breakpoints collapses to the single-span vector.
    """
    if K < 1:
        raise ValueError("coarsening factor must be >= 1")
    interior = kv.breakpoints[1:-1]
    kept = interior[K - 1::K]
    bp = np.concatenate([[0.0], kept, [1.0]])
    return make_open_knot_vector(bp, kv.degree)


def elevate_degree(breakpoints, degree: int, increment: int) -> KnotVector:
    """Open knot vector of degree ``degree + increment`` on the breakpoints.

    Interior multiplicity one, i.e. maximal smoothness; for fixed breakpoints
    the dimension grows by exactly ``increment``.
    """
    if increment < 0:
        raise ValueError("degree increment must be non-negative")
    return make_open_knot_vector(breakpoints, degree + increment)


# ---------------------------------------------------------------------------
# tensor-product fields and rational spaces
# ---------------------------------------------------------------------------

def eval_spline_grid(kv1: KnotVector, kv2: KnotVector, coefs: np.ndarray,
                     x: np.ndarray, y: np.ndarray, max_deriv: int = 0) -> np.ndarray:
    """Evaluate a tensor-product spline (or a stack of them) on a grid.

    ``coefs`` has shape (n1, n2) or (n1, n2, m).  The result has shape
    (max_deriv+1, max_deriv+1, nx, ny[, m]); entry [d1, d2] is the mixed
    parameter derivative of order (d1, d2).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    scalar = coefs.ndim == 2
    C = coefs[..., None] if scalar else coefs
    nd = max_deriv
    p1, p2 = kv1.degree, kv2.degree
    s1, t1 = basis_table(kv1, x, max_deriv=min(nd, p1))
    s2, t2 = basis_table(kv2, y, max_deriv=min(nd, p2))
    m = C.shape[2]
    nd1 = t1.shape[1] - 1
    nd2 = t2.shape[1] - 1
    # contract direction 1 span by span: tmp[x, d1, j, m]
    tmp = np.zeros((len(x), nd1 + 1, C.shape[1], m))
    for sp in np.unique(s1):
        rows = np.nonzero(s1 == sp)[0]
        block = C[sp - p1:sp + 1, :, :]
        tmp[rows] = np.einsum("qda,ajm->qdjm", t1[rows], block)
    out = np.zeros((nd + 1, nd + 1, len(x), len(y), m))
    for sp in np.unique(s2):
        cols = np.nonzero(s2 == sp)[0]
        block = tmp[:, :, sp - p2:sp + 1, :]
        vals = np.einsum("xdbm,qeb->dexqm", block, t2[cols])
        out[:nd1 + 1, :nd2 + 1, :, cols, :] = vals
    return out[..., 0] if scalar else out


@dataclass(frozen=True)
class TensorWeight:
    """Fixed positive tensor-product spline used as a rational denominator."""

    kv1: KnotVector
    kv2: KnotVector
    coefs: np.ndarray

    def __post_init__(self):
        c = np.ascontiguousarray(self.coefs, dtype=float)
        if c.shape != (self.kv1.n, self.kv2.n):
            raise ValueError("weight coefficient grid has wrong shape")
        if np.any(c <= 0.0):
            raise ValueError("weights must be strictly positive")
        c.flags.writeable = False
        object.__setattr__(self, "coefs", c)

    def eval_grid(self, x, y, max_deriv=0) -> np.ndarray:
        """Shape (max_deriv+1, max_deriv+1, nx, ny)."""
        return eval_spline_grid(self.kv1, self.kv2, self.coefs, x, y, max_deriv)


@dataclass(frozen=True)
class SplineSpace2D:
    """Tensor-product (rational) spline space with lexicographic dof layout.

    Dof (i, j) maps to index ``i + n1 * j``.  When ``weight`` is set, basis
    functions are ``w_ij * B_i(x) B_j(y) / W(x, y)`` with numerator weights
    taken from ``numerator_weights`` (all one if omitted); ``W`` stays fixed
    under refinement of the knot vectors.
    """

    kv1: KnotVector
    kv2: KnotVector
    weight: TensorWeight | None = None
    numerator_weights: np.ndarray | None = None

    def __post_init__(self):
        if self.numerator_weights is not None:
            w = np.ascontiguousarray(self.numerator_weights, dtype=float)
            if w.shape != (self.n1, self.n2):
                raise ValueError("numerator weight grid has wrong shape")
            if np.any(w <= 0.0):
                raise ValueError("numerator weights must be positive")
            w.flags.writeable = False
            object.__setattr__(self, "numerator_weights", w)

    @property
    def n1(self) -> int:
        return self.kv1.n

    @property
    def n2(self) -> int:
        return self.kv2.n

    @property
    def dof_count(self) -> int:
        return self.n1 * self.n2

    @property
    def degrees(self) -> tuple[int, int]:
        return self.kv1.degree, self.kv2.degree

    @property
    def num_cells(self) -> tuple[int, int]:
        return self.kv1.num_cells, self.kv2.num_cells

    @property
    def span_counts(self) -> tuple[int, int]:
        """Interior span counts including zero-length spans (mesh-size label)."""
        return self.kv1.span_count, self.kv2.span_count

    def dof_index(self, i: int, j: int) -> int:
        return i + self.n1 * j

    def numerator_grid(self, coefficients: np.ndarray) -> np.ndarray:
        """Coefficient vector reshaped to the (n1, n2) numerator grid."""
        c = np.asarray(coefficients, dtype=float)
        if c.shape != (self.dof_count,):
            raise ValueError("coefficient length does not match dof count")
        return c.reshape(self.n2, self.n1).T


def dof_count(space: SplineSpace2D) -> int:
    return space.dof_count


@dataclass(frozen=True)
class LocalBasis2D:
    """Non-vanishing basis data at one parameter point."""

    first1: int
    first2: int
    values: np.ndarray          # (nloc,)
    gradients: np.ndarray       # (nloc, 2)
    seconds: np.ndarray | None  # (nloc, 3): d11, d12, d22

    @property
    def nloc(self) -> int:
        return len(self.values)


def eval_rational_basis_2d(space: SplineSpace2D, xi, max_deriv: int = 0) -> LocalBasis2D:
    """Rational basis values and parameter derivatives at one point.

    With no weight function this is the plain tensor-product table; otherwise
    values are ``w_loc B1 B2 / W`` with quotient-rule derivatives.  Local
    ordering is ``a1 + (p1+1) * a2``, matching the lexicographic dof layout.
    """
    x, y = float(xi[0]), float(xi[1])
    p1, p2 = space.degrees
    f1, t1 = eval_basis(space.kv1, x, min(max_deriv, p1))
    f2, t2 = eval_basis(space.kv2, y, min(max_deriv, p2))

    def dcol(t, d):
        return t[:, d] if d < t.shape[1] else np.zeros(t.shape[0])

    def num(d1, d2):
        return np.outer(dcol(t2, d2), dcol(t1, d1)).ravel()  # a1 fastest

    N = num(0, 0)
    N1, N2 = num(1, 0), num(0, 1)
    if space.numerator_weights is not None:
        wloc = space.numerator_weights[f1:f1 + p1 + 1, f2:f2 + p2 + 1].T.ravel()
    else:
        wloc = np.ones_like(N)
    N, N1, N2 = wloc * N, wloc * N1, wloc * N2
    if max_deriv >= 2:
        N11, N12, N22 = wloc * num(2, 0), wloc * num(1, 1), wloc * num(0, 2)

    if space.weight is None:
        vals = N
        grads = np.stack([N1, N2], axis=1)
        seconds = np.stack([N11, N12, N22], axis=1) if max_deriv >= 2 else None
    else:
        W = space.weight.eval_grid([x], [y], max_deriv=max(1, max_deriv))
        w = W[0, 0, 0, 0]
        if w <= 0.0:
            raise ValueError("non-positive rational denominator")
        w1, w2 = W[1, 0, 0, 0], W[0, 1, 0, 0]
        vals = N / w
        g1 = (N1 - vals * w1) / w
        g2 = (N2 - vals * w2) / w
        grads = np.stack([g1, g2], axis=1)
        seconds = None
        if max_deriv >= 2:
            w11, w12, w22 = W[2, 0, 0, 0], W[1, 1, 0, 0], W[0, 2, 0, 0]
            s11 = (N11 - vals * w11 - 2.0 * g1 * w1) / w
            s12 = (N12 - vals * w12 - g1 * w2 - g2 * w1) / w
            s22 = (N22 - vals * w22 - 2.0 * g2 * w2) / w
            seconds = np.stack([s11, s12, s22], axis=1)
    return LocalBasis2D(f1, f2, vals, grads, seconds)


# ---------------------------------------------------------------------------
# discrete functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscreteFunction:
    """Coefficient vector over a scalar spline space."""

    space: SplineSpace2D
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.ascontiguousarray(self.coefficients, dtype=float)
        if c.shape != (self.space.dof_count,):
            raise ValueError("coefficient length does not match dof count")
        c.flags.writeable = False
        object.__setattr__(self, "coefficients", c)

    def coef_grid(self) -> np.ndarray:
        return self.space.numerator_grid(self.coefficients)


Transform = Literal["componentwise", "piola"]


@dataclass(frozen=True)
class VectorSpaceLayout:
    """Pair of scalar spaces and a transform tag describing a vector space."""

    space1: SplineSpace2D
    space2: SplineSpace2D
    transform: Transform

    def __post_init__(self):
        if self.transform not in ("componentwise", "piola"):
            raise ValueError(f"unknown transform {self.transform!r}")

    @property
    def dof_count(self) -> int:
        return self.space1.dof_count + self.space2.dof_count

    def make_field(self, coefficients: np.ndarray) -> "DiscreteVectorField":
        return DiscreteVectorField(self.space1, self.space2,
                                   np.asarray(coefficients, dtype=float),
                                   self.transform)


@dataclass(frozen=True)
class DiscreteVectorField:
    """Two-component field: component coefficients concatenated, plus the
    transform used to push the parametric field to the physical domain."""

    space1: SplineSpace2D
    space2: SplineSpace2D
    coefficients: np.ndarray
    transform: Transform

    def __post_init__(self):
        if self.transform not in ("componentwise", "piola"):
            raise ValueError(f"unknown transform {self.transform!r}")
        c = np.ascontiguousarray(self.coefficients, dtype=float)
        if c.shape != (self.space1.dof_count + self.space2.dof_count,):
            raise ValueError("coefficient length must equal dof(space1) + dof(space2)")
        c.flags.writeable = False
        object.__setattr__(self, "coefficients", c)

    def component_grids(self) -> tuple[np.ndarray, np.ndarray]:
        m = self.space1.dof_count
        return (self.space1.numerator_grid(self.coefficients[:m]),
                self.space2.numerator_grid(self.coefficients[m:]))
