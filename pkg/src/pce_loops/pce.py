"""Truncated polynomial chaos expansions over independent germs.

Given a square-integrable function g of k independent basic variables, the
expansion keeps every product of univariate orthonormal basis polynomials
whose per-variable degrees stay within a degree vector; the Fourier
coefficients are tensor-product quadrature integrals, the estimator is the
assembled multivariate polynomial, and se is the L2 norm of the residual
under the joint density.  Also here: the normal-reference error bound and
the iteration-conditioned Lagrange estimator used by the loop engine.
"""

import itertools
import math

import numpy as np

from .dist import Density, RandomVector
from .orthopoly import gram_schmidt
from .poly import MultiPoly
from .quad import DEFAULT_NODES, build_rule

__all__ = [
    "DegreeMatrix",
    "PceExpansion",
    "build_degree_matrix",
    "expand",
    "error_bound",
    "LagrangeConditional",
    "lagrange_conditional",
]

MAX_ROWS = 10**6


class DegreeMatrix:
    """All degree combinations of the full tensor grid, one per row.

    Rows run in row-major order over {0..d1} x ... x {0..dk}: the first row
    is all zeros, the last is the degree vector itself.
    """

    __slots__ = ("degrees", "rows")

    def __init__(self, degrees):
        self.degrees = tuple(int(d) for d in degrees)
        if any(d < 0 for d in self.degrees):
            raise ValueError("degrees must be nonnegative")
        L = 1
        for d in self.degrees:
            L *= d + 1
            if L > MAX_ROWS:
                raise ValueError(f"degree matrix would exceed {MAX_ROWS} rows")
        self.rows = list(itertools.product(*[range(d + 1) for d in self.degrees]))

    @property
    def L(self):
        return len(self.rows)

    @property
    def k(self):
        return len(self.degrees)

    def __len__(self):
        return len(self.rows)

    def __getitem__(self, j):
        return self.rows[j]

    def __iter__(self):
        return iter(self.rows)

    def __repr__(self):
        return f"DegreeMatrix(degrees={self.degrees}, L={self.L})"


def build_degree_matrix(degrees):
    return DegreeMatrix(degrees)


class PceExpansion:
    """A built expansion: bases, degree matrix, coefficients, estimator, se."""

    def __init__(self, germs, bases, D, coeffs, estimator, se):
        self.germs = germs
        self.bases = bases
        self.D = D
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.estimator = estimator
        self.se = float(se)

    def moments(self):
        """(mean, variance) of the truncated expansion.

        With orthonormal bases the mean is the all-zeros-row coefficient and
        the variance is the sum of the remaining squared coefficients.
        """
        mean = float(self.coeffs[0])
        var = float(np.dot(self.coeffs[1:], self.coeffs[1:]))
        return mean, var

    def evaluate(self, z):
        return self.estimator.evaluate(z)

    def __repr__(self):
        return (
            f"PceExpansion(degrees={self.D.degrees}, L={self.D.L}, "
            f"se={self.se:.6g})"
        )


def _grid_values(g, rules):
    grids = np.meshgrid(*[r.nodes for r in rules], indexing="ij", sparse=True)
    vals = np.asarray(g(*grids), dtype=float)
    return np.broadcast_to(vals, tuple(len(r) for r in rules)).copy()


def _check_square_integrable(values, rules, weight_tensors):
    """Numeric stand-in for the L2 precondition: finite values, finite int g^2."""
    if not np.isfinite(values).all():
        idx = tuple(int(i) for i in np.argwhere(~np.isfinite(values))[0])
        node = tuple(float(rules[d].nodes[idx[d]]) for d in range(len(rules)))
        raise ValueError(f"function is not finite at germ point {node}")
    sq = values**2
    for wt in reversed(weight_tensors):
        sq = sq @ wt
    if not np.isfinite(sq):
        raise ValueError("integral of g^2 is not finite; g is not square-integrable here")


def expand(g, germs, degrees, n_nodes=DEFAULT_NODES):
    """Build the truncated PCE of g over a RandomVector.

    g takes one argument per germ (vectorized over numpy arrays).  Returns a
    PceExpansion whose coefficient j is the inner product of g with the j-th
    product basis polynomial, in degree-matrix row order.
    """
    if isinstance(germs, Density):
        germs = RandomVector([germs])
    degrees = tuple(int(d) for d in degrees)
    if len(degrees) != len(germs):
        raise ValueError(f"{len(degrees)} degrees for {len(germs)} germs")
    D = DegreeMatrix(degrees)
    bases = [gram_schmidt(d, deg) for d, deg in zip(germs, degrees)]
    rules = [build_rule(d, n_nodes) for d in germs]

    values = _grid_values(g, rules)
    _check_square_integrable(values, rules, [r.weights for r in rules])

    # Per-dimension matrices of weighted basis values; contracting the value
    # tensor with each in turn yields the whole coefficient tensor at once.
    weighted = [
        rules[i].weights[:, None] * bases[i].eval_matrix(rules[i].nodes)
        for i in range(len(germs))
    ]
    coeff_tensor = values
    for mat in weighted:
        # move leading node axis to the back as a degree axis
        coeff_tensor = np.tensordot(coeff_tensor, mat, axes=([0], [0]))
    coeffs = coeff_tensor.reshape(-1)  # row-major == degree-matrix order

    if not np.isfinite(coeffs).all():
        j = int(np.argwhere(~np.isfinite(coeffs))[0])
        raise ValueError(f"coefficient for degree row {D[j]} is not finite")

    # residual se on the same grid, with the estimator evaluated through the
    # basis value matrices (exact and stable, unlike raw monomial form)
    approx = coeff_tensor
    for i, b in enumerate(bases):
        mat = b.eval_matrix(rules[i].nodes)  # (nodes, degree+1)
        approx = np.tensordot(approx, mat, axes=([0], [1]))
    resid_sq = (values - approx) ** 2
    for r in reversed(rules):
        resid_sq = resid_sq @ r.weights
    se = math.sqrt(max(float(resid_sq), 0.0))

    estimator = _assemble_estimator(bases, D, coeffs)
    return PceExpansion(germs, bases, D, coeffs, estimator, se)


def _assemble_estimator(bases, D, coeffs):
    """Sum of coefficient * product of univariate basis polynomials (raw x)."""
    k = D.k
    uni = [[p.to_multi(k, i) for p in bases[i].polys] for i in range(k)]
    total = MultiPoly(k)
    for j, row in enumerate(D):
        if coeffs[j] == 0.0:
            continue
        term = MultiPoly.constant(k, coeffs[j])
        for i, deg in enumerate(row):
            if deg:
                term = term * uni[i][deg]
        total = total + term
    return total


def error_se(expansion, g, n_nodes=DEFAULT_NODES):
    """Recompute sqrt(int (g - ghat)^2 dF) for an existing expansion."""
    rules = [build_rule(d, n_nodes) for d in expansion.germs]
    values = _grid_values(g, rules)
    shape = tuple(deg + 1 for deg in expansion.D.degrees)
    approx = expansion.coeffs.reshape(shape)
    for i, b in enumerate(expansion.bases):
        mat = b.eval_matrix(rules[i].nodes)
        approx = np.tensordot(approx, mat, axes=([0], [1]))
    resid_sq = (values - approx) ** 2
    for r in reversed(rules):
        resid_sq = resid_sq @ r.weights
    return math.sqrt(max(float(resid_sq), 0.0))


# -- degree-independent error bound under a truncated density --------------

BOUND_EXPANSION_DEGREE = 60


def error_bound(g, support, germ=None, n_nodes=2 * DEFAULT_NODES):
    """Upper bound on the squared f-norm approximation error of g.

    For a density f supported on [a, b] and a Normal reference germ with pdf
    phi, the bound is (2 / min(phi(a), phi(b)) + 1) * Var_phi(g(Z)).  The
    variance is taken from the tail of a degree-60 Hermite-style expansion
    (sum of squared non-constant coefficients), mirroring the identity
    Var_phi(g) = sum_{i>=1} c_i^2 that the bound's proof rests on.
    """
    a, b = float(support[0]), float(support[1])
    if not a < b:
        raise ValueError("need a < b")
    if germ is None:
        germ = Density.normal(0.0, 1.0)
    if germ.family != "Normal":
        raise ValueError("reference germ must be Normal")
    rule = build_rule(germ, n_nodes)
    vals = np.asarray(g(rule.nodes), dtype=float)
    if not np.isfinite(vals).all():
        raise ValueError("g is not finite on the reference germ support")

    # orthonormal Hermite values in the standardized variable, by recurrence
    mu, sigma = germ.params["mu"], germ.params["sigma"]
    u = (rule.nodes - mu) / sigma
    h_prev = np.zeros_like(u)
    h_cur = np.ones_like(u)
    var = 0.0
    for n in range(1, BOUND_EXPANSION_DEGREE + 1):
        h_next = (u * h_cur - math.sqrt(n - 1) * h_prev) / math.sqrt(n)
        h_prev, h_cur = h_cur, h_next
        c = float(np.dot(rule.weights, vals * h_cur))
        var += c * c

    edge = min(germ.pdf(a), germ.pdf(b))
    if edge <= 0:
        raise ValueError(f"support [{a}, {b}] reaches outside the reference germ's range")
    return (2.0 / edge + 1.0) * var


# -- iteration-conditioned estimator --------------------------------------


class LagrangeConditional:
    """Counter-indexed combination of per-iteration estimators.

    Holds polynomials P_1 .. P_N (one per iteration); the combined estimator
    sum_n P_n * prod_{j != n} (c - j) / (n - j) hits P_n exactly when the
    counter c equals n.  evaluate() uses the product form of the selector to
    keep that exactness; as_multipoly() expands everything for substitution
    into a loop program.
    """

    def __init__(self, polys):
        polys = list(polys)
        if not polys:
            raise ValueError("need at least one estimator (N >= 1)")
        arity = polys[0].arity
        if any(p.arity != arity for p in polys):
            raise ValueError("estimators must share arity")
        self.polys = polys
        self.arity = arity

    @property
    def N(self):
        return len(self.polys)

    def selector(self, n, c):
        """Value of the n-th Lagrange selector at counter value c."""
        out = 1.0
        for j in range(1, self.N + 1):
            if j != n:
                out *= (c - j) / (n - j)
        return out

    def evaluate(self, c, germ_values):
        total = 0.0
        for n, p in enumerate(self.polys, start=1):
            s = self.selector(n, c)
            if s != 0.0:
                total += s * p.evaluate(germ_values)
        return total

    def as_multipoly(self, counter_var, total_arity, germ_map):
        """Expanded polynomial over (counter, germs) in a larger variable space.

        germ_map[i] gives the index, in the target space, of estimator
        variable i; counter_var is the index of the loop counter.
        """
        combined = MultiPoly(total_arity)
        c = MultiPoly.variable(total_arity, counter_var)
        for n, p in enumerate(self.polys, start=1):
            sel = MultiPoly.constant(total_arity, 1.0)
            for j in range(1, self.N + 1):
                if j != n:
                    sel = sel * ((c - float(j)) * (1.0 / (n - j)))
            combined = combined + sel * p.extend_arity(total_arity, germ_map)
        return combined


def lagrange_conditional(estimators):
    """Combine per-iteration estimators; accepts PceExpansion or MultiPoly."""
    polys = [e.estimator if isinstance(e, PceExpansion) else e for e in estimators]
    return LagrangeConditional(polys)
