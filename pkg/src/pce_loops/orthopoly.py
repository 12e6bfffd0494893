"""Orthonormal polynomial bases for arbitrary densities via Gram-Schmidt.

The basis for a density F is the sequence p_0, p_1, ... with
E[p_i(X) p_j(X)] = delta_ij and deg p_i = i.  Construction runs modified
Gram-Schmidt (plus one re-orthogonalization sweep) on monomials of the
standardized variable u = (x - mean) / std; working in u keeps the monomial
Gram matrix well conditioned for narrow densities, where raw-x monomials at
degree 10 would cancel to nothing in double precision.  The raw-x
coefficient form is recovered by the affine back-substitution and is what
gets printed and assembled into estimators.
"""

import numpy as np

from .poly import UniPoly
from .quad import DEFAULT_NODES, build_rule

__all__ = ["OrthonormalBasis", "gram_schmidt", "GramSchmidtError"]

# Construction fails rather than returning a basis whose Gram matrix is off
# by more than this.
RESIDUAL_LIMIT = 1e-6


class GramSchmidtError(RuntimeError):
    pass


class OrthonormalBasis:
    """Orthonormal polynomials of one density, index = degree.

    polys holds the raw-x UniPoly forms (display, assembly); evaluation goes
    through the standardized-variable forms, which stay stable at high
    degree.
    """

    def __init__(self, density, polys, u_polys, mean, std, gram_residual):
        self.density = density
        self.polys = polys
        self.u_polys = u_polys
        self.mean = mean
        self.std = std
        self.gram_residual = gram_residual

    @property
    def max_degree(self):
        return len(self.polys) - 1

    def evaluate(self, degree, x):
        """Value of basis polynomial `degree` at x (vectorized)."""
        u = (np.asarray(x, dtype=float) - self.mean) / self.std
        return self.u_polys[degree](u)

    def eval_matrix(self, x):
        """Matrix of basis values, shape (len(x), max_degree + 1)."""
        x = np.asarray(x, dtype=float)
        u = (x - self.mean) / self.std
        return np.column_stack([p(u) for p in self.u_polys])

    def __len__(self):
        return len(self.polys)

    def __repr__(self):
        return (
            f"OrthonormalBasis({self.density!r}, degree={self.max_degree}, "
            f"gram_residual={self.gram_residual:.2e})"
        )


def gram_schmidt(density, max_degree, n_nodes=None):
    """Build the orthonormal basis of `density` up to `max_degree`.

    Inner products use a Gauss rule with twice the default node count (the
    re-orthogonalization sweep compounds quadrature error otherwise).
    Raises GramSchmidtError if the final Gram residual exceeds 1e-6.
    """
    if max_degree < 0:
        raise ValueError("max_degree must be >= 0")
    if n_nodes is None:
        n_nodes = max(2 * DEFAULT_NODES, 2 * max_degree + 8)
    rule = build_rule(density, n_nodes)
    m = density.mean()
    s = density.std()
    if s <= 0:
        raise GramSchmidtError("density has zero variance; no basis beyond degree 0")

    u = (rule.nodes - m) / s
    w = rule.weights
    d1 = max_degree + 1

    # Column j holds u^j on the nodes; coef[j] tracks the same object in the
    # u-monomial basis so we read polynomial coefficients off at the end.
    vals = np.vander(u, d1, increasing=True).T.copy()
    coef = np.eye(d1)

    for j in range(d1):
        for _ in range(2):  # MGS sweep + one re-orthogonalization
            for i in range(j):
                r = np.dot(w, vals[j] * vals[i])
                vals[j] -= r * vals[i]
                coef[j] -= r * coef[i]
        norm = np.sqrt(np.dot(w, vals[j] ** 2))
        if norm <= 0 or not np.isfinite(norm):
            raise GramSchmidtError(
                f"degree {j} collapsed; lower max_degree or raise the node count"
            )
        vals[j] /= norm
        coef[j] /= norm
        if coef[j, j] < 0:  # printed convention: positive leading coefficient
            vals[j] = -vals[j]
            coef[j] = -coef[j]

    gram = (vals * w) @ vals.T
    residual = float(np.max(np.abs(gram - np.eye(d1))))
    if residual > RESIDUAL_LIMIT:
        raise GramSchmidtError(
            f"orthogonality lost (residual {residual:.2e} > {RESIDUAL_LIMIT:g}); "
            "raise the quadrature order or lower the degree"
        )

    u_polys = [UniPoly(coef[j, : j + 1]) for j in range(d1)]
    # p(u) with u = (x - m)/s, i.e. compose with (1/s) x + (-m/s)
    polys = [p.compose_affine(1.0 / s, -m / s) for p in u_polys]
    return OrthonormalBasis(density, polys, u_polys, m, s, residual)
