"""Loop transformation and moment computation.

polynomialize replaces every sin/cos/exp/log call in a loop by its PCE
polynomial (germ substituted by the call argument), close_monomials finds
the finite monomial set a target's expectation recursion lives on, and
propagate turns one loop iteration into a linear map on that set, giving
exact per-iteration moments.  simulate runs the original program forward
under its true semantics as the independent Monte Carlo oracle.

Sequential update semantics throughout: each update sees the values written
by the updates above it in the body.  Expectations of a monomial after one
iteration are obtained by substituting updates in reverse body order and
integrating out each fresh draw with the raw moments of its distribution
(draws are independent of everything sampled before them).
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .dist import Density
from .lang import Assign, Call, BinOp, Const, DistDraw, Pow, Var, eval_expr, validate_conditions
from .pce import expand
from .poly import MultiPoly
from .quad import DEFAULT_NODES

__all__ = [
    "PolynomializedProgram",
    "MomentTable",
    "polynomialize",
    "close_monomials",
    "propagate",
    "simulate",
    "lagrange_schedule",
    "parse_monomial",
]

CLOSURE_LIMIT = 10**5
# Monomials past this total degree mean the one-step recursion is feeding on
# ever-higher powers (e.g. a squared self-update); refusing early keeps the
# failure cheap, since substitution cost grows with the exponent.
DEGREE_LIMIT = 200
THREADS_ENV = "PCE_LOOPS_THREADS"

# Reference germ used for accumulating-argument call sites when the caller
# does not configure one.
DEFAULT_REFERENCE_GERM = ("Normal", 0.0, 1.0)


class MomentTable:
    """Per-iteration expectations of a closed set of monomials.

    vars is the ordered state-variable list; monomials are exponent tuples
    over vars; values has shape (iterations + 1, len(monomials)) with row n
    holding the expectations after n iterations.  stderr is None for exact
    propagation and the Monte Carlo standard errors for simulation.
    """

    def __init__(self, variables, monomials, values, stderr=None, targets=None):
        self.vars = list(variables)
        self.monomials = [tuple(m) for m in monomials]
        self.values = np.asarray(values, dtype=float)
        self.stderr = None if stderr is None else np.asarray(stderr, dtype=float)
        self.targets = [tuple(t) for t in (targets if targets is not None else monomials)]
        self._index = {m: i for i, m in enumerate(self.monomials)}

    @property
    def iterations(self):
        return self.values.shape[0] - 1

    def column(self, monomial):
        m = tuple(monomial) if not isinstance(monomial, str) else parse_monomial(monomial, self.vars)
        if m not in self._index:
            raise KeyError(f"monomial {format_monomial(m, self.vars)} not tracked")
        return self._index[m]

    def value(self, n, monomial):
        return float(self.values[n, self.column(monomial)])

    def value_stderr(self, n, monomial):
        if self.stderr is None:
            return 0.0
        return float(self.stderr[n, self.column(monomial)])

    def variance(self, n, var):
        """Var(var) at iteration n; needs both first and second moments."""
        i = self.vars.index(var)
        first = [0] * len(self.vars)
        second = list(first)
        first[i], second[i] = 1, 2
        v = self.value(n, second) - self.value(n, first) ** 2
        if v < -1e-9:
            raise ArithmeticError(f"negative variance {v:.3e} for {var} at n={n}")
        return max(v, 0.0)

    def rows(self, monomial=None):
        """(n, name, value[, stderr]) tuples for reporting."""
        monos = [tuple(monomial)] if monomial else self.targets
        out = []
        for m in monos:
            c = self.column(m)
            name = format_monomial(m, self.vars)
            for n in range(self.values.shape[0]):
                row = (n, name, float(self.values[n, c]))
                if self.stderr is not None:
                    row += (float(self.stderr[n, c]),)
                out.append(row)
        return out


def format_monomial(m, variables):
    if not any(m):
        return "1"
    parts = []
    for v, k in zip(variables, m):
        if k == 1:
            parts.append(v)
        elif k > 1:
            parts.append(f"{v}^{k}")
    return "*".join(parts)


def parse_monomial(text, variables):
    """Parse "x", "x^2" or "x^2*y" into an exponent tuple over variables."""
    m = [0] * len(variables)
    text = text.strip()
    if text in ("1", ""):
        return tuple(m)
    for factor in text.split("*"):
        name, _, power = factor.strip().partition("^")
        name = name.strip()
        if name not in variables:
            raise ValueError(f"unknown variable {name!r} (have {', '.join(variables)})")
        m[variables.index(name)] += int(power) if power else 1
    return tuple(m)


class PolynomializedProgram:
    """A loop whose updates are polynomials or draws, plus provenance.

    Variable space for body polynomials: state variables first, then the
    per-iteration draw variables.  provenance holds one record per replaced
    call site with the expansion degree, germ model, coefficients and se.
    """

    def __init__(self, program, state_vars, draw_vars, body, provenance):
        self.program = program
        self.state_vars = list(state_vars)
        self.draw_vars = list(draw_vars)
        self.all_vars = self.state_vars + self.draw_vars
        self.var_index = {v: i for i, v in enumerate(self.all_vars)}
        self.body = list(body)  # ("draw", var, Density) | ("assign", var, MultiPoly)
        self.provenance = list(provenance)

    @property
    def name(self):
        return self.program.name

    def max_se(self):
        return max((p["se"] for p in self.provenance), default=0.0)

    def __repr__(self):
        return (
            f"PolynomializedProgram({self.name!r}, vars={self.state_vars}, "
            f"sites={len(self.provenance)})"
        )


def _affine_of_draw(expr, draws):
    """If expr == a*w + b for one draw w (a, b constant), return (w, a, b)."""

    def walk(e):
        # returns (var or None, slope, intercept) or None if not affine
        if isinstance(e, Const):
            return (None, 0.0, e.value)
        if isinstance(e, Var):
            if e.name in draws:
                return (e.name, 1.0, 0.0)
            return None
        if isinstance(e, BinOp):
            l, r = walk(e.left), walk(e.right)
            if l is None or r is None:
                return None
            lv, la, lb = l
            rv, ra, rb = r
            if e.op in "+-":
                sign = 1.0 if e.op == "+" else -1.0
                if lv is not None and rv is not None and lv != rv:
                    return None
                var = lv if lv is not None else rv
                return (var, la + sign * ra, lb + sign * rb)
            # product: at most one side may carry the draw
            if lv is not None and rv is not None:
                return None
            if lv is None:
                return (rv, lb * ra, lb * rb)
            return (lv, la * rb, lb * rb)
        if isinstance(e, Pow):
            inner = walk(e.base)
            if inner is None or inner[0] is not None:
                return None
            return (None, 0.0, inner[2] ** e.exponent)
        return None

    out = walk(expr)
    if out is None or out[0] is None or out[1] == 0.0:
        return None
    return out


def _shifted_density(d, a, b):
    """Density of a*W + b for W Normal or Uniform (else None)."""
    p = d.params
    if d.family == "Normal":
        return Density.normal(a * p["mu"] + b, abs(a) * p["sigma"])
    if d.family == "Uniform":
        lo, hi = a * p["a"] + b, a * p["b"] + b
        return Density.uniform(min(lo, hi), max(lo, hi))
    return None


def polynomialize(program, degree=5, germ=None, per_site=None, n_nodes=DEFAULT_NODES,
                  _site_overrides=None):
    """Replace non-polynomial calls with PCE polynomials.

    degree and germ set the default expansion config; per_site maps a call
    site index (textual order, as listed by validate_conditions) to a dict
    with optional "degree" and "germ" entries.  Stable sites infer their
    germ from the argument's draw when possible; accumulating sites fall
    back to the standard normal reference germ.
    """
    report = validate_conditions(program)
    sites = report["call_sites"]
    per_site = per_site or {}
    overrides = _site_overrides or {}
    draw_density = {u.var: u.density for u in program.body if isinstance(u, DistDraw)}

    state_vars = [v for v in program.state_vars if v not in draw_density]
    draw_vars = program.draw_vars
    all_vars = state_vars + draw_vars
    index = {v: i for i, v in enumerate(all_vars)}
    arity = len(all_vars)

    cache = {}
    provenance = []
    site_counter = [0]

    def site_config(site):
        cfg = per_site.get(site_counter[0], {})
        deg = int(cfg.get("degree", degree))
        g = cfg.get("germ", germ)
        if g is None:
            if site["iteration_stable"]:
                g = _infer_stable_germ(site, draw_density)
                if g is None:
                    raise ValueError(
                        f"call site {site_counter[0]} ({site['function']}({site['argument']})): "
                        "cannot infer a germ from the argument; configure one per site"
                    )
            else:
                g = Density.normal(*DEFAULT_REFERENCE_GERM[1:])
        return deg, g

    def replace_call(call, arg_poly):
        site = sites[site_counter[0]]
        if site_counter[0] in overrides:
            poly = overrides[site_counter[0]](arg_poly)
            site_counter[0] += 1
            return poly
        deg, g = site_config(site)
        key = (call.fn, g.family, tuple(sorted(g.params.items())), deg, n_nodes)
        if key not in cache:
            fn = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "log": np.log}[call.fn]
            cache[key] = expand(fn, g, (deg,), n_nodes=n_nodes)
        exp_obj = cache[key]
        provenance.append({
            "site": site_counter[0],
            "update": site["update"],
            "function": call.fn,
            "argument": site["argument"],
            "iteration_stable": site["iteration_stable"],
            "germ": g.to_dict(),
            "degree": deg,
            "coeffs": [float(c) for c in exp_obj.coeffs],
            "se": exp_obj.se,
        })
        site_counter[0] += 1
        # Horner of the univariate estimator in the argument polynomial
        uni = _estimator_unipoly(exp_obj)
        acc = MultiPoly.constant(arity, uni[-1])
        for c in reversed(uni[:-1]):
            acc = acc * arg_poly + MultiPoly.constant(arity, c)
        return acc

    def to_poly(e):
        if isinstance(e, Const):
            return MultiPoly.constant(arity, e.value)
        if isinstance(e, Var):
            return MultiPoly.variable(arity, index[e.name])
        if isinstance(e, BinOp):
            a, b = to_poly(e.left), to_poly(e.right)
            return a + b if e.op == "+" else a - b if e.op == "-" else a * b
        if isinstance(e, Pow):
            return to_poly(e.base) ** e.exponent
        if isinstance(e, Call):
            return replace_call(e, to_poly(e.arg))
        raise TypeError(f"not an expression node: {e!r}")

    body = []
    for u in program.body:
        if isinstance(u, DistDraw):
            body.append(("draw", u.var, u.density))
        else:
            body.append(("assign", u.var, to_poly(u.expr)))
    return PolynomializedProgram(program, state_vars, draw_vars, body, provenance)


def _infer_stable_germ(site, draw_density):
    """Germ for a stable site: the argument's own distribution, when it is a
    draw variable or affine in a single Normal/Uniform draw."""
    # reparse the rendered argument instead of threading AST through the
    # report: the report is JSON-friendly, so recover the node from the site
    from .lang import _Parser

    parser = _Parser(site["argument"])
    arg = parser.expr()
    if isinstance(arg, Var) and arg.name in draw_density:
        return draw_density[arg.name]
    aff = _affine_of_draw(arg, set(draw_density))
    if aff is not None:
        w, a, b = aff
        return _shifted_density(draw_density[w], a, b)
    return None


def _estimator_unipoly(exp_obj):
    """Dense raw-variable coefficients of a univariate expansion estimator."""
    est = exp_obj.estimator
    deg = est.degree_in(0) if not est.is_zero() else 0
    return [est.coefficient((k,)) for k in range(deg + 1)]


def _integrate_out(poly, var, density, moment_cache):
    """E over one fresh draw: replace var^k by its raw moment."""
    if poly.degree_in(var) == 0:
        return poly
    out = {}
    for e, c in poly.terms.items():
        k = e[var]
        if k:
            if k not in moment_cache:
                moment_cache[k] = density.raw_moment(k)
            c = c * moment_cache[k]
            e = e[:var] + (0,) + e[var + 1 :]
        out[e] = out.get(e, 0.0) + c
    return MultiPoly(poly.arity, out)._cleaned()


def one_step_expectation(pp, monomial):
    """Expectation of a state monomial after one iteration, as a polynomial
    in the previous iteration's state monomials."""
    arity = len(pp.all_vars)
    exp = list(monomial) + [0] * len(pp.draw_vars)
    poly = MultiPoly(arity, {tuple(exp): 1.0})
    caches = {}
    for kind, var, payload in reversed(pp.body):
        idx = pp.var_index[var]
        if kind == "assign":
            if poly.degree_in(idx):
                poly = poly.substitute(idx, payload)
        else:
            poly = _integrate_out(poly, idx, payload, caches.setdefault(var, {}))
    for d in pp.draw_vars:
        if poly.degree_in(pp.var_index[d]):
            raise ValueError(
                f"draw variable {d!r} survives the iteration; "
                "draws must come before every use in the body"
            )
    return poly


def _state_monomials(pp, poly):
    k = len(pp.state_vars)
    return [e[:k] for e in poly.terms]


def close_monomials(pp, targets):
    """Smallest monomial set containing the targets (plus the unit monomial
    and the targets' first powers) closed under one-step expectation."""
    k = len(pp.state_vars)
    seeds = {(0,) * k}
    for t in targets:
        t = tuple(t)
        if len(t) != k:
            raise ValueError(f"target {t} does not match state variables {pp.state_vars}")
        seeds.add(t)
        for i, p in enumerate(t):
            if p:
                unit = [0] * k
                unit[i] = 1
                seeds.add(tuple(unit))
    todo = list(seeds)
    closure = set(seeds)
    step = {}
    while todo:
        m = todo.pop()
        poly = one_step_expectation(pp, m)
        step[m] = poly
        for nm in _state_monomials(pp, poly):
            if nm not in closure:
                if sum(nm) > DEGREE_LIMIT:
                    raise ValueError(
                        f"monomial degree {sum(nm)} exceeds {DEGREE_LIMIT}; "
                        "the loop is not moment-computable in this form"
                    )
                closure.add(nm)
                todo.append(nm)
                if len(closure) > CLOSURE_LIMIT:
                    raise ValueError(
                        f"monomial closure exceeds {CLOSURE_LIMIT}; "
                        "the loop is not moment-computable in this form"
                    )
    return closure, step


def _initial_moments(pp, monomials):
    """E[m] at n=0 from the independent initial values (missing inits are 0)."""
    init_value = {i.var: i.value for i in pp.program.inits}
    k = len(pp.state_vars)
    per_var = {}
    out = np.zeros(len(monomials))
    for r, m in enumerate(monomials):
        acc = 1.0
        for i in range(k):
            p = m[i]
            if not p:
                continue
            v = pp.state_vars[i]
            key = (v, p)
            if key not in per_var:
                val = init_value.get(v, 0.0)
                if isinstance(val, Density):
                    per_var[key] = val.raw_moment(p)
                else:
                    per_var[key] = float(val) ** p
            acc *= per_var[key]
        out[r] = acc
    return out


def propagate(pp, targets, iterations):
    """Exact per-iteration expectations of the target monomials.

    pp may be a PolynomializedProgram or a call-free LoopProgram.  targets
    are monomial strings ("x", "x^2*y") or exponent tuples over the state
    variables.
    """
    if not isinstance(pp, PolynomializedProgram):
        pp = polynomialize(pp)
    tgt = [
        parse_monomial(t, pp.state_vars) if isinstance(t, str) else tuple(t)
        for t in targets
    ]
    closure, step = close_monomials(pp, tgt)
    order = sorted(closure)
    col = {m: i for i, m in enumerate(order)}
    k = len(pp.state_vars)

    rows = []
    for m in order:
        poly = step[m]
        rows.append([(col[e[:k]], c) for e, c in poly.terms.items()])

    values = np.empty((iterations + 1, len(order)))
    values[0] = _initial_moments(pp, order)
    cur = values[0]
    for n in range(1, iterations + 1):
        nxt = np.empty_like(cur)
        for r, entries in enumerate(rows):
            acc = 0.0
            for c, w in entries:
                acc += w * cur[c]
            nxt[r] = acc
        values[n] = nxt
        cur = nxt
    unit = col[(0,) * k]
    if abs(values[:, unit] - 1.0).max() > 1e-9:
        raise ArithmeticError("E[1] drifted away from 1 during propagation")
    return MomentTable(pp.state_vars, order, values, targets=tgt)


# -- Monte Carlo oracle ----------------------------------------------------


def _thread_count(requested=None):
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(4, os.cpu_count() or 1)


def simulate(program, iterations, samples=10**6, seed=0, targets=None,
             chunk_size=200_000, threads=None):
    """Run the loop under its original semantics and record empirical moments.

    Reproducible for a fixed seed regardless of thread count: sample chunks
    get independent child seeds and partial sums merge in chunk order.
    """
    state_vars = [v for v in program.state_vars if v not in set(program.draw_vars)]
    if targets is None:
        tgt = []
        for i in range(len(state_vars)):
            m = [0] * len(state_vars)
            m[i] = 1
            tgt.append(tuple(m))
    else:
        tgt = [
            parse_monomial(t, state_vars) if isinstance(t, str) else tuple(t)
            for t in targets
        ]
    init_value = {i.var: i.value for i in program.inits}

    def run_chunk(args):
        n_samples, child_seed = args
        rng = np.random.default_rng(child_seed)
        env = {}
        for v in state_vars:
            val = init_value.get(v, 0.0)
            if isinstance(val, Density):
                env[v] = val.sample(rng, n_samples)
            else:
                env[v] = np.full(n_samples, float(val))
        s1 = np.zeros((iterations + 1, len(tgt)))
        s2 = np.zeros_like(s1)

        def record(n):
            for j, m in enumerate(tgt):
                vals = np.ones(n_samples)
                for i, p in enumerate(m):
                    if p:
                        vals = vals * env[state_vars[i]] ** p
                s1[n, j] = vals.sum()
                s2[n, j] = np.square(vals).sum()

        record(0)
        for n in range(1, iterations + 1):
            for u in program.body:
                if isinstance(u, DistDraw):
                    env[u.var] = u.density.sample(rng, n_samples)
                else:
                    val = np.asarray(eval_expr(u.expr, env), dtype=float)
                    if val.ndim == 0:
                        val = np.full(n_samples, float(val))
                    env[u.var] = val
            record(n)
        return s1, s2

    sizes = [chunk_size] * (samples // chunk_size)
    if samples % chunk_size:
        sizes.append(samples % chunk_size)
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = list(zip(sizes, children))
    workers = _thread_count(threads)
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run_chunk, jobs))
    else:
        parts = [run_chunk(j) for j in jobs]

    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    mean = s1 / samples
    var = np.maximum(s2 / samples - mean**2, 0.0)
    stderr = np.sqrt(var / samples)
    return MomentTable(state_vars, tgt, mean, stderr=stderr, targets=tgt)


def lagrange_schedule(program, site_index, iterations, germs, degree=5,
                      counter="n_iter", n_nodes=DEFAULT_NODES):
    """Replace one accumulating call site by a counter-conditioned estimator.

    germs supplies the argument's distribution model at each iteration
    n = 1..iterations; the site's function is expanded against each, and the
    per-iteration polynomials are stitched together with Lagrange selectors
    in a fresh counter variable that the loop increments first.
    """
    if iterations < 1:
        raise ValueError("need at least one iteration (N >= 1)")
    germs = list(germs)
    if len(germs) != iterations:
        raise ValueError(f"need {iterations} germ models, got {len(germs)}")
    report = validate_conditions(program)
    if site_index >= len(report["call_sites"]):
        raise ValueError(f"no call site {site_index}")
    site = report["call_sites"][site_index]
    fn = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "log": np.log}[site["function"]]
    while counter in program.state_vars or counter in program.draw_vars:
        counter = counter + "_"

    from .lang import Init, LoopProgram

    base = LoopProgram(
        program.inits + [Init(counter, 0.0)],
        [Assign(counter, BinOp("+", Var(counter), Const(1.0)))] + program.body,
        name=program.name,
    )
    # site indices shift by any calls in the prepended update: none added
    expansions = [expand(fn, g, (degree,), n_nodes=n_nodes) for g in germs]
    unis = [_estimator_unipoly(e) for e in expansions]

    def override(arg_poly):
        arity = arg_poly.arity
        # counter is a state variable of `base`; find its polynomial index
        state_vars = [v for v in base.state_vars if v not in set(base.draw_vars)]
        c_poly = MultiPoly.variable(arity, state_vars.index(counter))
        total = MultiPoly(arity)
        for n in range(1, iterations + 1):
            sel = MultiPoly.constant(arity, 1.0)
            for j in range(1, iterations + 1):
                if j != n:
                    sel = sel * ((c_poly - float(j)) * (1.0 / (n - j)))
            horner = MultiPoly.constant(arity, unis[n - 1][-1])
            for coef in reversed(unis[n - 1][:-1]):
                horner = horner * arg_poly + MultiPoly.constant(arity, coef)
            total = total + sel * horner
        return total

    pp = polynomialize(base, degree=degree, n_nodes=n_nodes,
                       _site_overrides={site_index: override})
    for n, e in enumerate(expansions, start=1):
        pp.provenance.append({
            "site": site_index,
            "update": site["update"],
            "function": site["function"],
            "argument": site["argument"],
            "iteration_stable": False,
            "scheme": "lagrange",
            "iteration": n,
            "germ": germs[n - 1].to_dict(),
            "degree": degree,
            "coeffs": [float(c) for c in e.coeffs],
            "se": e.se,
        })
    return pp
