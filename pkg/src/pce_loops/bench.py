"""Benchmark registry: the loop models, the function-approximation table and
the worked expansion example, each with its published reference values.

Every runner returns plain dicts (JSON-ready) in which each computed number
sits next to its reference value and relative deviation.  Loop benchmarks
whose shipped source is a stand-in (the published listing was only available
as a picture) are reported as skipped instead of producing numbers.
"""

import math
import time
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .dist import Density, RandomVector
from .engine import polynomialize, propagate, simulate
from .lang import parse_file
from .pce import error_se, expand

__all__ = [
    "BENCHMARKS",
    "TABLE2_ROWS",
    "APPENDIX_B",
    "SUITES",
    "program_path",
    "is_placeholder",
    "run_benchmark",
    "run_appendix_b",
    "run_table2",
]


def program_path(filename):
    """Filesystem path of a bundled .ppl program."""
    return resources.files("pce_loops").joinpath("programs").joinpath(filename)


def is_placeholder(filename):
    with program_path(filename).open() as fh:
        return "PLACEHOLDER" in fh.read(512)


@dataclass(frozen=True)
class LoopBenchmark:
    key: str
    title: str
    program: str            # source used for exact moment propagation
    sim_program: str        # source the simulation reference was produced from
    target: str
    iterations: int
    degrees: tuple
    reference: dict         # degree -> published propagation value
    sim_reference: float
    tolerance: float        # |result - reference| allowed, absolute


BENCHMARKS = {
    b.key: b
    for b in [
        LoopBenchmark(
            key="taylor-rule",
            title="Taylor rule model",
            program="taylor_rule.ppl",
            sim_program="taylor_rule.ppl",
            target="i",
            iterations=20,
            degrees=(3, 5, 9),
            reference={3: 0.02278, 5: 0.02295, 9: 0.02300},
            sim_reference=0.02298,
            tolerance=2e-4,
        ),
        LoopBenchmark(
            key="turning-vehicle",
            title="Turning vehicle model",
            program="turning.ppl",
            sim_program="turning_sim.ppl",
            target="x",
            iterations=20,
            degrees=(3, 5, 9),
            reference={3: 14.44342, 5: 15.43985, 9: 15.60595},
            sim_reference=15.69792,
            tolerance=1e-3,
        ),
        LoopBenchmark(
            key="turning-vehicle-trunc",
            title="Turning vehicle model (trunc.)",
            program="turning_trunc.ppl",
            sim_program="turning_trunc_sim.ppl",
            target="x",
            iterations=20,
            degrees=(3, 5, 9),
            reference={3: 14.44342, 5: 15.43985, 9: 15.60595},
            sim_reference=15.69882,
            tolerance=1e-3,
        ),
        LoopBenchmark(
            key="rimless-wheel",
            title="Rimless wheel walker",
            program="rimless_wheel.ppl",
            sim_program="rimless_wheel.ppl",
            target="x",
            iterations=2000,
            degrees=(1, 2, 3),
            reference={1: 1.79159, 2: 1.79159, 3: 1.79159},
            sim_reference=1.79155,
            tolerance=1e-4,
        ),
        LoopBenchmark(
            key="robotic-arm",
            title="Robotic arm model",
            program="robotic_arm.ppl",
            sim_program="robotic_arm.ppl",
            target="x",
            iterations=100,
            degrees=(1, 2, 3),
            reference={1: 268.85236, 2: 268.85227, 3: 268.85227},
            sim_reference=268.853,
            tolerance=1e-2,
        ),
    ]
}

SUITES = tuple(BENCHMARKS) + ("appendix-b",)


def run_benchmark(key, samples=10**6, seed=0, n_nodes=64, with_sim=True,
                  degrees=None):
    """Propagate and simulate one loop benchmark against its references."""
    b = BENCHMARKS[key]
    if is_placeholder(b.program):
        return {
            "benchmark": b.title,
            "suite": key,
            "status": "SKIPPED",
            "reason": "transcription-needed: shipped program is a stand-in "
                      "for a listing only published as a figure",
            "rows": [],
        }
    prog = parse_file(str(program_path(b.program)))
    out = {
        "benchmark": b.title,
        "suite": key,
        "status": "ok",
        "target": b.target,
        "iterations": b.iterations,
        "sim_reference": b.sim_reference,
        "rows": [],
    }
    for deg in degrees or b.degrees:
        t0 = time.perf_counter()
        pp = polynomialize(prog, degree=deg, n_nodes=n_nodes)
        t1 = time.perf_counter()
        table = propagate(pp, [b.target], b.iterations)
        t2 = time.perf_counter()
        value = table.value(b.iterations, b.target)
        ref = b.reference.get(deg)
        out["rows"].append({
            "degree": deg,
            "result": value,
            "reference": ref,
            "rel_dev": None if ref is None else abs(value - ref) / abs(ref),
            "max_expansion_se": pp.max_se(),
            "expansion_ms": 1e3 * (t1 - t0),
            "propagation_ms": 1e3 * (t2 - t1),
        })
    if with_sim:
        sim_prog = parse_file(str(program_path(b.sim_program)))
        t0 = time.perf_counter()
        table = simulate(sim_prog, b.iterations, samples=samples, seed=seed,
                         targets=[b.target])
        value = table.value(b.iterations, b.target)
        stderr = table.value_stderr(b.iterations, b.target)
        out["sim"] = {
            "value": value,
            "stderr": stderr,
            "samples": samples,
            "seed": seed,
            "reference": b.sim_reference,
            "rel_dev": abs(value - b.sim_reference) / abs(b.sim_reference),
            "simulation_ms": 1e3 * (time.perf_counter() - t0),
        }
    return out


# -- worked expansion example ---------------------------------------------

APPENDIX_B = {
    "germs": (
        {"family": "TruncNormal", "mu": 2.0, "sigma": 0.1, "a": 1.0, "b": 3.0},
        {"family": "Uniform", "a": 1.0, "b": 2.0},
    ),
    "function": "log(x + y)",
    "degrees": (2, 2),
    "basis_x": ((1.0,), (-20.0, 10.0), (282.13561, -282.84271, 70.71067)),
    "basis_y": ((1.0,), (-5.19615, 3.4641), (29.06888, -40.24922, 13.41641)),
    "coeffs": (1.2489233, 0.0828874, -0.0030768, 0.0287925, -0.0023918,
               0.0001778, -0.0005907, 0.0000981, -0.0000109),
    "se": 0.000151895,
    "estimator_terms": {
        (2, 2): -0.01038, (2, 1): 0.05517, (2, 0): -0.10031,
        (1, 2): 0.06538, (1, 1): -0.37513, (1, 0): 0.86515,
        (0, 2): -0.13042, (0, 1): 0.93998, (0, 0): -0.59927,
    },
}


def run_appendix_b(n_nodes=64):
    """Recompute the worked log(x + y) example and compare every number."""
    t0 = time.perf_counter()
    germs = RandomVector([
        Density.trunc_normal(2.0, 0.1, 1.0, 3.0),
        Density.uniform(1.0, 2.0),
    ])
    e = expand(lambda x, y: np.log(x + y), germs, APPENDIX_B["degrees"],
               n_nodes=n_nodes)
    ms = 1e3 * (time.perf_counter() - t0)
    rows = []
    for j, (got, ref) in enumerate(zip(e.coeffs, APPENDIX_B["coeffs"])):
        rows.append({
            "j": j,
            "degree_row": list(e.D[j]),
            "coefficient": float(got),
            "reference": ref,
            "abs_dev": abs(float(got) - ref),
        })
    return {
        "benchmark": "worked expansion example",
        "suite": "appendix-b",
        "status": "ok",
        "function": APPENDIX_B["function"],
        "rows": rows,
        "se": {"value": e.se, "reference": APPENDIX_B["se"],
               "rel_dev": abs(e.se - APPENDIX_B["se"]) / APPENDIX_B["se"]},
        "estimator": e.estimator.render(names=("x", "y")),
        "expansion_ms": ms,
    }


# -- function-approximation table ------------------------------------------

@dataclass(frozen=True)
class Table2Row:
    label: str
    fn: object
    germs: tuple
    degrees: tuple
    reference: tuple
    tolerance: float        # relative, on the reproduced error
    note: str = ""


def _g1(x1, x2):
    return 0.3 * np.exp(-x1) + (0.3 - 0.3**2 / 2) * np.exp(x2 - x1)


def _g2(x1, x2):
    return 0.3 * np.exp(x1 - x2) + 0.6 * np.exp(-x2)


def _g3(x1, x2):
    return np.exp(x1 * x2)


def _g4(x1, x2, x3):
    return 0.3 * np.exp(x1 - x2) + 0.6 * np.exp(x2 - x3) + 0.1 * np.exp(x3 - x1)


def _g5(x1):
    return 0.3 * np.cos(x1) + 0.7 * np.sin(x1)


TABLE2_ROWS = (
    Table2Row(
        label="0.3*exp(-x1) + 0.255*exp(x2 - x1)",
        fn=_g1,
        germs=(("normal", 0.0, 1.0), ("normal", 2.0, 0.1)),
        degrees=(1, 2, 3, 4, 5),
        reference=(3.076846, 1.696078, 0.825399, 0.363869, 0.270419),
        tolerance=0.10,
        note="published degree-5 error is not reproducible from the stated "
             "truncation; the recomputed L2 error is 0.145896",
    ),
    Table2Row(
        label="0.3*exp(x1 - x2) + 0.6*exp(-x2)",
        fn=_g2,
        germs=(("trunc_normal", 4.0, 1.0, 3.0, 5.0),
               ("trunc_normal", 2.0, 0.1, 0.0, 4.0)),
        degrees=(1, 2, 3, 4, 5),
        reference=(0.343870, 0.057076, 0.007112, 0.000709, 0.000059),
        tolerance=0.05,
    ),
    Table2Row(
        label="exp(x1*x2)",
        fn=_g3,
        germs=(("trunc_normal", 4.0, 1.0, 3.0, 5.0),
               ("trunc_gamma", 1.0, 3.0, 0.5, 1.0)),
        degrees=(1, 2, 3, 4, 5),
        reference=(5.745048, 1.035060, 0.142816, 0.016118, 0.001543),
        tolerance=0.05,
    ),
    Table2Row(
        label="0.3*exp(x1 - x2) + 0.6*exp(x2 - x3) + 0.1*exp(x3 - x1)",
        fn=_g4,
        germs=(("trunc_normal", 4.0, 1.0, 3.0, 5.0),
               ("trunc_gamma", 1.0, 3.0, 0.5, 1.0),
               ("uniform", 4.0, 8.0)),
        degrees=(1, 2, 3),
        reference=(1.637981, 0.303096, 0.066869),
        tolerance=0.05,
    ),
    Table2Row(
        label="0.3*cos(x1) + 0.7*sin(x1)",
        fn=_g5,
        germs=(("normal", 0.0, 1.0),),
        degrees=(1, 2, 3, 4, 5),
        reference=(0.222627, 0.181681, 0.054450, 0.039815, 0.009115),
        tolerance=0.10,
    ),
)


def _make_density(spec):
    kind, *args = spec
    return getattr(Density, kind)(*args)


def run_table2(n_nodes=64):
    """Recompute every (degree, error) cell of the approximation table."""
    report = {"suite": "table2", "status": "ok", "rows": []}
    for i, row in enumerate(TABLE2_ROWS, start=1):
        germs = RandomVector([_make_density(s) for s in row.germs])
        for deg, ref in zip(row.degrees, row.reference):
            t0 = time.perf_counter()
            e = expand(row.fn, germs, (deg,) * len(germs), n_nodes=n_nodes)
            err = error_se(e, row.fn, n_nodes=max(n_nodes, 96))
            report["rows"].append({
                "row": i,
                "function": row.label,
                "degree": deg,
                "n_coefficients": (deg + 1) ** len(germs),
                "error": err,
                "reference": ref,
                "ratio": err / ref,
                "expansion_ms": 1e3 * (time.perf_counter() - t0),
            })
    return report
