"""Scenario configs and the check registry driven by the command line.

A config is a JSON object with either a ``scenarios`` list or the fields of a
single scenario:

    {"name": "kato_pair_n1",
     "f": {"a": 1.0, "c": 0.0, "atoms": [[0, 1]], "density": null},
     "g": {...},                      # or {"file": "g.csv", "boundary_limits": [lo, hi]}
     "grid": {"L": 20, "N": 512},
     "route": "kernel",               # kernel | operator | weyl
     "seed": 0,
     "perturbation": {"family": "bump", "eps": 0.3},   # optional
     "checks": [{"name": "positivity_spectrum", "tol": 1e-8, "expect": {"psd_verdict": true}}]}

Each check returns a JSON-ready dict with a ``pass`` field.
"""

import hashlib
import json
import math
import os
import warnings
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import analysis, funcspace, kernel, opmatrix
from .funcspace import KatoFunction, SampledFunction
from .grid import GridSpec

ROUTES = ("kernel", "operator", "weyl")


class ConfigError(ValueError):
    """Malformed configuration (maps to exit code 2)."""


class ConfigIOError(OSError):
    """Referenced file missing or unreadable (maps to exit code 3)."""


@dataclass
class Scenario:
    name: str
    f_spec: dict | None
    g_spec: dict | None
    grid: GridSpec
    route: str = "kernel"
    checks: list = field(default_factory=list)
    seed: int = 0
    perturbation: dict | None = None
    base_dir: str = "."
    raw: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def functions(self):
        """(f, g) after loading files and applying the perturbation."""
        f = _load_fn(self.f_spec, self.base_dir) if self.f_spec is not None else None
        g = _load_fn(self.g_spec, self.base_dir) if self.g_spec is not None else None
        if self.perturbation:
            p = self.perturbation
            f, g = analysis.perturbed_pair(f, g, p["family"], float(p["eps"]), self.grid)
        return f, g


def _load_fn(spec, base_dir):
    try:
        return funcspace.load_function(spec, base_dir)
    except FileNotFoundError as exc:
        raise ConfigIOError(str(exc)) from exc
    except OSError as exc:
        raise ConfigIOError(str(exc)) from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad function spec: {exc}") from exc


# -- check implementations ---------------------------------------------------------

def _params(spec):
    return spec.get("params", {})


def _expect(spec, key, default):
    return spec.get("expect", {}).get(key, default)


def _route_matrix(sc, f, g, route):
    if route == "kernel":
        return kernel.nystrom_assemble(f, g, sc.grid)
    if route == "operator":
        C = opmatrix.operator_commutator(f, g, sc.grid)
        return opmatrix.windowed(C)
    if route == "weyl":
        return opmatrix.windowed(opmatrix.weyl_representation(f, g, sc.grid))
    raise ConfigError(f"unknown route {route!r}")


def check_positivity(sc, f, g, spec, ctx):
    tol = spec.get("tol", 1e-8)
    route = spec.get("route", sc.route)
    M = _route_matrix(sc, f, g, route)
    rep = analysis.positivity_spectrum(M, tol, top=spec.get("top", 8), route=route)
    ctx["eigenvalues"] = np.linalg.eigvalsh(M.entries)
    ctx["matrix"] = M.entries
    want = _expect(spec, "psd_verdict", True)
    ok = rep.psd_verdict == want
    rank_want = _expect(spec, "numerical_rank", None)
    if rank_want is not None:
        ok = ok and rep.numerical_rank == rank_want
    out = rep.to_json()
    out["relative_min"] = rep.relative_min
    out["expected_psd_verdict"] = want
    return ok, out


def check_trace(sc, f, g, spec, ctx):
    tol = spec.get("tol", 1e-6)
    comp, exp, rel = analysis.trace_check(f, g, sc.grid)
    return rel <= tol, {"computed": comp, "expected": exp, "rel_error": rel}


def check_rank_n(sc, f, g, spec, ctx):
    tol = spec.get("tol", 1e-10)
    p = _params(spec)
    n, beta = int(p.get("n", 1)), float(p.get("beta", 1.0))
    fr, gr = kernel.rank_n_pair(beta, n)
    km = kernel.nystrom_assemble(fr, gr, sc.grid, auto_double=False)
    x = sc.grid.nodes
    closed = kernel.tanh_rank_n_kernel(fr.a_hat, gr.a_hat, n, x[:, None], x[None, :])
    K = km.kernel_values()
    rel = float(np.max(np.abs(K - closed)) / np.max(np.abs(closed)))
    sv = np.linalg.svd(km.entries, compute_uv=False)
    ratio = float(sv[n] / sv[0])
    lam = np.linalg.eigvalsh(km.entries)
    psd = bool(lam[0] >= -1e-8 * lam[-1])
    ok = rel <= tol and ratio <= spec.get("sv_tol", 1e-8) and psd == (n == 1)
    return ok, {"n": n, "beta": beta, "entrywise_rel": rel, "sv_ratio": ratio, "min_eigenvalue": float(lam[0]), "psd": psd}


def check_det2x2(sc, f, g, spec, ctx):
    tol = spec.get("tol", 1e-12)
    p = _params(spec)
    n, beta = int(p.get("n", 2)), float(p.get("beta", 1.0))
    x1, x2 = float(p.get("x1", 1.0)), float(p.get("x2", 0.0))
    fr, gr = kernel.rank_n_pair(beta, n)
    det = kernel.det2x2_tanh(fr.a_hat, gr.a_hat, n, x1, x2)
    pts = np.array([x1, x2])
    M = kernel.commutator_kernel(fr, gr, pts[:, None], pts[None, :])
    brute = float(np.linalg.det(M).real)
    diff = abs(det - brute)
    want_negative = _expect(spec, "negative", n > 1 and x1 != x2)
    ok = diff <= tol * max(abs(brute), 1e-300) and ((det < 0) == want_negative)
    return ok, {"det": det, "brute_force": brute, "abs_diff": diff}


def check_finite_rank(sc, f, g, spec, ctx):
    tol = spec.get("tol", 1e-6)
    km = kernel.nystrom_assemble(f, g, sc.grid, auto_double=False)
    phis, signs = kernel.eigenfunctions(km)
    rep = kernel.finite_rank_identities(phis, f, g, sc.grid, signs, km)
    ok = rep.derivative_residual <= tol and rep.correlation_residual <= tol
    return ok, rep.to_json()


def check_periodic(sc, f, g, spec, ctx):
    tol = spec.get("tol", 1e-10)
    p = _params(spec)
    res = analysis.commute_check_periodic(
        float(p["tau_f"]), float(p["tau_g"]), int(p.get("harmonics", 3)), sc.grid, sc.seed
    )
    commute = _expect(spec, "commute", True)
    if commute:
        ok = res.relative <= tol
    else:
        ok = res.residual >= spec.get("min_residual", 1e-3)
    out = res.to_json()
    out["expected_commute"] = commute
    return ok, out


def check_cosh_sandwich(sc, f, g, spec, ctx):
    tol = spec.get("tol", 1e-6)
    lam = float(_params(spec).get("lambda", 1.0))
    S = opmatrix.cosh_sandwich(lam, g, sc.grid)
    C = opmatrix.operator_commutator(KatoFunction.tanh(lam), g, sc.grid)
    d = opmatrix.interior_discrepancy(S, C, sc.grid)
    ev = S.eigvalsh()
    rel_min = float(ev[0] / ev[-1]) if ev[-1] > 0 else 0.0
    ok = d["rel_frobenius"] <= tol and rel_min >= -1e-12
    d.update({"lambda": lam, "relative_min": rel_min})
    return ok, d


def check_weyl(sc, f, g, spec, ctx):
    tol = spec.get("tol", 1e-4)
    p = _params(spec)
    W = opmatrix.weyl_representation(f, g, sc.grid, p.get("U"), p.get("Xi"), p.get("M"))
    C = opmatrix.operator_commutator(f, g, sc.grid)
    d = opmatrix.interior_discrepancy(W, C, sc.grid)
    d["hermitian_defect"] = W.hermitian_defect
    d["provenance"] = W.provenance
    d["warnings"] = W.warnings
    return d["rel_frobenius"] <= tol, d


def check_coherent(sc, f, g, spec, ctx):
    tol = spec.get("tol", 1e-8)
    p = _params(spec)
    win = tuple(p.get("window", (-6.0, 6.0, -6.0, 6.0)))
    cs = opmatrix.coherent_scan(f, g, win, int(p.get("R", 61)), int(p.get("M", 128)), float(p.get("cutoff", 12.0)))
    ctx["coherent"] = cs
    nonneg = cs.min_value >= -tol * max(cs.max_value, 0.0)
    want = _expect(spec, "nonnegative", True)
    out = cs.to_json()
    out["nonnegative"] = bool(nonneg)
    out["warnings"] = cs.warnings
    return nonneg == want and cs.imag_max <= 1e-10 * max(1.0, cs.max_value), out


def check_kernel2d(sc, f, g, spec, ctx):
    tol = spec.get("tol", 1e-6)
    p = _params(spec)
    K = opmatrix.kernel2d_nystrom(f, g, float(p.get("half_width", 4.0)), int(p.get("n", 16)))
    lam = np.linalg.eigvalsh(K)
    rel = float(lam[0] / lam[-1])
    return rel >= -tol, {"min_eigenvalue": float(lam[0]), "max_eigenvalue": float(lam[-1]), "relative_min": rel}


def check_inequalities(sc, f, g, spec, ctx):
    p = _params(spec)
    target = g if p.get("function", "g") == "g" else f
    a_hat = p.get("a_hat")
    rep = analysis.inequality_suite(target, a_hat, tol=spec.get("tol", 1e-10))
    ctx["inequalities"] = rep
    return rep.all_pass == _expect(spec, "all_pass", True), rep.to_json()


def check_variance(sc, f, g, spec, ctx):
    tol = spec.get("tol", 1e-10)
    target = f if _params(spec).get("function", "f") == "f" else g
    closed = funcspace.variance_functional(target)
    # independent oracle: trapezoid moments of f' / [f] on a wide grid
    s = target.a_hat
    loc = target.measure.locations
    x = np.linspace(loc.min() - 40 / s, loc.max() + 40 / s, 200001)
    w = target.derivative(x) / funcspace.total_variation(target)
    h = x[1] - x[0]
    m1 = np.sum(w * x) * h
    quad = float(np.sum(w * (x - m1) ** 2) * h)
    rel = abs(closed - quad) / closed
    return rel <= tol, {"closed_form": closed, "quadrature": quad, "rel_error": rel, "a_hat_sq_over_3": s * s / 3}


def check_recovery(sc, f, g, spec, ctx):
    tol = spec.get("tol", 1e-3)
    y = float(_params(spec).get("y", g.a / 2))
    rep = funcspace.recovery_check(g, y, sc.grid)
    return rep["sup_discrepancy"] <= tol, rep


def check_moebius(sc, f, g, spec, ctx):
    tol = spec.get("tol", 1e-8)
    F = tuple(float(v) for v in _params(spec).get("moebius", (0.0, -1.0, 1.0, 2.0)))
    rep = analysis.monotone_transform(F, f, g, sc.grid, tol)
    out = rep.to_json()
    out["moebius"] = list(F)
    out["relative_min"] = rep.relative_min
    return rep.psd_verdict == _expect(spec, "psd_verdict", True), out


def check_probe(sc, f, g, spec, ctx):
    p = _params(spec)
    fam = p.get("family", "bump")
    vals = [float(v) for v in p.get("values", (0.0,))]
    cat = analysis.conjecture_probe(f, g, fam, vals, sc.grid, spec.get("tol", 1e-8), workers=ctx.get("workers"))
    ctx["catalog"] = cat
    expected = _expect(spec, "verdicts", {})
    ok = True
    for e in cat:
        key = repr(e.parameter)
        if key in expected:
            ok = ok and (e.psd_verdict == expected[key])
    return ok, {"family": fam, "catalog": analysis.catalog_to_json(cat)}


def check_route_equivalence(sc, f, g, spec, ctx):
    tol = spec.get("tol", 1e-4)
    d = analysis.route_equivalence(f, g, sc.grid)
    return d["verdicts_agree"] and d["max_eigenvalue_error"] <= tol, d


@dataclass(frozen=True)
class CheckInfo:
    name: str
    anchor: str
    default_tol: float
    run: object
    needs: str = "fg"


REGISTRY = {
    c.name: c
    for c in [
        CheckInfo("positivity_spectrum", "i[f(P), g(Q)] >= 0 when f in K_a, g in K_b, ab = π/2", 1e-8, check_positivity),
        CheckInfo("trace_check", "tr C = [f][g]/2π", 1e-6, check_trace),
        CheckInfo("tanh_rank_n_kernel", "(β/nπ) Σ_k ψ_k(x) φ_k(y) is rank n when (2α)(2β) = 2πn", 1e-10, check_rank_n, ""),
        CheckInfo("det2x2_tanh", "det = (β/nπ)²(cosh βx₁ cosh βx₂)⁻²(n² − |Σ_k f_k(x₁−x₂)|²)", 1e-12, check_det2x2, ""),
        CheckInfo("finite_rank_identities", "g'(x) = 2π Σ_j |φ_j(x)|² / [f]", 1e-6, check_finite_rank),
        CheckInfo("commute_check_periodic", "[f(P), g(Q)] = 0 when τ_f τ_g = 2π", 1e-10, check_periodic, ""),
        CheckInfo("cosh_sandwich", "(cosh λP)⁻¹ Im g(Q+iλ) (cosh λP)⁻¹ = i[tanh(λP), g(Q)]", 1e-6, check_cosh_sandwich, "g"),
        CheckInfo("weyl_representation", "∫∫ e^{i(ξQ+uP)} df̂(u) dĝ(ξ) sin(uξ/2)/(uξ/2) du dξ / 2π", 1e-4, check_weyl),
        CheckInfo("coherent_scan", "∫∫ e^{-(ξ²+u²)/4} e^{i(ξx+uy)} sin(ξu/2)/(ξu) df̂(u) dĝ(ξ) >= 0", 1e-8, check_coherent),
        CheckInfo("kernel2d_nystrom", "df̂(√2(y₁−x₁)) dĝ(√2(y₂−x₂)) e^{i(x₁y₂−x₂y₁)} sinc((y₁−x₁)(y₂−x₂))/π >= 0", 1e-6, check_kernel2d),
        CheckInfo("inequality_suite", "|G''(x)| <= 2â G'(x), -ψ'' + â²ψ >= 0, |ψ'/ψ| < â", 1e-10, check_inequalities, "g"),
        CheckInfo("variance_functional", "σ² = π²/12a² = â²/3", 1e-10, check_variance, "f"),
        CheckInfo("recover_measure", "dμ(t) = (2π)⁻¹ Im g(t+ib) dt", 1e-3, check_recovery, "g"),
        CheckInfo("monotone_transform", "i[F(f(P)), g(Q)] >= 0 for operator monotone F", 1e-8, check_moebius),
        CheckInfo("conjecture_probe", "positive commutator forces f in K_a, g in K_b with ab = π/2 (probe)", 1e-8, check_probe),
        CheckInfo("route_equivalence", "kernel and operator routes agree on spectrum and verdict", 1e-4, check_route_equivalence),
    ]
}


def list_checks():
    return [REGISTRY[k] for k in sorted(REGISTRY)]


# -- parsing -----------------------------------------------------------------------

def _parse_one(doc, base_dir) -> Scenario:
    if not isinstance(doc, dict):
        raise ConfigError("scenario must be a JSON object")
    try:
        name = str(doc["name"])
        grid = GridSpec.from_json(doc.get("grid", {"L": 20.0, "N": 512}))
    except KeyError as exc:
        raise ConfigError(f"scenario is missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"scenario {doc.get('name')!r}: {exc}") from exc
    if not name or any(c in name for c in "/\\"):
        raise ConfigError(f"invalid scenario name {name!r}")
    route = doc.get("route", "kernel")
    if route not in ROUTES:
        raise ConfigError(f"scenario {name}: route must be one of {ROUTES}")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"scenario {name}: seed must be an unsigned integer")
    checks = doc.get("checks", [])
    if not isinstance(checks, list) or not checks:
        raise ConfigError(f"scenario {name}: checks must be a non-empty list")
    norm = []
    for c in checks:
        c = {"name": c} if isinstance(c, str) else dict(c)
        if c.get("name") not in REGISTRY:
            raise ConfigError(f"scenario {name}: unknown check {c.get('name')!r}")
        info = REGISTRY[c["name"]]
        c.setdefault("tol", info.default_tol)
        if "f" in info.needs and "f" not in doc:
            raise ConfigError(f"scenario {name}: check {info.name} needs f")
        if "g" in info.needs and "g" not in doc:
            raise ConfigError(f"scenario {name}: check {info.name} needs g")
        norm.append(c)
    pert = doc.get("perturbation")
    if pert is not None and pert.get("family") not in analysis.FAMILIES:
        raise ConfigError(f"scenario {name}: unknown perturbation family {pert.get('family')!r}")
    for key in ("f", "g"):
        spec = doc.get(key)
        if spec is not None and "file" not in spec:
            try:
                KatoFunction.from_json(spec)
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"scenario {name}: bad {key}: {exc}") from exc
    return Scenario(name, doc.get("f"), doc.get("g"), grid, route, norm, seed, pert, base_dir, doc)


def parse_config(text, base_dir=".") -> list:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from exc
    items = doc["scenarios"] if isinstance(doc, dict) and "scenarios" in doc else [doc]
    scs = [_parse_one(d, base_dir) for d in items]
    names = [s.name for s in scs]
    if len(set(names)) != len(names):
        raise ConfigError("scenario names must be unique")
    return scs


def load_config(path) -> list:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigIOError(f"cannot read {path}: {exc}") from exc
    return parse_config(text, os.path.dirname(os.path.abspath(path)))


def shipped_names():
    pkg = resources.files("commutatorlab") / "scenarios"
    return sorted(p.name[:-5] for p in pkg.iterdir() if p.name.endswith(".json"))


def shipped_path(name):
    p = resources.files("commutatorlab") / "scenarios" / f"{name}.json"
    if not p.is_file():
        return None
    return str(p)


def resolve(ref, name=None) -> Scenario:
    """A scenario by shipped name or config path (``name`` picks one of several)."""
    path = ref if os.path.exists(ref) else shipped_path(ref)
    if path is None:
        raise ConfigIOError(f"{ref!r} is neither a file nor a shipped scenario ({', '.join(shipped_names())})")
    scs = load_config(path)
    if name is not None:
        scs = [s for s in scs if s.name == name]
        if not scs:
            raise ConfigError(f"no scenario named {name!r} in {ref}")
    if len(scs) != 1:
        raise ConfigError(f"{ref} holds {len(scs)} scenarios; pick one with --name")
    return scs[0]


# -- execution -----------------------------------------------------------------------

def _clean(v):
    """JSON-ready copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, complex):
        return [_clean(v.real), _clean(v.imag)]
    if isinstance(v, GridSpec):
        return v.to_json()
    return v


def run_scenario(sc: Scenario, workers=None):
    """Run every check; returns (report dict without timestamp, context)."""
    f, g = sc.functions()
    results = []
    ctx = {"workers": workers}
    for spec in sc.checks:
        info = REGISTRY[spec["name"]]
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            ok, detail = info.run(sc, f, g, spec, ctx)
        entry = {"name": info.name, "anchor": info.anchor, "tol": spec["tol"], "pass": bool(ok), "detail": detail}
        msgs = sorted({f"{w.category.__name__}: {w.message}" for w in caught})
        if msgs:
            entry["warnings"] = msgs
        results.append(entry)
    report = {
        "scenario": sc.name,
        "config_hash": sc.config_hash,
        "seed": sc.seed,
        "route": sc.route,
        "grid": sc.grid.to_json(),
        "checks": results,
        "all_pass": all(r["pass"] for r in results),
    }
    return _clean(report), ctx


def plot_rows(ctx):
    """(series, x, value) rows for the plot-data CSV."""
    rows = []
    if "eigenvalues" in ctx:
        for i, v in enumerate(np.sort(ctx["eigenvalues"])[::-1]):
            rows.append(("eigenvalue", float(i), float(v)))
    if "inequalities" in ctx:
        for r in ctx["inequalities"].records:
            rows.append((f"margin:{r.name}", r.worst_location, r.worst_margin))
    if "coherent" in ctx:
        cs = ctx["coherent"]
        for x, v in zip(cs.x, cs.field.min(axis=1)):
            rows.append(("coherent_min_over_y", float(x), float(v)))
    if "catalog" in ctx:
        for e in ctx["catalog"]:
            rows.append(("probe_min_eigenvalue", e.parameter, e.min_eigenvalue))
    return rows
