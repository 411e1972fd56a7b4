"""Scenario orchestration: spectrum, indicial roots, obstruction map, harmonic solve, checks."""
from __future__ import annotations

import copy
import logging
import time

import numpy as np

from . import oracles
from .config import STAGES, to_spec
from .geometry import ONE_END, ManifoldSpec, WarpProfile, build_manifold
from .harmonic import AsymptoticData, ObstructionError, complete_offsets, pair_with_basis, build_f0, prepare, \
    solve_harmonic
from .report import CONVENTIONS, REPORT_VERSION, Verdict
from .spectral import (cross_section_spectrum, default_weight, discrete_cross_section_spectrum, index_jump,
                       indicial_set, predict_dims)
from .verify.bochner import boundary_decay_scan, observed_decay_rate
from .verify.flow import split_check
from .verify.forms import analytic_test_forms, covariant_derivative, differential, interior_slice, \
    random_test_form, weitzenbock_residual

log = logging.getLogger(__name__)

DEPENDS = {
    "spectrum": (), "indicial": ("spectrum",), "phi": (), "harmonic": ("phi",),
    "bochner": ("harmonic",), "weitzenbock": (), "split": ("harmonic",), "dichotomy": (),
}

SPECTRUM_COUNT = 4


class StageSkipped(Exception):
    """A stage does not apply to this model; recorded, not an error."""


def _rel(a, b) -> float:
    return float(abs(a - b) / max(abs(b), 1e-300))


class Context:
    def __init__(self, cfg: dict):
        self.cfg = cfg
        self.tol = cfg["tolerances"]
        self.spec: ManifoldSpec = to_spec(cfg)
        self._manifold = None
        self.verdicts: list = []
        self.tables: dict = {}
        self.values: dict = {}

    @property
    def manifold(self):
        if self._manifold is None:
            self._manifold = build_manifold(self.spec)
        return self._manifold

    @property
    def h(self) -> float:
        return self.manifold.grid.h_t

    @property
    def alpha(self) -> float:
        w = self.cfg["weight"]
        return default_weight(self.spec) if w is None else float(w)

    def check(self, name, measured, tolerance, comparison="<=", reference="", **detail) -> Verdict:
        v = Verdict(name, measured, tolerance, comparison, reference, detail)
        self.verdicts.append(v)
        return v


def _closed_form_spectrum(radii, n, count):
    per = [oracles.circle_difference_eigenvalues(r, n) for r in radii]
    vals = per[0]
    for p in per[1:]:
        vals = (vals[:, None] + p[None, :]).ravel()
    vals = np.sort(vals)
    distinct = []
    for v in vals:
        if not distinct or v - distinct[-1] > 1e-6 * max(1.0, v):
            distinct.append(v)
    return np.array(distinct[:count])


def stage_spectrum(ctx: Context) -> dict:
    X = ctx.spec.asymptotic_cross_section()
    table = cross_section_spectrum(X, SPECTRUM_COUNT)
    disc = discrete_cross_section_spectrum(X, SPECTRUM_COUNT, seed=ctx.cfg["seed"])
    exact = _closed_form_spectrum(X.radii, X.mesh_points, SPECTRUM_COUNT)
    err = float(np.max(np.abs(np.array(disc.eigenvalues) - exact) / np.maximum(exact, 1.0)))
    ctx.check("spectrum.discrete_vs_closed_form", err, 1e-8, reference="closed-form difference eigenvalues")
    ctx.tables["spectrum"] = (["lambda", "multiplicity", "lambda_discrete", "multiplicity_discrete"],
                              [[a, m, b, n] for a, m, b, n in zip(table.eigenvalues, table.multiplicities,
                                                                  disc.eigenvalues, disc.multiplicities)])
    ctx.values["spectrum"] = table
    return {"analytic": {"eigenvalues": table.eigenvalues, "multiplicities": table.multiplicities},
            "discrete": {"eigenvalues": disc.eigenvalues, "multiplicities": disc.multiplicities},
            "gap": table.gap}


def stage_indicial(ctx: Context) -> dict:
    spec = ctx.spec
    X = spec.asymptotic_cross_section()
    ind = indicial_set(ctx.values["spectrum"], X.b0)
    top = ind.max_root
    fourier = {r: d for r, d in oracles.fourier_indicial_roots(X.radii, kmax=int(np.ceil(top * max(X.radii))) + 1)
               .items() if abs(r) <= top + 1e-9}
    roots = np.array(ind.roots)
    ref = np.array(sorted(fourier))
    if len(ref) == len(roots):
        err = float(np.abs(roots - ref).max())
        mult_ok = all(ind.multiplicity[r] == fourier[f] for r, f in zip(ind.roots, ref))
    else:
        err, mult_ok = float("inf"), False
    ctx.check("indicial.roots", err, ctx.tol["indicial_root"], reference="Fourier separation oracle",
              roots=list(ind.roots), oracle=list(ref))
    ctx.check("indicial.multiplicities", bool(mult_ok), True, "==", reference="Fourier separation oracle",
              d={format(r, ".6g"): ind.multiplicity[r] for r in ind.roots})
    a = abs(ctx.alpha)
    jump = index_jump(ind, -a, a)
    ctx.check("indicial.index_jump", jump, 2 * X.b0, "==", reference="d(0) = 2 b0")
    neg = predict_dims(spec, -a, ind)
    pos = predict_dims(spec, a, ind)
    ell = spec.n_ends
    ctx.check("indicial.predict_dims", [neg.predicted_ker_dim, neg.predicted_coker_dim], [0, ell], "==",
              reference="index -l with trivial kernel")
    ctx.tables["indicial"] = (["root", "d"], [[r, ind.multiplicity[r]] for r in ind.roots])
    return {"roots": list(ind.roots), "d": [ind.multiplicity[r] for r in ind.roots], "alpha": -a,
            "index_jump": jump, "record": vars(neg), "dual_record": vars(pos)}


def stage_phi(ctx: Context) -> dict:
    M = ctx.manifold
    setup = prepare(M, ctx.alpha)
    ctx.values["setup"] = setup
    ell = M.n_ends
    phi = setup.phi
    ctx.check("phi.nullity", phi.nullity, ell, "==", reference="index count: dim ker Phi = l")
    ctx.check("phi.gap", phi.gap, ctx.tol["phi_gap"], ">=", reference="singular-value gap at 1e-6 sigma_max")
    ctx.check("phi.cokernel_residual", float(setup.basis.residuals.max()), ctx.tol["harmonic_residual"],
              reference="Delta h = 0 in the interior")
    cs = M.spec.cross_section
    errs = []
    for i in range(ell):
        C = [0.0] * ell
        C[i] = 1.0
        f0 = build_f0(M, AsymptoticData(tuple(C), (0.0,) * ell), setup.ramp)
        measured = pair_with_basis(setup.op, f0, setup.basis)[0]
        expect = -cs.volume * float(M.warp(M.spec.ends[i].orientation * M.spec.truncation_R)) ** cs.dim
        errs.append(_rel(measured, expect))
    ctx.check("phi.flux_identity", max(errs), ctx.tol["flux_rel"],
              reference="divergence theorem with face volumes vol(X_i x {R})")
    return {"alpha": setup.alpha, "phi": phi.phi, "singular_values": phi.singular_values,
            "nullspace": phi.nullspace.T, "nullity": phi.nullity, "gap": phi.gap,
            "cokernel": {"asymptotics": setup.basis.asymptotics, "residuals": setup.basis.residuals,
                         "gram_min_singular_value": setup.basis.gram_min_singular_value,
                         "matching_residual": setup.basis.ls_residual},
            "ramp": list(setup.ramp)}


def _default_data(ctx: Context):
    asym = ctx.cfg["asymptotics"]
    if asym is not None:
        return asym["C"], asym.get("D")
    if ctx.spec.n_ends == 2:
        return [1.0, -1.0], None
    return [0.0], [1.0]


def stage_harmonic(ctx: Context) -> dict:
    setup = ctx.values["setup"]
    M = ctx.manifold
    C, D = _default_data(ctx)
    out = {}
    try:
        data = complete_offsets(setup, C) if D is None else AsymptoticData(tuple(C), tuple(D))
        sol = solve_harmonic(setup, data, auto_project=ctx.cfg["auto_project"])
    except ObstructionError as exc:
        value = float(exc.values[0])
        v = ctx.check("harmonic.obstruction", value, 0.0, "==", reference="flux obstruction", message=str(exc))
        v.expected_failure = True
        cs = M.spec.cross_section
        R = M.spec.truncation_R
        expect = -sum(c * cs.volume * float(M.warp(e.orientation * R)) ** cs.dim for c, e in zip(C, M.spec.ends))
        limit = -sum(c * cs.volume * M.spec.warp.limit() ** cs.dim for c in C)
        ctx.check("harmonic.obstruction_value", _rel(value, expect), ctx.tol["flux_rel"],
                  reference="-sum C_i vol(X_i x {R})", measured_value=value, expected_value=expect,
                  limit_volume_value=limit)
        out["obstruction"] = {"C": list(C), "values": exc.values}
        D = D if D is not None else [0.0] * len(C)
        data = AsymptoticData((0.0,) * len(C), tuple(D))
        sol = solve_harmonic(setup, data)
        out["continued_with"] = {"C": list(data.C), "D": list(data.D)}
    ctx.values["solution"] = sol
    tol = ctx.tol
    ctx.check("harmonic.residual", sol.residual_interior, tol["harmonic_residual"],
              reference="interior sup |Delta f|")
    ctx.check("harmonic.decay", max(sol.decay), sol.decay_bound * tol["decay_margin"],
              reference="exp(alpha 3R/4) x margin on the outer quarter of every end")
    if all(c == 0 for c in sol.data.C):
        spread = float(sol.f.max() - sol.f.min())
        expected = max(sol.data.D) - min(sol.data.D)
        ctx.check("harmonic.max_principle", abs(spread - expected), tol["constant_spread"],
                  reference="maximum principle: extremes at the prescribed constants")
    grid = M.grid
    if M.n_ends == 2 and len(grid.thetas) == 1:
        prof = sol.f.mean(axis=1)
        ref = oracles.dirichlet_profile(M.spec.warp, grid.t, prof[0], prof[-1])
        err = float(np.abs(prof - ref).max() / max(np.abs(ref).max(), 1e-300))
        ctx.check("harmonic.ode_oracle", err, tol["ode_rel"], reference="1-D ODE integration of (w f')' = 0",
                  angular_variation=float(np.abs(sol.f - prof[:, None]).max()))
    out.update(sol.summary())
    if len(grid.thetas) == 1:
        T, TH = grid.mesh()
        ctx.tables["harmonic"] = (["t", "theta", "f"], zip(T.ravel().tolist(), TH.ravel().tolist(),
                                                            sol.f.ravel().tolist()))
    return out


def _sup_nabla_gamma(sol, M) -> float:
    g = differential(sol, M)
    return float(covariant_derivative(g).norm[interior_slice(M)].max())


def stage_bochner(ctx: Context) -> dict:
    sol = ctx.values["solution"]
    M = ctx.manifold
    h = ctx.h
    R_list = [R for R in ctx.cfg["sweeps"]["R_list"] if R <= M.spec.truncation_R - 2 * h]
    gamma = differential(sol, M)
    reports = boundary_decay_scan(gamma, M, R_list)
    flat = M.spec.warp.is_flat
    rows = []
    for r in reports:
        ctx.check(f"bochner.identity@R={r.R:g}", r.identity_residual,
                  ctx.tol["bochner_c"] * h * h * (r.interior_energy + 1.0),
                  reference="integrated Bochner identity, O(h^2)")
        if flat:
            ctx.check(f"bochner.flat_energy@R={r.R:g}", r.interior_energy, ctx.tol["flat_energy"],
                      reference="parallel gradient on a product")
        b = list(r.boundary_terms) + [float("nan")] * (2 - len(r.boundary_terms))
        rows.append([r.R, r.interior_energy, r.ricci_term, b[0], b[1], r.identity_residual])
    ctx.tables["bochner"] = (["R", "interior", "ricci", "boundary_1", "boundary_2", "residual"], rows)
    return {"reports": reports, "observed_decay_rate": observed_decay_rate(reports) if len(reports) > 2
            else float("nan"), "sup_nabla_gamma": _sup_nabla_gamma(sol, M)}


def stage_weitzenbock(ctx: Context) -> dict:
    M = ctx.manifold
    h = ctx.h
    forms = analytic_test_forms(M)
    forms[f"random_seed{ctx.cfg['seed']}"] = random_test_form(M, ctx.cfg["seed"])
    out = {}
    for name, xi in forms.items():
        res = weitzenbock_residual(xi)
        out[name] = res
        ctx.check(f"weitzenbock.{name}", res, ctx.tol["weitzenbock_c"] * h * h,
                  reference="Weitzenboeck identity with the Ricci term")
    return {"residuals": out}


def stage_split(ctx: Context) -> dict:
    sol = ctx.values["solution"]
    M = ctx.manifold
    if len(M.grid.thetas) != 1:
        raise StageSkipped("the gradient-flow test is implemented for surfaces")
    if float(sol.f.max() - sol.f.min()) <= ctx.tol["constant_spread"]:
        raise StageSkipped("f is constant: there is no level set to flow")
    h = ctx.h
    rep = split_check(sol, M, tol=ctx.tol["split_c"] * h * h)
    ctx.check("split.level_set", rep.level_error, ctx.tol["flow_level"], reference="f(upsilon_s(x)) = f(x) + s")
    worst = max(rep.defects.values())
    if M.spec.warp.is_flat:
        ctx.check("split.product", worst, rep.tol, reference="product metric ds^2 + g_X")
    else:
        ctx.check("split.detects_warping", rep.defect_dg_thth, rep.tol, ">=",
                  reference="d_s g_thth = d_s w^2 does not vanish on a warped model")
    return rep.as_dict()


def _family_manifold(spec: ManifoldSpec, s: float):
    base = spec.warp.params if spec.warp.kind == "sech_bump" else (1.0, 0.0, 0.0, 1.0)
    warp = WarpProfile.sech_bump(base[0], s, base[2], base[3])
    fam = ManifoldSpec.make(spec.cross_section, warp, spec.topology, spec.truncation_R, spec.grid_h,
                            spec.core_radius)
    return build_manifold(fam)


def stage_dichotomy(ctx: Context) -> dict:
    spec = ctx.spec
    if spec.topology == ONE_END or spec.cross_section.dim != 1:
        raise StageSkipped("the warp family is defined for two-ended surfaces")
    s_list = sorted(float(s) for s in ctx.cfg["sweeps"]["s_list"])
    if not s_list:
        raise StageSkipped("no s values requested")
    h = ctx.h
    tol = ctx.tol["split_c"] * h * h
    rows, sups, split0 = [], [], None
    for s in s_list:
        M = _family_manifold(spec, s)
        setup = prepare(M, ctx.alpha)
        sol = solve_harmonic(setup, complete_offsets(setup, (1.0, -1.0)))
        sup = _sup_nabla_gamma(sol, M)
        t = M.grid.t[interior_slice(M)[0]]
        ref = float(oracles.nabla_gamma_norm(M.spec.warp, t).max())
        sups.append(sup)
        rows.append([s, sup, ref])
        if s == 0.0:
            split0 = split_check(sol, M, tol=tol)
    positive = [(s, v) for s, v in zip(s_list, sups) if s > 0]
    out = {"s": s_list, "sup_nabla_gamma": sups, "oracle": [r[2] for r in rows]}
    if len(positive) >= 2:
        ps, pv = np.array(positive).T
        ctx.check("dichotomy.monotone", bool(np.all(np.diff(pv) > 0)), True, "==",
                  reference="sup |nabla gamma| increases with the warp amplitude")
        slope, intercept = np.polyfit(ps, pv, 1)
        ctx.check("dichotomy.extrapolation", float(abs(intercept)), 2 * tol,
                  reference="linear extrapolation of sup |nabla gamma| to s = 0", slope=float(slope))
        out["fit"] = {"slope": float(slope), "intercept": float(intercept)}
    if 0.0 in s_list:
        ctx.check("dichotomy.flat_sup", sups[s_list.index(0.0)], tol, reference="nabla gamma = 0 on a product")
        ctx.check("dichotomy.split@s=0", max(split0.defects.values()), tol, reference="product metric ds^2 + g_X")
        out["split_at_zero"] = split0.as_dict()
    ctx.tables["dichotomy"] = (["s", "sup_nabla_gamma", "oracle"], rows)
    return out


RUNNERS = {
    "spectrum": stage_spectrum, "indicial": stage_indicial, "phi": stage_phi, "harmonic": stage_harmonic,
    "bochner": stage_bochner, "weitzenbock": stage_weitzenbock, "split": stage_split,
    "dichotomy": stage_dichotomy,
}


def _closure(stages) -> list:
    need = set()

    def add(s):
        for d in DEPENDS[s]:
            add(d)
        need.add(s)
    for s in stages:
        add(s)
    return [s for s in STAGES if s in need]


def run_scenario(cfg: dict) -> tuple:
    """Run the requested stages of a validated config.

    Returns
    -------
    report : dict
        Deterministic report (config echo, stage results, verdicts).
    extras : dict
        ``tables`` for CSV output, per-stage ``timings`` and ``errors``;
        kept out of the report so that it stays byte-reproducible.
    """
    cfg = copy.deepcopy(cfg)
    ctx = Context(cfg)
    results, timings, errors = {}, {}, {}
    failed = set()
    for stage in _closure(cfg["stages"]):
        blocked = [d for d in DEPENDS[stage] if d in failed]
        if blocked:
            results[stage] = {"status": "skipped", "reason": f"depends on {blocked[0]}"}
            failed.add(stage)
            continue
        start = time.perf_counter()
        try:
            results[stage] = {"status": "done", **RUNNERS[stage](ctx)}
        except StageSkipped as exc:
            results[stage] = {"status": "not-applicable", "reason": str(exc)}
        except Exception as exc:  # recorded; dependents are skipped
            log.exception("stage %s failed", stage)
            results[stage] = {"status": "error", "error": f"{type(exc).__name__}: {exc}"}
            errors[stage] = exc
            failed.add(stage)
        timings[stage] = time.perf_counter() - start
    verdicts = [v.as_dict() for v in ctx.verdicts]
    status = "ERROR" if errors else ("FAIL" if any(v["status"] == "FAIL" for v in verdicts) else "PASS")
    resolved = {"core_radius": ctx.spec.core_radius, "alpha": ctx.alpha}
    if ctx._manifold is not None:
        resolved.update({"h_t": ctx.h, "n_t": len(ctx.manifold.grid.t)})
    report = {"report_version": REPORT_VERSION, "conventions": CONVENTIONS, "scenario": cfg,
              "resolved": resolved, "stages": results, "verdicts": verdicts, "status": status}
    return report, {"tables": ctx.tables, "timings": timings, "errors": errors, "verdicts": ctx.verdicts}
