"""The built-in acceptance criteria, each a function returning verdicts."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import oracles
from .config import DEFAULT_TOLERANCES, builtin
from .geometry import ONE_END, TWO_END, CrossSection, ManifoldSpec, WarpProfile, build_manifold
from .harmonic import AsymptoticData, ObstructionError, build_f0, complete_offsets, pair_with_basis, prepare, \
    solve_harmonic
from .pipeline import run_scenario
from .report import Verdict, dumps
from .spectral import cross_section_spectrum, index_jump, indicial_set, predict_dims
from .verify.bochner import bochner_identity
from .verify.flow import split_check
from .verify.forms import analytic_test_forms, covariant_derivative, differential, interior_slice, \
    weitzenbock_residual

MODELS = {
    "flat": (WarpProfile.constant(1.0), TWO_END),
    "warped": (WarpProfile.sech_bump(1.0, 0.3, 0.0, 1.0), TWO_END),
    "cigar": (WarpProfile.cigar(1.0), ONE_END),
}

# acceptance-level tolerances that are not per-scenario settings
EXTRA_TOLERANCES = {
    "convergence_order": 1.8,
    "error_h2_c": 5.0,
    "error_decay_c": 5.0,
    "nabla_gamma_rel": 0.05,
    "obstruction_rel": 1e-4,
    "roundoff_floor": 1e-10,
}


@dataclass
class CriterionResult:
    number: int
    name: str
    tags: tuple
    verdicts: list = field(default_factory=list)
    seconds: float = 0.0
    limit_seconds: float | None = None

    @property
    def passed(self) -> bool:
        return all(v.status != "FAIL" for v in self.verdicts)

    def as_dict(self) -> dict:
        return {"criterion": self.number, "name": self.name, "tags": list(self.tags),
                "status": "PASS" if self.passed else "FAIL", "verdicts": [v.as_dict() for v in self.verdicts]}

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        worst = next((v for v in self.verdicts if v.status == "FAIL"), None)
        extra = f" (first failing check: {worst.check})" if worst else ""
        return f"[{status}] criterion {self.number:>2} {self.name}: {len(self.verdicts)} checks{extra}"


def model_spec(name: str, h: float = 0.05, R: float = 8.0, n_theta: int = 64, radius: float = 1.0,
               warp: WarpProfile | None = None) -> ManifoldSpec:
    w, topology = MODELS[name]
    return ManifoldSpec.make(CrossSection.circle(radius, n_theta), warp or w, topology, R, h)


@lru_cache(maxsize=16)
def model_setup(name: str, h: float = 0.05, R: float = 8.0, n_theta: int = 64):
    return prepare(build_manifold(model_spec(name, h, R, n_theta)))


@lru_cache(maxsize=16)
def family_setup(s: float, h: float = 0.05, R: float = 8.0, n_theta: int = 64):
    return prepare(build_manifold(model_spec("warped", h, R, n_theta, warp=WarpProfile.sech_bump(1.0, s, 0.0, 1.0))))


def _standard_solution(setup):
    if setup.manifold.n_ends == 2:
        return solve_harmonic(setup, complete_offsets(setup, (1.0, -1.0)))
    return solve_harmonic(setup, AsymptoticData((0.0,), (1.0,)))


def _rel(a, b) -> float:
    return float(abs(a - b) / max(abs(b), 1e-300))


def criterion_1(tol):
    """Indicial roots of the unit circle against Fourier separation."""
    ind = indicial_set(cross_section_spectrum(CrossSection.circle(1.0), 4))
    fourier = {r: d for r, d in oracles.fourier_indicial_roots((1.0,), kmax=3).items()}
    ref = np.array(sorted(fourier))
    roots = np.array(ind.roots)
    err = float(np.abs(roots - ref).max()) if roots.shape == ref.shape else math.inf
    d = [ind.d(float(r)) for r in ref]
    return [
        Verdict("indicial_roots_vs_fourier", err, tol["indicial_root"], reference="Fourier separation oracle",
                detail={"roots": roots.tolist()}),
        Verdict("indicial_multiplicities", d, [fourier[r] for r in ref], "==", reference="Fourier separation oracle",
                detail={"roots": ref.tolist()}),
        Verdict("d_at_zero", ind.d(0.0), 2, "==", reference="constants and t"),
    ]


def criterion_2(tol):
    """Index bookkeeping across the zero root and predicted dimensions."""
    ind = indicial_set(cross_section_spectrum(CrossSection.circle(1.0), 4))
    jump = index_jump(ind, -0.5, 0.5)
    out = [Verdict("index_jump_integer", isinstance(jump, int), True, "=="),
           Verdict("index_jump", jump, 2 * CrossSection.circle(1.0).b0, "==", reference="2 b0(X)")]
    for name in ("cigar", "flat"):
        spec = model_spec(name)
        rec = predict_dims(spec, -0.5, ind)
        out.append(Verdict(f"predict_dims_l{spec.n_ends}", [rec.predicted_ker_dim, rec.predicted_coker_dim],
                           [0, spec.n_ends], "==", reference="index -l, trivial kernel"))
    return out


def criterion_3(tol):
    """Numerical nullity of the obstruction map on the three models."""
    out = []
    for name in MODELS:
        phi = model_setup(name).phi
        out.append(Verdict(f"nullity_{name}", phi.nullity, phi.expected_nullity, "==", reference="dim ker Phi = l"))
        out.append(Verdict(f"gap_{name}", phi.gap, tol["phi_gap"], ">=", detail={"singular_values":
                                                                                     phi.singular_values.tolist()}))
    return out


def criterion_4(tol):
    """Discrete divergence theorem for <Delta f0, 1>."""
    out = []
    for name in MODELS:
        setup = model_setup(name)
        M = setup.manifold
        ell = M.n_ends
        R = M.spec.truncation_R
        worst, dev = 0.0, 0.0
        for C in ([1.0] * ell, [1.0] + [0.0] * (ell - 1), [0.0] * (ell - 1) + [2.0]):
            f0 = build_f0(M, AsymptoticData(tuple(C), (0.0,) * ell), setup.ramp)
            value = pair_with_basis(setup.op, f0, setup.basis)[0]
            expect = oracles.face_flux(M.spec.warp, 1.0, C, R)
            limit = -2 * math.pi * M.spec.warp.limit() * sum(C)
            worst = max(worst, _rel(value, expect))
            dev = max(dev, _rel(value, limit))
        out.append(Verdict(f"flux_{name}", worst, tol["flux_rel"],
                           reference="-sum C_i vol(X_i x {R}) (face volumes)",
                           detail={"deviation_from_limit_volumes": dev}))
    return out


def _orders(errors, hs, floor):
    if max(errors) <= floor:
        return math.inf
    return float(min(math.log(e1 / e2) / math.log(h1 / h2) for e1, e2, h1, h2 in
                     zip(errors, errors[1:], hs, hs[1:])))


def criterion_5(tol, hs=(0.1, 0.05, 0.025)):
    """Flat cylinder f = t with refinement; second-order convergence on the warped model."""
    out = []
    flat_err, warp_err = [], []
    for h in hs:
        setup = model_setup("flat", h)
        M = setup.manifold
        sol = solve_harmonic(setup, AsymptoticData((1.0, -1.0), (0.0, 0.0)))
        err = float(np.abs(sol.f - M.grid.broadcast_t(M.grid.t)).max())
        bound = EXTRA_TOLERANCES["error_h2_c"] * h * h + EXTRA_TOLERANCES["error_decay_c"] * math.exp(
            setup.alpha * M.spec.truncation_R)
        out.append(Verdict(f"flat_error_h{h:g}", err, bound, reference="f = t exactly"))
        flat_err.append(err)
        ws = model_setup("warped", h)
        wsol = _standard_solution(ws)
        prof = wsol.f.mean(axis=1)
        ref = oracles.dirichlet_profile(ws.manifold.spec.warp, ws.manifold.grid.t, prof[0], prof[-1])
        warp_err.append(float(np.abs(prof - ref).max()))
    floor = EXTRA_TOLERANCES["roundoff_floor"]
    out.append(Verdict("flat_order", _orders(flat_err, hs, floor), EXTRA_TOLERANCES["convergence_order"], ">=",
                       reference="errors at roundoff count as exact (infinite order)",
                       detail={"errors": flat_err}))
    out.append(Verdict("warped_order", _orders(warp_err, hs, floor), EXTRA_TOLERANCES["convergence_order"], ">=",
                       reference="1-D ODE oracle with the same face values", detail={"errors": warp_err}))
    return out


def criterion_6(tol):
    """Warped cylinder against the 1-D ODE oracle and the closed-form |nabla gamma|."""
    setup = model_setup("warped")
    M = setup.manifold
    sol = _standard_solution(setup)
    prof = sol.f.mean(axis=1)
    t = M.grid.t
    ref = oracles.dirichlet_profile(M.spec.warp, t, prof[0], prof[-1])
    rel = float(np.abs(sol.f - ref[:, None]).max() / np.abs(ref).max())
    F = oracles.inverse_warp_primitive(M.spec.warp, t)
    c = float((prof[-1] - prof[0]) / (F[-1] - F[0]))
    sup = float(covariant_derivative(differential(sol, M)).norm[interior_slice(M)].max())
    closed = oracles.sup_nabla_gamma(M.spec.warp, -M.spec.truncation_R, M.spec.truncation_R, c)
    return [
        Verdict("ode_oracle_rel", rel, tol["ode_rel"], reference="c int dt/w + d fitted to the face values",
                detail={"c": c}),
        Verdict("sup_nabla_gamma_rel", _rel(sup, closed), EXTRA_TOLERANCES["nabla_gamma_rel"],
                reference="sqrt(2) |c| max |w'| / w^2", detail={"measured": sup, "closed_form": closed}),
    ]


def criterion_7(tol, R_list=(5.0, 6.0, 7.0)):
    """Integrated Bochner identity on every model and several R."""
    out = []
    for name in MODELS:
        setup = model_setup(name)
        M = setup.manifold
        h = M.grid.h_t
        gamma = differential(_standard_solution(setup), M)
        for R in R_list:
            rep = bochner_identity(gamma, M, R)
            out.append(Verdict(f"identity_{name}_R{R:g}", rep.identity_residual,
                               tol["bochner_c"] * h * h * (rep.interior_energy + 1.0),
                               detail=rep.as_dict()))
            if name == "flat":
                out.append(Verdict(f"flat_energy_R{R:g}", rep.interior_energy, tol["flat_energy"],
                                   reference="parallel gradient on a product"))
    return out


def criterion_8(tol, s_values=(0.05, 0.1, 0.2)):
    """sup |nabla gamma| over the warp family vanishes with the amplitude; s = 0 splits."""
    sups = []
    for s in s_values:
        setup = family_setup(s)
        M = setup.manifold
        sol = _standard_solution(setup)
        sups.append(float(covariant_derivative(differential(sol, M)).norm[interior_slice(M)].max()))
    h = 0.05
    limit = tol["split_c"] * h * h
    slope, intercept = np.polyfit(s_values, sups, 1)
    setup0 = family_setup(0.0)
    rep = split_check(_standard_solution(setup0), setup0.manifold, tol=limit)
    return [
        Verdict("strictly_increasing", bool(np.all(np.diff(sups) > 0)), True, "==", detail={"sup": sups}),
        Verdict("extrapolated_to_zero", float(abs(intercept)), 2 * limit, detail={"slope": float(slope)}),
        Verdict("split_defects_s0", max(rep.defects.values()), limit, reference="product metric ds^2 + g_X",
                detail=rep.defects),
        Verdict("split_level_set_s0", rep.level_error, tol["flow_level"]),
    ]


def criterion_9(tol):
    """A single end admits no slope; C = 0 gives a constant."""
    setup = model_setup("cigar")
    M = setup.manifold
    expect = -2 * math.pi * M.spec.warp.limit() * 1.0
    try:
        solve_harmonic(setup, AsymptoticData((1.0,), (0.0,)))
        value, rejected = math.nan, False
    except ObstructionError as exc:
        value, rejected = float(exc.values[0]), True
    sol = solve_harmonic(setup, AsymptoticData((0.0,), (0.0,)))
    spread = float(sol.f.max() - sol.f.min())
    return [
        Verdict("rejected", rejected, True, "=="),
        Verdict("obstruction_value_rel", _rel(value, expect) if rejected else math.nan,
                EXTRA_TOLERANCES["obstruction_rel"], reference="-2 pi w(inf) C (Delta = -div grad)",
                detail={"value": value, "expected": expect}),
        Verdict("constant_spread", spread, tol["constant_spread"]),
    ]


def criterion_10(tol):
    """Weitzenboeck identity on three analytic one-forms per model."""
    out = []
    for name in MODELS:
        M = model_setup(name).manifold
        h = M.grid.h_t
        for form, xi in analytic_test_forms(M).items():
            out.append(Verdict(f"{name}_{form}", weitzenbock_residual(xi), tol["weitzenbock_c"] * h * h))
    return out


def criterion_11(tol):
    """Two runs of the same scenario serialize to identical bytes."""
    cfg = builtin("flat")
    cfg["tolerances"].update({k: v for k, v in tol.items() if k in DEFAULT_TOLERANCES})
    a = dumps(run_scenario(cfg)[0]).encode()
    b = dumps(run_scenario(cfg)[0]).encode()
    return [Verdict("byte_identical", a == b, True, "==", detail={"bytes": len(a)})]


CRITERIA = [
    (1, "indicial_set", ("spectrum", "indicial"), criterion_1, 1.0),
    (2, "index_bookkeeping", ("indicial",), criterion_2, None),
    (3, "obstruction_nullity", ("phi",), criterion_3, 30.0),
    (4, "flux_identity", ("phi", "flux"), criterion_4, None),
    (5, "flat_refinement", ("harmonic", "convergence"), criterion_5, 60.0),
    (6, "warped_ode_oracle", ("harmonic",), criterion_6, None),
    (7, "bochner_identity", ("bochner",), criterion_7, None),
    (8, "ricci_flat_dichotomy", ("dichotomy", "split"), criterion_8, None),
    (9, "one_end_obstruction", ("harmonic", "obstruction"), criterion_9, None),
    (10, "weitzenbock", ("weitzenbock",), criterion_10, None),
    (11, "determinism", ("determinism",), criterion_11, None),
]


def select(filter_text: str | None = None) -> list:
    if not filter_text:
        return list(CRITERIA)
    keys = [k.strip() for k in filter_text.split(",") if k.strip()]
    return [c for c in CRITERIA if any(k == str(c[0]) or k in c[1] or k in c[2] for k in keys)]


def run_criterion(entry, tolerances: dict | None = None) -> CriterionResult:
    number, name, tags, fn, limit = entry
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    start = time.perf_counter()
    verdicts = fn(tol)
    return CriterionResult(number, name, tags, verdicts, time.perf_counter() - start, limit)


def suite(filter_text: str | None = None, tolerances: dict | None = None) -> tuple:
    """Run the selected criteria.

    Returns the deterministic aggregate report and the per-criterion results
    (which also carry wall-clock timings).
    """
    results = [run_criterion(c, tolerances) for c in select(filter_text)]
    results.sort(key=lambda r: r.number)
    report = {"report_version": 1, "suite": "acceptance", "filter": filter_text or "",
              "tolerances": dict(DEFAULT_TOLERANCES, **(tolerances or {})),
              "criteria": [r.as_dict() for r in results],
              "status": "PASS" if all(r.passed for r in results) else "FAIL"}
    return report, results
