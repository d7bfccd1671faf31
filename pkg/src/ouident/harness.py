"""Suite orchestration and the verification report.

``run_suite`` executes the stages in a fixed order and stops at the first
hard failure (a violated standing assumption, a failed A4 certificate, or
a precondition error), recording why. Reports are deterministic for a
given config and seed: no timestamps, fixed stage and record order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import json

import numpy as np

from . import __version__
from .config import Config
from .dissipativity import CertificationError, certify_gamma
from .fields import GridSpec, SchwartzFunction, lp_norm, sample
from .kernel import moment_abs, moment_bound, moment_identity, moment_matrix, scaling_exponent
from .records import ANCHORS, FAIL, PASS, CheckRecord, not_applicable, upper_bound_record
from .resolvent import (
    LaplaceQuadSpec,
    dissipativity_probe,
    estimate_report,
    ibp_inequality_check,
    maximal_domain_ratios,
    resolve,
)
from .semigroup import SemigroupPlan, apply_T, fitted_order, generator_difference, semigroup_law_check
from .spectral import check_assumptions, eigenstructure, spectral_constants

STAGES = ("assumptions", "constants", "certify", "kernel", "semigroup", "resolvent")
COMMAND_STAGES = {
    "certify": ("assumptions", "constants", "certify"),
    "kernel-check": ("assumptions", "constants", "kernel"),
    "semigroup-check": ("assumptions", "constants", "semigroup"),
    "resolvent-check": ("assumptions", "constants", "certify", "resolvent"),
    "suite": STAGES,
}


class StageAbort(Exception):
    """A check failed hard enough that later stages are meaningless."""


@dataclass
class VerificationReport:
    problem: dict
    assumptions: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    certificate: dict | None = None
    records: list[CheckRecord] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    stages_run: list[str] = field(default_factory=list)
    truncated_at: str | None = None
    error_kind: str | None = None
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error_kind is None and all(r.passed for r in self.records if r.applicable)

    def as_dict(self) -> dict:
        return {
            "tool": {"name": "ouident", "version": __version__},
            "problem": self.problem,
            "assumptions": self.assumptions,
            "constants": self.constants,
            "certificate": self.certificate,
            "records": [r.as_dict() for r in self.records],
            "metadata": self.metadata,
            "stages_run": self.stages_run,
            "truncated_at": self.truncated_at,
            "error_kind": self.error_kind,
            "error": self.error,
            "verdict": PASS if self.passed else FAIL,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"

    def to_table(self) -> str:
        lines = [f"config {self.problem['name']}  p={self.problem['p']:g}"]
        if self.constants:
            lines.append("constants  " + "  ".join(f"{k}={v:.6g}" for k, v in self.constants.items()))
        if self.certificate:
            c = self.certificate
            lines.append(f"gamma_A={c['gamma_A']:.10g}  method={c['method']}  passes={c['passes']}")
        w = max([len(r.name) for r in self.records] + [10])
        lines.append(f"{'check':<{w}}  {'status':<14}  {'lhs':>12}  {'rhs':>12}  {'margin':>10}")
        for r in self.records:
            def num(x):
                return f"{x:12.5g}" if x is not None else f"{'-':>12}"

            m = f"{r.margin:10.3g}" if r.margin is not None else f"{'-':>10}"
            lines.append(f"{r.name:<{w}}  {r.status:<14}  {num(r.lhs)}  {num(r.rhs)}  {m}")
        if self.truncated_at:
            lines.append(f"stopped after stage {self.truncated_at}: {self.error}")
        lines.append(f"verdict: {PASS if self.passed else FAIL}")
        return "\n".join(lines) + "\n"


def _status(ok: bool) -> str:
    return PASS if ok else FAIL


def _data(cfg: Config, rng: np.random.Generator, sigma_range=(0.5, 0.8)) -> SchwartzFunction:
    """Seeded test function centred near the origin."""
    return SchwartzFunction.random(rng, cfg.problem.d, cfg.problem.N, spread=0.25, sigma_range=sigma_range)


class _Runner:
    def __init__(self, cfg: Config, report: VerificationReport):
        self.cfg = cfg
        self.report = report
        self.problem = cfg.problem
        self.spec = GridSpec(self.problem.d, cfg.L, cfg.n)
        self.eig = None
        self.constants = None
        self.certs: dict = {}

    def add(self, rec: CheckRecord):
        self.report.records.append(rec)

    # -- stages ---------------------------------------------------------

    def assumptions(self):
        rep = check_assumptions(self.problem)
        self.report.assumptions = {
            k: {"ok": v.ok, "detail": v.detail, "witness": v.witness} for k, v in rep.verdicts().items()
        }
        for k, v in rep.verdicts().items():
            self.add(CheckRecord(f"assumption {k}", ANCHORS["assumptions"], status=_status(v.ok), detail=v.detail))
        hard = [k for k in ("A1", "A2", "A5") if not rep.verdicts()[k].ok]
        if hard:
            raise StageAbort(f"standing assumption {', '.join(hard)} violated")
        self.eig = eigenstructure(self.problem.A, self.problem.B)

    def constants_stage(self):
        c = spectral_constants(self.problem.A, self.problem.B)
        self.constants = c
        self.report.constants = {k: float(v) for k, v in c.as_dict().items()}
        ok = all(np.isfinite(v) for v in c.as_dict().values()) and c.a_1 >= 1 and c.a_min > 0
        self.add(CheckRecord("spectral constants finite, a_1 >= 1", ANCHORS["constants"],
                             c.a_1, 1.0, c.a_1 - 1.0, 0.0, _status(ok)))

    def _certify(self, p: float):
        if p not in self.certs:
            try:
                self.certs[p] = certify_gamma(self.problem.A, p, seed=self.cfg.seed)
            except CertificationError as err:
                self.certs[p] = err.certificate
        return self.certs[p]

    def certify(self):
        p = self.problem.p
        cert = self._certify(p)
        self.report.certificate = cert.as_dict()
        c = self.constants
        self.add(CheckRecord(f"A4 gamma_A > 0, p={p:g}", ANCHORS["A4"], cert.gamma_A, 0.0, cert.gamma_A, 0.0,
                             _status(cert.passes), f"method {cert.method}, residual {cert.residual:.2g}"))
        if not cert.passes:
            raise StageAbort(f"A4 fails at p={p:g}: gamma_A = {cert.gamma_A:.6g}")
        # gamma_A > 0  =>  beta_A >= gamma_A/(p-1)  =>  min Re sigma(A) >= beta_A
        min_re = float(np.min(np.linalg.eigvals(self.problem.A).real))
        self.add(upper_bound_record(f"implication chain gamma_A/(p-1) <= beta_A, p={p:g}", ANCHORS["A4"],
                                    cert.gamma_A / (p - 1), c.beta_A, 1e-9))
        self.add(upper_bound_record("implication chain beta_A <= min Re sigma(A)", ANCHORS["assumptions"],
                                    c.beta_A, min_re, 1e-9))

    def kernel(self):
        tol = self.cfg.tolerances
        suite = self.cfg.suites["kernel"]
        prob, eig, c = self.problem, self.eig, self.constants
        for t in suite["t"]:
            for k, key in ((0, "moment0"), (1, "moment1"), (2, "moment2")):
                got = moment_matrix(prob, eig, k, t).value
                err = float(np.max(np.abs(got - moment_identity(prob, k, t))))
                self.add(upper_bound_record(f"moment identity k={k}, t={t:g}", ANCHORS["moments"], err, tol[key], 0.0))
            for k in suite["orders"]:
                m = moment_abs(prob, eig, k, t)
                b = moment_bound(c, eig.kappaY, prob.d, k, t)
                self.add(upper_bound_record(f"moment bound k={k}, t={t:g}", ANCHORS["moment_bound"], m, b,
                                            tol["moment_bound"]))
        ts = np.geomspace(min(suite["t"]), max(suite["t"]), 6)
        for k in suite["orders"]:
            e = scaling_exponent(prob, eig, k, ts)
            self.add(upper_bound_record(f"moment scaling exponent k={k}", ANCHORS["moment_bound"],
                                        abs(e - k / 2), tol["exponent"], 0.0, f"fitted {e:.6f}, expected {k / 2:g}"))

    def semigroup(self):
        tol = self.cfg.tolerances
        suite = self.cfg.suites["semigroup"]
        prob, eig = self.problem, self.eig
        rng = np.random.default_rng(self.cfg.seed)
        plan = SemigroupPlan(prob, eig, self.spec)
        # wider data keep h |A| |k|^2 small enough over the h-ladder to see the asymptotic order
        phi = _data(self.cfg, rng, sigma_range=(0.8, 1.0))
        v = sample(phi, self.spec)
        rotating = bool(np.any(prob.S != 0))
        law_tol = tol["law_rotating"] if rotating else tol["law_static"]
        law = semigroup_law_check(plan, v, suite["t"], suite["s"])
        self.add(upper_bound_record(f"semigroup law t={suite['t']:g}, s={suite['s']:g}", ANCHORS["semigroup"],
                                    law, law_tol, 0.0, "rotating path" if rotating else "static path"))
        errs = [lp_norm(apply_T(plan, v, h) - v, 2) for h in sorted(suite["h"], reverse=True)]
        dec = all(b < a for a, b in zip(errs, errs[1:]))
        self.add(CheckRecord("strong continuity |T(h)phi - phi| decreasing", ANCHORS["semigroup"],
                             errs[-1], errs[0], None, None, _status(dec)))
        n, L = suite["generator_grid"]
        gspec = GridSpec(prob.d, float(L), int(n))
        gplan = SemigroupPlan(prob, eig, gspec)
        hs = list(suite["h"])
        defects = [generator_difference(prob, phi, gspec, h, plan=gplan).norm for h in hs]
        order = fitted_order(hs, defects)
        mono = all(b < a for a, b in zip(defects, defects[1:]))
        self.add(CheckRecord("generator defect fitted order", ANCHORS["generator"], order, tol["generator_order"],
                             order - tol["generator_order"], 0.0, _status(mono and order >= tol["generator_order"]),
                             "defects " + ", ".join(f"{d:.3g}" for d in defects)))

    def resolvent(self):
        cfg, tol = self.cfg, self.cfg.tolerances
        prob, eig, c = self.problem, self.eig, self.constants
        rng = np.random.default_rng(cfg.seed + 1)
        suite = cfg.suites["resolvent"]
        g = sample(_data(cfg, rng), self.spec)
        plan = SemigroupPlan(prob, eig, self.spec)
        gps = list(suite["gradient_p"])
        certs = {q: self._certify(q) for q in sorted(set(gps) | {prob.p})}
        qopts = dict(cfg.quadrature)
        meta = []
        for lam in cfg.lambdas:
            quad = LaplaceQuadSpec.for_problem(c, eig.kappaY, self.spec, lam, **qopts)
            sol = resolve(prob, eig, g, lam, quad=quad, plan=plan)
            meta.append({"lambda": [lam.real, lam.imag], **quad.as_dict()})
            self.add(upper_bound_record(f"Laplace tail bound, lambda={lam:g}", ANCHORS["resolvent_laplace"],
                                        sol.tail_bound, quad.tail_tol, 1e-12))
            for rec in estimate_report(prob, sol, c, certs, tol=tol["estimate"], gradient_ps=gps,
                                       residual_tol=tol["residual"]):
                self.add(rec)
            ratios = maximal_domain_ratios(prob, sol)
            ratio = ratios["equivalence_ratio"]
            self.add(CheckRecord(f"norm equivalence ratio, lambda={lam:g}", ANCHORS["maximal_domain"],
                                 ratio, None, None, None, _status(bool(np.isfinite(ratio) and ratio > 0)),
                                 "graph norm over W2p + drift + Bv norms"))
        self.report.metadata["laplace_quadrature"] = meta

        dsuite = cfg.suites.get("dissipativity")
        if dsuite:
            drng = np.random.default_rng(cfg.seed + 2)
            phis = [_data(cfg, drng) for _ in range(dsuite["samples"])]
            for q in dsuite["p"]:
                recs = [r for phi in phis for r in dissipativity_probe(prob, phi, self.spec, dsuite["lambdas"], q,
                                                                       tol["dissipativity"])]
                if not recs[0].applicable:
                    self.add(not_applicable(f"dissipativity, p={q:g}", ANCHORS["dissipativity"], recs[0].detail))
                    continue
                worst = min(recs, key=lambda r: r.margin)
                self.add(CheckRecord(f"dissipativity, p={q:g}, {len(recs)} probes", ANCHORS["dissipativity"],
                                     worst.lhs, worst.rhs, worst.margin, tol["dissipativity"],
                                     _status(all(r.passed for r in recs)), f"worst at {worst.name}"))

        isuite = cfg.suites.get("ibp")
        if isuite:
            irng = np.random.default_rng(cfg.seed + 3)
            phi = _data(cfg, irng)
            scale = float(np.max(np.abs(phi(self.spec.points().reshape(-1, prob.d)))))
            phi = phi * (1.0 / scale)
            shift = np.zeros(prob.N, dtype=complex)
            shift[0] = isuite["shift"]
            eta = SchwartzFunction.gaussian(np.zeros(prob.d), 1.0, {(0,) * prob.d: [1.0]})
            for q in isuite["p"]:
                res = ibp_inequality_check(prob.with_p(q), phi, shift, eta, (-cfg.L, cfg.L), q,
                                           v_floor=0.5 * (isuite["shift"] - 1.0), tol=tol["ibp"])
                ok = res.passed and (q < 2 or abs(res.margin) <= tol["ibp_equality"])
                self.add(CheckRecord(f"integration by parts inequality, p={q:g}", ANCHORS["ibp"], res.lhs, res.rhs,
                                     res.margin, tol["ibp"] if q < 2 else tol["ibp_equality"], _status(ok),
                                     "equality expected" if q >= 2 else "inequality"))


def run_suite(cfg: Config, stages=STAGES) -> VerificationReport:
    report = VerificationReport(problem=cfg.echo())
    report.metadata = {
        "grid": {"n": cfg.n, "L": cfg.L, "d": cfg.problem.d},
        "quadrature": dict(cfg.quadrature),
        "seed": cfg.seed,
        "tolerances": dict(cfg.tolerances),
    }
    run = _Runner(cfg, report)
    handlers = {
        "assumptions": run.assumptions,
        "constants": run.constants_stage,
        "certify": run.certify,
        "kernel": run.kernel,
        "semigroup": run.semigroup,
        "resolvent": run.resolvent,
    }
    for stage in STAGES:
        if stage not in stages:
            continue
        if stage in ("kernel", "semigroup", "resolvent") and stage not in cfg.suites:
            continue
        try:
            handlers[stage]()
        except StageAbort as err:
            report.stages_run.append(stage)
            report.truncated_at, report.error_kind, report.error = stage, None, str(err)
            break
        except ValueError as err:
            # precondition errors: unresolvable grid, lambda outside the half-plane, poor decay
            report.stages_run.append(stage)
            report.truncated_at, report.error_kind, report.error = stage, "precondition", str(err)
            report.records.append(CheckRecord(f"{stage} precondition", ANCHORS["plumbing"], status=FAIL,
                                              detail=str(err)))
            break
        report.stages_run.append(stage)
    return report
