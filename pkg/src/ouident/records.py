"""Check records shared by the estimate checklists and the verification report."""
from __future__ import annotations

from dataclasses import dataclass

PASS, FAIL, NA = "pass", "fail", "not-applicable"


@dataclass
class CheckRecord:
    name: str
    anchor: str
    lhs: float | None = None
    rhs: float | None = None
    margin: float | None = None
    tolerance: float | None = None
    status: str = NA
    detail: str = ""

    @property
    def applicable(self) -> bool:
        return self.status != NA

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def as_dict(self) -> dict:
        def num(x):
            return None if x is None else float(x)

        return {
            "name": self.name,
            "anchor": self.anchor,
            "lhs": num(self.lhs),
            "rhs": num(self.rhs),
            "margin": num(self.margin),
            "tolerance": num(self.tolerance),
            "status": self.status,
            "detail": self.detail,
        }


def upper_bound_record(name: str, anchor: str, lhs: float, rhs: float, tol: float, detail: str = "") -> CheckRecord:
    """lhs <= rhs with relative margin (rhs - lhs)/|rhs| >= -tol."""
    margin = (rhs - lhs) / abs(rhs) if rhs else (0.0 if lhs == 0 else -float("inf"))
    return CheckRecord(name, anchor, lhs, rhs, margin, tol, PASS if margin >= -tol else FAIL, detail)


def not_applicable(name: str, anchor: str, why: str) -> CheckRecord:
    return CheckRecord(name, anchor, status=NA, detail=why)


# descriptive anchors; README carries the cross-reference table
ANCHORS = {
    "assumptions": "standing assumptions A1-A5",
    "constants": "spectral constants a_min..b_0, beta_B",
    "A4": "Lp-dissipativity condition A4",
    "moments": "kernel moment identities",
    "moment_bound": "kernel absolute-moment bound",
    "semigroup": "heat kernel properties and semigroup law",
    "generator": "generator equals L_infty on Schwartz functions",
    "resolvent_laplace": "resolvent as Laplace transform with estimate",
    "resolvent_dissipative": "Lp resolvent estimate under A4",
    "gradient": "gradient estimate for 1 < p <= 2",
    "dissipativity": "Lp-dissipativity of L_infty",
    "ibp": "integration by parts inequality",
    "maximal_domain": "maximal domain and drift estimate",
    "plumbing": "plumbing",
}
