"""Inequality reports, statistical verdicts, and (de)serialization.

A report is normalized by its ``direction``: "le" claims LHS <= RHS and
"ge" claims LHS >= RHS.  The margin is signed so that positive means the
inequality holds with room to spare.  Verdicts:

    violated      the claimed inequality fails by more than z * SE + slack
    inconclusive  the confidence band is too wide to certify anything
    verified      otherwise
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

VERIFIED = "verified"
VIOLATED = "violated"
INCONCLUSIVE = "inconclusive"

# CI wider than half the problem scale cannot exclude a gross violation
_WIDE_CI_FRACTION = 0.5


def decide(lhs: float, rhs: float, *, direction: str = "le", se_total: float = 0.0,
           slack: float = 0.0, z: float = 4.0) -> tuple[str, float]:
    """Return (verdict, margin) for the claimed inequality."""
    if direction == "le":
        gap = lhs - rhs
        margin = rhs - lhs
    elif direction == "ge":
        gap = rhs - lhs
        margin = lhs - rhs
    else:
        raise ValueError(f"direction must be 'le' or 'ge', got {direction!r}")
    if not (math.isfinite(lhs) and math.isfinite(rhs) and math.isfinite(se_total)):
        return INCONCLUSIVE, margin
    scale = 1.0 + abs(lhs) + abs(rhs)
    if gap > z * se_total + slack:
        return VIOLATED, margin
    if z * se_total > _WIDE_CI_FRACTION * scale:
        return INCONCLUSIVE, margin
    return VERIFIED, margin


@dataclass
class InequalityReport:
    inequality: str
    point: object
    time: float | None
    lhs: float
    rhs: float
    se_total: float
    verdict: str
    margin: float
    direction: str = "le"
    provenance: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)


def make_report(inequality, point, time, lhs, rhs, *, direction="le",
                se_total=0.0, slack=0.0, z=4.0, provenance=None) -> InequalityReport:
    verdict, margin = decide(lhs, rhs, direction=direction, se_total=se_total,
                             slack=slack, z=z)
    prov = dict(provenance or {})
    prov.setdefault("slack", slack)
    prov.setdefault("z", z)
    return InequalityReport(inequality=inequality, point=point, time=time,
                            lhs=float(lhs), rhs=float(rhs), se_total=float(se_total),
                            verdict=verdict, margin=float(margin),
                            direction=direction, provenance=prov)


def quadrature_slack(lhs: float, rhs: float) -> float:
    return 1e-8 * (1.0 + abs(lhs) + abs(rhs))


def fd_slack(lhs: float, rhs: float, exact_derivatives: bool) -> float:
    rate = 1e-4 if exact_derivatives else 1e-2
    return rate * (1.0 + abs(lhs) + abs(rhs))


# ---------------------------------------------------------------------------
# bundles
# ---------------------------------------------------------------------------

def bundle(scenario: str, config: dict, reports: list[InequalityReport]) -> dict:
    counts = {VERIFIED: 0, VIOLATED: 0, INCONCLUSIVE: 0}
    families: dict[str, int] = {}
    for r in reports:
        counts[r.verdict] += 1
        families[r.inequality] = families.get(r.inequality, 0) + 1
    return {
        "scenario": scenario,
        "config": config,
        "summary": {
            "rows": len(reports),
            "verdicts": counts,
            "families": dict(sorted(families.items())),
        },
        "reports": [r.as_dict() for r in reports],
    }


def bundle_to_json(b: dict) -> str:
    return json.dumps(b, sort_keys=True, indent=2) + "\n"


def bundle_from_json(text: str) -> dict:
    return json.loads(text)


def bundle_to_csv(b: dict) -> str:
    out = io.StringIO()
    w = csv.writer(out)
    w.writerow(["inequality", "point", "t", "lhs", "rhs", "se", "verdict"])
    for r in b["reports"]:
        w.writerow([r["inequality"], json.dumps(r["point"], sort_keys=True),
                    r["time"], repr(r["lhs"]), repr(r["rhs"]),
                    repr(r["se_total"]), r["verdict"]])
    return out.getvalue()


def violations(b: dict) -> int:
    return b["summary"]["verdicts"][VIOLATED]
