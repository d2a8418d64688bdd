"""kolmodiff: simulation and numerical verification for Kolmogorov-type
hypoelliptic diffusions.

Subpackages by concern:

    fields      scalar test fields on product spaces, string-addressable
    geometry    Euclidean / sphere / hyperboloid / Heisenberg kernels
    gamma       generators and (generalized) carre du champ operators
    semigroup   exact Gaussian semigroup and quadrature-grade inequality checks
    sim         geodesic random walks, fiber lifts, Monte Carlo estimators
    coupling    synchronous and parallel-transport couplings, contraction rates
    verifier    inequality campaigns, verdicts, reports, scenario driver
"""

from . import coupling, fields, geometry, reports, semigroup, sim, verifier
from . import gamma  # noqa: F401  (submodule; operators live one level down)
from .fields import ProductPoint, ScalarField, field_from_id
from .gamma import (GammaParams, GeneratorSpec, apply_generator, flat_kolmogorov,
                    heisenberg_lift, relativistic)
from .geometry import from_id as geometry_from_id
from .reports import InequalityReport, bundle_from_json, bundle_to_csv, bundle_to_json
from .semigroup import (FlatKolmogorovKernel, QuadratureRule, default_rule,
                        gauss_hermite, semigroup_apply, semigroup_grad,
                        wang_harnack_constant)
from .sim import SemigroupEstimate, SimConfig, mc_gradient, mc_semigroup
from .verifier import RunConfig, default_config, emit_report, run_suite

__version__ = "0.1.0"

__all__ = [
    "coupling", "fields", "gamma", "geometry", "reports", "semigroup", "sim",
    "verifier",
    "ProductPoint", "ScalarField", "field_from_id",
    "GammaParams", "GeneratorSpec", "apply_generator", "flat_kolmogorov",
    "heisenberg_lift", "relativistic", "geometry_from_id",
    "InequalityReport", "bundle_from_json", "bundle_to_csv", "bundle_to_json",
    "FlatKolmogorovKernel", "QuadratureRule", "default_rule", "gauss_hermite",
    "semigroup_apply", "semigroup_grad", "wang_harnack_constant",
    "SemigroupEstimate", "SimConfig", "mc_gradient", "mc_semigroup",
    "RunConfig", "default_config", "emit_report", "run_suite",
]
