"""Generalized score matching for densities on general domains.

Modules:
    domain       domains, sections, truncated component-wise distances
    weights      h(phi) weight matrices and truncation policies
    ab_model     pairwise a-b exponential family models
    estimator    Gamma/g assembly, lasso fits and regularization paths
    sampler      Gibbs sampling on domains
    univariate   univariate truncated normal study
    experiments  support-recovery simulations
    cli          the ``genscore`` command
"""

__version__ = "0.1.0"

from .errors import (BoundarySingularityError, ConvergenceWarning, DomainError, GenscoreError,
                     RootIsolationError, SamplerError, SingularMatrixError, UnsupportedDomainError)
from .intervals import INF, Interval, IntervalUnion
from .domain import (Domain, FullSpace, Intersection, LqBall, LqBallComplement, NonNegOrthant,
                     PolyConstraint, ProductUnion, UnionOf, domain_from_json, g0_batch, g0_distance,
                     phi, phi_batch, section)
from .weights import Truncation, WeightSpec, weight_matrices
from .ab_model import ABModel, check_h_valid, check_normalizable
from .estimator import (GammaG, assemble, default_delta, fit, fit_path, fit_profiled,
                        fit_unpenalized, lambda_max)
from .sampler import SamplerConfig, gibbs_sample
