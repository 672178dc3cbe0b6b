"""Numerical laboratory for bisectional-curvature comparison geometry.

Potential-form Hermitian metrics on complex charts, curvature tensors by
nested finite differences, closed-form model spaces and cones, geodesic
distances by energy minimization, holomorphic-disk comparison reports,
and subharmonicity certificates, with a scenario-runner CLI on top.
"""

from .errors import (ConfigError, DomainExceeded, Disconnected, KahlerLabError,
                     NonConvergence, NonPositiveDefinite, SingularityTooClose,
                     Unsupported)
from .fields import (Ball, ComplexChart, HermitianMetricField, ScalarField,
                     flat_potential, metric_from_potential, real_to_z, z_to_real)
from .curvature import (CurvatureData, TangentPair, bianchi_check, bisectional,
                        bk_defect, curvature_tensor, hermitian_inner,
                        min_bk_defect)
from .models import (ConeSurface, ModelSpace, QuotientData, cone_distance,
                     dK_transform, link_quotient_distance, model_distance,
                     orbifold_cone, quotient_potential)
from .geodesy import (DiscretePath, DiskObstacle, DistanceSolution,
                      PlanarDomain, RectObstacle, chord_lower_bound,
                      domain_length_metric, geodesic_distance,
                      geodesic_distance_many, path_energy)
from .disks import (ComparisonReport, DiskEmbedding, QuadratureGrid,
                    annulus_defect, annulus_tail, area_density,
                    asymptotic_defect, comparison_defect, log_moment,
                    rprime_value, torsion_contraction, torsion_expected_defect,
                    torsion_metric, violation_disk)
from .psh import (ComplexLine, DiskSampler, PshVerdict, check_bk_lower,
                  check_bk_lower_set, disk_laplacian, k_threshold,
                  quotient_bk2_check, radial_potential_check)
from .cli import ScanResult, emit_plot_data, scan_disks

__version__ = "0.1.0"
