"""Physics-constrained refinement of lateral displacement fields for ultrasound elastography."""

__version__ = "0.1.0"

from .epr import (DEFAULT_BOUNDS, EprField, FeasibilityBounds, FeasibilityMask, PictureLossReport, compute_epr,
                  epr_smoothness_loss, feasibility_mask, picture_data_loss, picture_loss)
from .errors import DegenerateStatisticsError, DimensionError, ElastoRefineError, FormatError, ParameterError
from .grid import (DisplacementField, Grid2D, GridGeometry, StrainPair, compute_strains, gaussian_filter,
                   gradient_axial, gradient_lateral)
from .known_ops import (ClipperConfig, GuoConfig, RefinementTrace, guo_refine, kpicture_refine,
                        poisson_clipper)
from .metrics import (EprHistogram, RoiSpec, RoiStats, cnr, epr_histogram, incompressibility_residual,
                      roi_stats, sr)
from .phantom import Inclusion, PhantomSpec, generate, perturb_epr
