"""Ground-to-satellite camera localization toolkit.

Coarse stage: overhead images are warped into panorama layout by a polar
and a ground-plane projective transform, block gradient-orientation volumes
are extracted from both views, and circular correlation along the azimuth
axis jointly scores similarity and estimates orientation. Fine stage: the
retrieved overhead image is re-rendered at a grid of candidate projection
centers and orientations and scored against the query with SSIM. A seeded
synthetic scene generator provides geometrically exact ground truth for
end-to-end verification.
"""

from .img import bilinear_sample, load_png, luminance, resize, save_png, validate_image
from .transforms import (DEFAULT_CAM_HEIGHT, DEFAULT_MPP, PolarParams, ProjParams,
                         polar_coords, polar_transform, projective_coords,
                         projective_transform)
from .features import (extract, ground_descriptor, l2_normalize, make_descriptor,
                       descriptor_width, satellite_descriptor)
from .matching import (MatchResult, correlate_direct, correlate_fft,
                       estimate_orientation, rank_database, score_pair)
from .loss import (DEFAULT_ALPHA, exhaustive_triplet_count, frobenius_distance,
                   soft_margin, soft_margin_grad, total_loss)
from .finegrain import FineResult, SearchConfig, fine_localize, offset_to_meters, ssim
from .synth import Scene, ScenePose, fov_crop, make_dataset, render_panorama, render_satellite
from .evaluation import (DbFormatError, DescriptorDB, RetrievalResult,
                         bench_correlation, distance_recall, orientation_accuracy,
                         overall, recall_at_k)

__version__ = "0.1.0"
