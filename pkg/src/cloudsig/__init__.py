"""cloudsig: orientation-free geometric signatures for 3D point clouds.

A cloud's per-point neighborhoods become symmetric 3x3 descriptor
tensors; their eigenvalues split into line/surface/point saliency
likelihoods; the saliency simplex projects into a fixed reference
triangle, giving a compact 2D signature image. Two clouds are compared
through entropy distributions, signature images, and class compositions,
with no registration step.
"""

__version__ = "0.1.0"

from .cloud import (
    PointCloud,
    ScaleRecord,
    SemanticScheme,
    class_distribution,
    downsample_uniform,
    load_class_counts,
    load_cloud,
    normalize,
    parse_scheme,
    save_cloud,
)
from .descriptors import (
    DescriptorKind,
    DescriptorTensor,
    anisotropic_diffuse,
    ball_vote_tensor,
    covariance_tensor,
    eigen_sym3,
    eigvals_sym3,
    saliency,
    saliency_from_eigvals,
)
from .errors import (
    BinningError,
    CloudSigError,
    NotSupportedError,
    ParseError,
    ShapeError,
    ValidationError,
    VocabularyError,
)
from .index import NeighborhoodSpec, SpatialIndex, build_index
from .metrics import (
    ComparisonReport,
    Histogram,
    class_kl_sym,
    class_l1,
    compare,
    d_bd_img,
    d_emd_img,
    d_emd_info,
    emd_1d,
    entropy_histogram,
    ssim,
)
from .multiscale import (
    CloudGeometry,
    PointGeometry,
    ScaleRange,
    aggregate_multiscale,
    entropy_geom,
    optimal_scale,
    run_mode,
    scale_sweep,
    write_geometry_csv,
)
from .pipeline import RunConfig, compare_clouds, process_cloud
from .signature import (
    ReferenceTriangle,
    Signature,
    barycentric_project,
    load_signature,
    render_augmented,
    render_geometric,
    save_signature,
    triangle_mask,
)
from .synth import (
    make_blob,
    make_deforestation_pair,
    make_line,
    make_mixed,
    make_plane,
    make_scene,
    scene_scheme,
)
