"""Convolutional sparse coding toolkit.

Images are synthesized as strided transposed convolutions of sparse
representation tensors with small dictionaries of atoms; cascades of such
dictionaries form multi-layer models.  The package covers the forward model
(synthesize/adjoint), three sparsification rules with their projections,
pursuit solvers, cascade utilities, single-image denoising by sparse
coefficient fitting, dictionary learning, and binary file formats, all
deterministic under an explicit counter-based RNG.
"""

__version__ = "0.1.0"

from .containers import (
    file_sha256,
    quantize_u8,
    read_cscd,
    read_csct,
    read_image,
    write_cscd,
    write_csct,
    write_image,
)
from .dictionary import (
    ConvDictionary,
    DictGeometry,
    adjoint,
    export_atom_grid,
    geometry_for_output,
    geometry_for_representation,
    normalize_atoms,
    random_dictionary,
    synthesize,
)
from .dip import (
    BestShot,
    DenoiseConfig,
    DenoiseRun,
    dct_dictionary,
    denoise,
    learn_dictionary,
)
from .errors import (
    CascadeGeometryError,
    ContainerFormatError,
    DivergenceError,
    DomainError,
    GeometryError,
    ShapeError,
)
from .mlcsc import (
    CascadeReport,
    LayerCheck,
    MlCscModel,
    SparseSample,
    cascade_representations,
    effective_dictionary,
    sample_sparse,
    synthesize_cascade,
    validate_cascade,
)
from .pursuit import (
    PursuitConfig,
    PursuitTrace,
    estimate_lipschitz,
    iht,
    ista,
    layered_thresholding,
    trace_to_csv,
)
from .rng import Rng
from .sparsify import (
    L0Global,
    L0InfNeedle,
    L1Penalty,
    SparsityReport,
    SparsityRule,
    l1_penalty,
    project_l0_global,
    project_l0inf_needle,
    report_heat_image,
    report_to_csv,
    soft_threshold,
    sparsity_report,
)
from .tensor import DTYPE, add_awgn, as_tensor3, inner, mse, psnr, tensor3

__all__ = [
    "__version__",
    "BestShot",
    "CascadeGeometryError",
    "CascadeReport",
    "ContainerFormatError",
    "ConvDictionary",
    "DTYPE",
    "DenoiseConfig",
    "DenoiseRun",
    "DictGeometry",
    "DivergenceError",
    "DomainError",
    "GeometryError",
    "L0Global",
    "L0InfNeedle",
    "L1Penalty",
    "LayerCheck",
    "MlCscModel",
    "PursuitConfig",
    "PursuitTrace",
    "Rng",
    "ShapeError",
    "SparseSample",
    "SparsityReport",
    "SparsityRule",
    "adjoint",
    "add_awgn",
    "as_tensor3",
    "cascade_representations",
    "dct_dictionary",
    "denoise",
    "effective_dictionary",
    "estimate_lipschitz",
    "export_atom_grid",
    "file_sha256",
    "geometry_for_output",
    "geometry_for_representation",
    "iht",
    "inner",
    "ista",
    "l1_penalty",
    "layered_thresholding",
    "learn_dictionary",
    "mse",
    "normalize_atoms",
    "project_l0_global",
    "project_l0inf_needle",
    "psnr",
    "quantize_u8",
    "random_dictionary",
    "read_cscd",
    "read_csct",
    "read_image",
    "report_heat_image",
    "report_to_csv",
    "sample_sparse",
    "soft_threshold",
    "sparsity_report",
    "synthesize",
    "synthesize_cascade",
    "tensor3",
    "trace_to_csv",
    "validate_cascade",
    "write_cscd",
    "write_csct",
    "write_image",
]
