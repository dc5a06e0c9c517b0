"""3D shape classification through spectral descriptors, collaborative
graph coding, discriminative projection, and a linear one-vs-all SVM."""

from . import errors
from .coding import (
    CodeVector,
    CodingMatrix,
    Dictionary,
    build_coding_matrix,
    default_ridge_lambda,
    nnls_code,
    nnls_solve,
    ridge_code,
)
from .evaluation import (
    EvaluationReport,
    LabeledDataset,
    PipelineConfig,
    SplitProtocol,
    evaluate,
    fit_pipeline,
    run_pipeline,
    split_dataset,
    sweep_dimension,
)
from .mesh import (
    TriangleMesh,
    ValidationSummary,
    euler_characteristic,
    generate_shape,
    parse_off,
    scale_mesh,
    serialize_off,
    validate_mesh,
)
from .projection import (
    ProjectionMatrix,
    ScatterPair,
    local_scatter,
    project,
    scatter_pair,
    solve_projection,
    total_scatter,
)
from .spectral import (
    LaplaceOperator,
    SpectralDescriptor,
    Spectrum,
    assemble_lbo,
    descriptor_for_mesh,
    gps,
    normalize,
    shape_dna,
    smallest_eigenpairs,
)
from .svm import (
    LinearOvaModel,
    TrainConfig,
    decision_values,
    predict,
    predict_columns,
    train_ova,
)

__version__ = "0.1.0"
