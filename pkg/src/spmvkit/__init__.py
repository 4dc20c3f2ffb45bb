"""Sparse matrix toolkit: storage formats, SpMV kernels, benchmarking, and
learned selection of the best format for a given matrix."""

from .bench import (
    BenchConfig,
    BenchRecord,
    bandwidth_estimate,
    bench_corpus,
    best_labels,
    read_records,
    run_bench,
    times_by_matrix,
    write_records,
)
from .coo import (
    CooMatrix,
    MatrixMarketError,
    canonicalize,
    coo_equal,
    dense_spmv_oracle,
    read_matrix_market,
    row_nnz_histogram,
    write_matrix_market,
)
from .features import (
    FEATURE_NAMES,
    FeatureVector,
    ScalingParams,
    apply_scaling,
    extract_features,
    fit_scaling,
    read_features,
    write_features,
)
from .formats import (
    ConversionError,
    Csr5Matrix,
    CsrMatrix,
    EllMatrix,
    FormatMatrix,
    FormatTag,
    HybMatrix,
    SellMatrix,
    convert,
    hyb_typical_k,
    to_coo,
    to_csr,
    to_csr5,
    to_ell,
    to_hyb,
    to_sell,
)
from .kernels import spmv, spmv_csr, spmv_csr5, spmv_ell, spmv_hyb, spmv_sell
from .model import (
    CvReport,
    DecisionTreeModel,
    LabeledSample,
    ModelIOError,
    assemble_training_set,
    cross_validate,
    load_model,
    predict,
    save_model,
    select_format,
    train_tree,
)

__version__ = "0.1.0"
