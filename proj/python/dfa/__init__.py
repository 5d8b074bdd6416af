"""Spatial disease factor model."""

from ._dfa import (
    MISSING,
    ConfigError,
    DataError,
    SamplerError,
    count_discoveries,
    derive_seed,
    fit,
    generate_static,
    git_blob_hash,
    interpolation_weights,
    knn_edges,
    laplacian,
    mask_entries,
    predict,
    run_cli,
)

__all__ = [
    "MISSING",
    "ConfigError",
    "DataError",
    "SamplerError",
    "count_discoveries",
    "derive_seed",
    "fit",
    "generate_static",
    "git_blob_hash",
    "interpolation_weights",
    "knn_edges",
    "laplacian",
    "mask_entries",
    "predict",
    "run_cli",
]


def main(argv=None):
    import sys

    code, out, err = run_cli(list(sys.argv[1:] if argv is None else argv))
    sys.stdout.write(out)
    sys.stderr.write(err)
    return code
