# SPDX-License-Identifier: Apache-2.0
"""Python front end of the certrom library."""

from ._certrom import (
    Benchmark,
    InvalidInput,
    NumericalError,
    config_hash,
    default_config,
    dual_norm,
    error_study,
    normalize_config,
    optimize,
    pod_study,
    solve,
    trust_region,
)

__all__ = [
    "Benchmark",
    "InvalidInput",
    "NumericalError",
    "config_hash",
    "default_config",
    "dual_norm",
    "error_study",
    "normalize_config",
    "optimize",
    "pod_study",
    "solve",
    "trust_region",
]
