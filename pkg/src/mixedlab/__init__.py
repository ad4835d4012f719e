"""mixedlab: a desk-scale numerical laboratory for mixed-norm Lebesgue,
mixed Morrey, and block function spaces on uniform grids."""

from .grid import (
    CubeFamily,
    GridCube,
    GridFunction,
    enumerate_cubes,
    indicator,
    integrate,
    read_gridfn,
    restrict,
    same_geometry,
    simple_approximate,
    write_gridfn,
)
from .norms import (
    ExponentTuple,
    Weight,
    ap_constant,
    bmo_norm,
    convexified_norm,
    default_family,
    mean_oscillation,
    mixed_norm,
    morrey_norm,
    pairing,
    weighted_lp_norm,
)
from .duality import (
    BlockDecomposition,
    BlockTerm,
    DualityReport,
    SolverParams,
    block_norm_upper,
    canonicalize_decomposition,
    dual_norm_lower,
    duality_gap,
    truncate,
)
from .operators import (
    AnnularDecomposition,
    KernelSpec,
    bmo_probe,
    commutator,
    frac_integral,
    maximal,
    maximal_block_image,
    sharp_bound_constant,
    sharp_maximal,
    support_cube,
)
from .lab import (
    SuiteConfig,
    SuiteReport,
    emit_plotdata,
    fractional_target,
    generate,
    run_suite,
    suite_names,
)

__version__ = "0.1.0"

__all__ = [
    "AnnularDecomposition",
    "BlockDecomposition",
    "BlockTerm",
    "CubeFamily",
    "DualityReport",
    "ExponentTuple",
    "GridCube",
    "GridFunction",
    "KernelSpec",
    "SolverParams",
    "SuiteConfig",
    "SuiteReport",
    "Weight",
    "ap_constant",
    "block_norm_upper",
    "bmo_norm",
    "bmo_probe",
    "canonicalize_decomposition",
    "commutator",
    "convexified_norm",
    "default_family",
    "dual_norm_lower",
    "duality_gap",
    "emit_plotdata",
    "enumerate_cubes",
    "fractional_target",
    "frac_integral",
    "generate",
    "indicator",
    "integrate",
    "maximal",
    "maximal_block_image",
    "mean_oscillation",
    "mixed_norm",
    "morrey_norm",
    "pairing",
    "read_gridfn",
    "restrict",
    "run_suite",
    "same_geometry",
    "sharp_bound_constant",
    "sharp_maximal",
    "simple_approximate",
    "suite_names",
    "support_cube",
    "truncate",
    "weighted_lp_norm",
    "write_gridfn",
]
