"""Classical reconstructions: least squares (CGLS) and total variation."""

from ghostkit.solvers.linear import (
    CglsConfig,
    CglsResult,
    NoiseDecomposition,
    PartitionPlan,
    SubDataset,
    cgls,
    cgls_reconstruct,
    make_partition_plan,
    nullspace_probe,
    permuted_splits,
    split_realizations,
    split_sizes,
    sub_reconstruct_all,
)
from ghostkit.solvers.variational import (
    VariationalConfig,
    VariationalResult,
    tv_min_reconstruct,
    tv_minimize,
    total_variation,
)

__all__ = [
    "CglsConfig",
    "CglsResult",
    "NoiseDecomposition",
    "PartitionPlan",
    "SubDataset",
    "VariationalConfig",
    "VariationalResult",
    "cgls",
    "cgls_reconstruct",
    "make_partition_plan",
    "nullspace_probe",
    "permuted_splits",
    "split_realizations",
    "split_sizes",
    "sub_reconstruct_all",
    "total_variation",
    "tv_min_reconstruct",
    "tv_minimize",
]
