"""Maximum-entropy product measures, exact uniform sampling and sandwich
couplings for sets of graphs that are symmetric under an edge partition."""

from .analysis import (
    DiagnosticsReport,
    concentration_bound,
    condition_number,
    diagnose,
    entropy_decay_bound,
    samp_flip_failure_bound,
    resolution,
    sandwich_delta,
    thickness,
    unimodality_distance,
    well_conditioned_parts,
)
from .constraints import (
    Box,
    Budget,
    ConstraintSpec,
    Intersection,
    LinearSystem,
    Spectral,
    branching_matrix,
    spec_from_dict,
    spectral_norm,
    verify_convexity,
)
from .coupling import CouplingBatch, CouplingOutcome, Sandwich, couple_samp_flip, empirical_sandwich_rate, sandwich_sample
from .exceptions import (
    CapacityError,
    EmptySetError,
    InvalidInputError,
    InvalidStateError,
    InvalidStrategyError,
    SymGraphError,
)
from .graphspace import (
    EdgePartition,
    Graph,
    Partition,
    balanced_partition,
    edge_profile,
    edge_profiles,
    partition_from_costs,
    partition_from_groups,
)
from .maxent import MaxEntSolution, ent, maximize_entropy, p_entropy, product_matrix, stirling_gap
from .oracle import ExplicitProfiles, enumerate_set, exact_profile_distribution, total_variation
from .sampler import BudgetDP, MetropolisProfileChain, ProfileDistribution, sample_profile, sample_uniform
from .streams import RandomStream

__version__ = "0.1.0"
