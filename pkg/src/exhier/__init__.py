"""Finite hierarchies, spinal decompositions, and sampling representations
of exchangeable hierarchies, with exact oracles and statistical checks."""

from .hierarchy import (
    FiniteHierarchy,
    HierarchyShape,
    LeafLabeledTree,
    binary_array,
    enumerate_hierarchies,
    enumerate_shapes,
    extension_shape_counts,
    extensions,
    from_tree,
    mrca,
    mrca_closure,
    parent,
    random_hierarchy,
    restrict,
    shape,
    shape_successors,
    to_tree,
)
from .realtree import (
    LineBreakTree,
    Segment,
    SparsePoint,
    WeightedTree,
    derived_hierarchy,
    fringe_contains,
    meet_point,
    on_special_path,
    project,
)
from .spinal import (
    CompositionArray,
    PiecewiseDistribution,
    SpinalVariables,
    check_order_consistency,
    estimate_spinal_variable,
    exact_spinal_value,
    left_uniformize,
    spinal_composition,
    spinal_variables,
    validate_composition,
)
from .weights import (
    WeightTree,
    WeightTreeMixture,
    WeightTreeOracle,
    ehpf_exact,
    ehpf_from_samples,
    check_addition_rule,
    eppf_addition_check,
    eppf_exact,
    eppf_from_samples,
    prob_exact,
    sample_from_ehpf,
    sample_hierarchy,
    xi_map,
    WeightTreeEmbedding,
)
from .generators import (
    CombOracle,
    DyadicOracle,
    GeneratorSpec,
    TripleOracle,
    check_oracle_consistency,
    crt_linebreak_tree,
    dyadic_spinal_atom_law,
)
from .definetti import (
    SpineIndexing,
    build_sample_point,
    build_tree,
    aux_hierarchy_exact,
    aux_hierarchy_prefix,
    check_distributional_equality,
    reconstruct,
    restricted_hierarchy,
)
from .analysis import (
    CombPartition,
    TestReport,
    atom_mass_estimate,
    chi_square_shapes,
    comb_partition,
)
from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"
