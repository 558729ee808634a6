"""opgt: operator-space tensor norms, form decompositions, circular systems
and Schur multipliers on matrix algebras, at desk scale."""

from .linalg import op_norm, kron, psd_check, matrix_to_json, matrix_from_json
from .opspace import (
    OperatorSpace,
    TensorRep,
    min_norm,
    row_quantity,
    col_quantity,
    weighted_quantity,
)
from .haagerup import (
    HNormResult,
    haagerup_norm,
    transposed_haagerup_norm,
    balance_representation,
    grid_descent_oracle,
)
from .gtforms import (
    BilinearForm,
    JcbEstimate,
    CbNormResult,
    StateQuadruple,
    Decomposition,
    RCFactorization,
    jcb_norm_estimate,
    cb_form_norm,
    verify_gt_inequalities,
    find_states,
    decompose_form,
    factor_through_rc,
    quadruple_from_decomposition,
    validate_state_bound,
    sampled_dual_lower_bound,
    trace_form,
    random_form,
)
from .fock import (
    FockSpace,
    FockOperator,
    left_creation,
    right_creation,
    circular,
    dual_circular,
    check_double_commutation,
    vacuum_pairing,
    circular_sum_bound,
    verify_evaluation_chain,
)
from .schur import (
    BoundedSplit,
    RankOneDominator,
    bounded_split_optimal,
    constructive_split,
    rank_one_dominator,
    trace_class_dominator_to_vectors,
    geometric_mean_form,
    averaging_projection,
    multiplier_form,
    multiplier_trace_pairing_norm,
)
from .ohmaps import (
    OHMap,
    OHCertificate,
    associated_form,
    cb_bound_estimate,
    find_oh_state,
    validate_oh_certificate,
    oh_converse_bound,
    interp_split,
    interp_bound_report,
    log_bound_experiment,
)

__version__ = "0.1.0"
