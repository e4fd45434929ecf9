"""Entailment-maximal synthesis of prenex-DNF first-order formulas from
finite structures, with clause-first search-space splitting and ordered
template slices for incremental pruning."""

from .backend import HAVE_COMPILED, backend_name
from .errors import (
    DeadlockError,
    ForceError,
    GuardExceeded,
    ParseError,
    PreconditionError,
    SignatureError,
)
from .logic import (
    EXISTS,
    FORALL,
    CandidateEvaluator,
    Cube,
    Formula,
    Literal,
    Relation,
    Signature,
    Sort,
    Structure,
    Variable,
    canonical_clause,
    canonicalize,
    cube_of,
    entails_syntactic,
    evaluate,
    format_formula,
    is_tautology,
    make_signature,
    make_structure,
    normalize_formula,
    true_on_all,
)
from .space import (
    SearchSpec,
    SliceParams,
    SlicedTemplate,
    enumerate_params,
    enumerate_slice,
    raw_candidate_count,
    slice_size_upper_bound,
    slices_of,
)
from .slicing import (
    ClauseFilter,
    ClauseSet,
    SliceOrder,
    dnf_candidate_filter,
    schedule_slices,
    slice_order,
    split_clause_dnf,
)
from .synthesis import (
    PruningStore,
    RuleSet,
    SynthesisResult,
    brute_force_oracle,
    filter_entailed_clauses,
    synthesize,
    synthesize_slice,
)

__version__ = "0.1.0"
