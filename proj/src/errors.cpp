#include "promptmut/errors.hpp"

namespace promptmut {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::schema: return "SchemaError";
        case ErrorCode::invariant: return "InvariantError";
        case ErrorCode::parse: return "ParseError";
        case ErrorCode::unknown_node: return "UnknownNodeError";
        case ErrorCode::no_op: return "NoOpError";
        case ErrorCode::missing_slot: return "MissingSlotError";
        case ErrorCode::dimension_mismatch: return "DimensionMismatchError";
        case ErrorCode::zero_vector: return "ZeroVectorError";
        case ErrorCode::client: return "ClientError";
        case ErrorCode::budget_exhausted: return "BudgetExhaustedError";
        case ErrorCode::domain: return "DomainError";
        case ErrorCode::incomplete_data: return "IncompleteDataError";
        case ErrorCode::degenerate_series: return "DegenerateSeriesError";
        case ErrorCode::zero_baseline: return "ZeroBaselineError";
        case ErrorCode::constant_input: return "ConstantInputError";
        case ErrorCode::degenerate_anova: return "DegenerateError";
        case ErrorCode::unbalanced_design: return "UnbalancedDesignError";
        case ErrorCode::count_too_small: return "CountTooSmallError";
        case ErrorCode::corrupt_store: return "CorruptStoreError";
        case ErrorCode::config: return "ConfigError";
    }
    return "Error";
}

}  // namespace promptmut
