#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace promptmut {

// Machine-readable error codes, surfaced verbatim on the CLI diagnostic stream.
enum class ErrorCode {
    schema,
    invariant,
    parse,
    unknown_node,
    no_op,
    missing_slot,
    dimension_mismatch,
    zero_vector,
    client,
    budget_exhausted,
    domain,
    incomplete_data,
    degenerate_series,
    zero_baseline,
    constant_input,
    degenerate_anova,
    unbalanced_design,
    count_too_small,
    corrupt_store,
    config,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

#define PROMPTMUT_DEFINE_ERROR(Name, code_value)                      \
    struct Name : Error {                                             \
        explicit Name(const std::string& m) : Error(code_value, m) {} \
    }

PROMPTMUT_DEFINE_ERROR(SchemaError, ErrorCode::schema);
PROMPTMUT_DEFINE_ERROR(InvariantError, ErrorCode::invariant);
PROMPTMUT_DEFINE_ERROR(ParseError, ErrorCode::parse);
PROMPTMUT_DEFINE_ERROR(UnknownNodeError, ErrorCode::unknown_node);
PROMPTMUT_DEFINE_ERROR(NoOpError, ErrorCode::no_op);
PROMPTMUT_DEFINE_ERROR(MissingSlotError, ErrorCode::missing_slot);
PROMPTMUT_DEFINE_ERROR(DimensionMismatchError, ErrorCode::dimension_mismatch);
PROMPTMUT_DEFINE_ERROR(ZeroVectorError, ErrorCode::zero_vector);
PROMPTMUT_DEFINE_ERROR(ClientError, ErrorCode::client);
PROMPTMUT_DEFINE_ERROR(BudgetExhaustedError, ErrorCode::budget_exhausted);
PROMPTMUT_DEFINE_ERROR(DomainError, ErrorCode::domain);
PROMPTMUT_DEFINE_ERROR(IncompleteDataError, ErrorCode::incomplete_data);
PROMPTMUT_DEFINE_ERROR(DegenerateSeriesError, ErrorCode::degenerate_series);
PROMPTMUT_DEFINE_ERROR(ZeroBaselineError, ErrorCode::zero_baseline);
PROMPTMUT_DEFINE_ERROR(ConstantInputError, ErrorCode::constant_input);
PROMPTMUT_DEFINE_ERROR(DegenerateError, ErrorCode::degenerate_anova);
PROMPTMUT_DEFINE_ERROR(UnbalancedDesignError, ErrorCode::unbalanced_design);
PROMPTMUT_DEFINE_ERROR(CountTooSmallError, ErrorCode::count_too_small);
PROMPTMUT_DEFINE_ERROR(CorruptStoreError, ErrorCode::corrupt_store);
PROMPTMUT_DEFINE_ERROR(ConfigError, ErrorCode::config);

#undef PROMPTMUT_DEFINE_ERROR

}  // namespace promptmut
