#pragma once

#include <stdexcept>
#include <string>

namespace tabllm {

enum class errc {
    // dataset / schema
    missing_column,
    type_mismatch,
    unknown_category,
    unknown_class,
    empty_dataset,
    malformed_schema,
    malformed_csv,
    // folds
    too_few_samples,
    index_out_of_range,
    // serializer
    schema_violation,
    budget_too_small,
    // tokenizer
    malformed_vocab,
    malformed_merges,
    inconsistent_assets,
    unknown_id,
    bad_length,
    // numerics / model
    bad_axis,
    shape_mismatch,
    bad_config,
    shape_table_mismatch,
    unknown_tensor_name,
    truncated_file,
    // trainer / baselines
    bad_label,
    missing_gradient,
    empty_split,
    diverged_loss,
    bad_label_set,
    width_mismatch,
    degenerate_column,
    // evaluator
    single_class,
    incomplete_table,
    // client / io
    budget_exceeded,
    auth_failure,
    rate_limited,
    timeout,
    malformed_response,
    io_failure,
};

inline const char* to_string(errc c) {
    switch (c) {
        case errc::missing_column: return "MissingColumn";
        case errc::type_mismatch: return "TypeMismatch";
        case errc::unknown_category: return "UnknownCategory";
        case errc::unknown_class: return "UnknownClass";
        case errc::empty_dataset: return "EmptyDataset";
        case errc::malformed_schema: return "MalformedSchema";
        case errc::malformed_csv: return "MalformedCsv";
        case errc::too_few_samples: return "TooFewSamples";
        case errc::index_out_of_range: return "IndexOutOfRange";
        case errc::schema_violation: return "SchemaViolation";
        case errc::budget_too_small: return "BudgetTooSmall";
        case errc::malformed_vocab: return "MalformedVocab";
        case errc::malformed_merges: return "MalformedMerges";
        case errc::inconsistent_assets: return "InconsistentAssets";
        case errc::unknown_id: return "UnknownId";
        case errc::bad_length: return "BadLength";
        case errc::bad_axis: return "BadAxis";
        case errc::shape_mismatch: return "ShapeMismatch";
        case errc::bad_config: return "BadConfig";
        case errc::shape_table_mismatch: return "ShapeTableMismatch";
        case errc::unknown_tensor_name: return "UnknownTensorName";
        case errc::truncated_file: return "TruncatedFile";
        case errc::bad_label: return "BadLabel";
        case errc::missing_gradient: return "MissingGradient";
        case errc::empty_split: return "EmptySplit";
        case errc::diverged_loss: return "DivergedLoss";
        case errc::bad_label_set: return "BadLabelSet";
        case errc::width_mismatch: return "WidthMismatch";
        case errc::degenerate_column: return "DegenerateColumn";
        case errc::single_class: return "SingleClass";
        case errc::incomplete_table: return "IncompleteTable";
        case errc::budget_exceeded: return "BudgetExceeded";
        case errc::auth_failure: return "AuthFailure";
        case errc::rate_limited: return "RateLimited";
        case errc::timeout: return "Timeout";
        case errc::malformed_response: return "MalformedResponse";
        case errc::io_failure: return "IoFailure";
    }
    return "UnknownError";
}

class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    errc code() const { return code_; }

private:
    errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw Error(code, what); }

}  // namespace tabllm
