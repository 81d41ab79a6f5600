#pragma once

#include <stdexcept>
#include <string>

namespace rsflow {

// Every failure surfaced by the library derives from Error; kind() drives
// the CLI exit code.
class Error : public std::runtime_error {
public:
    enum class Kind { Shape, Range, InvalidEdit, DegenerateInput, BatchTooSmall,
                      Condition, Usage, Generation, UndefinedRate, Config,
                      Divergence, Format, Io };

    Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

#define RSFLOW_DEFINE_ERROR(Name, K)                                                   \
    class Name : public Error {                                                        \
    public:                                                                            \
        explicit Name(const std::string& what) : Error(Kind::K, what) {}               \
    };

RSFLOW_DEFINE_ERROR(ShapeError, Shape)
RSFLOW_DEFINE_ERROR(RangeError, Range)
RSFLOW_DEFINE_ERROR(InvalidEditError, InvalidEdit)
RSFLOW_DEFINE_ERROR(DegenerateInputError, DegenerateInput)
RSFLOW_DEFINE_ERROR(BatchTooSmallError, BatchTooSmall)
RSFLOW_DEFINE_ERROR(ConditionError, Condition)
RSFLOW_DEFINE_ERROR(UsageError, Usage)
RSFLOW_DEFINE_ERROR(GenerationError, Generation)
RSFLOW_DEFINE_ERROR(UndefinedRateError, UndefinedRate)
RSFLOW_DEFINE_ERROR(ConfigError, Config)
RSFLOW_DEFINE_ERROR(DivergenceError, Divergence)
RSFLOW_DEFINE_ERROR(FormatError, Format)
RSFLOW_DEFINE_ERROR(IoError, Io)

#undef RSFLOW_DEFINE_ERROR

}  // namespace rsflow
