#pragma once

#include <stdexcept>
#include <string>

namespace ens {

/// Base of every error thrown by the library. `kind()` is a stable tag that
/// ends up in evaluation reports and CLI messages.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define ENS_DEFINE_ERROR(Name)                                                \
    struct Name : Error {                                                     \
        explicit Name(const std::string& what) : Error(#Name, what) {}        \
    }

ENS_DEFINE_ERROR(FormatError);
ENS_DEFINE_ERROR(ShapeError);
ENS_DEFINE_ERROR(MissingArray);
ENS_DEFINE_ERROR(IoError);
ENS_DEFINE_ERROR(ParseError);
ENS_DEFINE_ERROR(InsufficientFrames);
ENS_DEFINE_ERROR(OrphanPrediction);
ENS_DEFINE_ERROR(MissingPrediction);
ENS_DEFINE_ERROR(NonFinitePrediction);
ENS_DEFINE_ERROR(AllSubscoresMissing);
ENS_DEFINE_ERROR(EmptyInput);
ENS_DEFINE_ERROR(InsufficientCorpus);
ENS_DEFINE_ERROR(SamplingExhausted);
ENS_DEFINE_ERROR(AllMasked);
ENS_DEFINE_ERROR(InvalidArgument);

#undef ENS_DEFINE_ERROR

} // namespace ens
