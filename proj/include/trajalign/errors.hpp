#pragma once

#include <stdexcept>
#include <string>

namespace trajalign {

/// Base of every error the engine raises. `kind()` is the stable,
/// machine-readable name written into CLI error records.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

    /// Throw a copy of this error, same dynamic type, with `prefix`
    /// prepended to the message.
    [[noreturn]] virtual void rethrow_with(const std::string& prefix) const {
        throw Error(kind_, prefix + what());
    }

private:
    std::string kind_;
};

#define TRAJALIGN_DEFINE_ERROR(Name)                                   \
    class Name : public Error {                                        \
    public:                                                            \
        explicit Name(const std::string& message) : Error(#Name, message) {} \
        [[noreturn]] void rethrow_with(const std::string& prefix) const override { \
            throw Name(prefix + what());                               \
        }                                                              \
    }

TRAJALIGN_DEFINE_ERROR(SchemaError);
TRAJALIGN_DEFINE_ERROR(InvariantError);
TRAJALIGN_DEFINE_ERROR(IndexError);
TRAJALIGN_DEFINE_ERROR(DepthError);
TRAJALIGN_DEFINE_ERROR(NonSerializableError);
TRAJALIGN_DEFINE_ERROR(PolicyError);
TRAJALIGN_DEFINE_ERROR(ZeroNormError);
TRAJALIGN_DEFINE_ERROR(DimensionError);
TRAJALIGN_DEFINE_ERROR(EncoderError);
TRAJALIGN_DEFINE_ERROR(ConfigError);
TRAJALIGN_DEFINE_ERROR(EmptyCorpusError);
TRAJALIGN_DEFINE_ERROR(MissingPlaceholderError);
TRAJALIGN_DEFINE_ERROR(NoScoreError);
TRAJALIGN_DEFINE_ERROR(ArityError);
TRAJALIGN_DEFINE_ERROR(ShapeError);
TRAJALIGN_DEFINE_ERROR(JudgeError);
TRAJALIGN_DEFINE_ERROR(EmptyLogError);
TRAJALIGN_DEFINE_ERROR(IoError);
TRAJALIGN_DEFINE_ERROR(DomainError);
TRAJALIGN_DEFINE_ERROR(PairingError);

#undef TRAJALIGN_DEFINE_ERROR

/// Run `f`, prefixing the message of any engine error it throws.
template <typename F>
auto with_context(const std::string& prefix, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Error& e) {
        e.rethrow_with(prefix);
    }
    throw Error("InternalError", "unreachable");
}

}  // namespace trajalign
