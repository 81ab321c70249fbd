#pragma once

#include <stdexcept>
#include <string>

namespace ktc {

enum class Errc {
    InvalidStars,
    NeutralExcluded,
    StratificationImpossible,
    FormatError,
    DuplicateToken,
    MissingDocument,
    EmptyVocabulary,
    TooFewVectors,
    ZeroNormVector,
    DimMismatch,
    DegenerateDiagonal,
    ManifestMismatch,
    DegenerateLabels,
    NotNormalized,
    InvalidConfig,
    IoError,
};

const char* errc_name(Errc c);

/// Error with a machine-readable code and an optional pipeline stage tag.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& msg)
        : std::runtime_error(msg), code_(code) {}

    Errc code() const noexcept { return code_; }
    const std::string& stage() const noexcept { return stage_; }
    void set_stage(std::string s) { stage_ = std::move(s); }

private:
    Errc code_;
    std::string stage_;
};

[[noreturn]] inline void raise(Errc c, const std::string& msg) {
    throw Error(c, msg);
}

} // namespace ktc
