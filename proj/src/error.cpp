#include "ktc/error.hpp"

namespace ktc {

const char* errc_name(Errc c) {
    switch (c) {
    case Errc::InvalidStars: return "InvalidStars";
    case Errc::NeutralExcluded: return "NeutralExcluded";
    case Errc::StratificationImpossible: return "StratificationImpossible";
    case Errc::FormatError: return "FormatError";
    case Errc::DuplicateToken: return "DuplicateToken";
    case Errc::MissingDocument: return "MissingDocument";
    case Errc::EmptyVocabulary: return "EmptyVocabulary";
    case Errc::TooFewVectors: return "TooFewVectors";
    case Errc::ZeroNormVector: return "ZeroNormVector";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::DegenerateDiagonal: return "DegenerateDiagonal";
    case Errc::ManifestMismatch: return "ManifestMismatch";
    case Errc::DegenerateLabels: return "DegenerateLabels";
    case Errc::NotNormalized: return "NotNormalized";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::IoError: return "IoError";
    }
    return "UnknownError";
}

} // namespace ktc
