#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ktc {

enum class Polarity { Negative, Positive };

inline const char* polarity_label(Polarity p) {
    return p == Polarity::Positive ? "POSITIVE" : "NEGATIVE";
}

/// One labeled text sample. `stars` is present for review corpora and
/// absent for generic (topic-style) corpora; when present, the label is
/// derived from it.
struct Review {
    std::string id;
    std::string text;
    std::optional<int> stars;
    std::string label;
};

struct Corpus {
    std::vector<Review> reviews;
    std::vector<std::string> label_set; // distinct labels, sorted

    size_t size() const { return reviews.size(); }
    size_t label_index(std::string_view label) const;
};

using TokenSeq = std::vector<std::string>;

/// 4-5 stars -> POSITIVE, 1-2 -> NEGATIVE. 3 stars is the excluded neutral
/// band (NeutralExcluded); anything else is InvalidStars.
Polarity label_from_stars(int stars);

/// Lowercases (full Unicode simple mappings) and splits on separators:
/// Unicode categories P*, S*, Z* and whitespace. Digits stay; hyphens and
/// apostrophes split tokens. Invalid UTF-8 bytes act as separators.
TokenSeq preprocess(std::string_view text);

/// Tokens joined with single spaces; the document string the string-kernel
/// and bag-of-embeddings stages operate on.
std::string join_tokens(const TokenSeq& tokens);

struct CorpusLoadStats {
    size_t loaded = 0;
    size_t neutral_skipped = 0;
};

/// JSONL, one review per line: {"id","text","stars"?,"label"?}. The label is
/// derived from stars when absent; 3-star lines are counted and skipped.
Corpus load_corpus_jsonl(const std::filesystem::path& path, CorpusLoadStats* stats = nullptr);
void save_corpus_jsonl(const std::filesystem::path& path, const Corpus& corpus);

/// Stratified split: each label is split independently, test size rounded
/// down from (1 - train_fraction). Deterministic in `seed`; review order
/// within each part follows the input corpus.
std::pair<Corpus, Corpus> split_train_test(const Corpus& corpus, double train_fraction,
                                           uint64_t seed);

struct StatsReport {
    struct PerLabel {
        size_t samples = 0;
        size_t words = 0;
    };
    std::map<std::string, PerLabel> per_label;
    size_t total_samples = 0;
    size_t total_words = 0;
    double mean_words_per_sample = 0.0;
};

StatsReport corpus_stats(const Corpus& corpus);
std::string stats_to_json(const StatsReport& report);

} // namespace ktc
