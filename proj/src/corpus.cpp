#include "ktc/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "ktc/error.hpp"
#include "ktc/rng.hpp"

namespace ktc {

namespace {

#include "unicode_tables.inc"

bool is_separator(uint32_t cp) {
    size_t lo = 0, hi = std::size(kSeparatorRanges);
    while (lo < hi) {
        size_t mid = (lo + hi) / 2;
        if (cp < kSeparatorRanges[mid][0])
            hi = mid;
        else if (cp > kSeparatorRanges[mid][1])
            lo = mid + 1;
        else
            return true;
    }
    return false;
}

uint32_t to_lower_cp(uint32_t cp) {
    size_t lo = 0, hi = std::size(kLowercasePairs);
    while (lo < hi) {
        size_t mid = (lo + hi) / 2;
        if (cp < kLowercasePairs[mid][0])
            hi = mid;
        else if (cp > kLowercasePairs[mid][0])
            lo = mid + 1;
        else
            return kLowercasePairs[mid][1];
    }
    return cp;
}

// Decodes one UTF-8 scalar value at `i`, advancing it. Malformed bytes
// decode as U+FFFD (a separator), consuming a single byte.
uint32_t decode_utf8(std::string_view s, size_t& i) {
    const auto byte = [&](size_t k) { return static_cast<unsigned char>(s[k]); };
    const unsigned char b0 = byte(i);
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    int len;
    uint32_t cp;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        ++i;
        return 0xFFFD;
    }
    if (i + len > s.size()) {
        ++i;
        return 0xFFFD;
    }
    for (int k = 1; k < len; ++k) {
        const unsigned char bk = byte(i + k);
        if ((bk & 0xC0) != 0x80) {
            ++i;
            return 0xFFFD;
        }
        cp = (cp << 6) | (bk & 0x3F);
    }
    static constexpr uint32_t kMinForLen[5] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < kMinForLen[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
        ++i;
        return 0xFFFD;
    }
    i += len;
    return cp;
}

void encode_utf8(uint32_t cp, std::string& out) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

bool is_blank(std::string_view text) {
    size_t i = 0;
    while (i < text.size()) {
        if (!is_separator(decode_utf8(text, i))) return false;
    }
    return true;
}

} // namespace

size_t Corpus::label_index(std::string_view label) const {
    auto it = std::find(label_set.begin(), label_set.end(), label);
    if (it == label_set.end())
        raise(Errc::FormatError, "label not in label set: " + std::string(label));
    return static_cast<size_t>(it - label_set.begin());
}

Polarity label_from_stars(int stars) {
    switch (stars) {
    case 1:
    case 2:
        return Polarity::Negative;
    case 4:
    case 5:
        return Polarity::Positive;
    case 3:
        raise(Errc::NeutralExcluded, "3-star reviews are neutral and excluded");
    default:
        raise(Errc::InvalidStars, "star rating out of range: " + std::to_string(stars));
    }
}

TokenSeq preprocess(std::string_view text) {
    TokenSeq tokens;
    std::string cur;
    size_t i = 0;
    while (i < text.size()) {
        const uint32_t cp = decode_utf8(text, i);
        if (is_separator(cp)) {
            if (!cur.empty()) {
                tokens.push_back(std::move(cur));
                cur.clear();
            }
        } else {
            encode_utf8(to_lower_cp(cp), cur);
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

std::string join_tokens(const TokenSeq& tokens) {
    std::string out;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

namespace {

void finalize_label_set(Corpus& corpus) {
    std::unordered_set<std::string> seen;
    corpus.label_set.clear();
    for (const Review& r : corpus.reviews)
        if (seen.insert(r.label).second) corpus.label_set.push_back(r.label);
    std::sort(corpus.label_set.begin(), corpus.label_set.end());
}

} // namespace

Corpus load_corpus_jsonl(const std::filesystem::path& path, CorpusLoadStats* stats) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::IoError, "cannot open corpus file: " + path.string());

    Corpus corpus;
    CorpusLoadStats local;
    std::unordered_set<std::string> ids;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            raise(Errc::FormatError, where + ": not a JSON object");
        Review r;
        if (!j.contains("id") || !j.contains("text"))
            raise(Errc::FormatError, where + ": missing id or text");
        r.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
        r.text = j["text"].get<std::string>();
        if (is_blank(r.text)) raise(Errc::FormatError, where + ": empty text");
        if (!ids.insert(r.id).second)
            raise(Errc::FormatError, where + ": duplicate review id '" + r.id + "'");
        if (j.contains("stars") && !j["stars"].is_null()) {
            const int stars = j["stars"].get<int>();
            if (stars == 3) {
                ++local.neutral_skipped;
                continue;
            }
            r.stars = stars;
            const std::string derived = polarity_label(label_from_stars(stars));
            if (j.contains("label") && !j["label"].is_null()) {
                r.label = j["label"].is_string() ? j["label"].get<std::string>()
                                                 : j["label"].dump();
                if (r.label != derived)
                    raise(Errc::FormatError,
                          where + ": label '" + r.label + "' inconsistent with stars");
            } else {
                r.label = derived;
            }
        } else if (j.contains("label") && !j["label"].is_null()) {
            r.label = j["label"].is_string() ? j["label"].get<std::string>()
                                             : j["label"].dump();
        } else {
            raise(Errc::FormatError, where + ": neither stars nor label present");
        }
        corpus.reviews.push_back(std::move(r));
        ++local.loaded;
    }
    finalize_label_set(corpus);
    if (stats) *stats = local;
    return corpus;
}

void save_corpus_jsonl(const std::filesystem::path& path, const Corpus& corpus) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(Errc::IoError, "cannot write corpus file: " + path.string());
    for (const Review& r : corpus.reviews) {
        nlohmann::json j;
        j["id"] = r.id;
        j["text"] = r.text;
        if (r.stars) j["stars"] = *r.stars;
        j["label"] = r.label;
        out << j.dump() << '\n';
    }
    if (!out) raise(Errc::IoError, "write failed: " + path.string());
}

std::pair<Corpus, Corpus> split_train_test(const Corpus& corpus, double train_fraction,
                                           uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        raise(Errc::InvalidConfig, "train fraction must be in (0, 1)");

    std::unordered_map<std::string, std::vector<size_t>> by_label;
    for (size_t i = 0; i < corpus.reviews.size(); ++i)
        by_label[corpus.reviews[i].label].push_back(i);

    Rng rng(seed);
    std::vector<bool> in_train(corpus.reviews.size(), false);
    for (const std::string& label : corpus.label_set) {
        auto& idx = by_label[label];
        if (idx.size() < 2)
            raise(Errc::StratificationImpossible,
                  "label '" + label + "' has fewer than 2 samples");
        rng.shuffle(idx);
        const size_t n_test = static_cast<size_t>(
            static_cast<double>(idx.size()) * (1.0 - train_fraction));
        for (size_t i = n_test; i < idx.size(); ++i) in_train[idx[i]] = true;
    }

    Corpus train, test;
    for (size_t i = 0; i < corpus.reviews.size(); ++i)
        (in_train[i] ? train : test).reviews.push_back(corpus.reviews[i]);
    finalize_label_set(train);
    finalize_label_set(test);
    return {std::move(train), std::move(test)};
}

StatsReport corpus_stats(const Corpus& corpus) {
    StatsReport report;
    for (const Review& r : corpus.reviews) {
        const size_t words = preprocess(r.text).size();
        auto& pl = report.per_label[r.label];
        pl.samples += 1;
        pl.words += words;
        report.total_samples += 1;
        report.total_words += words;
    }
    if (report.total_samples > 0)
        report.mean_words_per_sample =
            static_cast<double>(report.total_words) / static_cast<double>(report.total_samples);
    return report;
}

std::string stats_to_json(const StatsReport& report) {
    nlohmann::json j;
    j["total_samples"] = report.total_samples;
    j["total_words"] = report.total_words;
    j["mean_words_per_sample"] = report.mean_words_per_sample;
    nlohmann::json labels = nlohmann::json::object();
    for (const auto& [label, pl] : report.per_label) {
        labels[label] = {{"samples", pl.samples}, {"words", pl.words}};
    }
    j["per_label"] = labels;
    return j.dump(2);
}

} // namespace ktc
