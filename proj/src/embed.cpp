#include "ktc/embed.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ktc/error.hpp"
#include "ktc/rng.hpp"
#include "ktc/simd.hpp"

namespace ktc {

void EmbeddingTable::rebuild_index() {
    index.clear();
    index.reserve(vocab.size());
    for (size_t i = 0; i < vocab.size(); ++i) index[vocab[i]] = i;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// log(sigmoid(x)) without overflow for large negative x.
double log_sigmoid(double x) {
    if (x >= 0.0) return -std::log1p(std::exp(-x));
    return x - std::log1p(std::exp(x));
}

} // namespace

double CbowModel::example_loss(std::span<const size_t> context, size_t target,
                               std::span<const size_t> negatives) const {
    if (context.empty()) return 0.0;
    const size_t d = static_cast<size_t>(dim);
    std::vector<double> mean(d, 0.0);
    for (size_t w : context) simd::axpy(1.0, in_vecs.data() + w * d, mean.data(), d);
    const double inv = 1.0 / static_cast<double>(context.size());
    for (double& v : mean) v *= inv;

    double loss = -log_sigmoid(simd::dot(out_vecs.data() + target * d, mean.data(), d));
    for (size_t neg : negatives)
        loss -= log_sigmoid(-simd::dot(out_vecs.data() + neg * d, mean.data(), d));
    return loss;
}

void CbowModel::accumulate_gradients(std::span<const size_t> context, size_t target,
                                     std::span<const size_t> negatives,
                                     std::vector<double>& grad_in,
                                     std::vector<double>& grad_out) const {
    if (context.empty()) return;
    const size_t d = static_cast<size_t>(dim);
    std::vector<double> mean(d, 0.0);
    for (size_t w : context) simd::axpy(1.0, in_vecs.data() + w * d, mean.data(), d);
    const double inv = 1.0 / static_cast<double>(context.size());
    for (double& v : mean) v *= inv;

    std::vector<double> mean_grad(d, 0.0);
    const auto visit = [&](size_t word, double label) {
        const double* u = out_vecs.data() + word * d;
        const double g = sigmoid(simd::dot(u, mean.data(), d)) - label;
        // dL/du = g * mean; dL/dmean += g * u
        simd::axpy(g, mean.data(), grad_out.data() + word * d, d);
        simd::axpy(g, u, mean_grad.data(), d);
    };
    visit(target, 1.0);
    for (size_t neg : negatives) visit(neg, 0.0);

    for (size_t w : context)
        simd::axpy(inv, mean_grad.data(), grad_in.data() + w * d, d);
}

double CbowModel::sgd_step(std::span<const size_t> context, size_t target,
                           std::span<const size_t> negatives, double lr) {
    if (context.empty()) return 0.0;
    const size_t d = static_cast<size_t>(dim);
    std::vector<double> mean(d, 0.0);
    for (size_t w : context) simd::axpy(1.0, in_vecs.data() + w * d, mean.data(), d);
    const double inv = 1.0 / static_cast<double>(context.size());
    for (double& v : mean) v *= inv;

    double loss = 0.0;
    std::vector<double> mean_grad(d, 0.0);
    const auto visit = [&](size_t word, double label) {
        double* u = out_vecs.data() + word * d;
        const double s = simd::dot(u, mean.data(), d);
        loss -= label > 0.5 ? log_sigmoid(s) : log_sigmoid(-s);
        const double g = sigmoid(s) - label;
        simd::axpy(g, u, mean_grad.data(), d);
        simd::axpy(-lr * g, mean.data(), u, d);
    };
    visit(target, 1.0);
    for (size_t neg : negatives) visit(neg, 0.0);

    const double scale = -lr * inv;
    for (size_t w : context) simd::axpy(scale, mean_grad.data(), in_vecs.data() + w * d, d);
    return loss;
}

namespace {

struct Vocabulary {
    std::vector<std::string> words;       // sorted by count desc, then word
    std::vector<int64_t> counts;
    std::unordered_map<std::string, size_t> index;
    int64_t total = 0;
};

Vocabulary build_vocabulary(const Corpus& corpus, int min_count) {
    std::unordered_map<std::string, int64_t> freq;
    for (const Review& r : corpus.reviews)
        for (const std::string& tok : preprocess(r.text)) freq[tok] += 1;

    Vocabulary v;
    for (const auto& [word, count] : freq)
        if (count >= min_count) v.words.push_back(word);
    if (v.words.empty())
        raise(Errc::EmptyVocabulary, "no token meets min_count=" + std::to_string(min_count));
    std::sort(v.words.begin(), v.words.end(), [&](const std::string& a, const std::string& b) {
        const int64_t ca = freq[a], cb = freq[b];
        if (ca != cb) return ca > cb;
        return a < b;
    });
    v.counts.reserve(v.words.size());
    for (size_t i = 0; i < v.words.size(); ++i) {
        v.index[v.words[i]] = i;
        v.counts.push_back(freq[v.words[i]]);
        v.total += v.counts.back();
    }
    return v;
}

// Cumulative unigram^0.75 distribution searched by bisection.
struct NegativeSampler {
    std::vector<double> cumulative;

    explicit NegativeSampler(const std::vector<int64_t>& counts) {
        cumulative.resize(counts.size());
        double acc = 0.0;
        for (size_t i = 0; i < counts.size(); ++i) {
            acc += std::pow(static_cast<double>(counts[i]), 0.75);
            cumulative[i] = acc;
        }
    }

    size_t draw(Rng& rng) const {
        const double u = rng.uniform() * cumulative.back();
        return static_cast<size_t>(
            std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    }
};

struct TrainExample {
    std::vector<size_t> context;
    size_t target;
};

// Subsample-filtered token index stream of one document.
std::vector<size_t> doc_stream(const TokenSeq& tokens, const Vocabulary& vocab,
                               double subsample_threshold, Rng& rng) {
    std::vector<size_t> stream;
    stream.reserve(tokens.size());
    for (const std::string& tok : tokens) {
        auto it = vocab.index.find(tok);
        if (it == vocab.index.end()) continue;
        if (subsample_threshold > 0.0) {
            const double f = static_cast<double>(vocab.counts[it->second]) /
                             static_cast<double>(vocab.total);
            const double keep =
                (std::sqrt(f / subsample_threshold) + 1.0) * subsample_threshold / f;
            if (keep < 1.0 && rng.uniform() >= keep) continue;
        }
        stream.push_back(it->second);
    }
    return stream;
}

} // namespace

EmbeddingTable train_cbow(const Corpus& corpus, const CbowConfig& config, CbowStats* stats) {
    if (config.dim < 1 || config.window < 1 || config.negatives < 1 || config.epochs < 1)
        raise(Errc::InvalidConfig, "cbow config out of range");

    const Vocabulary vocab = build_vocabulary(corpus, config.min_count);
    const size_t vs = vocab.words.size();
    const size_t d = static_cast<size_t>(config.dim);

    CbowModel model;
    model.dim = config.dim;
    model.vocab_size = vs;
    model.in_vecs.resize(vs * d);
    model.out_vecs.assign(vs * d, 0.0);
    {
        Rng init_rng(derive_seed(config.seed, "cbow-init"));
        for (double& v : model.in_vecs)
            v = (init_rng.uniform() - 0.5) / static_cast<double>(config.dim);
    }

    const NegativeSampler sampler(vocab.counts);

    // Total center-word updates, for the linear lr decay. Uses the
    // unsubsampled in-vocabulary token count as the canonical estimate.
    const double total_updates =
        static_cast<double>(vocab.total) * static_cast<double>(config.epochs);

    CbowStats local;
    local.vocab_size = vs;
    std::atomic<size_t> processed{0};

    // Trains the given review range for one epoch. Safe to run from several
    // workers on the shared model (lock-free hogwild mode) as well as from
    // the deterministic single-threaded path.
    const auto train_range = [&](size_t begin, size_t stride, Rng& rng, double& loss_sum,
                                 size_t& examples) {
        std::vector<size_t> context;
        std::vector<size_t> negatives;
        for (size_t ri = begin; ri < corpus.reviews.size(); ri += stride) {
            const std::vector<size_t> stream = doc_stream(
                preprocess(corpus.reviews[ri].text), vocab, config.subsample_threshold, rng);
            const ptrdiff_t len = static_cast<ptrdiff_t>(stream.size());
            for (ptrdiff_t pos = 0; pos < len; ++pos) {
                const double progress =
                    static_cast<double>(processed.fetch_add(1, std::memory_order_relaxed)) /
                    total_updates;
                const double lr = config.initial_lr * std::max(0.01, 1.0 - progress);

                context.clear();
                for (ptrdiff_t off = -config.window; off <= config.window; ++off) {
                    if (off == 0) continue;
                    const ptrdiff_t j = pos + off;
                    if (j < 0 || j >= len) continue;
                    context.push_back(stream[j]);
                }
                if (context.empty()) continue;

                const size_t target = stream[pos];
                negatives.clear();
                for (int nn = 0; nn < config.negatives; ++nn) {
                    size_t neg = sampler.draw(rng);
                    for (int tries = 0; neg == target && tries < 100; ++tries)
                        neg = sampler.draw(rng);
                    if (neg != target) negatives.push_back(neg);
                }

                loss_sum += model.sgd_step(context, target, negatives, lr);
                ++examples;
            }
        }
    };

    const int jobs = std::max(1, config.jobs);
    if (jobs == 1) {
        Rng rng(derive_seed(config.seed, "cbow-train"));
        for (int epoch = 0; epoch < config.epochs; ++epoch) {
            double epoch_loss = 0.0;
            size_t epoch_examples = 0;
            train_range(0, 1, rng, epoch_loss, epoch_examples);
            local.epoch_avg_loss.push_back(
                epoch_examples > 0 ? epoch_loss / static_cast<double>(epoch_examples) : 0.0);
            local.total_examples += epoch_examples;
        }
    } else {
        std::vector<Rng> rngs;
        for (int w = 0; w < jobs; ++w)
            rngs.emplace_back(derive_seed(config.seed, "cbow-worker-" + std::to_string(w)));
        for (int epoch = 0; epoch < config.epochs; ++epoch) {
            std::vector<double> losses(jobs, 0.0);
            std::vector<size_t> counts(jobs, 0);
            std::vector<std::thread> workers;
            for (int w = 0; w < jobs; ++w)
                workers.emplace_back([&, w] {
                    train_range(static_cast<size_t>(w), static_cast<size_t>(jobs), rngs[w],
                                losses[w], counts[w]);
                });
            for (auto& t : workers) t.join();
            double epoch_loss = 0.0;
            size_t epoch_examples = 0;
            for (int w = 0; w < jobs; ++w) {
                epoch_loss += losses[w];
                epoch_examples += counts[w];
            }
            local.epoch_avg_loss.push_back(
                epoch_examples > 0 ? epoch_loss / static_cast<double>(epoch_examples) : 0.0);
            local.total_examples += epoch_examples;
        }
    }
    if (stats) *stats = std::move(local);

    EmbeddingTable table;
    table.dim = config.dim;
    table.vocab = vocab.words;
    table.vectors.dim = config.dim;
    table.vectors.data = std::move(model.in_vecs);
    table.rebuild_index();
    return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::IoError, "cannot open embedding file: " + path.string());
    std::string header;
    if (!std::getline(in, header))
        raise(Errc::FormatError, "embedding file empty: " + path.string());
    std::istringstream hs(header);
    size_t vocab_size = 0;
    int dim = 0;
    if (!(hs >> vocab_size >> dim) || dim < 1)
        raise(Errc::FormatError, "bad embedding header: '" + header + "'");

    EmbeddingTable table;
    table.dim = dim;
    table.vectors.dim = dim;
    table.vocab.reserve(vocab_size);
    table.vectors.data.reserve(vocab_size * static_cast<size_t>(dim));

    std::string line;
    size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++row;
        if (row > vocab_size)
            raise(Errc::FormatError, path.string() + ": more rows than header declares");
        std::istringstream ls(line);
        std::string token;
        if (!(ls >> token))
            raise(Errc::FormatError, path.string() + ": blank embedding row " +
                                         std::to_string(row));
        if (!table.index.emplace(token, table.vocab.size()).second)
            raise(Errc::DuplicateToken, path.string() + ": duplicate token '" + token + "'");
        table.vocab.push_back(token);
        for (int j = 0; j < dim; ++j) {
            double v;
            if (!(ls >> v))
                raise(Errc::FormatError, path.string() + ": row '" + token + "' has fewer than " +
                                             std::to_string(dim) + " values");
            if (!std::isfinite(v))
                raise(Errc::FormatError, path.string() + ": non-finite value for '" + token + "'");
            table.vectors.data.push_back(v);
        }
        double extra;
        if (ls >> extra)
            raise(Errc::FormatError, path.string() + ": row '" + token + "' has more than " +
                                         std::to_string(dim) + " values");
    }
    if (table.vocab.size() != vocab_size)
        raise(Errc::FormatError, path.string() + ": header declares " +
                                     std::to_string(vocab_size) + " rows, found " +
                                     std::to_string(table.vocab.size()));
    return table;
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(Errc::IoError, "cannot write embedding file: " + path.string());
    out << table.vocab.size() << ' ' << table.dim << '\n';
    char buf[40];
    for (size_t i = 0; i < table.vocab.size(); ++i) {
        out << table.vocab[i];
        const double* v = table.vectors.row(i);
        for (int j = 0; j < table.dim; ++j) {
            std::snprintf(buf, sizeof(buf), " %.17g", v[j]);
            out << buf;
        }
        out << '\n';
    }
    if (!out) raise(Errc::IoError, "write failed: " + path.string());
}

std::vector<DocTokenVectors> load_contextual_dump(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::IoError, "cannot open contextual dump: " + path.string());
    std::vector<DocTokenVectors> docs;
    int dim = 0;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("doc_id") || !j.contains("vectors"))
            raise(Errc::FormatError, where + ": bad dump line");
        DocTokenVectors doc;
        doc.doc_id = j["doc_id"].get<std::string>();
        for (const auto& vec : j["vectors"]) {
            const std::vector<double> v = vec.get<std::vector<double>>();
            if (dim == 0) {
                dim = static_cast<int>(v.size());
                if (dim == 0) raise(Errc::FormatError, where + ": zero-dimensional vector");
            }
            if (static_cast<int>(v.size()) != dim)
                raise(Errc::FormatError, where + ": vector dim " + std::to_string(v.size()) +
                                             " != " + std::to_string(dim));
            if (doc.vectors.dim == 0) doc.vectors.dim = dim;
            doc.vectors.data.insert(doc.vectors.data.end(), v.begin(), v.end());
        }
        if (doc.vectors.dim == 0) doc.vectors.dim = dim > 0 ? dim : 1;
        docs.push_back(std::move(doc));
    }
    // Empty docs loaded before the first non-empty line get the file dim.
    for (auto& d : docs)
        if (d.vectors.count() == 0 && dim > 0) d.vectors.dim = dim;
    return docs;
}

void save_contextual_dump(const std::filesystem::path& path,
                          const std::vector<DocTokenVectors>& docs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(Errc::IoError, "cannot write contextual dump: " + path.string());
    for (const auto& doc : docs) {
        nlohmann::json vecs = nlohmann::json::array();
        for (size_t i = 0; i < doc.vectors.count(); ++i) {
            const double* v = doc.vectors.row(i);
            vecs.push_back(std::vector<double>(v, v + doc.vectors.dim));
        }
        nlohmann::json j;
        j["doc_id"] = doc.doc_id;
        j["vectors"] = vecs;
        out << j.dump() << '\n';
    }
    if (!out) raise(Errc::IoError, "write failed: " + path.string());
}

DocTokenVectors doc_vectors(const std::string& doc_id, const TokenSeq& tokens,
                            const EmbeddingTable& table, size_t* oov_skips) {
    DocTokenVectors out;
    out.doc_id = doc_id;
    out.vectors.dim = table.dim;
    size_t skips = 0;
    for (const std::string& tok : tokens) {
        auto it = table.index.find(tok);
        if (it == table.index.end()) {
            ++skips;
            continue;
        }
        out.vectors.append(table.vectors.row(it->second));
    }
    if (oov_skips) *oov_skips = skips;
    return out;
}

} // namespace ktc
