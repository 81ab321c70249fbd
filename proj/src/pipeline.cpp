#include "ktc/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "ktc/bowe.hpp"
#include "ktc/corpus.hpp"
#include "ktc/error.hpp"
#include "ktc/hisk.hpp"
#include "ktc/rng.hpp"

namespace ktc {

namespace {

constexpr const char* kCacheFormatVersion = "ktc-cache-v1";

class Hasher {
public:
    Hasher() { mix(kCacheFormatVersion); }

    void mix(std::string_view s) {
        mix_bytes(s.data(), s.size());
        mix_byte(0x1f); // field separator
    }

    void mix_file(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) raise(Errc::IoError, "cannot open input for hashing: " + path.string());
        char buf[1 << 16];
        while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
            mix_bytes(buf, static_cast<size_t>(in.gcount()));
        mix_byte(0x1f);
    }

    std::string hex() const {
        static const char* digits = "0123456789abcdef";
        std::string out(16, '0');
        for (int i = 0; i < 16; ++i) out[i] = digits[(h_ >> (60 - 4 * i)) & 0xF];
        return out;
    }

private:
    void mix_bytes(const char* data, size_t n) {
        for (size_t i = 0; i < n; ++i) mix_byte(static_cast<unsigned char>(data[i]));
    }
    void mix_byte(unsigned char b) {
        h_ ^= b;
        h_ *= 0x100000001b3ull;
    }
    uint64_t h_ = 0xcbf29ce484222325ull;
};

struct StageContext {
    const RunConfig& config;
    std::map<std::string, std::string>& artifacts;

    std::filesystem::path artifact_path(const std::string& stage, const std::string& key,
                                        const std::string& ext) const {
        return config.cache_dir / (stage + "-" + key + ext);
    }

    // Returns true when the artifact already exists (cache hit) and records
    // it in the manifest either way.
    bool lookup(const std::string& stage, const std::filesystem::path& path) {
        artifacts[stage] = path.string();
        return std::filesystem::exists(path);
    }
};

template <class Fn>
auto run_stage(const std::string& stage, Fn&& fn) {
    try {
        return fn();
    } catch (Error& e) {
        if (e.stage().empty()) e.set_stage(stage);
        throw;
    }
}

struct PreparedDocs {
    std::vector<std::string> ids;
    std::vector<std::string> joined; // space-joined preprocessed tokens
    std::vector<TokenSeq> tokens;
};

PreparedDocs prepare_docs(const Corpus& corpus) {
    PreparedDocs out;
    out.ids.reserve(corpus.size());
    out.joined.reserve(corpus.size());
    out.tokens.reserve(corpus.size());
    for (const Review& r : corpus.reviews) {
        out.ids.push_back(r.id);
        out.tokens.push_back(preprocess(r.text));
        out.joined.push_back(join_tokens(out.tokens.back()));
    }
    return out;
}

std::vector<size_t> class_indices(const Corpus& corpus,
                                  const std::vector<std::string>& label_set) {
    std::unordered_map<std::string, size_t> index;
    for (size_t i = 0; i < label_set.size(); ++i) index[label_set[i]] = i;
    std::vector<size_t> y;
    y.reserve(corpus.size());
    for (const Review& r : corpus.reviews) {
        auto it = index.find(r.label);
        if (it == index.end())
            raise(Errc::FormatError, "label '" + r.label + "' missing from label set");
        y.push_back(it->second);
    }
    return y;
}

std::vector<std::string> union_label_set(const Corpus& a, const Corpus& b) {
    std::vector<std::string> labels = a.label_set;
    labels.insert(labels.end(), b.label_set.begin(), b.label_set.end());
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    return labels;
}

std::string ngrams_key(const std::vector<int>& ngrams) {
    std::string s;
    for (int n : ngrams) s += std::to_string(n) + ",";
    return s;
}

} // namespace

RunConfig RunConfig::from_table(const toml::Table& t) {
    RunConfig c;
    c.corpus_train = t.get_string("corpus.train", "");
    c.corpus_test = t.get_string("corpus.test", "");
    c.corpus_single = t.get_string("corpus.path", "");
    c.train_fraction = t.get_double("corpus.fraction", 0.8);

    const std::string method = t.get_string("method", "hisk");
    if (method == "hisk")
        c.method = PipelineMethod::Hisk;
    else if (method == "bowe")
        c.method = PipelineMethod::Bowe;
    else if (method == "hisk+bowe" || method == "hisk_bowe")
        c.method = PipelineMethod::HiskPlusBowe;
    else
        raise(Errc::InvalidConfig, "unknown method: " + method);

    if (t.contains("hisk.ngrams")) {
        c.ngrams.clear();
        for (int64_t n : t.get_int_array("hisk.ngrams")) c.ngrams.push_back(static_cast<int>(n));
        if (c.ngrams.empty()) raise(Errc::InvalidConfig, "hisk.ngrams empty");
    }

    const std::string source = t.get_string("embedding.source", "cbow");
    if (source == "cbow")
        c.embedding_source = EmbeddingSource::CbowTrain;
    else if (source == "static")
        c.embedding_source = EmbeddingSource::StaticFile;
    else if (source == "contextual")
        c.embedding_source = EmbeddingSource::ContextualDump;
    else
        raise(Errc::InvalidConfig, "unknown embedding source: " + source);
    c.embedding_path = t.get_string("embedding.path", "");
    c.cbow.dim = static_cast<int>(t.get_int("embedding.dim", 300));
    c.cbow.window = static_cast<int>(t.get_int("embedding.window", 5));
    c.cbow.negatives = static_cast<int>(t.get_int("embedding.negatives", 5));
    c.cbow.epochs = static_cast<int>(t.get_int("embedding.epochs", 5));
    c.cbow.min_count = static_cast<int>(t.get_int("embedding.min_count", 5));
    c.cbow.initial_lr = t.get_double("embedding.initial_lr", 0.025);
    c.cbow.subsample_threshold = t.get_double("embedding.subsample_threshold", 1e-3);

    const std::string cluster = t.get_string("cluster.method", "som");
    if (cluster == "kmeans")
        c.cluster_method = ClusterMethod::KMeans;
    else if (cluster == "som")
        c.cluster_method = ClusterMethod::Som;
    else
        raise(Errc::InvalidConfig, "unknown cluster method: " + cluster);
    c.k = static_cast<int>(t.get_int("cluster.k", 500));
    c.som.k = c.k;
    c.som.grid_rows = static_cast<int>(t.get_int("cluster.grid_rows", 0));
    c.som.grid_cols = static_cast<int>(t.get_int("cluster.grid_cols", 0));
    c.som.learning_rate = t.get_double("cluster.learning_rate", 0.25);
    c.som.epochs = static_cast<int>(t.get_int("cluster.epochs", 200));
    c.som.radius_start = t.get_double("cluster.radius_start", -1.0);
    c.som.radius_end = t.get_double("cluster.radius_end", 0.5);
    c.subsample_cap = static_cast<size_t>(t.get_int("cluster.subsample_cap", 2000000));

    c.C = t.get_double("C", 1000.0);
    c.normalize = t.get_bool("normalize", true);

    const std::string protocol = t.get_string("protocol", "train_test");
    if (protocol == "train_test")
        c.protocol = EvalProtocol::TrainTest;
    else if (protocol == "kfold" || protocol == "kfold_cv")
        c.protocol = EvalProtocol::KFoldCv;
    else
        raise(Errc::InvalidConfig, "unknown protocol: " + protocol);
    c.folds = static_cast<int>(t.get_int("folds", 10));

    c.seed = static_cast<uint64_t>(t.get_int("seed", 1));
    c.jobs = static_cast<int>(t.get_int("jobs", 1));
    c.cache_dir = t.get_string("cache_dir", "ktc-cache");
    return c;
}

namespace {

// BOWE stage output: one histogram set per corpus part.
struct BoweArtifacts {
    std::vector<BoweHistogram> train;
    std::vector<BoweHistogram> test; // empty for kfold runs
};

std::vector<DocTokenVectors> docvecs_from_table(const PreparedDocs& docs,
                                                const EmbeddingTable& table) {
    std::vector<DocTokenVectors> out;
    out.reserve(docs.ids.size());
    for (size_t i = 0; i < docs.ids.size(); ++i)
        out.push_back(doc_vectors(docs.ids[i], docs.tokens[i], table));
    return out;
}

std::vector<DocTokenVectors> docvecs_from_dump(const std::vector<std::string>& ids,
                                               const std::vector<DocTokenVectors>& dump) {
    std::unordered_map<std::string, const DocTokenVectors*> by_id;
    for (const auto& d : dump) by_id[d.doc_id] = &d;
    std::vector<DocTokenVectors> out;
    out.reserve(ids.size());
    for (const std::string& id : ids) {
        auto it = by_id.find(id);
        if (it == by_id.end())
            raise(Errc::MissingDocument, "contextual dump has no document '" + id + "'");
        out.push_back(*it->second);
    }
    return out;
}

VecSet gather_pool(const std::vector<DocTokenVectors>& docs) {
    VecSet pool;
    for (const auto& d : docs) {
        if (d.vectors.count() == 0) continue;
        if (pool.dim == 0) pool.dim = d.vectors.dim;
        if (pool.dim != d.vectors.dim)
            raise(Errc::DimMismatch, "inconsistent token vector dims across documents");
        pool.data.insert(pool.data.end(), d.vectors.data.begin(), d.vectors.data.end());
    }
    if (pool.dim == 0) raise(Errc::EmptyVocabulary, "no token vectors in training documents");
    return pool;
}

} // namespace

RunResult run_pipeline(const RunConfig& config) {
    RunResult result;
    StageContext ctx{config, result.artifacts};
    std::filesystem::create_directories(config.cache_dir);

    // --- corpus stage ---------------------------------------------------
    Corpus train, test;
    bool have_test = false;
    run_stage("corpus", [&]() -> int {
        if (!config.corpus_single.empty()) {
            Hasher h;
            h.mix("split");
            h.mix_file(config.corpus_single);
            h.mix(std::to_string(config.train_fraction));
            h.mix(std::to_string(derive_seed(config.seed, "split")));
            const auto train_path = ctx.artifact_path("corpus-train", h.hex(), ".jsonl");
            const auto test_path = ctx.artifact_path("corpus-test", h.hex(), ".jsonl");
            const bool hit_train = ctx.lookup("corpus-train", train_path);
            const bool hit_test = ctx.lookup("corpus-test", test_path);
            if (hit_train && hit_test) {
                train = load_corpus_jsonl(train_path);
                test = load_corpus_jsonl(test_path);
            } else {
                const Corpus all = load_corpus_jsonl(config.corpus_single);
                std::tie(train, test) =
                    split_train_test(all, config.train_fraction, derive_seed(config.seed, "split"));
                save_corpus_jsonl(train_path, train);
                save_corpus_jsonl(test_path, test);
            }
            have_test = true;
        } else if (!config.corpus_train.empty()) {
            train = load_corpus_jsonl(config.corpus_train);
            if (!config.corpus_test.empty()) {
                test = load_corpus_jsonl(config.corpus_test);
                have_test = true;
            }
        } else {
            raise(Errc::InvalidConfig, "no corpus configured (corpus.path or corpus.train)");
        }
        if (config.protocol == EvalProtocol::TrainTest && !have_test)
            raise(Errc::InvalidConfig, "train_test protocol needs a test corpus or a split");
        return 0;
    });

    // For k-fold CV every provided sample forms one pool.
    if (config.protocol == EvalProtocol::KFoldCv && have_test) {
        std::unordered_set<std::string> seen;
        for (const Review& r : train.reviews) seen.insert(r.id);
        for (const Review& r : test.reviews) {
            if (!seen.insert(r.id).second)
                raise(Errc::FormatError, "duplicate id across train/test: " + r.id);
            train.reviews.push_back(r);
        }
        Corpus merged;
        merged.reviews = std::move(train.reviews);
        train = std::move(merged);
        std::vector<std::string> labels;
        {
            std::unordered_set<std::string> distinct;
            for (const Review& r : train.reviews) distinct.insert(r.label);
            labels.assign(distinct.begin(), distinct.end());
            std::sort(labels.begin(), labels.end());
        }
        train.label_set = std::move(labels);
        test = Corpus{};
        have_test = false;
    }

    const bool train_test = config.protocol == EvalProtocol::TrainTest;
    const PreparedDocs train_docs = prepare_docs(train);
    const PreparedDocs test_docs = prepare_docs(test);
    const std::vector<std::string> label_set =
        train_test ? union_label_set(train, test) : train.label_set;

    const std::string corpus_key = [&] {
        Hasher h;
        h.mix("corpus-key");
        for (const Review& r : train.reviews) {
            h.mix(r.id);
            h.mix(r.text);
            h.mix(r.label);
        }
        for (const Review& r : test.reviews) {
            h.mix(r.id);
            h.mix(r.text);
            h.mix(r.label);
        }
        return h.hex();
    }();

    const bool want_hisk = config.method != PipelineMethod::Bowe;
    const bool want_bowe = config.method != PipelineMethod::Hisk;

    // --- string-kernel stage ---------------------------------------------
    KernelMatrix hisk_square, hisk_block;
    if (want_hisk) {
        run_stage("hisk", [&]() -> int {
            Hasher h;
            h.mix("hisk");
            h.mix(corpus_key);
            h.mix(ngrams_key(config.ngrams));
            h.mix(config.normalize ? "norm" : "raw");
            const auto square_path = ctx.artifact_path("kernel-hisk", h.hex(), ".kmat");
            if (ctx.lookup("kernel-hisk", square_path)) {
                hisk_square = load_kmat(square_path);
            } else {
                hisk_square = hisk_matrix(train_docs.ids, train_docs.joined, config.ngrams,
                                          config.normalize, config.jobs);
                save_kmat(square_path, hisk_square);
            }
            if (train_test) {
                const auto cross_path = ctx.artifact_path("kernel-hisk-cross", h.hex(), ".kmat");
                if (ctx.lookup("kernel-hisk-cross", cross_path)) {
                    hisk_block = load_kmat(cross_path);
                } else {
                    hisk_block =
                        hisk_cross(test_docs.ids, test_docs.joined, train_docs.ids,
                                   train_docs.joined, config.ngrams, config.normalize,
                                   config.jobs);
                    save_kmat(cross_path, hisk_block);
                }
            }
            return 0;
        });
    }

    // --- bag-of-word-embeddings stage --------------------------------------
    KernelMatrix pq_square, pq_block;
    if (want_bowe) {
        // embedding vectors per document
        std::vector<DocTokenVectors> train_vecs, test_vecs;
        std::string embed_key;
        run_stage("embed", [&]() -> int {
            if (config.embedding_source == EmbeddingSource::CbowTrain) {
                Hasher h;
                h.mix("cbow");
                h.mix(corpus_key);
                h.mix(std::to_string(config.cbow.dim));
                h.mix(std::to_string(config.cbow.window));
                h.mix(std::to_string(config.cbow.negatives));
                h.mix(std::to_string(config.cbow.epochs));
                h.mix(std::to_string(config.cbow.min_count));
                h.mix(std::to_string(config.cbow.initial_lr));
                h.mix(std::to_string(config.cbow.subsample_threshold));
                h.mix(std::to_string(derive_seed(config.seed, "cbow")));
                embed_key = h.hex();
                const auto table_path = ctx.artifact_path("embedding", embed_key, ".txt");
                EmbeddingTable table;
                if (ctx.lookup("embedding", table_path)) {
                    table = load_embeddings(table_path);
                } else {
                    CbowConfig cc = config.cbow;
                    cc.seed = derive_seed(config.seed, "cbow");
                    cc.jobs = 1; // deterministic path
                    table = train_cbow(train, cc);
                    save_embeddings(table_path, table);
                }
                train_vecs = docvecs_from_table(train_docs, table);
                test_vecs = docvecs_from_table(test_docs, table);
            } else if (config.embedding_source == EmbeddingSource::StaticFile) {
                if (config.embedding_path.empty())
                    raise(Errc::InvalidConfig, "embedding.path required for static source");
                Hasher h;
                h.mix("static");
                h.mix_file(config.embedding_path);
                embed_key = h.hex();
                const EmbeddingTable table = load_embeddings(config.embedding_path);
                train_vecs = docvecs_from_table(train_docs, table);
                test_vecs = docvecs_from_table(test_docs, table);
            } else {
                if (config.embedding_path.empty())
                    raise(Errc::InvalidConfig, "embedding.path required for contextual source");
                Hasher h;
                h.mix("contextual");
                h.mix_file(config.embedding_path);
                embed_key = h.hex();
                const std::vector<DocTokenVectors> dump =
                    load_contextual_dump(config.embedding_path);
                train_vecs = docvecs_from_dump(train_docs.ids, dump);
                test_vecs = docvecs_from_dump(test_docs.ids, dump);
            }
            return 0;
        });

        // clustering on training-document vectors only
        Codebook codebook;
        std::string cluster_key;
        run_stage("cluster", [&]() -> int {
            Hasher h;
            h.mix("cluster");
            h.mix(embed_key);
            h.mix(corpus_key);
            h.mix(cluster_method_name(config.cluster_method));
            h.mix(std::to_string(config.k));
            h.mix(std::to_string(config.som.learning_rate));
            h.mix(std::to_string(config.som.epochs));
            h.mix(std::to_string(config.som.grid_rows));
            h.mix(std::to_string(config.som.grid_cols));
            h.mix(std::to_string(config.som.radius_start));
            h.mix(std::to_string(config.som.radius_end));
            h.mix(std::to_string(config.subsample_cap));
            h.mix(std::to_string(derive_seed(config.seed, "cluster")));
            cluster_key = h.hex();
            const auto codebook_path = ctx.artifact_path("codebook", cluster_key, ".cb");
            const auto zipf_path = ctx.artifact_path("zipf-report", cluster_key, ".csv");

            VecSet pool = gather_pool(train_vecs);
            pool = subsample_pool(pool, config.subsample_cap,
                                  derive_seed(config.seed, "cluster-subsample"));

            if (ctx.lookup("codebook", codebook_path)) {
                codebook = load_codebook(codebook_path);
            } else {
                if (config.cluster_method == ClusterMethod::KMeans) {
                    codebook = kmeans_fit(pool, config.k, derive_seed(config.seed, "cluster"));
                } else {
                    SomConfig sc = config.som;
                    sc.k = config.k;
                    sc.seed = derive_seed(config.seed, "cluster");
                    codebook = som_fit(pool, sc);
                }
                save_codebook(codebook_path, codebook);
            }

            // Figure-style cluster-size report, emitted on every clustering run.
            ctx.lookup("zipf-report", zipf_path);
            const ClusterSizeReport report = cluster_size_report(codebook, pool, config.jobs);
            write_cluster_report_csv(zipf_path, report);
            return 0;
        });

        run_stage("bowe", [&]() -> int {
            std::vector<BoweHistogram> train_hist, test_hist;
            train_hist.reserve(train_vecs.size());
            for (const auto& dv : train_vecs) train_hist.push_back(build_histogram(dv, codebook));
            test_hist.reserve(test_vecs.size());
            for (const auto& dv : test_vecs) test_hist.push_back(build_histogram(dv, codebook));

            const auto hist_path = ctx.artifact_path("bowe-hist", cluster_key, ".jsonl");
            if (!ctx.lookup("bowe-hist", hist_path)) save_histograms(hist_path, train_hist);

            Hasher h;
            h.mix("pq");
            h.mix(cluster_key);
            h.mix(config.normalize ? "norm" : "raw");
            const auto square_path = ctx.artifact_path("kernel-pq", h.hex(), ".kmat");
            if (ctx.lookup("kernel-pq", square_path)) {
                pq_square = load_kmat(square_path);
            } else {
                pq_square = pq_matrix(train_hist, config.normalize, config.jobs);
                save_kmat(square_path, pq_square);
            }
            if (train_test) {
                const auto cross_path = ctx.artifact_path("kernel-pq-cross", h.hex(), ".kmat");
                if (ctx.lookup("kernel-pq-cross", cross_path)) {
                    pq_block = load_kmat(cross_path);
                } else {
                    pq_block = pq_cross(test_hist, train_hist, config.normalize, config.jobs);
                    save_kmat(cross_path, pq_block);
                }
            }
            return 0;
        });
    }

    // --- fusion -----------------------------------------------------------
    KernelMatrix k_square, k_block;
    run_stage("fuse", [&]() -> int {
        if (config.method == PipelineMethod::Hisk) {
            k_square = std::move(hisk_square);
            k_block = std::move(hisk_block);
        } else if (config.method == PipelineMethod::Bowe) {
            k_square = std::move(pq_square);
            k_block = std::move(pq_block);
        } else {
            k_square = fuse_kernels({hisk_square, pq_square}, config.normalize);
            if (train_test) k_block = fuse_kernels({hisk_block, pq_block}, config.normalize);
        }
        return 0;
    });

    // --- learning + evaluation --------------------------------------------
    run_stage("eval", [&]() -> int {
        SmoOptions options;
        options.C = config.C;
        if (train_test) {
            const std::vector<size_t> y_train = class_indices(train, label_set);
            const std::vector<size_t> y_test = class_indices(test, label_set);
            result.report = eval_train_test(k_square, y_train, k_block, y_test, label_set,
                                            options, config.jobs);
        } else {
            const std::vector<size_t> y = class_indices(train, label_set);
            result.report = kfold_cv(k_square, y, label_set, config.folds,
                                     derive_seed(config.seed, "cv"), options, config.jobs);
        }
        return 0;
    });
    result.report.seed = config.seed;
    return result;
}

std::string run_result_to_json(const RunResult& result) {
    nlohmann::json j = nlohmann::json::parse(eval_report_to_json(result.report));
    nlohmann::json arts = nlohmann::json::object();
    for (const auto& [stage, path] : result.artifacts) arts[stage] = path;
    j["artifacts"] = arts;
    return j.dump(2);
}

} // namespace ktc
