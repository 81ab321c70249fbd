#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ktc/bowe.hpp"
#include "ktc/cluster.hpp"
#include "ktc/corpus.hpp"
#include "ktc/embed.hpp"
#include "ktc/error.hpp"
#include "ktc/hisk.hpp"
#include "ktc/kernel_matrix.hpp"
#include "ktc/learn.hpp"
#include "ktc/pipeline.hpp"
#include "ktc/rng.hpp"
#include "ktc/simd.hpp"

namespace {

using namespace ktc;

int g_jobs = static_cast<int>(std::thread::hardware_concurrency());
std::string g_simd = "auto";

void apply_simd_flag() {
    if (g_simd == "auto") return;
    if (g_simd == "scalar")
        simd::force_backend(simd::Backend::Scalar);
    else if (g_simd == "avx2")
        simd::force_backend(simd::Backend::Avx2);
    else if (g_simd == "neon")
        simd::force_backend(simd::Backend::Neon);
    else
        raise(Errc::InvalidConfig, "unknown --simd value: " + g_simd);
}

std::vector<int> parse_ngrams(const std::string& spec) {
    std::vector<int> out;
    std::string cur;
    for (char c : spec + ",") {
        if (c == ',') {
            if (!cur.empty()) {
                out.push_back(std::stoi(cur));
                cur.clear();
            }
        } else {
            cur.push_back(c);
        }
    }
    if (out.empty()) raise(Errc::InvalidConfig, "empty --ngrams list");
    return out;
}

struct CorpusDocs {
    std::vector<std::string> ids;
    std::vector<std::string> joined;
};

CorpusDocs corpus_docs(const std::filesystem::path& path) {
    const Corpus corpus = load_corpus_jsonl(path);
    CorpusDocs docs;
    docs.ids.reserve(corpus.size());
    docs.joined.reserve(corpus.size());
    for (const Review& r : corpus.reviews) {
        docs.ids.push_back(r.id);
        docs.joined.push_back(join_tokens(preprocess(r.text)));
    }
    return docs;
}

// Labels for kernel-manifest ids, as class indices over the corpus label set.
std::pair<std::vector<size_t>, std::vector<std::string>> labels_for_manifest(
    const std::filesystem::path& corpus_path, const std::vector<std::string>& manifest) {
    const Corpus corpus = load_corpus_jsonl(corpus_path);
    std::unordered_map<std::string, std::string> by_id;
    for (const Review& r : corpus.reviews) by_id[r.id] = r.label;
    std::vector<size_t> y;
    y.reserve(manifest.size());
    for (const std::string& id : manifest) {
        auto it = by_id.find(id);
        if (it == by_id.end())
            raise(Errc::MissingDocument, "manifest id '" + id + "' not in corpus");
        y.push_back(corpus.label_index(it->second));
    }
    return {std::move(y), corpus.label_set};
}

VecSet pool_from_docvecs(const std::vector<DocTokenVectors>& docs) {
    VecSet pool;
    for (const auto& d : docs) {
        if (d.vectors.count() == 0) continue;
        if (pool.dim == 0) pool.dim = d.vectors.dim;
        if (pool.dim != d.vectors.dim)
            raise(Errc::DimMismatch, "inconsistent vector dims in docvecs file");
        pool.data.insert(pool.data.end(), d.vectors.data.begin(), d.vectors.data.end());
    }
    if (pool.dim == 0) raise(Errc::EmptyVocabulary, "docvecs file holds no vectors");
    return pool;
}

void emit_error(const std::string& stage, const std::string& code, const std::string& message) {
    nlohmann::json j;
    j["stage"] = stage;
    j["code"] = code;
    j["error"] = message;
    std::cerr << j.dump() << std::endl;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Histogram-intersection string kernels, SOM/k-means bags of word "
                 "embeddings and kernel SVM evaluation for text polarity corpora"};
    app.require_subcommand(1);
    app.add_option("--jobs", g_jobs, "worker threads for parallel stages")
        ->capture_default_str();
    app.add_option("--simd", g_simd, "simd backend: auto|scalar|avx2|neon")
        ->capture_default_str();

    std::string active_stage = "cli";

    // ---- corpus ----------------------------------------------------------
    auto* corpus_cmd = app.add_subcommand("corpus", "corpus inspection and splitting");
    corpus_cmd->require_subcommand(1);

    std::string stats_path;
    auto* stats_cmd = corpus_cmd->add_subcommand("stats", "per-label sample/word statistics");
    stats_cmd->add_option("path", stats_path, "corpus JSONL")->required();
    stats_cmd->callback([&] {
        active_stage = "corpus";
        CorpusLoadStats load_stats;
        const Corpus corpus = load_corpus_jsonl(stats_path, &load_stats);
        std::cout << stats_to_json(corpus_stats(corpus)) << std::endl;
        if (load_stats.neutral_skipped > 0)
            std::cerr << "note: skipped " << load_stats.neutral_skipped
                      << " neutral (3-star) reviews" << std::endl;
    });

    std::string split_path, split_out_train, split_out_test;
    double split_fraction = 0.8;
    uint64_t split_seed = 1;
    auto* split_cmd = corpus_cmd->add_subcommand("split", "stratified train/test split");
    split_cmd->add_option("path", split_path)->required();
    split_cmd->add_option("--fraction", split_fraction)->capture_default_str();
    split_cmd->add_option("--seed", split_seed)->capture_default_str();
    split_cmd->add_option("--out-train", split_out_train)->required();
    split_cmd->add_option("--out-test", split_out_test)->required();
    split_cmd->callback([&] {
        active_stage = "corpus";
        const Corpus corpus = load_corpus_jsonl(split_path);
        const auto [train, test] = split_train_test(corpus, split_fraction, split_seed);
        save_corpus_jsonl(split_out_train, train);
        save_corpus_jsonl(split_out_test, test);
        nlohmann::json j;
        j["train_samples"] = train.size();
        j["test_samples"] = test.size();
        std::cout << j.dump() << std::endl;
    });

    // ---- kernel ------------------------------------------------------------
    auto* kernel_cmd = app.add_subcommand("kernel", "kernel matrix computation");
    kernel_cmd->require_subcommand(1);

    std::string hisk_in, hisk_out, hisk_ngrams = "3,4,5";
    bool hisk_normalize = true;
    auto* hisk_cmd = kernel_cmd->add_subcommand("hisk", "intersection string kernel (square)");
    hisk_cmd->add_option("--in", hisk_in, "corpus JSONL")->required();
    hisk_cmd->add_option("--ngrams", hisk_ngrams)->capture_default_str();
    hisk_cmd->add_flag("--normalize,!--no-normalize", hisk_normalize, "unit self-similarity");
    hisk_cmd->add_option("--out", hisk_out)->required();
    hisk_cmd->callback([&] {
        active_stage = "hisk";
        apply_simd_flag();
        const CorpusDocs docs = corpus_docs(hisk_in);
        save_kmat(hisk_out, hisk_matrix(docs.ids, docs.joined, parse_ngrams(hisk_ngrams),
                                        hisk_normalize, g_jobs));
    });

    std::string hc_rows, hc_cols, hc_out, hc_ngrams = "3,4,5";
    bool hc_normalize = true;
    auto* hisk_cross_cmd =
        kernel_cmd->add_subcommand("hisk-cross", "intersection kernel rows x cols block");
    hisk_cross_cmd->add_option("--rows", hc_rows, "row corpus JSONL")->required();
    hisk_cross_cmd->add_option("--cols", hc_cols, "column corpus JSONL")->required();
    hisk_cross_cmd->add_option("--ngrams", hc_ngrams)->capture_default_str();
    hisk_cross_cmd->add_flag("--normalize,!--no-normalize", hc_normalize);
    hisk_cross_cmd->add_option("--out", hc_out)->required();
    hisk_cross_cmd->callback([&] {
        active_stage = "hisk";
        apply_simd_flag();
        const CorpusDocs rows = corpus_docs(hc_rows);
        const CorpusDocs cols = corpus_docs(hc_cols);
        save_kmat(hc_out, hisk_cross(rows.ids, rows.joined, cols.ids, cols.joined,
                                     parse_ngrams(hc_ngrams), hc_normalize, g_jobs));
    });

    std::string pq_in, pq_cross_file, pq_out;
    bool pq_normalize = true;
    auto* pq_cmd = kernel_cmd->add_subcommand("pq", "rank-correlation kernel over histograms");
    pq_cmd->add_option("--in", pq_in, "histogram JSONL (rows)")->required();
    pq_cmd->add_option("--cross", pq_cross_file,
                       "optional column histogram JSONL; makes a rows x cols block");
    pq_cmd->add_flag("--normalize,!--no-normalize", pq_normalize);
    pq_cmd->add_option("--out", pq_out)->required();
    pq_cmd->callback([&] {
        active_stage = "pq";
        apply_simd_flag();
        const std::vector<BoweHistogram> rows = load_histograms(pq_in);
        if (pq_cross_file.empty()) {
            save_kmat(pq_out, pq_matrix(rows, pq_normalize, g_jobs));
        } else {
            const std::vector<BoweHistogram> cols = load_histograms(pq_cross_file);
            save_kmat(pq_out, pq_cross(rows, cols, pq_normalize, g_jobs));
        }
    });

    std::string fuse_in, fuse_out;
    bool fuse_allow_unnormalized = false;
    auto* fuse_cmd = kernel_cmd->add_subcommand("fuse", "entrywise sum of kernel matrices");
    fuse_cmd->add_option("--in", fuse_in, "comma-separated .kmat paths")->required();
    fuse_cmd->add_flag("--allow-unnormalized", fuse_allow_unnormalized);
    fuse_cmd->add_option("--out", fuse_out)->required();
    fuse_cmd->callback([&] {
        active_stage = "fuse";
        apply_simd_flag();
        std::vector<KernelMatrix> kernels;
        std::string cur;
        for (char c : fuse_in + ",") {
            if (c == ',') {
                if (!cur.empty()) kernels.push_back(load_kmat(cur));
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        save_kmat(fuse_out, fuse_kernels(kernels, !fuse_allow_unnormalized));
    });

    // ---- embed -------------------------------------------------------------
    auto* embed_cmd = app.add_subcommand("embed", "word embedding training and I/O");
    embed_cmd->require_subcommand(1);

    std::string et_in, et_out;
    CbowConfig et_config;
    auto* embed_train_cmd = embed_cmd->add_subcommand("train", "train CBOW word vectors");
    embed_train_cmd->add_option("--in", et_in, "corpus JSONL")->required();
    embed_train_cmd->add_option("--dim", et_config.dim)->capture_default_str();
    embed_train_cmd->add_option("--window", et_config.window)->capture_default_str();
    embed_train_cmd->add_option("--negatives", et_config.negatives)->capture_default_str();
    embed_train_cmd->add_option("--epochs", et_config.epochs)->capture_default_str();
    embed_train_cmd->add_option("--min-count", et_config.min_count)->capture_default_str();
    embed_train_cmd->add_option("--lr", et_config.initial_lr)->capture_default_str();
    embed_train_cmd->add_option("--subsample", et_config.subsample_threshold)
        ->capture_default_str();
    embed_train_cmd->add_option("--seed", et_config.seed)->capture_default_str();
    embed_train_cmd
        ->add_option("--train-jobs", et_config.jobs,
                     "hogwild workers; >1 trades determinism for speed")
        ->capture_default_str();
    embed_train_cmd->add_option("--out", et_out)->required();
    embed_train_cmd->callback([&] {
        active_stage = "embed";
        apply_simd_flag();
        const Corpus corpus = load_corpus_jsonl(et_in);
        CbowStats stats;
        const EmbeddingTable table = train_cbow(corpus, et_config, &stats);
        save_embeddings(et_out, table);
        nlohmann::json j;
        j["vocab"] = stats.vocab_size;
        j["examples"] = stats.total_examples;
        j["epoch_avg_loss"] = stats.epoch_avg_loss;
        std::cout << j.dump() << std::endl;
    });

    std::string ec_path;
    auto* embed_check_cmd = embed_cmd->add_subcommand("check", "validate an embedding file");
    embed_check_cmd->add_option("path", ec_path)->required();
    embed_check_cmd->callback([&] {
        active_stage = "embed";
        const EmbeddingTable table = load_embeddings(ec_path);
        nlohmann::json j;
        j["vocab"] = table.size();
        j["dim"] = table.dim;
        std::cout << j.dump() << std::endl;
    });

    std::string ea_table, ea_in, ea_out;
    auto* embed_apply_cmd = embed_cmd->add_subcommand(
        "apply", "look up per-token vectors for every document of a corpus");
    embed_apply_cmd->add_option("--table", ea_table, "embedding table (word2vec text)")
        ->required();
    embed_apply_cmd->add_option("--in", ea_in, "corpus JSONL")->required();
    embed_apply_cmd->add_option("--out", ea_out, "docvecs JSONL")->required();
    embed_apply_cmd->callback([&] {
        active_stage = "embed";
        const EmbeddingTable table = load_embeddings(ea_table);
        const Corpus corpus = load_corpus_jsonl(ea_in);
        std::vector<DocTokenVectors> docs;
        docs.reserve(corpus.size());
        size_t total_skips = 0;
        for (const Review& r : corpus.reviews) {
            size_t skips = 0;
            docs.push_back(doc_vectors(r.id, preprocess(r.text), table, &skips));
            total_skips += skips;
        }
        save_contextual_dump(ea_out, docs);
        nlohmann::json j;
        j["documents"] = docs.size();
        j["oov_skips"] = total_skips;
        std::cout << j.dump() << std::endl;
    });

    // ---- cluster -------------------------------------------------------------
    auto* cluster_cmd = app.add_subcommand("cluster", "vector quantization codebooks");
    cluster_cmd->require_subcommand(1);

    std::string cf_method = "kmeans", cf_in, cf_out;
    SomConfig cf_som;
    int cf_k = 500;
    uint64_t cf_seed = 1;
    size_t cf_cap = 2000000;
    auto* cluster_fit_cmd = cluster_cmd->add_subcommand("fit", "fit a codebook");
    cluster_fit_cmd->add_option("--method", cf_method, "kmeans|som")->capture_default_str();
    cluster_fit_cmd->add_option("--k", cf_k)->capture_default_str();
    cluster_fit_cmd->add_option("--in", cf_in, "docvecs JSONL pool")->required();
    cluster_fit_cmd->add_option("--seed", cf_seed)->capture_default_str();
    cluster_fit_cmd->add_option("--epochs", cf_som.epochs)->capture_default_str();
    cluster_fit_cmd->add_option("--lr", cf_som.learning_rate)->capture_default_str();
    cluster_fit_cmd->add_option("--grid-rows", cf_som.grid_rows)->capture_default_str();
    cluster_fit_cmd->add_option("--grid-cols", cf_som.grid_cols)->capture_default_str();
    cluster_fit_cmd->add_option("--subsample-cap", cf_cap)->capture_default_str();
    cluster_fit_cmd->add_option("--out", cf_out)->required();
    cluster_fit_cmd->callback([&] {
        active_stage = "cluster";
        apply_simd_flag();
        VecSet pool = pool_from_docvecs(load_contextual_dump(cf_in));
        pool = subsample_pool(pool, cf_cap, cf_seed);
        Codebook cb;
        if (cf_method == "kmeans") {
            cb = kmeans_fit(pool, cf_k, cf_seed);
        } else if (cf_method == "som") {
            cf_som.k = cf_k;
            cf_som.seed = cf_seed;
            cb = som_fit(pool, cf_som);
        } else {
            raise(Errc::InvalidConfig, "unknown cluster method: " + cf_method);
        }
        save_codebook(cf_out, cb);
        nlohmann::json j;
        j["method"] = cluster_method_name(cb.method);
        j["k"] = cb.k;
        j["dim"] = cb.dim;
        j["pool_vectors"] = pool.count();
        std::cout << j.dump() << std::endl;
    });

    std::string cr_codebook, cr_in, cr_out;
    auto* cluster_report_cmd =
        cluster_cmd->add_subcommand("report", "cluster occupancy vs the Zipf reference");
    cluster_report_cmd->add_option("--codebook", cr_codebook)->required();
    cluster_report_cmd->add_option("--in", cr_in, "docvecs JSONL pool")->required();
    cluster_report_cmd->add_option("--out", cr_out, "CSV: rank,size,p_r,q_r")->required();
    cluster_report_cmd->callback([&] {
        active_stage = "cluster";
        apply_simd_flag();
        const Codebook cb = load_codebook(cr_codebook);
        const VecSet pool = pool_from_docvecs(load_contextual_dump(cr_in));
        const ClusterSizeReport report = cluster_size_report(cb, pool, g_jobs);
        write_cluster_report_csv(cr_out, report);
        nlohmann::json j;
        j["zipf_l1"] = report.zipf_l1;
        j["total"] = report.total;
        std::cout << j.dump() << std::endl;
    });

    // ---- bowe -------------------------------------------------------------
    auto* bowe_cmd = app.add_subcommand("bowe", "bag-of-word-embeddings histograms");
    bowe_cmd->require_subcommand(1);

    std::string bb_codebook, bb_vectors, bb_out;
    auto* bowe_build_cmd = bowe_cmd->add_subcommand("build", "histograms from docvecs");
    bowe_build_cmd->add_option("--codebook", bb_codebook)->required();
    bowe_build_cmd->add_option("--vectors", bb_vectors, "docvecs JSONL")->required();
    bowe_build_cmd->add_option("--out", bb_out, "histogram JSONL")->required();
    bowe_build_cmd->callback([&] {
        active_stage = "bowe";
        apply_simd_flag();
        const Codebook cb = load_codebook(bb_codebook);
        const std::vector<DocTokenVectors> docs = load_contextual_dump(bb_vectors);
        std::vector<BoweHistogram> hists;
        hists.reserve(docs.size());
        for (const auto& d : docs) hists.push_back(build_histogram(d, cb));
        save_histograms(bb_out, hists);
    });

    // ---- train / eval ---------------------------------------------------------
    std::string tr_kernel, tr_labels, tr_out;
    double tr_c = 1000.0;
    auto* train_cmd = app.add_subcommand("train", "train a binary SVM on a square kernel");
    train_cmd->add_option("--kernel", tr_kernel, ".kmat (square)")->required();
    train_cmd->add_option("--labels", tr_labels, "corpus JSONL with ids+labels")->required();
    train_cmd->add_option("--C", tr_c)->capture_default_str();
    train_cmd->add_option("--out", tr_out, "model JSON")->required();
    train_cmd->callback([&] {
        active_stage = "train";
        apply_simd_flag();
        const KernelMatrix k = load_kmat(tr_kernel);
        const auto [y, label_set] = labels_for_manifest(tr_labels, k.row_ids);
        if (label_set.size() != 2)
            raise(Errc::InvalidConfig,
                  "train expects a binary corpus; use 'eval cv' or 'run' for multi-class");
        std::vector<int> labels(y.size());
        for (size_t i = 0; i < y.size(); ++i) labels[i] = y[i] == 1 ? +1 : -1;
        SmoOptions options;
        options.C = tr_c;
        SvmModel model = svm_train(k, labels, options);
        model.kernel_recipe = tr_kernel;
        save_model(tr_out, model);
        nlohmann::json j;
        j["support_vectors"] = model.support_count();
        j["bias"] = model.bias;
        std::cout << j.dump() << std::endl;
    });

    auto* eval_cmd = app.add_subcommand("eval", "model evaluation");
    eval_cmd->require_subcommand(1);

    std::string ev_model, ev_cross, ev_labels;
    auto* eval_test_cmd = eval_cmd->add_subcommand("test", "accuracy on a test x train block");
    eval_test_cmd->add_option("--model", ev_model)->required();
    eval_test_cmd->add_option("--cross", ev_cross, "test x train .kmat")->required();
    eval_test_cmd->add_option("--labels", ev_labels, "corpus with test labels")->required();
    eval_test_cmd->callback([&] {
        active_stage = "eval";
        apply_simd_flag();
        const SvmModel model = load_model(ev_model);
        const KernelMatrix k = load_kmat(ev_cross);
        const auto [y, label_set] = labels_for_manifest(ev_labels, k.row_ids);
        if (label_set.size() != 2)
            raise(Errc::InvalidConfig, "eval test expects a binary corpus");
        const Predictions p = svm_predict(model, k);
        EvalReport report;
        report.protocol = EvalProtocol::TrainTest;
        report.label_set = label_set;
        report.confusion.assign(2, std::vector<int64_t>(2, 0));
        size_t correct = 0;
        for (size_t i = 0; i < y.size(); ++i) {
            const size_t pred = p.labels[i] > 0 ? 1 : 0;
            report.confusion[y[i]][pred] += 1;
            if (pred == y[i]) ++correct;
        }
        report.accuracy =
            y.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(y.size());
        std::cout << eval_report_to_json(report) << std::endl;
    });

    std::string cv_kernel, cv_labels;
    int cv_folds = 10;
    uint64_t cv_seed = 1;
    double cv_c = 1000.0;
    auto* eval_cv_cmd = eval_cmd->add_subcommand("cv", "stratified k-fold cross-validation");
    eval_cv_cmd->add_option("--kernel", cv_kernel, "square .kmat")->required();
    eval_cv_cmd->add_option("--labels", cv_labels)->required();
    eval_cv_cmd->add_option("--folds", cv_folds)->capture_default_str();
    eval_cv_cmd->add_option("--seed", cv_seed)->capture_default_str();
    eval_cv_cmd->add_option("--C", cv_c)->capture_default_str();
    eval_cv_cmd->callback([&] {
        active_stage = "eval";
        apply_simd_flag();
        const KernelMatrix k = load_kmat(cv_kernel);
        const auto [y, label_set] = labels_for_manifest(cv_labels, k.row_ids);
        SmoOptions options;
        options.C = cv_c;
        const EvalReport report = kfold_cv(k, y, label_set, cv_folds, cv_seed, options, g_jobs);
        std::cout << eval_report_to_json(report) << std::endl;
    });

    // ---- run -------------------------------------------------------------
    std::string run_config_path, run_out;
    auto* run_cmd = app.add_subcommand("run", "full pipeline from a TOML config");
    run_cmd->add_option("--config", run_config_path)->required();
    run_cmd->add_option("--out", run_out, "also write the report JSON here");
    run_cmd->callback([&] {
        active_stage = "run";
        apply_simd_flag();
        RunConfig config = RunConfig::from_table(toml::parse_file(run_config_path));
        if (app.count("--jobs")) config.jobs = g_jobs;
        const RunResult result = run_pipeline(config);
        const std::string json = run_result_to_json(result);
        std::cout << json << std::endl;
        if (!run_out.empty()) {
            std::ofstream out(run_out, std::ios::binary);
            out << json << '\n';
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const Error& e) {
        emit_error(e.stage().empty() ? active_stage : e.stage(), errc_name(e.code()), e.what());
        return 1;
    } catch (const std::exception& e) {
        emit_error(active_stage, "InternalError", e.what());
        return 1;
    }
    return 0;
}
