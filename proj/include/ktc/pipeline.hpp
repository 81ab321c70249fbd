#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ktc/cluster.hpp"
#include "ktc/embed.hpp"
#include "ktc/learn.hpp"
#include "ktc/toml.hpp"

namespace ktc {

enum class PipelineMethod { Hisk, Bowe, HiskPlusBowe };
enum class EmbeddingSource { CbowTrain, StaticFile, ContextualDump };

/// Declarative end-to-end run: corpus -> kernels/embeddings -> clustering ->
/// histograms -> fusion -> SVM -> report, with per-stage artifact caching.
struct RunConfig {
    // corpus: either train+test paths, or a single path with a split spec
    std::filesystem::path corpus_train;
    std::filesystem::path corpus_test;
    std::filesystem::path corpus_single;
    double train_fraction = 0.8;

    PipelineMethod method = PipelineMethod::Hisk;
    std::vector<int> ngrams{3, 4, 5};

    EmbeddingSource embedding_source = EmbeddingSource::CbowTrain;
    std::filesystem::path embedding_path; // static table or contextual dump
    CbowConfig cbow;

    ClusterMethod cluster_method = ClusterMethod::Som;
    int k = 500;
    SomConfig som;
    size_t subsample_cap = 2000000;

    double C = 1000.0;
    bool normalize = true;

    EvalProtocol protocol = EvalProtocol::TrainTest;
    int folds = 10;

    uint64_t seed = 1;
    int jobs = 1;
    std::filesystem::path cache_dir = "ktc-cache";

    static RunConfig from_table(const toml::Table& table);
};

struct RunResult {
    EvalReport report;
    std::map<std::string, std::string> artifacts; // stage -> file path
};

RunResult run_pipeline(const RunConfig& config);

std::string run_result_to_json(const RunResult& result);

} // namespace ktc
