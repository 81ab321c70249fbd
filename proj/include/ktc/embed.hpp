#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ktc/corpus.hpp"
#include "ktc/vecset.hpp"

namespace ktc {

/// Static word -> m-dimensional vector table.
struct EmbeddingTable {
    int dim = 0;
    std::vector<std::string> vocab;
    VecSet vectors;
    std::unordered_map<std::string, size_t> index;

    size_t size() const { return vocab.size(); }
    void rebuild_index();
};

struct CbowConfig {
    int dim = 300;
    int window = 5;
    int negatives = 5;
    int epochs = 5;
    double initial_lr = 0.025;
    int min_count = 5;
    double subsample_threshold = 1e-3;
    uint64_t seed = 1;
    int jobs = 1; // 1 = deterministic single-threaded path
};

/// Input/output matrices of a CBOW negative-sampling model, exposed so the
/// loss and its analytic gradient can be exercised directly (the trainer
/// uses the same routines).
struct CbowModel {
    int dim = 0;
    size_t vocab_size = 0;
    std::vector<double> in_vecs;  // vocab_size * dim, context side
    std::vector<double> out_vecs; // vocab_size * dim, target side

    /// Negative-sampling loss of one (context, target, negatives) example:
    /// -log s(u_t . v) - sum_neg log s(-u_n . v), v = mean context vector.
    double example_loss(std::span<const size_t> context, size_t target,
                        std::span<const size_t> negatives) const;

    /// Adds the analytic gradient of example_loss into grad_in/grad_out
    /// (same shapes as in_vecs/out_vecs).
    void accumulate_gradients(std::span<const size_t> context, size_t target,
                              std::span<const size_t> negatives, std::vector<double>& grad_in,
                              std::vector<double>& grad_out) const;

    /// One SGD step on the example; returns the example loss before the step.
    double sgd_step(std::span<const size_t> context, size_t target,
                    std::span<const size_t> negatives, double lr);
};

struct CbowStats {
    std::vector<double> epoch_avg_loss;
    size_t total_examples = 0;
    size_t vocab_size = 0;
};

/// Trains CBOW with negative sampling on the preprocessed corpus stream.
/// Tokens below min_count are dropped (EmptyVocabulary when none remain);
/// the learning rate decays linearly to initial_lr/100 over all updates.
EmbeddingTable train_cbow(const Corpus& corpus, const CbowConfig& config,
                          CbowStats* stats = nullptr);

/// word2vec text format: header "vocab_size dim", then one token and dim
/// values per line. Values print with 17 significant digits, so
/// save/load round-trips bit-exactly.
EmbeddingTable load_embeddings(const std::filesystem::path& path);
void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table);

/// JSONL contextual dump: {"doc_id": ..., "vectors": [[...], ...]} per line.
/// Dimensions must agree across the whole file.
std::vector<DocTokenVectors> load_contextual_dump(const std::filesystem::path& path);
void save_contextual_dump(const std::filesystem::path& path,
                          const std::vector<DocTokenVectors>& docs);

/// Per-token lookup; out-of-vocabulary tokens are skipped (not zero-filled)
/// and counted into *oov_skips when provided.
DocTokenVectors doc_vectors(const std::string& doc_id, const TokenSeq& tokens,
                            const EmbeddingTable& table, size_t* oov_skips = nullptr);

} // namespace ktc
