#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ktc/kernel_matrix.hpp"

namespace ktc {

/// Binary C-SVM in dual form. `alphas[i]` is the signed coefficient
/// alpha_i * y_i for training sample manifest[i]; only support entries are
/// nonzero. Decision: f(x) = sum_i alphas[i] * K(x, x_i) + bias.
struct SvmModel {
    std::vector<std::string> manifest; // full training manifest, in order
    std::vector<double> alphas;        // signed, aligned with manifest
    double bias = 0.0;
    double C = 1000.0;
    std::string kernel_recipe;

    size_t support_count() const;
};

struct SmoOptions {
    double C = 1000.0;
    double tolerance = 1e-3;    // max KKT violation at stop
    size_t max_updates = 1000000;
};

struct SmoTrace {
    std::vector<double> objective_per_update; // dual objective after each pair update
    size_t updates = 0;
    bool converged = false;
};

/// Sequential minimal optimization with maximal-violating-pair selection
/// over a precomputed kernel. Stops at KKT violation <= tolerance or after
/// max_updates pair updates.
SvmModel svm_train(const KernelMatrix& k, const std::vector<int>& labels,
                   const SmoOptions& options, SmoTrace* trace = nullptr);

struct Predictions {
    std::vector<int> labels; // +1 / -1; f == 0 resolves to +1
    std::vector<double> decision_values;
};

/// K_cross rows are test samples, columns must match the model manifest.
Predictions svm_predict(const SvmModel& model, const KernelMatrix& k_cross);

/// One-vs-rest multi-class wrapper: one binary model per class index.
struct OvrModel {
    std::vector<SvmModel> per_class;
    size_t classes() const { return per_class.size(); }
};

OvrModel ovr_train(const KernelMatrix& k, const std::vector<size_t>& class_labels,
                   size_t n_classes, const SmoOptions& options, int jobs = 1);

/// argmax of per-class decision values; ties resolve to the lowest index.
std::vector<size_t> ovr_predict(const OvrModel& model, const KernelMatrix& k_cross);

enum class EvalProtocol { TrainTest, KFoldCv };

struct EvalReport {
    EvalProtocol protocol = EvalProtocol::TrainTest;
    double accuracy = 0.0;
    std::vector<double> per_fold;            // KFoldCv only
    std::vector<std::vector<int64_t>> confusion; // c x c, [true][predicted]
    std::vector<std::string> label_set;
    uint64_t seed = 0;
};

std::string eval_report_to_json(const EvalReport& report);

/// Stratified k-fold cross-validation over a square kernel. Folds are
/// deterministic in `seed`; binary problems train one SVM per fold,
/// multi-class problems train one-vs-rest. A training fold that ends up
/// single-class predicts that class constantly.
EvalReport kfold_cv(const KernelMatrix& k, const std::vector<size_t>& class_labels,
                    const std::vector<std::string>& label_set, int folds, uint64_t seed,
                    const SmoOptions& options, int jobs = 1);

/// Train/test evaluation: square train kernel + test x train cross block.
EvalReport eval_train_test(const KernelMatrix& k_train, const std::vector<size_t>& y_train,
                           const KernelMatrix& k_cross, const std::vector<size_t>& y_test,
                           const std::vector<std::string>& label_set,
                           const SmoOptions& options, int jobs = 1);

/// Entrywise sum of normalized kernels with identical manifests.
KernelMatrix fuse_kernels(const std::vector<KernelMatrix>& kernels,
                          bool require_normalized = true);

void save_model(const std::filesystem::path& path, const SvmModel& model);
SvmModel load_model(const std::filesystem::path& path);

} // namespace ktc
