#include "ktc/learn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "ktc/error.hpp"
#include "ktc/rng.hpp"
#include "ktc/simd.hpp"

namespace ktc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_square(const KernelMatrix& k) {
    if (!k.square()) raise(Errc::ManifestMismatch, "training kernel must be square");
}

} // namespace

size_t SvmModel::support_count() const {
    size_t c = 0;
    for (double a : alphas)
        if (a != 0.0) ++c;
    return c;
}

SvmModel svm_train(const KernelMatrix& k, const std::vector<int>& labels,
                   const SmoOptions& options, SmoTrace* trace) {
    check_square(k);
    const size_t n = k.rows();
    if (labels.size() != n) raise(Errc::ManifestMismatch, "labels/kernel size mismatch");
    bool has_pos = false, has_neg = false;
    for (int y : labels) {
        if (y == +1)
            has_pos = true;
        else if (y == -1)
            has_neg = true;
        else
            raise(Errc::InvalidConfig, "labels must be +1/-1");
    }
    if (!has_pos || !has_neg)
        raise(Errc::DegenerateLabels, "both classes must be present for training");
    const double C = options.C;
    if (!(C > 0.0)) raise(Errc::InvalidConfig, "C must be positive");

    std::vector<double> alpha(n, 0.0);
    // F_i = sum_j alpha_j y_j K_ij; maintained incrementally.
    std::vector<double> F(n, 0.0);
    const std::vector<double>& K = k.values;
    const auto y = [&](size_t i) { return static_cast<double>(labels[i]); };

    SmoTrace local_trace;
    // Violating-pair selection: v_i = y_i - F_i; optimal when
    // max over I_up of v <= min over I_low of v (+ tolerance).
    size_t updates = 0;
    for (; updates < options.max_updates; ++updates) {
        double up_best = -kInf, low_best = kInf;
        size_t i = n, j = n;
        for (size_t t = 0; t < n; ++t) {
            const double v = y(t) - F[t];
            const bool in_up = (labels[t] == +1 && alpha[t] < C) ||
                               (labels[t] == -1 && alpha[t] > 0.0);
            const bool in_low = (labels[t] == -1 && alpha[t] < C) ||
                                (labels[t] == +1 && alpha[t] > 0.0);
            if (in_up && v > up_best) {
                up_best = v;
                i = t;
            }
            if (in_low && v < low_best) {
                low_best = v;
                j = t;
            }
        }
        if (i == n || j == n || up_best - low_best <= options.tolerance) {
            local_trace.converged = (i != n && j != n);
            break;
        }

        // Two-variable subproblem along alpha_i += y_i d, alpha_j -= y_j d.
        const double* Ki = K.data() + i * n;
        const double* Kj = K.data() + j * n;
        const double eta = Ki[i] + Kj[j] - 2.0 * Ki[j];
        const double slope = (F[i] - y(i)) - (F[j] - y(j)); // df/dd
        double d;
        if (eta > 0.0)
            d = -slope / eta;
        else
            d = slope < 0.0 ? kInf : -kInf;

        double lo = -kInf, hi = kInf;
        if (labels[i] == +1) {
            lo = std::max(lo, -alpha[i]);
            hi = std::min(hi, C - alpha[i]);
        } else {
            lo = std::max(lo, alpha[i] - C);
            hi = std::min(hi, alpha[i]);
        }
        if (labels[j] == +1) {
            lo = std::max(lo, alpha[j] - C);
            hi = std::min(hi, alpha[j]);
        } else {
            lo = std::max(lo, -alpha[j]);
            hi = std::min(hi, C - alpha[j]);
        }
        d = std::clamp(d, lo, hi);
        if (d == 0.0) break; // stalled; cannot happen with a violating pair

        alpha[i] += y(i) * d;
        alpha[j] -= y(j) * d;
        // d(alpha_i y_i) = d, d(alpha_j y_j) = -d
        for (size_t t = 0; t < n; ++t) F[t] += d * (Ki[t] - Kj[t]);

        if (trace) {
            double obj = 0.0;
            for (size_t t = 0; t < n; ++t) obj += alpha[t] - 0.5 * alpha[t] * y(t) * F[t];
            local_trace.objective_per_update.push_back(obj);
        }
    }
    local_trace.updates = updates;

    // Bias: average v over free vectors when any exist, else the midpoint
    // of the feasible interval.
    double bias;
    {
        double sum = 0.0;
        size_t free_count = 0;
        for (size_t t = 0; t < n; ++t) {
            if (alpha[t] > 0.0 && alpha[t] < C) {
                sum += y(t) - F[t];
                ++free_count;
            }
        }
        if (free_count > 0) {
            bias = sum / static_cast<double>(free_count);
        } else {
            double up_best = -kInf, low_best = kInf;
            for (size_t t = 0; t < n; ++t) {
                const double v = y(t) - F[t];
                const bool in_up = (labels[t] == +1 && alpha[t] < C) ||
                                   (labels[t] == -1 && alpha[t] > 0.0);
                const bool in_low = (labels[t] == -1 && alpha[t] < C) ||
                                    (labels[t] == +1 && alpha[t] > 0.0);
                if (in_up) up_best = std::max(up_best, v);
                if (in_low) low_best = std::min(low_best, v);
            }
            bias = 0.5 * (up_best + low_best);
        }
    }

    if (trace) *trace = std::move(local_trace);

    SvmModel model;
    model.manifest = k.row_ids;
    model.alphas.resize(n);
    for (size_t t = 0; t < n; ++t) model.alphas[t] = alpha[t] * y(t);
    model.bias = bias;
    model.C = C;
    return model;
}

Predictions svm_predict(const SvmModel& model, const KernelMatrix& k_cross) {
    if (k_cross.col_ids != model.manifest)
        raise(Errc::ManifestMismatch, "cross-kernel columns do not match model manifest");
    const size_t rows = k_cross.rows();
    const size_t n = model.manifest.size();
    Predictions p;
    p.labels.resize(rows);
    p.decision_values.resize(rows);
    for (size_t r = 0; r < rows; ++r) {
        const double f =
            simd::dot(k_cross.values.data() + r * n, model.alphas.data(), n) + model.bias;
        p.decision_values[r] = f;
        p.labels[r] = f >= 0.0 ? +1 : -1;
    }
    return p;
}

OvrModel ovr_train(const KernelMatrix& k, const std::vector<size_t>& class_labels,
                   size_t n_classes, const SmoOptions& options, int jobs) {
    check_square(k);
    if (n_classes < 2) raise(Errc::InvalidConfig, "need at least 2 classes");
    for (size_t c = 0; c < n_classes; ++c)
        if (std::find(class_labels.begin(), class_labels.end(), c) == class_labels.end())
            raise(Errc::DegenerateLabels,
                  "class " + std::to_string(c) + " absent from training data");

    OvrModel model;
    model.per_class.resize(n_classes);
    const auto train_one = [&](size_t c) {
        std::vector<int> y(class_labels.size());
        for (size_t i = 0; i < class_labels.size(); ++i)
            y[i] = class_labels[i] == c ? +1 : -1;
        model.per_class[c] = svm_train(k, y, options);
    };
    if (jobs <= 1) {
        for (size_t c = 0; c < n_classes; ++c) train_one(c);
    } else {
        std::vector<std::thread> workers;
        std::atomic<size_t> next{0};
        const size_t count = std::min<size_t>(static_cast<size_t>(jobs), n_classes);
        std::exception_ptr error;
        std::mutex error_mu;
        for (size_t t = 0; t < count; ++t) {
            workers.emplace_back([&] {
                try {
                    for (;;) {
                        const size_t c = next.fetch_add(1);
                        if (c >= n_classes) return;
                        train_one(c);
                    }
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (!error) error = std::current_exception();
                }
            });
        }
        for (auto& w : workers) w.join();
        if (error) std::rethrow_exception(error);
    }
    return model;
}

std::vector<size_t> ovr_predict(const OvrModel& model, const KernelMatrix& k_cross) {
    const size_t rows = k_cross.rows();
    std::vector<size_t> out(rows, 0);
    std::vector<double> best(rows, -kInf);
    for (size_t c = 0; c < model.per_class.size(); ++c) {
        const Predictions p = svm_predict(model.per_class[c], k_cross);
        for (size_t r = 0; r < rows; ++r) {
            if (p.decision_values[r] > best[r]) {
                best[r] = p.decision_values[r];
                out[r] = c;
            }
        }
    }
    return out;
}

namespace {

KernelMatrix take_submatrix(const KernelMatrix& k, const std::vector<size_t>& rows,
                            const std::vector<size_t>& cols) {
    KernelMatrix out;
    out.row_ids.reserve(rows.size());
    out.col_ids.reserve(cols.size());
    for (size_t r : rows) out.row_ids.push_back(k.row_ids[r]);
    for (size_t c : cols) out.col_ids.push_back(k.col_ids[c]);
    out.values.resize(rows.size() * cols.size());
    for (size_t r = 0; r < rows.size(); ++r)
        for (size_t c = 0; c < cols.size(); ++c)
            out.values[r * cols.size() + c] = k.at(rows[r], cols[c]);
    return out;
}

std::vector<std::vector<size_t>> stratified_folds(const std::vector<size_t>& class_labels,
                                                  size_t n_classes, int folds, uint64_t seed) {
    const size_t n = class_labels.size();
    if (folds < 2) raise(Errc::InvalidConfig, "folds must be >= 2");
    if (static_cast<size_t>(folds) > n)
        raise(Errc::StratificationImpossible,
              std::to_string(folds) + " folds for " + std::to_string(n) + " samples");
    Rng rng(seed);
    std::vector<std::vector<size_t>> out(static_cast<size_t>(folds));
    size_t next_fold = 0;
    for (size_t c = 0; c < n_classes; ++c) {
        std::vector<size_t> members;
        for (size_t i = 0; i < n; ++i)
            if (class_labels[i] == c) members.push_back(i);
        rng.shuffle(members);
        for (size_t m = 0; m < members.size(); ++m) {
            out[next_fold].push_back(members[m]);
            next_fold = (next_fold + 1) % static_cast<size_t>(folds);
        }
    }
    for (auto& fold : out) std::sort(fold.begin(), fold.end());
    return out;
}

struct FoldOutcome {
    std::vector<size_t> predicted; // aligned with test indices
};

// Trains on `train_idx` and predicts `test_idx` classes; handles binary,
// multi-class and the degenerate single-class training fold.
FoldOutcome run_fold(const KernelMatrix& k, const std::vector<size_t>& class_labels,
                     size_t n_classes, const std::vector<size_t>& train_idx,
                     const std::vector<size_t>& test_idx, const SmoOptions& options,
                     int jobs) {
    FoldOutcome out;
    std::vector<size_t> present;
    for (size_t c = 0; c < n_classes; ++c)
        if (std::any_of(train_idx.begin(), train_idx.end(),
                        [&](size_t i) { return class_labels[i] == c; }))
            present.push_back(c);

    if (present.size() < 2) {
        out.predicted.assign(test_idx.size(), present.empty() ? 0 : present.front());
        return out;
    }

    const KernelMatrix k_train = take_submatrix(k, train_idx, train_idx);
    const KernelMatrix k_cross = take_submatrix(k, test_idx, train_idx);

    if (n_classes == 2) {
        std::vector<int> y(train_idx.size());
        for (size_t i = 0; i < train_idx.size(); ++i)
            y[i] = class_labels[train_idx[i]] == 1 ? +1 : -1;
        const SvmModel model = svm_train(k_train, y, options);
        const Predictions p = svm_predict(model, k_cross);
        out.predicted.resize(test_idx.size());
        for (size_t i = 0; i < test_idx.size(); ++i)
            out.predicted[i] = p.labels[i] > 0 ? 1 : 0;
    } else {
        std::vector<size_t> y(train_idx.size());
        for (size_t i = 0; i < train_idx.size(); ++i) y[i] = class_labels[train_idx[i]];
        const OvrModel model = ovr_train(k_train, y, n_classes, options, jobs);
        out.predicted = ovr_predict(model, k_cross);
    }
    return out;
}

} // namespace

std::string eval_report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["protocol"] = report.protocol == EvalProtocol::TrainTest ? "train_test" : "kfold_cv";
    j["accuracy"] = report.accuracy;
    if (!report.per_fold.empty()) j["per_fold"] = report.per_fold;
    j["confusion"] = report.confusion;
    j["label_set"] = report.label_set;
    j["seed"] = report.seed;
    return j.dump(2);
}

EvalReport kfold_cv(const KernelMatrix& k, const std::vector<size_t>& class_labels,
                    const std::vector<std::string>& label_set, int folds, uint64_t seed,
                    const SmoOptions& options, int jobs) {
    check_square(k);
    const size_t n = k.rows();
    if (class_labels.size() != n) raise(Errc::ManifestMismatch, "labels/kernel size mismatch");
    const size_t n_classes = label_set.size();

    const std::vector<std::vector<size_t>> folds_idx =
        stratified_folds(class_labels, n_classes, folds, seed);

    EvalReport report;
    report.protocol = EvalProtocol::KFoldCv;
    report.label_set = label_set;
    report.seed = seed;
    report.confusion.assign(n_classes, std::vector<int64_t>(n_classes, 0));

    std::vector<char> in_test(n, 0);
    for (const auto& fold : folds_idx) {
        std::fill(in_test.begin(), in_test.end(), 0);
        for (size_t i : fold) in_test[i] = 1;
        std::vector<size_t> train_idx;
        train_idx.reserve(n - fold.size());
        for (size_t i = 0; i < n; ++i)
            if (!in_test[i]) train_idx.push_back(i);

        const FoldOutcome outcome =
            run_fold(k, class_labels, n_classes, train_idx, fold, options, jobs);
        size_t correct = 0;
        for (size_t i = 0; i < fold.size(); ++i) {
            const size_t truth = class_labels[fold[i]];
            const size_t pred = outcome.predicted[i];
            report.confusion[truth][pred] += 1;
            if (truth == pred) ++correct;
        }
        report.per_fold.push_back(fold.empty() ? 0.0
                                               : static_cast<double>(correct) /
                                                     static_cast<double>(fold.size()));
    }

    int64_t trace = 0, total = 0;
    for (size_t a = 0; a < n_classes; ++a)
        for (size_t b = 0; b < n_classes; ++b) {
            total += report.confusion[a][b];
            if (a == b) trace += report.confusion[a][b];
        }
    report.accuracy = total > 0 ? static_cast<double>(trace) / static_cast<double>(total) : 0.0;
    return report;
}

EvalReport eval_train_test(const KernelMatrix& k_train, const std::vector<size_t>& y_train,
                           const KernelMatrix& k_cross, const std::vector<size_t>& y_test,
                           const std::vector<std::string>& label_set,
                           const SmoOptions& options, int jobs) {
    check_square(k_train);
    if (k_cross.col_ids != k_train.row_ids)
        raise(Errc::ManifestMismatch, "cross-kernel columns do not match training manifest");
    const size_t n_classes = label_set.size();

    std::vector<size_t> predicted;
    if (n_classes == 2) {
        std::vector<int> y(y_train.size());
        for (size_t i = 0; i < y_train.size(); ++i) y[i] = y_train[i] == 1 ? +1 : -1;
        const SvmModel model = svm_train(k_train, y, options);
        const Predictions p = svm_predict(model, k_cross);
        predicted.resize(p.labels.size());
        for (size_t i = 0; i < p.labels.size(); ++i) predicted[i] = p.labels[i] > 0 ? 1 : 0;
    } else {
        const OvrModel model = ovr_train(k_train, y_train, n_classes, options, jobs);
        predicted = ovr_predict(model, k_cross);
    }

    EvalReport report;
    report.protocol = EvalProtocol::TrainTest;
    report.label_set = label_set;
    report.confusion.assign(n_classes, std::vector<int64_t>(n_classes, 0));
    size_t correct = 0;
    for (size_t i = 0; i < y_test.size(); ++i) {
        report.confusion[y_test[i]][predicted[i]] += 1;
        if (y_test[i] == predicted[i]) ++correct;
    }
    report.accuracy = y_test.empty()
                          ? 0.0
                          : static_cast<double>(correct) / static_cast<double>(y_test.size());
    return report;
}

KernelMatrix fuse_kernels(const std::vector<KernelMatrix>& kernels, bool require_normalized) {
    if (kernels.empty()) raise(Errc::InvalidConfig, "no kernels to fuse");
    const KernelMatrix& first = kernels.front();
    for (const KernelMatrix& k : kernels) {
        if (k.row_ids != first.row_ids || k.col_ids != first.col_ids)
            raise(Errc::ManifestMismatch, "fused kernels must share manifests");
        if (require_normalized && k.square()) {
            for (size_t i = 0; i < k.rows(); ++i)
                if (std::abs(k.at(i, i) - 1.0) > 1e-6)
                    raise(Errc::NotNormalized,
                          "kernel not normalized (diagonal != 1 at sample '" + k.row_ids[i] +
                              "'); normalize first or pass allow-unnormalized");
        }
    }
    KernelMatrix out = first;
    for (size_t kk = 1; kk < kernels.size(); ++kk)
        simd::axpy(1.0, kernels[kk].values.data(), out.values.data(), out.values.size());
    return out;
}

void save_model(const std::filesystem::path& path, const SvmModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(Errc::IoError, "cannot write model: " + path.string());
    nlohmann::json support = nlohmann::json::array();
    for (size_t i = 0; i < model.manifest.size(); ++i) {
        if (model.alphas[i] == 0.0) continue;
        support.push_back({{"id", model.manifest[i]}, {"alpha", model.alphas[i]}});
    }
    nlohmann::json j;
    j["manifest"] = model.manifest;
    j["support"] = support;
    j["bias"] = model.bias;
    j["C"] = model.C;
    j["kernel"] = model.kernel_recipe;
    out << j.dump(2) << '\n';
    if (!out) raise(Errc::IoError, "write failed: " + path.string());
}

SvmModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::IoError, "cannot open model: " + path.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) raise(Errc::FormatError, "model file malformed: " + path.string());
    SvmModel model;
    model.manifest = j.at("manifest").get<std::vector<std::string>>();
    model.bias = j.at("bias").get<double>();
    model.C = j.at("C").get<double>();
    model.kernel_recipe = j.value("kernel", "");
    model.alphas.assign(model.manifest.size(), 0.0);
    std::unordered_map<std::string, size_t> where;
    for (size_t i = 0; i < model.manifest.size(); ++i) where[model.manifest[i]] = i;
    for (const auto& sv : j.at("support")) {
        const std::string id = sv.at("id").get<std::string>();
        auto it = where.find(id);
        if (it == where.end())
            raise(Errc::FormatError, "support id '" + id + "' not in manifest");
        model.alphas[it->second] = sv.at("alpha").get<double>();
    }
    return model;
}

} // namespace ktc
