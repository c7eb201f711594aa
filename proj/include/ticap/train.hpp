#pragma once

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ticap/model.hpp"

namespace ticap {

// ---------------------------------------------------------------- dataset

/// Samples plus the per-sample past-day feature windows the features
/// baselines consume. Window rows are the mean numeric vector of each of
/// the `window` trading dates strictly before the sample's date, oldest
/// first, zero-padded at the front when history is short.
struct Dataset {
    std::vector<Sample> samples;
    std::vector<std::vector<std::array<double, 7>>> windows;

    static Dataset from_samples(std::vector<Sample> samples, std::size_t window) {
        Dataset ds;
        ds.samples = std::move(samples);
        std::map<long, std::array<double, 7>> sums;
        std::map<long, std::size_t> counts;
        for (const auto& s : ds.samples) {
            auto& acc = sums[s.date.serial()];
            for (std::size_t k = 0; k < 7; ++k) acc[k] += s.numeric[k];
            counts[s.date.serial()]++;
        }
        std::vector<long> dates;
        std::vector<std::array<double, 7>> by_date;
        for (auto& [serial, acc] : sums) {
            for (std::size_t k = 0; k < 7; ++k) acc[k] /= static_cast<double>(counts[serial]);
            dates.push_back(serial);
            by_date.push_back(acc);
        }
        ds.windows.resize(ds.samples.size());
        for (std::size_t i = 0; i < ds.samples.size(); ++i) {
            const long serial = ds.samples[i].date.serial();
            const auto it = std::lower_bound(dates.begin(), dates.end(), serial);
            const std::size_t pos = static_cast<std::size_t>(it - dates.begin());
            auto& w = ds.windows[i];
            w.assign(window, std::array<double, 7>{});
            for (std::size_t t = 0; t < window; ++t) {
                // slot window-1 is the day immediately before the sample
                const long back = static_cast<long>(window - t);
                const long src = static_cast<long>(pos) - back;
                if (src >= 0) w[t] = by_date[static_cast<std::size_t>(src)];
            }
        }
        return ds;
    }

    ModelInput input(std::size_t i) const {
        const Sample& s = samples[i];
        ModelInput in;
        in.token_ids = &s.token_ids;
        in.numeric = &s.numeric;
        in.image = &s.image;
        in.image_h = s.image_h;
        in.image_w = s.image_w;
        in.feature_window = &windows[i];
        return in;
    }

    std::size_t size() const { return samples.size(); }
};

// ---------------------------------------------------------------- split

/// Seeded shuffle, then the first floor(0.8 N) indices train and the rest
/// test. Partitions are disjoint, covering, and identical for equal seeds.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_80_20(std::size_t n,
                                                                                 std::uint64_t seed) {
    if (n < 5) throw ValueError("split_80_20: need at least 5 samples, got " + std::to_string(n) +
                                " (TooFewSamples)");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(seed);
    rng.shuffle(idx);
    const std::size_t train_n = (n * 8) / 10;  // floor(0.8 N)
    std::vector<std::size_t> train(idx.begin(), idx.begin() + train_n);
    std::vector<std::size_t> test(idx.begin() + train_n, idx.end());
    return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------- metrics

struct ConfusionMatrix {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    std::size_t total() const { return tp + fp + fn + tn; }
};

/// Counts with label 1 as the positive class. Zero-length input yields the
/// all-zero matrix.
inline ConfusionMatrix confusion(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size())
        throw ValueError("confusion: " + std::to_string(predictions.size()) + " predictions vs " +
                         std::to_string(labels.size()) + " labels (LengthMismatch)");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1)
            predictions[i] == 1 ? ++cm.tp : ++cm.fn;
        else
            predictions[i] == 1 ? ++cm.fp : ++cm.tn;
    }
    return cm;
}

struct MetricsReport {
    double accuracy = 0, precision = 0, recall = 0, f1 = 0;
    bool precision_undefined = false, recall_undefined = false, f1_undefined = false;
    std::vector<std::pair<double, double>> loss_curve;  // per-epoch (train, test)
};

/// accuracy = (tp+tn)/total, precision = tp/(tp+fp), recall = tp/(tp+fn),
/// F1 = harmonic mean of precision and recall. A zero denominator yields 0
/// with the matching undefined flag set instead of an error.
inline MetricsReport metrics(const ConfusionMatrix& cm) {
    MetricsReport r;
    const double total = static_cast<double>(cm.total());
    r.accuracy = total > 0 ? static_cast<double>(cm.tp + cm.tn) / total : 0.0;
    if (cm.tp + cm.fp > 0)
        r.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
    else
        r.precision_undefined = true;
    if (cm.tp + cm.fn > 0)
        r.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
    else
        r.recall_undefined = true;
    if (r.precision + r.recall > 0)
        r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    else
        r.f1_undefined = true;
    return r;
}

// ---------------------------------------------------------------- optimizers

struct TrainSpec {
    std::size_t batch_size = 8;
    std::size_t epochs = 50;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    enum class Optimizer { sgd, adam } optimizer = Optimizer::adam;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

    void validate() const {
        if (batch_size < 1) throw ValueError("train spec: batch_size must be >= 1");
        if (epochs < 1) throw ValueError("train spec: epochs must be >= 1");
        // zero is allowed: a null update leaves parameters untouched
        if (!(learning_rate >= 0.0)) throw ValueError("train spec: learning_rate must be >= 0");
    }

    static Optimizer parse_optimizer(const std::string& s) {
        if (s == "sgd") return Optimizer::sgd;
        if (s == "adam") return Optimizer::adam;
        throw ValueError("unknown optimizer '" + s + "' (expected sgd or adam)");
    }
};

/// Applies averaged gradients to the registered parameters in registry
/// order. Frozen padding rows (embedding row 0) never move.
template <class T>
class Optimizer {
public:
    Optimizer(std::vector<NamedParam<T>>& params, const TrainSpec& spec) : params_(params), spec_(spec) {
        if (spec_.optimizer == TrainSpec::Optimizer::adam) {
            m_.resize(params_.size());
            v_.resize(params_.size());
            for (std::size_t i = 0; i < params_.size(); ++i) {
                m_[i].assign(params_[i].tensor.numel(), T(0));
                v_[i].assign(params_[i].tensor.numel(), T(0));
            }
        }
    }

    void zero_grads() {
        for (auto& p : params_) p.tensor.zero_grad();
    }

    /// grad_scale folds in the 1/batch averaging.
    void step(T grad_scale) {
        ++t_;
        const T lr = static_cast<T>(spec_.learning_rate);
        for (std::size_t pi = 0; pi < params_.size(); ++pi) {
            auto& p = params_[pi];
            auto& val = p.tensor.raw_value();
            auto& grad = p.tensor.raw_grad();
            const std::size_t row = p.freeze_pad_row ? p.tensor.shape().back() : 0;
            if (spec_.optimizer == TrainSpec::Optimizer::sgd) {
                for (std::size_t i = row; i < val.size(); ++i) val[i] -= lr * grad[i] * grad_scale;
            } else {
                const T b1 = static_cast<T>(spec_.beta1), b2 = static_cast<T>(spec_.beta2);
                const T eps = static_cast<T>(spec_.adam_eps);
                const T bc1 = T(1) - static_cast<T>(std::pow(static_cast<double>(b1), t_));
                const T bc2 = T(1) - static_cast<T>(std::pow(static_cast<double>(b2), t_));
                auto& m = m_[pi];
                auto& v = v_[pi];
                for (std::size_t i = row; i < val.size(); ++i) {
                    const T g = grad[i] * grad_scale;
                    m[i] = b1 * m[i] + (T(1) - b1) * g;
                    v[i] = b2 * v[i] + (T(1) - b2) * g * g;
                    val[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
                }
            }
        }
    }

private:
    std::vector<NamedParam<T>>& params_;
    TrainSpec spec_;
    std::vector<std::vector<T>> m_, v_;
    int t_ = 0;
};

// ---------------------------------------------------------------- evaluation

template <class T>
struct EvalResult {
    double mean_loss = 0.0;
    std::vector<int> predictions;
    std::vector<int> labels;
    MetricsReport report() const { return metrics(confusion(predictions, labels)); }
};

/// Frozen-model pass over the given indices (no dropout).
template <class T>
EvalResult<T> evaluate(const Model<T>& model, const Dataset& data, const std::vector<std::size_t>& idx) {
    EvalResult<T> r;
    r.predictions.resize(idx.size());
    r.labels.resize(idx.size());
    std::vector<double> losses(idx.size());
    parallel_for(idx.size(), [&](std::size_t k) {
        const ModelInput in = data.input(idx[k]);
        Tensor<T> p = model.forward(in, false, nullptr);
        const int y = data.samples[idx[k]].label;
        losses[k] = static_cast<double>(bce_loss(p, static_cast<T>(y)).item());
        r.predictions[k] = p.item() > T(0.5) ? 1 : 0;
        r.labels[k] = y;
    });
    for (double l : losses) r.mean_loss += l;
    if (!idx.empty()) r.mean_loss /= static_cast<double>(idx.size());
    return r;
}

// ---------------------------------------------------------------- training loop

using LossCurve = std::vector<std::pair<double, double>>;  // (train, test) per epoch

/// Called after each epoch; return false to stop early (the curve keeps the
/// epochs actually run).
template <class T>
using EpochCallback = std::function<bool(int epoch, double train_loss, double test_loss, Model<T>& model)>;

/// Minibatch training. Gradients accumulate per sample in a fixed order and
/// one optimizer step runs per batch, so a given seed reproduces the run
/// bit for bit. Test loss is evaluated on the frozen model after each
/// epoch. A NaN loss aborts with DivergenceError carrying the epoch.
template <class T>
LossCurve train(Model<T>& model, const Dataset& data, const std::vector<std::size_t>& train_idx,
                const std::vector<std::size_t>& test_idx, const TrainSpec& spec,
                const EpochCallback<T>& on_epoch = nullptr) {
    spec.validate();
    if (train_idx.empty()) throw ValueError("train: empty training set");
    Optimizer<T> opt(model.params(), spec);
    Rng order_rng = Rng(spec.seed).fork(0x0e0c);
    Rng dropout_rng = Rng(spec.seed).fork(0xd201);
    LossCurve curve;

    for (std::size_t epoch = 0; epoch < spec.epochs; ++epoch) {
        std::vector<std::size_t> order = train_idx;
        order_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += spec.batch_size) {
            const std::size_t stop = std::min(order.size(), start + spec.batch_size);
            opt.zero_grads();
            for (std::size_t k = start; k < stop; ++k) {
                try {
                    const ModelInput in = data.input(order[k]);
                    Tensor<T> p = model.forward(in, true, &dropout_rng);
                    Tensor<T> loss = bce_loss(p, static_cast<T>(data.samples[order[k]].label));
                    epoch_loss += static_cast<double>(loss.item());
                    GradTape<T> tape(loss);
                    tape.backward();
                } catch (const NumericError& e) {
                    throw DivergenceError(std::string("training diverged at epoch ") +
                                              std::to_string(epoch + 1) + ": " + e.what() +
                                              " (DivergenceDetected)",
                                          static_cast<int>(epoch + 1));
                }
            }
            opt.step(T(1) / static_cast<T>(stop - start));
        }
        epoch_loss /= static_cast<double>(order.size());
        double test_loss = 0.0;
        if (!test_idx.empty()) test_loss = evaluate(model, data, test_idx).mean_loss;
        if (!std::isfinite(epoch_loss) || !std::isfinite(test_loss))
            throw DivergenceError("training diverged (non-finite loss) at epoch " + std::to_string(epoch + 1) +
                                      " (DivergenceDetected)",
                                  static_cast<int>(epoch + 1));
        curve.emplace_back(epoch_loss, test_loss);
        model.epoch = static_cast<int>(epoch + 1);
        if (on_epoch && !on_epoch(static_cast<int>(epoch + 1), epoch_loss, test_loss, model)) break;
    }
    return curve;
}

/// CSV `epoch,train_loss,test_loss`, one row per epoch run.
inline void write_loss_csv(const std::string& path, const LossCurve& curve) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write loss curve: " + path);
    out << "epoch,train_loss,test_loss\n";
    char buf[64];
    for (std::size_t e = 0; e < curve.size(); ++e) {
        std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g\n", e + 1, curve[e].first, curve[e].second);
        out << buf;
    }
}

// ---------------------------------------------------------------- sweeps

enum class SweepParam { batch_size, hidden_dim };

inline SweepParam parse_sweep_param(const std::string& s) {
    if (s == "batch_size") return SweepParam::batch_size;
    if (s == "hidden_dim") return SweepParam::hidden_dim;
    throw ValueError("unknown sweep parameter '" + s + "' (expected batch_size or hidden_dim)");
}

inline std::vector<std::size_t> default_sweep_values() { return {8, 16, 32, 64, 128, 256}; }

struct SweepRow {
    std::size_t value = 0;
    MetricsReport report;
};

/// One full train+eval per value on a single seeded split shared by all
/// rows, so rows differ only in the swept parameter.
template <class T>
std::vector<SweepRow> sweep(SweepParam param, const std::vector<std::size_t>& values, const ModelSpec& base_model,
                            const TrainSpec& base_train, const Dataset& data, const Vocabulary& vocab) {
    auto [train_idx, test_idx] = split_80_20(data.size(), base_train.seed);
    std::vector<SweepRow> rows;
    for (std::size_t v : values) {
        ModelSpec ms = base_model;
        TrainSpec ts = base_train;
        if (param == SweepParam::batch_size)
            ts.batch_size = v;
        else
            ms.hidden_dim = v;
        Model<T> model = ms.uses_tokens() ? Model<T>::build(ms, vocab, ts.seed)
                                          : Model<T>::build_dims(ms, 0, 0, ts.seed);
        LossCurve curve = train(model, data, train_idx, test_idx, ts);
        EvalResult<T> ev = evaluate(model, data, test_idx);
        SweepRow row;
        row.value = v;
        row.report = ev.report();
        row.report.loss_curve = curve;
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------- report table

struct ReportRow {
    std::string method;
    MetricsReport report;
};

/// Plain-text table, columns method/accuracy/precision/recall/f1 in that
/// order, metrics printed with four decimals.
inline std::string format_report_table(const std::vector<ReportRow>& rows) {
    std::size_t width = std::string("method").size();
    for (const auto& r : rows) width = std::max(width, r.method.size());
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-*s  %8s  %9s  %8s  %8s\n", static_cast<int>(width), "method", "accuracy",
                  "precision", "recall", "f1");
    out += buf;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%-*s  %8.4f  %9.4f  %8.4f  %8.4f\n", static_cast<int>(width),
                      r.method.c_str(), r.report.accuracy, r.report.precision, r.report.recall, r.report.f1);
        out += buf;
    }
    return out;
}

inline void write_report_csv(const std::string& path, const std::vector<ReportRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write report: " + path);
    out << "method,accuracy,precision,recall,f1\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%.4f,%.4f,%.4f,%.4f\n", r.method.c_str(), r.report.accuracy,
                      r.report.precision, r.report.recall, r.report.f1);
        out << buf;
    }
}

inline void write_sweep_csv(const std::string& path, const std::string& param_name,
                            const std::vector<SweepRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write sweep table: " + path);
    out << param_name << ",accuracy,precision,recall,f1\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%zu,%.4f,%.4f,%.4f,%.4f\n", r.value, r.report.accuracy,
                      r.report.precision, r.report.recall, r.report.f1);
        out << buf;
    }
}

}  // namespace ticap
