#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ticap/capsule.hpp"
#include "ticap/embedding.hpp"
#include "ticap/layers.hpp"
#include "ticap/sample.hpp"

namespace ticap {

// ---------------------------------------------------------------- specs

enum class ModelKind {
    ti_capsule,
    lstm_features_4,
    lstm_features_7,
    lstm_text_71,
    gru_text_71,
    cnn_multichannel_text_71,
    bigru_capsule_text_71,
};

inline const char* kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::ti_capsule: return "ti_capsule";
        case ModelKind::lstm_features_4: return "lstm_features_4";
        case ModelKind::lstm_features_7: return "lstm_features_7";
        case ModelKind::lstm_text_71: return "lstm_text_71";
        case ModelKind::gru_text_71: return "gru_text_71";
        case ModelKind::cnn_multichannel_text_71: return "cnn_multichannel_text_71";
        case ModelKind::bigru_capsule_text_71: return "bigru_capsule_text_71";
    }
    return "?";
}

inline ModelKind parse_kind(const std::string& s) {
    for (ModelKind k : {ModelKind::ti_capsule, ModelKind::lstm_features_4, ModelKind::lstm_features_7,
                        ModelKind::lstm_text_71, ModelKind::gru_text_71, ModelKind::cnn_multichannel_text_71,
                        ModelKind::bigru_capsule_text_71})
        if (s == kind_name(k)) return k;
    throw ValueError("unknown model kind '" + s + "' (UnknownKind)");
}

/// Geometry constants per scale. `paper` keeps the full-size image-branch
/// dimensions; `desk` shrinks the image and first conv so the whole suite
/// runs on a laptop.
struct ScaleProfile {
    std::string name = "desk";
    std::size_t image_size = 64;
    std::size_t conv1_filters = 64;
    static constexpr std::size_t conv_kernel = 9;
    static constexpr std::size_t primary_channels = 32;
    static constexpr std::size_t primary_caps_dim = 8;
    static constexpr std::size_t primary_stride = 2;

    static ScaleProfile paper() { return {"paper", 128, 256}; }
    static ScaleProfile desk() { return {"desk", 64, 64}; }
    static ScaleProfile parse(const std::string& s) {
        if (s == "paper") return paper();
        if (s == "desk") return desk();
        throw ValueError("unknown scale profile '" + s + "' (expected paper or desk)");
    }
};

/// Whether the numeric 7-vector joins the fusion concat ("tin") or the model
/// fuses text and image branches only ("ti").
enum class FusionMode { text_image, text_image_numeric };

inline const char* fusion_name(FusionMode f) {
    return f == FusionMode::text_image ? "ti" : "tin";
}
inline FusionMode parse_fusion(const std::string& s) {
    if (s == "ti") return FusionMode::text_image;
    if (s == "tin") return FusionMode::text_image_numeric;
    throw ValueError("unknown fusion mode '" + s + "' (expected ti or tin)");
}

struct ModelSpec {
    ModelKind kind = ModelKind::ti_capsule;
    std::size_t n = 71;          // padded sequence length
    std::size_t hidden_dim = 8;  // recurrent state width and fusion hidden width
    ScaleProfile profile = ScaleProfile::desk();
    FusionMode fusion = FusionMode::text_image_numeric;
    std::size_t routing_iters = 3;
    std::size_t caps_num_out = 10;
    std::size_t caps_dim_out = 16;
    std::size_t feature_window = 5;  // past days consumed by the features baselines
    std::size_t cnn_filters = 32;    // filters per kernel width in the CNN baseline
    double cnn_dropout = 0.5;

    void validate() const {
        if (hidden_dim < 1) throw ValueError("model spec: hidden_dim must be >= 1");
        if (n < 1) throw ValueError("model spec: n must be >= 1");
        if (routing_iters < 1) throw ValueError("model spec: routing_iters must be >= 1");
        if (feature_window < 1) throw ValueError("model spec: feature_window must be >= 1");
    }

    bool uses_tokens() const {
        return kind != ModelKind::lstm_features_4 && kind != ModelKind::lstm_features_7;
    }
    bool uses_image() const { return kind == ModelKind::ti_capsule; }
    bool uses_numeric() const {
        return kind == ModelKind::ti_capsule && fusion == FusionMode::text_image_numeric;
    }
    bool uses_window() const {
        return kind == ModelKind::lstm_features_4 || kind == ModelKind::lstm_features_7;
    }
};

/// View of one example as the forward pass consumes it. `feature_window`
/// rows are per-day numeric vectors of the days before the sample's date,
/// oldest first; only the features baselines read it.
struct ModelInput {
    const std::vector<int>* token_ids = nullptr;
    const std::vector<double>* image = nullptr;
    std::size_t image_h = 0, image_w = 0;
    const std::array<double, 7>* numeric = nullptr;
    const std::vector<std::array<double, 7>>* feature_window = nullptr;
};

// ---------------------------------------------------------------- model

template <class T>
struct NamedParam {
    std::string name;
    Tensor<T> tensor;
    bool freeze_pad_row = false;  // keep embedding row 0 at zero
};

/// A trainable classifier assembled per ModelSpec. Parameters are registered
/// in a fixed order under stable names; a given (spec, seed) always builds
/// bit-identical initial parameters.
template <class T>
class Model {
public:
    ModelSpec spec;
    std::uint64_t seed = 0;
    std::size_t vocab_size = 0;
    std::size_t embed_dim = 0;

    static Model build(const ModelSpec& ms, const Vocabulary& vocab, std::uint64_t seed) {
        return build_dims(ms, vocab.size(), vocab.dim, seed, &vocab);
    }

    /// Build without a vocabulary (features baselines, or checkpoint loads
    /// where the embedding rows come from the blob files).
    static Model build_dims(const ModelSpec& ms, std::size_t vocab_size, std::size_t embed_dim,
                            std::uint64_t seed, const Vocabulary* vocab = nullptr) {
        ms.validate();
        Model m;
        m.spec = ms;
        m.seed = seed;
        m.vocab_size = vocab_size;
        m.embed_dim = embed_dim;
        Rng rng(seed);

        const std::size_t H = ms.hidden_dim;
        std::size_t fused = 0;

        if (ms.uses_tokens()) {
            if (vocab_size < 2 || embed_dim < 1)
                throw ValueError("model kind " + std::string(kind_name(ms.kind)) +
                                 " needs a vocabulary (MissingVocabulary)");
            std::vector<T> table(vocab_size * embed_dim, T(0));
            if (vocab) {
                for (std::size_t i = 0; i < table.size(); ++i) table[i] = static_cast<T>(vocab->matrix[i]);
            } else {
                Rng erng = rng.fork(0x7ab1e);
                T limit = static_cast<T>(std::sqrt(6.0 / static_cast<double>(vocab_size + embed_dim)));
                for (std::size_t i = embed_dim; i < table.size(); ++i)
                    table[i] = static_cast<T>(erng.uniform(-limit, limit));
            }
            m.embedding = Tensor<T>::param({vocab_size, embed_dim}, std::move(table));
            m.reg("embedding", m.embedding, true);
        }

        switch (ms.kind) {
            case ModelKind::ti_capsule: {
                m.gru_f = GruParams<T>(embed_dim, H, rng);
                m.gru_b = GruParams<T>(embed_dim, H, rng);
                m.reg_gru("gru_fwd", m.gru_f);
                m.reg_gru("gru_bwd", m.gru_b);
                m.text_caps = CapsuleLayerSpec<T>(ms.n, 2 * H, ms.caps_num_out, ms.caps_dim_out,
                                                  ms.routing_iters, rng);
                m.reg("text_caps.W", m.text_caps.W);

                const auto& pr = ms.profile;
                m.conv1 = ConvParams<T>(pr.conv1_filters, pr.conv_kernel, 1, 1, rng);
                m.reg("conv1.weights", m.conv1.weights);
                m.reg("conv1.bias", m.conv1.bias);
                m.primary = PrimaryCapsParams<T>(pr.primary_channels, pr.primary_caps_dim, pr.conv_kernel,
                                                 pr.conv1_filters, pr.primary_stride, rng);
                m.reg("primary.weights", m.primary.conv.weights);
                m.reg("primary.bias", m.primary.conv.bias);
                const CapsNetShapes sh = image_branch_shapes(pr.image_size, pr.image_size, pr.conv1_filters,
                                                             pr.conv_kernel, pr.primary_channels,
                                                             pr.primary_caps_dim, pr.primary_stride,
                                                             ms.caps_num_out, ms.caps_dim_out);
                m.final_caps = CapsuleLayerSpec<T>(sh.primary_num_caps, pr.primary_caps_dim, ms.caps_num_out,
                                                   ms.caps_dim_out, ms.routing_iters, rng);
                m.reg("final_caps.W", m.final_caps.W);

                fused = 2 * ms.caps_num_out * ms.caps_dim_out + (m.spec.uses_numeric() ? 7 : 0);
                m.head_W1 = glorot_uniform<T>({H, fused}, fused, H, rng);
                m.head_b1 = Tensor<T>::param({H}, std::vector<T>(H, T(0)));
                m.head_W2 = glorot_uniform<T>({1, H}, H, 1, rng);
                m.head_b2 = Tensor<T>::param({1}, std::vector<T>(1, T(0)));
                m.reg("head.W1", m.head_W1);
                m.reg("head.b1", m.head_b1);
                m.reg("head.W2", m.head_W2);
                m.reg("head.b2", m.head_b2);
                break;
            }
            case ModelKind::lstm_features_4:
            case ModelKind::lstm_features_7: {
                const std::size_t in_dim = ms.kind == ModelKind::lstm_features_4 ? 4 : 7;
                m.lstm = LstmParams<T>(in_dim, H, rng);
                m.reg_lstm("lstm", m.lstm);
                m.head_W2 = glorot_uniform<T>({1, H}, H, 1, rng);
                m.head_b2 = Tensor<T>::param({1}, std::vector<T>(1, T(0)));
                m.reg("head.W2", m.head_W2);
                m.reg("head.b2", m.head_b2);
                break;
            }
            case ModelKind::lstm_text_71: {
                m.lstm = LstmParams<T>(embed_dim, H, rng);
                m.reg_lstm("lstm", m.lstm);
                m.head_W2 = glorot_uniform<T>({1, H}, H, 1, rng);
                m.head_b2 = Tensor<T>::param({1}, std::vector<T>(1, T(0)));
                m.reg("head.W2", m.head_W2);
                m.reg("head.b2", m.head_b2);
                break;
            }
            case ModelKind::gru_text_71: {
                m.gru_f = GruParams<T>(embed_dim, H, rng);
                m.reg_gru("gru", m.gru_f);
                m.head_W2 = glorot_uniform<T>({1, H}, H, 1, rng);
                m.head_b2 = Tensor<T>::param({1}, std::vector<T>(1, T(0)));
                m.reg("head.W2", m.head_W2);
                m.reg("head.b2", m.head_b2);
                break;
            }
            case ModelKind::cnn_multichannel_text_71: {
                for (std::size_t i = 0; i < 3; ++i) {
                    const std::size_t w = 3 + i;
                    if (w > ms.n) throw ShapeError("cnn baseline: kernel wider than the padded sequence");
                    m.cnn_convs[i] = ConvParams<T>(ms.cnn_filters, w, 1, embed_dim, 1, rng);
                    const std::string base = "cnn.conv" + std::to_string(w);
                    m.reg(base + ".weights", m.cnn_convs[i].weights);
                    m.reg(base + ".bias", m.cnn_convs[i].bias);
                }
                const std::size_t pooled = 3 * ms.cnn_filters;
                m.head_W2 = glorot_uniform<T>({1, pooled}, pooled, 1, rng);
                m.head_b2 = Tensor<T>::param({1}, std::vector<T>(1, T(0)));
                m.reg("head.W2", m.head_W2);
                m.reg("head.b2", m.head_b2);
                break;
            }
            case ModelKind::bigru_capsule_text_71: {
                m.gru_f = GruParams<T>(embed_dim, H, rng);
                m.gru_b = GruParams<T>(embed_dim, H, rng);
                m.reg_gru("gru_fwd", m.gru_f);
                m.reg_gru("gru_bwd", m.gru_b);
                m.text_caps = CapsuleLayerSpec<T>(ms.n, 2 * H, ms.caps_num_out, ms.caps_dim_out,
                                                  ms.routing_iters, rng);
                m.reg("text_caps.W", m.text_caps.W);
                const std::size_t latent = ms.caps_num_out * ms.caps_dim_out;
                m.head_W2 = glorot_uniform<T>({1, latent}, latent, 1, rng);
                m.head_b2 = Tensor<T>::param({1}, std::vector<T>(1, T(0)));
                m.reg("head.W2", m.head_W2);
                m.reg("head.b2", m.head_b2);
                break;
            }
        }
        return m;
    }

    /// Probability of the positive class, differentiable. `training` enables
    /// dropout (CNN baseline); the rng drives dropout masks only.
    Tensor<T> forward(const ModelInput& in, bool training = false, Rng* rng = nullptr) const {
        switch (spec.kind) {
            case ModelKind::ti_capsule: {
                Tensor<T> xtl = text_latent(in);
                Tensor<T> xil = image_latent(in);
                std::vector<Tensor<T>> parts{xtl, xil};
                if (spec.uses_numeric()) parts.push_back(numeric_tensor(in));
                Tensor<T> fusedv = concat_last(parts);
                Tensor<T> hidden = relu(dense(fusedv, head_W1, head_b1));
                return sigmoid(dense(hidden, head_W2, head_b2));
            }
            case ModelKind::lstm_features_4:
            case ModelKind::lstm_features_7: {
                const std::size_t dim = spec.kind == ModelKind::lstm_features_4 ? 4 : 7;
                Tensor<T> X = window_tensor(in, dim);
                LstmState<T> st = LstmState<T>::zeros(spec.hidden_dim);
                for (std::size_t t = 0; t < spec.feature_window; ++t) st = lstm_cell(slice_row(X, t), st, lstm);
                return sigmoid(dense(st.h, head_W2, head_b2));
            }
            case ModelKind::lstm_text_71: {
                Tensor<T> X = embedded(in);
                LstmState<T> st = LstmState<T>::zeros(spec.hidden_dim);
                for (std::size_t t = 0; t < spec.n; ++t) st = lstm_cell(slice_row(X, t), st, lstm);
                return sigmoid(dense(st.h, head_W2, head_b2));
            }
            case ModelKind::gru_text_71: {
                Tensor<T> X = embedded(in);
                Tensor<T> h = Tensor<T>::zeros({spec.hidden_dim});
                for (std::size_t t = 0; t < spec.n; ++t) h = gru_cell(slice_row(X, t), h, gru_f);
                return sigmoid(dense(h, head_W2, head_b2));
            }
            case ModelKind::cnn_multichannel_text_71: {
                Tensor<T> X = reshape(embedded(in), {spec.n, 1, embed_dim});
                std::vector<Tensor<T>> pooled;
                for (std::size_t i = 0; i < 3; ++i) {
                    Tensor<T> fm = conv2d_valid(X, cnn_convs[i]);
                    Tensor<T> flat = reshape(fm, {fm.shape()[0], spec.cnn_filters});
                    pooled.push_back(colmax(relu(flat)));
                }
                Tensor<T> feats = concat_last(pooled);
                if (training && spec.cnn_dropout > 0.0) {
                    if (!rng) throw ValueError("cnn forward: training mode needs an rng for dropout");
                    feats = mul(feats, dropout_mask<T>(feats.shape(), static_cast<T>(spec.cnn_dropout), *rng));
                }
                return sigmoid(dense(feats, head_W2, head_b2));
            }
            case ModelKind::bigru_capsule_text_71: {
                Tensor<T> lat = text_latent(in);
                return sigmoid(dense(lat, head_W2, head_b2));
            }
        }
        throw ValueError("forward: unhandled model kind");
    }

    /// 1 iff probability > 0.5 (ties go to 0).
    int predict(const ModelInput& in) const {
        return forward(in, false, nullptr).item() > T(0.5) ? 1 : 0;
    }

    std::vector<NamedParam<T>>& params() { return params_; }
    const std::vector<NamedParam<T>>& params() const { return params_; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p.tensor.numel();
        return n;
    }

    void zero_grads() {
        for (auto& p : params_) p.tensor.zero_grad();
    }

    // -------- checkpoints

    /// Directory layout: manifest.json plus one raw little-endian float64
    /// blob per named tensor.
    void save_checkpoint(const std::string& dir, int epoch) const {
        namespace fs = std::filesystem;
        fs::create_directories(dir);
        nlohmann::json man;
        man["format"] = "ticap-checkpoint-v1";
        man["kind"] = kind_name(spec.kind);
        man["n"] = spec.n;
        man["hidden_dim"] = spec.hidden_dim;
        man["profile"] = spec.profile.name;
        man["fusion"] = fusion_name(spec.fusion);
        man["routing_iters"] = spec.routing_iters;
        man["caps_num_out"] = spec.caps_num_out;
        man["caps_dim_out"] = spec.caps_dim_out;
        man["feature_window"] = spec.feature_window;
        man["cnn_filters"] = spec.cnn_filters;
        man["cnn_dropout"] = spec.cnn_dropout;
        man["vocab_size"] = vocab_size;
        man["embed_dim"] = embed_dim;
        man["seed"] = seed;
        man["epoch"] = epoch;
        nlohmann::json tens = nlohmann::json::array();
        for (const auto& p : params_) {
            nlohmann::json t;
            t["name"] = p.name;
            t["shape"] = p.tensor.shape();
            t["file"] = p.name + ".bin";
            tens.push_back(t);
            std::ofstream blob(fs::path(dir) / (p.name + ".bin"), std::ios::binary);
            if (!blob) throw IoError("cannot write checkpoint tensor " + p.name);
            for (const T& v : p.tensor.value()) {
                const double d = static_cast<double>(v);
                blob.write(reinterpret_cast<const char*>(&d), sizeof d);
            }
        }
        man["tensors"] = tens;
        std::ofstream out(fs::path(dir) / "manifest.json", std::ios::binary);
        if (!out) throw IoError("cannot write checkpoint manifest in " + dir);
        out << man.dump(2) << '\n';
    }

    static Model load_checkpoint(const std::string& dir) {
        namespace fs = std::filesystem;
        std::ifstream in(fs::path(dir) / "manifest.json");
        if (!in) throw IoError("cannot open checkpoint manifest in " + dir);
        nlohmann::json man;
        try {
            in >> man;
        } catch (const std::exception& e) {
            throw ParseError("corrupt checkpoint manifest in " + dir + ": " + e.what());
        }
        ModelSpec ms;
        try {
            ms.kind = parse_kind(man.at("kind").get<std::string>());
            ms.n = man.at("n").get<std::size_t>();
            ms.hidden_dim = man.at("hidden_dim").get<std::size_t>();
            ms.profile = ScaleProfile::parse(man.at("profile").get<std::string>());
            ms.fusion = parse_fusion(man.at("fusion").get<std::string>());
            ms.routing_iters = man.at("routing_iters").get<std::size_t>();
            ms.caps_num_out = man.at("caps_num_out").get<std::size_t>();
            ms.caps_dim_out = man.at("caps_dim_out").get<std::size_t>();
            ms.feature_window = man.at("feature_window").get<std::size_t>();
            ms.cnn_filters = man.at("cnn_filters").get<std::size_t>();
            ms.cnn_dropout = man.at("cnn_dropout").get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("corrupt checkpoint manifest in " + dir + ": " + e.what());
        }
        Model m = build_dims(ms, man.at("vocab_size").get<std::size_t>(), man.at("embed_dim").get<std::size_t>(),
                             man.at("seed").get<std::uint64_t>());
        m.epoch = man.at("epoch").get<int>();
        for (const auto& t : man.at("tensors")) {
            const std::string name = t.at("name").get<std::string>();
            NamedParam<T>* target = nullptr;
            for (auto& p : m.params_)
                if (p.name == name) target = &p;
            if (!target) throw ParseError("checkpoint tensor '" + name + "' does not exist in model " +
                                          kind_name(ms.kind));
            std::ifstream blob(fs::path(dir) / t.at("file").get<std::string>(), std::ios::binary);
            if (!blob) throw IoError("cannot open checkpoint tensor file for '" + name + "' in " + dir);
            auto& vals = target->tensor.raw_value();
            for (std::size_t i = 0; i < vals.size(); ++i) {
                double d = 0;
                blob.read(reinterpret_cast<char*>(&d), sizeof d);
                if (!blob) throw ParseError("checkpoint tensor '" + name + "' truncated in " + dir);
                vals[i] = static_cast<T>(d);
            }
        }
        return m;
    }

    int epoch = 0;

    // components are public for tests and the gradient-check harness
    Tensor<T> embedding;
    GruParams<T> gru_f, gru_b;
    LstmParams<T> lstm;
    CapsuleLayerSpec<T> text_caps;
    ConvParams<T> conv1;
    PrimaryCapsParams<T> primary;
    CapsuleLayerSpec<T> final_caps;
    std::array<ConvParams<T>, 3> cnn_convs;
    Tensor<T> head_W1, head_b1, head_W2, head_b2;

private:
    std::vector<NamedParam<T>> params_;

    void reg(const std::string& name, const Tensor<T>& t, bool freeze_pad = false) {
        params_.push_back({name, t, freeze_pad});
    }
    void reg_gru(const std::string& base, const GruParams<T>& g) {
        const char* names[] = {"Wz", "Wr", "Wn", "Uz", "Ur", "Un", "bz", "br", "bh"};
        auto ts = g.tensors();
        for (std::size_t i = 0; i < ts.size(); ++i) reg(base + "." + names[i], ts[i]);
    }
    void reg_lstm(const std::string& base, const LstmParams<T>& l) {
        const char* names[] = {"Wf", "Wi", "Wo", "Wg", "Uf", "Ui", "Uo", "Ug", "bf", "bi", "bo", "bg"};
        auto ts = l.tensors();
        for (std::size_t i = 0; i < ts.size(); ++i) reg(base + "." + names[i], ts[i]);
    }

    Tensor<T> embedded(const ModelInput& in) const {
        if (!in.token_ids) throw ValueError("forward: sample has no token ids (InputMismatch)");
        if (in.token_ids->size() != spec.n)
            throw ValueError("forward: token sequence length " + std::to_string(in.token_ids->size()) +
                             " != n=" + std::to_string(spec.n) + " (InputMismatch)");
        return embedding_gather(embedding, *in.token_ids);
    }

    Tensor<T> text_latent(const ModelInput& in) const {
        Tensor<T> X = embedded(in);
        Tensor<T> enc = bigru_sequence(X, gru_f, gru_b);
        return text_caps_forward(enc, text_caps);
    }

    Tensor<T> image_latent(const ModelInput& in) const {
        const std::size_t is = spec.profile.image_size;
        if (!in.image) throw ValueError("forward: sample has no image (InputMismatch)");
        if (in.image_h != is || in.image_w != is)
            throw ValueError("forward: image is " + std::to_string(in.image_w) + "x" +
                             std::to_string(in.image_h) + ", profile " + spec.profile.name + " expects " +
                             std::to_string(is) + "x" + std::to_string(is) + " (InputMismatch)");
        std::vector<T> pix(in.image->size());
        for (std::size_t i = 0; i < pix.size(); ++i) pix[i] = static_cast<T>((*in.image)[i]);
        Tensor<T> img = Tensor<T>::constant({is, is, 1}, std::move(pix));
        Tensor<T> feats = relu(conv2d_valid(img, conv1));
        Tensor<T> caps = primary_caps_forward(feats, primary);
        return final_caps_forward(caps, final_caps);
    }

    Tensor<T> numeric_tensor(const ModelInput& in) const {
        if (!in.numeric) throw ValueError("forward: sample has no numeric vector (InputMismatch)");
        std::vector<T> v(7);
        for (std::size_t i = 0; i < 7; ++i) v[i] = static_cast<T>((*in.numeric)[i]);
        return Tensor<T>::constant({7}, std::move(v));
    }

    Tensor<T> window_tensor(const ModelInput& in, std::size_t dim) const {
        if (!in.feature_window) throw ValueError("forward: sample has no feature window (InputMismatch)");
        if (in.feature_window->size() != spec.feature_window)
            throw ValueError("forward: feature window has " + std::to_string(in.feature_window->size()) +
                             " rows, expected " + std::to_string(spec.feature_window) + " (InputMismatch)");
        std::vector<T> data(spec.feature_window * dim);
        for (std::size_t t = 0; t < spec.feature_window; ++t) {
            const auto& row = (*in.feature_window)[t];
            // 4-feature variant keeps the quote fields only (last four slots)
            const std::size_t off = dim == 4 ? 3 : 0;
            for (std::size_t k = 0; k < dim; ++k) data[t * dim + k] = static_cast<T>(row[off + k]);
        }
        return Tensor<T>::constant({spec.feature_window, dim}, std::move(data));
    }
};

}  // namespace ticap
