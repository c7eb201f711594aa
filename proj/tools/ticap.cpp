// ticap: batch CLI for the capsule-fusion market-direction pipeline.
// Subcommands: preprocess, synth, train, evaluate, sweep, gradcheck.
// Exit codes: 0 success, 2 usage/input error, 3 numeric failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ticap/alloctune.hpp"
#include "ticap/gradcheck.hpp"
#include "ticap/pipeline.hpp"
#include "ticap/synth.hpp"
#include "ticap/train.hpp"

namespace fs = std::filesystem;
using namespace ticap;

namespace {

struct TrainArgs {
    std::string data_dir;
    std::string out_dir = "run";
    std::string model = "ti_capsule";
    std::string profile = "desk";
    std::string fusion = "tin";
    std::string optimizer = "adam";
    std::size_t batch_size = 8;
    std::size_t hidden_dim = 8;
    std::size_t epochs = 50;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    bool f32 = false;
};

ModelSpec model_spec_from(const TrainArgs& a, std::size_t n_tokens) {
    ModelSpec ms;
    ms.kind = parse_kind(a.model);
    ms.profile = ScaleProfile::parse(a.profile);
    ms.fusion = parse_fusion(a.fusion);
    ms.hidden_dim = a.hidden_dim;
    ms.n = n_tokens;
    return ms;
}

TrainSpec train_spec_from(const TrainArgs& a) {
    TrainSpec ts;
    ts.batch_size = a.batch_size;
    ts.epochs = a.epochs;
    ts.learning_rate = a.learning_rate;
    ts.seed = a.seed;
    ts.optimizer = TrainSpec::parse_optimizer(a.optimizer);
    return ts;
}

Dataset load_dataset(const std::string& data_dir, std::size_t feature_window) {
    auto samples = load_manifest((fs::path(data_dir) / "manifest.tsv").string());
    if (samples.empty()) throw ValueError("manifest is empty: " + data_dir);
    return Dataset::from_samples(std::move(samples), feature_window);
}

template <class T>
int run_train(const TrainArgs& args) {
    ModelSpec probe_spec;  // feature_window default, needed before the model exists
    Dataset data = load_dataset(args.data_dir, probe_spec.feature_window);
    const std::size_t n_tokens = data.samples[0].token_ids.size();
    ModelSpec ms = model_spec_from(args, n_tokens);
    TrainSpec ts = train_spec_from(args);

    Model<T> model = [&] {
        if (!ms.uses_tokens()) return Model<T>::build_dims(ms, 0, 0, ts.seed);
        const Vocabulary vocab = load_vocabulary((fs::path(args.data_dir) / "vocabulary.txt").string());
        return Model<T>::build(ms, vocab, ts.seed);
    }();

    auto [train_idx, test_idx] = split_80_20(data.size(), ts.seed);
    std::printf("training %s (%s, %s) on %zu samples (%zu train / %zu test), seed %llu\n", args.model.c_str(),
                args.profile.c_str(), args.fusion.c_str(), data.size(), train_idx.size(), test_idx.size(),
                static_cast<unsigned long long>(ts.seed));

    LossCurve curve = train<T>(model, data, train_idx, test_idx, ts,
                               [&](int epoch, double tr, double te, Model<T>&) {
                                   std::printf("epoch %3d  train_loss %.6f  test_loss %.6f\n", epoch, tr, te);
                                   std::fflush(stdout);
                                   return true;
                               });

    fs::create_directories(args.out_dir);
    write_loss_csv((fs::path(args.out_dir) / "loss.csv").string(), curve);
    const std::string ckpt = (fs::path(args.out_dir) / "checkpoint").string();
    model.save_checkpoint(ckpt, static_cast<int>(curve.size()));

    EvalResult<T> ev = evaluate(model, data, test_idx);
    MetricsReport rep = ev.report();
    std::printf("test  accuracy %.4f  precision %.4f  recall %.4f  f1 %.4f\n", rep.accuracy, rep.precision,
                rep.recall, rep.f1);
    std::printf("wrote %s and %s\n", (fs::path(args.out_dir) / "loss.csv").c_str(), ckpt.c_str());
    return 0;
}

template <class T>
int run_sweep(const TrainArgs& args, const std::string& param_name, std::vector<std::size_t> values,
              const std::string& out_csv) {
    const SweepParam param = parse_sweep_param(param_name);
    if (values.empty()) values = default_sweep_values();
    ModelSpec probe_spec;
    Dataset data = load_dataset(args.data_dir, probe_spec.feature_window);
    ModelSpec ms = model_spec_from(args, data.samples[0].token_ids.size());
    TrainSpec ts = train_spec_from(args);
    Vocabulary vocab;
    if (ms.uses_tokens()) vocab = load_vocabulary((fs::path(args.data_dir) / "vocabulary.txt").string());

    auto rows = sweep<T>(param, values, ms, ts, data, vocab);
    std::printf("%s sweep on %s:\n%-10s  %8s  %9s  %8s  %8s\n", param_name.c_str(), args.model.c_str(),
                param_name.c_str(), "accuracy", "precision", "recall", "f1");
    for (const auto& r : rows)
        std::printf("%-10zu  %8.4f  %9.4f  %8.4f  %8.4f\n", r.value, r.report.accuracy, r.report.precision,
                    r.report.recall, r.report.f1);
    if (!out_csv.empty()) {
        write_sweep_csv(out_csv, param_name, rows);
        std::printf("wrote %s\n", out_csv.c_str());
    }
    return 0;
}

int run_evaluate(const std::string& data_dir, const std::vector<std::string>& checkpoints,
                 const std::string& out_csv, const std::string& split) {
    std::vector<ReportRow> rows;
    Dataset data;
    bool data_loaded = false;
    for (const auto& dir : checkpoints) {
        Model<double> model = Model<double>::load_checkpoint(dir);
        if (!data_loaded) {
            data = load_dataset(data_dir, model.spec.feature_window);
            data_loaded = true;
        }
        std::vector<std::size_t> idx;
        if (split == "all") {
            idx.resize(data.size());
            for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        } else {
            idx = split_80_20(data.size(), model.seed).second;
        }
        EvalResult<double> ev = evaluate(model, data, idx);
        rows.push_back({kind_name(model.spec.kind), ev.report()});
    }
    std::fputs(format_report_table(rows).c_str(), stdout);
    if (!out_csv.empty()) {
        write_report_csv(out_csv, rows);
        std::printf("wrote %s\n", out_csv.c_str());
    }
    return 0;
}

int run_gradcheck(std::uint64_t seed, const std::string& inject, std::size_t instances,
                  std::size_t model_instances, std::size_t model_probes) {
    auto reports = gradcheck_suite(seed, inject, instances, model_instances, model_probes);
    bool all_ok = true;
    std::printf("gradient check, seed %llu, tolerance 1e-4\n", static_cast<unsigned long long>(seed));
    for (const auto& r : reports) {
        std::printf("  %s %-18s instances=%-4zu probes=%-5zu max_rel_err=%.3e\n", r.passed ? "PASS" : "FAIL",
                    r.layer.c_str(), r.instances, r.probes, r.max_rel_err);
        all_ok = all_ok && r.passed;
    }
    std::printf(all_ok ? "all layers passed\n" : "gradient check FAILED\n");
    return all_ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    tune_allocator();
    CLI::App app{"capsule-fusion market direction pipeline"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key=value config file; flags override it");

    // ---- synth
    auto* synth = app.add_subcommand("synth", "generate a planted synthetic dataset");
    SynthConfig sc;
    std::string synth_out = "synth";
    std::string synth_profile = "desk";
    synth->add_option("--count", sc.count, "number of labeled days")->default_val(1000);
    synth->add_option("--seed", sc.seed, "rng seed")->default_val(7);
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--window", sc.window, "chart window in days")->default_val(20);
    synth->add_option("--profile", synth_profile, "chart size profile: paper or desk")->default_val("desk");
    synth->add_option("--embed-dim", sc.embed_dim, "synthetic embedding dimension")->default_val(16);

    // ---- preprocess
    auto* pre = app.add_subcommand("preprocess", "corpus + market -> manifest, charts, vocabulary");
    PreprocessConfig pc;
    std::string pre_profile = "desk";
    pre->add_option("--corpus", pc.corpus_path, "date<TAB>source<TAB>text corpus")->required();
    pre->add_option("--market", pc.market_path, "date,price,open,high,low,exchange CSV")->required();
    pre->add_option("--stopwords", pc.stopwords_path, "stop-word list, one token per line")->required();
    pre->add_option("--embeddings", pc.embeddings_path, "pretrained embedding file")->required();
    pre->add_option("--wordlist", pc.wordlist_path, "language wordlist (default: embedding vocab + stopwords)");
    pre->add_option("--lexicon", pc.lexicon_path, "polarity lexicon (default: built-in)");
    pre->add_option("--out", pc.outdir, "output directory")->required();
    pre->add_option("--seed", pc.seed, "split seed for quote scaling")->default_val(0);
    pre->add_option("--n", pc.n, "padded token sequence length")->default_val(71);
    pre->add_option("--profile", pre_profile, "chart size profile: paper or desk")->default_val("desk");
    pre->add_option("--window", pc.chart_window, "chart window in days")->default_val(20);
    pre->add_option("--lang-threshold", pc.language_threshold, "minimum English token ratio")->default_val(0.4);
    pre->add_flag("--bollinger", pc.bollinger, "overlay Bollinger bands on charts");

    // ---- train
    auto* tr = app.add_subcommand("train", "train one model, write checkpoint and loss curve");
    TrainArgs ta;
    tr->add_option("--data", ta.data_dir, "preprocess output directory")->required();
    tr->add_option("--out", ta.out_dir, "run output directory")->default_val("run");
    tr->add_option("--model", ta.model, "model kind")->default_val("ti_capsule");
    tr->add_option("--profile", ta.profile, "scale profile: paper or desk")->default_val("desk");
    tr->add_option("--fusion", ta.fusion, "fusion inputs: ti or tin")->default_val("tin");
    tr->add_option("--batch-size", ta.batch_size)->default_val(8);
    tr->add_option("--hidden-dim", ta.hidden_dim)->default_val(8);
    tr->add_option("--epochs", ta.epochs)->default_val(50);
    tr->add_option("--lr", ta.learning_rate, "learning rate")->default_val(1e-3);
    tr->add_option("--optimizer", ta.optimizer, "adam or sgd")->default_val("adam");
    tr->add_option("--seed", ta.seed)->default_val(0);
    tr->add_flag("--f32", ta.f32, "train in float32 (default float64)");

    // ---- evaluate
    auto* ev = app.add_subcommand("evaluate", "metrics table for one or more checkpoints");
    std::string ev_data, ev_csv, ev_split = "test";
    std::vector<std::string> ev_ckpts;
    ev->add_option("--data", ev_data, "preprocess output directory")->required();
    ev->add_option("--checkpoint", ev_ckpts, "checkpoint directory (repeatable)")->required();
    ev->add_option("--out", ev_csv, "also write the table as CSV");
    ev->add_option("--split", ev_split, "evaluate on: test (per-checkpoint seed) or all")
        ->check(CLI::IsMember({"test", "all"}))
        ->default_val("test");

    // ---- sweep
    auto* sw = app.add_subcommand("sweep", "train once per parameter value, tabulate metrics");
    TrainArgs sa;
    std::string sw_param = "batch_size", sw_csv;
    std::vector<std::size_t> sw_values;
    sw->add_option("--data", sa.data_dir, "preprocess output directory")->required();
    sw->add_option("--param", sw_param, "batch_size or hidden_dim")->default_val("batch_size");
    sw->add_option("--values", sw_values, "values to sweep (default 8 16 32 64 128 256)");
    sw->add_option("--model", sa.model)->default_val("ti_capsule");
    sw->add_option("--profile", sa.profile)->default_val("desk");
    sw->add_option("--fusion", sa.fusion)->default_val("tin");
    sw->add_option("--batch-size", sa.batch_size)->default_val(8);
    sw->add_option("--hidden-dim", sa.hidden_dim)->default_val(8);
    sw->add_option("--epochs", sa.epochs)->default_val(50);
    sw->add_option("--lr", sa.learning_rate)->default_val(1e-3);
    sw->add_option("--optimizer", sa.optimizer)->default_val("adam");
    sw->add_option("--seed", sa.seed)->default_val(0);
    sw->add_flag("--f32", sa.f32, "train in float32");
    sw->add_option("--out", sw_csv, "write the sweep table as CSV");

    // ---- gradcheck
    auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every layer");
    std::uint64_t gc_seed = 7;
    std::string gc_inject;
    std::size_t gc_instances = 100, gc_model_instances = 2, gc_model_probes = 50;
    gc->add_option("--seed", gc_seed)->default_val(7);
    gc->add_option("--inject-fault", gc_inject, "corrupt the named layer's gradient (harness self-test)")
        ->group("");  // hidden
    gc->add_option("--instances", gc_instances)->group("");
    gc->add_option("--model-instances", gc_model_instances)->group("");
    gc->add_option("--model-probes", gc_model_probes)->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed()) {
            sc.image_size = ScaleProfile::parse(synth_profile).image_size;
            SynthStats st = generate_synthetic(synth_out, sc);
            std::printf("synth: %zu days written to %s (%zu positive / %zu negative)\n", st.days,
                        synth_out.c_str(), st.positives, st.days - st.positives);
            std::printf("rule recorded in %s/rule.json\n", synth_out.c_str());
            return 0;
        }
        if (pre->parsed()) {
            pc.chart_size = ScaleProfile::parse(pre_profile).image_size;
            PreprocessStats st = run_preprocess(pc);
            std::printf("documents: %zu raw -> %zu kept (%zu non-english, %zu empty after cleaning, "
                        "%zu without market day or history)\n",
                        st.raw_docs, st.kept_docs, st.dropped_language, st.dropped_empty, st.dropped_no_market);
            std::printf("samples: %zu written to %s/manifest.tsv\n", st.samples, pc.outdir.c_str());
            return 0;
        }
        if (tr->parsed()) return ta.f32 ? run_train<float>(ta) : run_train<double>(ta);
        if (ev->parsed()) return run_evaluate(ev_data, ev_ckpts, ev_csv, ev_split);
        if (sw->parsed()) return sa.f32 ? run_sweep<float>(sa, sw_param, sw_values, sw_csv)
                                        : run_sweep<double>(sa, sw_param, sw_values, sw_csv);
        if (gc->parsed())
            return run_gradcheck(gc_seed, gc_inject, gc_instances, gc_model_instances, gc_model_probes);
    } catch (const DivergenceError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}
