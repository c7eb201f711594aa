#include <catch2/catch.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ticap/pipeline.hpp"
#include "ticap/synth.hpp"

using namespace ticap;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void put(const fs::path& p, const std::string& content) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << content;
}

// market rows around 2020-02: enough history for a 3-day chart window
std::string fixture_market() {
    std::string csv = "date,price,open,high,low,exchange\n";
    double close = 1.10;
    for (int i = 0; i < 12; ++i) {
        const Date d = Date{2020, 2, 1}.plus_days(i);
        const double open = close;
        close = open + (i % 2 ? 0.004 : -0.003);
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%.6f,%.6f\n", d.str().c_str(), close, open,
                      std::max(open, close) + 0.001, std::min(open, close) - 0.001, close - open);
        csv += buf;
    }
    return csv;
}

struct PreDirs {
    fs::path root;
    PreprocessConfig cfg;
};

PreDirs make_fixture(const std::string& tag) {
    PreDirs d;
    d.root = fs::temp_directory_path() / ("ticap_pipe_" + tag);
    fs::remove_all(d.root);
    fs::create_directories(d.root);

    // 10 documents on days 4..8 of the market; two are non-English
    std::string corpus;
    const char* texts[] = {
        "EUR gains on strong data https://x.co",
        "euro rally continues traders note",
        "el mercado sube con fuerza hoy claro",       // non-English
        "market slump fears as euro falls",
        "quiet session for the euro pair",
        "Der Markt steigt heute kraftig weiter",      // non-English
        "bullish momentum builds in euro trading",
        "analysts see gain after report",
        "plunge risk flagged by desk note",
        "steady range day for euro volume",
    };
    const int day_of[] = {4, 4, 5, 5, 5, 6, 6, 7, 7, 8};
    for (int i = 0; i < 10; ++i) {
        const Date date = Date{2020, 2, 1}.plus_days(day_of[i]);
        corpus += date.str() + "\ttweet\t" + texts[i] + "\n";
    }
    put(d.root / "corpus.tsv", corpus);
    put(d.root / "market.csv", fixture_market());
    put(d.root / "stopwords.txt", "the\na\nan\nfor\nas\nby\non\nin\nsee\nwith\n");
    std::string words;
    for (const char* w :
         {"eur", "euro", "gains", "gain", "strong", "data", "rally", "continues", "traders", "note",
          "market", "slump", "fears", "falls", "quiet", "session", "pair", "bullish", "momentum", "builds",
          "trading", "analysts", "after", "report", "plunge", "risk", "flagged", "desk", "steady", "range",
          "day", "volume"})
        words += std::string(w) + "\n";
    put(d.root / "wordlist.txt", words);

    // small deterministic embedding table covering the vocabulary
    std::string emb;
    Rng rng(4);
    std::istringstream ws(words);
    std::string w;
    while (std::getline(ws, w)) {
        emb += w;
        for (int k = 0; k < 5; ++k) {
            char buf[32];
            std::snprintf(buf, sizeof buf, " %.4f", rng.uniform(-0.5, 0.5));
            emb += buf;
        }
        emb += "\n";
    }
    put(d.root / "embeddings.txt", emb);

    d.cfg.corpus_path = (d.root / "corpus.tsv").string();
    d.cfg.market_path = (d.root / "market.csv").string();
    d.cfg.stopwords_path = (d.root / "stopwords.txt").string();
    d.cfg.embeddings_path = (d.root / "embeddings.txt").string();
    d.cfg.wordlist_path = (d.root / "wordlist.txt").string();
    d.cfg.outdir = (d.root / "out").string();
    d.cfg.n = 12;
    d.cfg.chart_size = 64;
    d.cfg.chart_window = 3;
    d.cfg.seed = 5;
    return d;
}

int run_cli(const std::string& args, std::string* out = nullptr) {
    const char* cli = std::getenv("TICAP_CLI");
    REQUIRE(cli != nullptr);
    const fs::path tmp = fs::temp_directory_path() / "ticap_cli_out.txt";
    const int rc = std::system((std::string(cli) + " " + args + " > " + tmp.string() + " 2>&1").c_str());
    if (out) *out = slurp(tmp);
    return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("preprocess keeps 8 of 10 docs, dropping the two non-English", "[pipeline]") {
    PreDirs d = make_fixture("counts");
    const PreprocessStats st = run_preprocess(d.cfg);
    CHECK(st.raw_docs == 10);
    CHECK(st.dropped_language == 2);
    CHECK(st.dropped_empty == 0);
    CHECK(st.kept_docs == 8);
    CHECK(st.samples == 8);

    auto samples = load_manifest((fs::path(d.cfg.outdir) / "manifest.tsv").string());
    REQUIRE(samples.size() == 8);
    for (const auto& s : samples) s.check_invariants(d.cfg.n);

    // labels come from the exchange sign of each document's day
    auto market = load_market_csv(d.cfg.market_path);
    for (const auto& s : samples) {
        for (const auto& day : market)
            if (day.date == s.date) CHECK(s.label == map_exchange_label(day.exchange));
    }
}

TEST_CASE("preprocess with an empty corpus reports no samples", "[pipeline]") {
    PreDirs d = make_fixture("empty");
    put(fs::path(d.root) / "corpus.tsv", "");
    try {
        run_preprocess(d.cfg);
        FAIL("expected ValueError");
    } catch (const ValueError& e) {
        CHECK(std::string(e.what()).find("no samples") != std::string::npos);
    }
}

TEST_CASE("preprocess reruns are byte-identical", "[pipeline]") {
    PreDirs d = make_fixture("det");
    run_preprocess(d.cfg);
    const std::string man1 = slurp(fs::path(d.cfg.outdir) / "manifest.tsv");
    const std::string voc1 = slurp(fs::path(d.cfg.outdir) / "vocabulary.txt");
    fs::path chart1;
    for (const auto& e : fs::directory_iterator(fs::path(d.cfg.outdir) / "charts")) chart1 = e.path();
    const std::string img1 = slurp(chart1);

    fs::remove_all(d.cfg.outdir);
    run_preprocess(d.cfg);
    CHECK(slurp(fs::path(d.cfg.outdir) / "manifest.tsv") == man1);
    CHECK(slurp(fs::path(d.cfg.outdir) / "vocabulary.txt") == voc1);
    CHECK(slurp(chart1) == img1);
}

TEST_CASE("manifest round-trips every field", "[pipeline]") {
    PreDirs d = make_fixture("roundtrip");
    run_preprocess(d.cfg);
    const std::string path = (fs::path(d.cfg.outdir) / "manifest.tsv").string();
    auto a = load_manifest(path);
    write_manifest((fs::path(d.cfg.outdir) / "manifest2.tsv").string(), a);
    auto b = load_manifest((fs::path(d.cfg.outdir) / "manifest2.tsv").string(), false);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].date == b[i].date);
        CHECK(a[i].label == b[i].label);
        CHECK(a[i].numeric == b[i].numeric);
        CHECK(a[i].image_path == b[i].image_path);
        CHECK(a[i].token_ids == b[i].token_ids);
    }
}

TEST_CASE("quote scaling is fitted on the seeded training split only", "[pipeline]") {
    PreDirs d = make_fixture("scaling");
    const PreprocessStats st = run_preprocess(d.cfg);
    auto samples = load_manifest((fs::path(d.cfg.outdir) / "manifest.tsv").string(), false);
    auto market = load_market_csv(d.cfg.market_path);
    auto [train_idx, test_idx] = split_80_20(st.samples, d.cfg.seed);

    std::vector<MarketDay> train_days;
    for (std::size_t i : train_idx)
        for (const auto& day : market)
            if (day.date == samples[i].date) train_days.push_back(day);
    const QuoteScaler sc = QuoteScaler::fit(train_days.begin(), train_days.end());
    for (std::size_t i : train_idx) {
        for (const auto& day : market)
            if (day.date == samples[i].date) {
                const auto q = sc.scale(day);
                CHECK(samples[i].numeric[3] == Approx(q[0]).margin(1e-12));
                CHECK(samples[i].numeric[4] == Approx(q[1]).margin(1e-12));
            }
    }
}

TEST_CASE("synthetic generation is byte-identical across reruns", "[pipeline]") {
    const fs::path a = fs::temp_directory_path() / "ticap_synth_a";
    const fs::path b = fs::temp_directory_path() / "ticap_synth_b";
    fs::remove_all(a);
    fs::remove_all(b);
    SynthConfig cfg;
    cfg.count = 32;
    cfg.seed = 11;
    generate_synthetic(a.string(), cfg);
    generate_synthetic(b.string(), cfg);
    for (const char* f : {"corpus.tsv", "market.csv", "embeddings.txt", "rule.json"})
        CHECK(slurp(a / f) == slurp(b / f));
    std::size_t charts = 0;
    for (const auto& e : fs::directory_iterator(a / "charts")) {
        CHECK(slurp(e.path()) == slurp(b / "charts" / e.path().filename()));
        ++charts;
    }
    CHECK(charts == 32);
}

TEST_CASE("synth class balance stays near half at count 1000", "[pipeline]") {
    const fs::path root = fs::temp_directory_path() / "ticap_synth_balance";
    fs::remove_all(root);
    SynthConfig cfg;
    cfg.count = 1000;
    cfg.seed = 7;
    const SynthStats st = generate_synthetic(root.string(), cfg);
    CHECK(st.days == 1000);
    CHECK(st.positives >= 400);
    CHECK(st.positives <= 600);
}

TEST_CASE("synth count and manifest rows agree end to end", "[pipeline]") {
    const fs::path root = fs::temp_directory_path() / "ticap_synth_rows";
    fs::remove_all(root);
    SynthConfig cfg;
    cfg.count = 32;
    cfg.seed = 3;
    const SynthStats st = generate_synthetic((root / "s").string(), cfg);
    CHECK(st.days == 32);

    PreprocessConfig pc;
    pc.corpus_path = (root / "s/corpus.tsv").string();
    pc.market_path = (root / "s/market.csv").string();
    pc.stopwords_path = (root / "s/stopwords.txt").string();
    pc.embeddings_path = (root / "s/embeddings.txt").string();
    pc.outdir = (root / "data").string();
    pc.n = 16;
    pc.chart_size = 64;
    pc.chart_window = cfg.window;
    const PreprocessStats ps = run_preprocess(pc);
    CHECK(ps.samples == 32);

    // planted rule: the manifest label equals the exchange sign of the day
    auto samples = load_manifest((root / "data/manifest.tsv").string(), false);
    auto market = load_market_csv(pc.market_path);
    for (const auto& s : samples)
        for (const auto& day : market)
            if (day.date == s.date) CHECK(s.label == map_exchange_label(day.exchange));
}

// ---------------------------------------------------------------- CLI level

TEST_CASE("cli rejects unknown model kinds with exit 2", "[pipeline]") {
    const fs::path root = fs::temp_directory_path() / "ticap_cli_unknown";
    fs::remove_all(root);
    std::string out;
    int rc = run_cli("synth --count 24 --seed 2 --out " + (root / "s").string(), &out);
    REQUIRE(rc == 0);
    rc = run_cli("preprocess --corpus " + (root / "s/corpus.tsv").string() + " --market " +
                     (root / "s/market.csv").string() + " --stopwords " + (root / "s/stopwords.txt").string() +
                     " --embeddings " + (root / "s/embeddings.txt").string() + " --out " +
                     (root / "d").string() + " --n 16",
                 &out);
    REQUIRE(rc == 0);
    rc = run_cli("train --data " + (root / "d").string() + " --model not_a_model --out " + (root / "r").string(),
                 &out);
    CHECK(rc == 2);
    CHECK(out.find("unknown model kind") != std::string::npos);
}

TEST_CASE("cli train with one epoch writes a one-row loss csv", "[pipeline]") {
    const fs::path root = fs::temp_directory_path() / "ticap_cli_one";
    fs::remove_all(root);
    std::string out;
    REQUIRE(run_cli("synth --count 24 --seed 2 --out " + (root / "s").string(), &out) == 0);
    REQUIRE(run_cli("preprocess --corpus " + (root / "s/corpus.tsv").string() + " --market " +
                        (root / "s/market.csv").string() + " --stopwords " +
                        (root / "s/stopwords.txt").string() + " --embeddings " +
                        (root / "s/embeddings.txt").string() + " --out " + (root / "d").string() + " --n 16",
                    &out) == 0);
    REQUIRE(run_cli("train --data " + (root / "d").string() + " --model lstm_features_4 --epochs 1 --seed 9" +
                        " --out " + (root / "r").string(),
                    &out) == 0);
    std::istringstream csv(slurp(root / "r/loss.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "epoch,train_loss,test_loss");
    std::size_t rows = 0;
    while (std::getline(csv, line)) rows += !line.empty();
    CHECK(rows == 1);

    // evaluate the checkpoint it just wrote
    REQUIRE(run_cli("evaluate --data " + (root / "d").string() + " --checkpoint " +
                        (root / "r/checkpoint").string(),
                    &out) == 0);
    CHECK(out.find("lstm_features_4") != std::string::npos);
}

TEST_CASE("cli train reruns produce byte-identical checkpoints", "[pipeline]") {
    const fs::path root = fs::temp_directory_path() / "ticap_cli_det";
    fs::remove_all(root);
    std::string out;
    REQUIRE(run_cli("synth --count 24 --seed 4 --out " + (root / "s").string(), &out) == 0);
    REQUIRE(run_cli("preprocess --corpus " + (root / "s/corpus.tsv").string() + " --market " +
                        (root / "s/market.csv").string() + " --stopwords " +
                        (root / "s/stopwords.txt").string() + " --embeddings " +
                        (root / "s/embeddings.txt").string() + " --out " + (root / "d").string() + " --n 16",
                    &out) == 0);
    for (const char* run : {"r1", "r2"})
        REQUIRE(run_cli("train --data " + (root / "d").string() +
                            " --model lstm_features_7 --epochs 2 --seed 21 --out " + (root / run).string(),
                        &out) == 0);
    for (const auto& e : fs::directory_iterator(root / "r1/checkpoint")) {
        CHECK(slurp(e.path()) == slurp(root / "r2/checkpoint" / e.path().filename()));
    }
}

TEST_CASE("cli evaluate reports a corrupt checkpoint with exit 2", "[pipeline]") {
    const fs::path root = fs::temp_directory_path() / "ticap_cli_corrupt";
    fs::remove_all(root);
    fs::create_directories(root / "ckpt");
    put(root / "ckpt/manifest.json", "{ definitely not json");
    std::string out;
    const int rc = run_cli("evaluate --data /nonexistent --checkpoint " + (root / "ckpt").string(), &out);
    CHECK(rc == 2);
    CHECK(out.find("corrupt checkpoint manifest") != std::string::npos);
}

TEST_CASE("cli gradcheck self-test reports an injected fault and exit 3", "[pipeline]") {
    std::string out;
    const int ok = run_cli("gradcheck --seed 3 --instances 2 --model-instances 1 --model-probes 2", &out);
    CHECK(ok == 0);
    CHECK(out.find("all layers passed") != std::string::npos);

    const int bad = run_cli(
        "gradcheck --seed 3 --instances 2 --model-instances 1 --model-probes 2 --inject-fault squash", &out);
    CHECK(bad == 3);
    CHECK(out.find("FAIL squash") != std::string::npos);
}

TEST_CASE("cli sweep over two values emits two rows", "[pipeline]") {
    const fs::path root = fs::temp_directory_path() / "ticap_cli_sweep";
    fs::remove_all(root);
    std::string out;
    REQUIRE(run_cli("synth --count 24 --seed 6 --out " + (root / "s").string(), &out) == 0);
    REQUIRE(run_cli("preprocess --corpus " + (root / "s/corpus.tsv").string() + " --market " +
                        (root / "s/market.csv").string() + " --stopwords " +
                        (root / "s/stopwords.txt").string() + " --embeddings " +
                        (root / "s/embeddings.txt").string() + " --out " + (root / "d").string() + " --n 16",
                    &out) == 0);
    REQUIRE(run_cli("sweep --data " + (root / "d").string() +
                        " --model lstm_features_4 --param batch_size --values 4 8 --epochs 1 --seed 2 --out " +
                        (root / "sweep.csv").string(),
                    &out) == 0);
    std::istringstream csv(slurp(root / "sweep.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "batch_size,accuracy,precision,recall,f1");
    std::size_t rows = 0;
    while (std::getline(csv, line)) rows += !line.empty();
    CHECK(rows == 2);
}
