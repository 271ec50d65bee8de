#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "pathrex/config.hpp"
#include "pathrex/corpus.hpp"
#include "toy_world.hpp"

using namespace pathrex;
namespace fs = std::filesystem;

namespace {

std::string binary() {
    const char* bin = std::getenv("PATHREX_BIN");
    REQUIRE_MESSAGE(bin != nullptr, "PATHREX_BIN must point at the pathrex binary");
    return bin;
}

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

RunResult run(const std::string& args) {
    static int counter = 0;
    const auto dir = fs::temp_directory_path() / "pathrex_cli_test";
    fs::create_directories(dir);
    const auto out_file = dir / ("stdout." + std::to_string(counter));
    const auto err_file = dir / ("stderr." + std::to_string(counter));
    ++counter;
    const std::string cmd =
        binary() + " " + args + " > " + out_file.string() + " 2> " + err_file.string();
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    auto slurp = [](const fs::path& p) {
        std::ifstream f(p);
        return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    };
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    return r;
}

std::string slurp_file(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE_MESSAGE(f.good(), ("missing file: " + p.string()));
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

std::map<std::string, double> read_summary(const fs::path& p) {
    std::ifstream f(p);
    REQUIRE(f.good());
    std::map<std::string, double> out;
    std::string line;
    std::getline(f, line);  // header
    while (std::getline(f, line)) {
        const auto comma = line.find(',');
        out[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
    }
    return out;
}

// Fixture: 8 chain groups a->b->c. Facts (a,born_in,b) and (b,works_at,c)
// carry cue-worded sentences; (a,related_to,c) is in the KB with no direct
// sentence, so those pairs are zero-shot candidates. Every relation has a
// distinctive cue token, which makes the toy memorizable.
struct Fixture {
    fs::path dir;
    std::string triples;
    std::string sentences;
};

Fixture make_fixture() {
    Fixture fx;
    fx.dir = fs::temp_directory_path() / "pathrex_cli_fixture";
    fs::create_directories(fx.dir);

    corpus::StringTable ents;
    corpus::StringTable rels = corpus::make_relation_table();
    const auto r1 = rels.intern("born_in");
    const auto r2 = rels.intern("works_at");
    const auto r3 = rels.intern("related_to");

    std::vector<corpus::Triple> kb;
    std::vector<corpus::TaggedSentence> raw;
    const std::vector<std::string> fillers = {"one", "two", "three", "four"};
    auto cue_sent = [&](std::int32_t h, const std::string& cue, std::int32_t t, int variant) {
        // "<h> maybe <cue> <t> <filler>"
        corpus::TaggedSentence s;
        s.tokens = {"e" + std::to_string(h), fillers[static_cast<std::size_t>(variant % 4)], cue,
                    "e" + std::to_string(t), fillers[static_cast<std::size_t>((variant + 1) % 4)]};
        s.head = {h, 0, 1};
        s.tail = {t, 3, 4};
        return s;
    };

    for (int g = 0; g < 8; ++g) {
        const auto a = ents.intern("a" + std::to_string(g));
        const auto b = ents.intern("b" + std::to_string(g));
        const auto c = ents.intern("c" + std::to_string(g));
        kb.push_back({a, r1, b});
        kb.push_back({b, r2, c});
        kb.push_back({a, r3, c});  // no direct sentence: zero-shot candidate
        for (int v = 0; v < 2; ++v) {
            raw.push_back(cue_sent(a, "cueborn", b, v + g));
            raw.push_back(cue_sent(b, "cuework", c, v + g + 1));
        }
    }

    corpus::CorpusText text;
    text.sentences = raw;
    fx.triples = (fx.dir / "kb.tsv").string();
    {
        std::ofstream f(fx.triples);
        for (const auto& t : kb)
            f << ents.name(t.head) << '\t' << rels.name(t.relation) << '\t' << ents.name(t.tail)
              << '\n';
    }
    fx.sentences = (fx.dir / "raw.jsonl").string();
    corpus::write_sentences_jsonl(fx.sentences, text, ents, rels);
    return fx;
}

const std::string kTinyDims =
    " --set d_w=8 --set d_p=2 --set d_c=16 --set window=3 --set d_r=8 --set pos_clip=5"
    " --set min_count=0 --set dropout_keep=1.0";

}  // namespace

TEST_CASE("cli: full pipeline, reproducibility, and exit codes") {
    const auto fx = make_fixture();
    const auto work = fs::temp_directory_path() / "pathrex_cli_work";
    fs::remove_all(work);
    fs::create_directories(work);

    // --- build-corpus, twice for byte-identical outputs ---
    const auto corpus1 = (work / "corpus1").string();
    const auto corpus2 = (work / "corpus2").string();
    auto r = run("build-corpus --triples " + fx.triples + " --sentences " + fx.sentences +
                 " --out " + corpus1 + " --seed 5 --neg-ratio 1.0 --max-len 40");
    CAPTURE(r.err);
    REQUIRE(r.code == 0);
    for (const char* name : {"train.jsonl", "valid.jsonl", "test.jsonl", "stats.json",
                             "effective.cfg"})
        CHECK(fs::exists(fs::path(corpus1) / name));
    r = run("build-corpus --triples " + fx.triples + " --sentences " + fx.sentences + " --out " +
            corpus2 + " --seed 5 --neg-ratio 1.0 --max-len 40");
    REQUIRE(r.code == 0);
    for (const char* name : {"train.jsonl", "valid.jsonl", "test.jsonl"})
        CHECK(slurp_file(fs::path(corpus1) / name) == slurp_file(fs::path(corpus2) / name));

    // --- extract-paths on the train split ---
    const auto paths_dir = (work / "paths").string();
    r = run("extract-paths --data " + corpus1 + "/train.jsonl --out " + paths_dir);
    CAPTURE(r.err);
    REQUIRE(r.code == 0);
    CHECK(fs::exists(fs::path(paths_dir) / "paths.jsonl"));

    // --- train, twice for bitwise-identical checkpoints ---
    const std::string train_flags = " --epochs 40 --learning-rate 0.08 --batch-size 8 --seed 7" +
                                    kTinyDims;
    const auto model1 = (work / "model1").string();
    const auto model2 = (work / "model2").string();
    r = run("train --data " + corpus1 + "/train.jsonl --paths " + paths_dir + "/paths.jsonl" +
            " --out " + model1 + train_flags);
    CAPTURE(r.err);
    REQUIRE(r.code == 0);
    for (const char* name :
         {"checkpoint.pnre", "vocab.txt", "relations.txt", "train_log.csv", "effective.cfg"})
        CHECK(fs::exists(fs::path(model1) / name));
    r = run("train --data " + corpus1 + "/train.jsonl --paths " + paths_dir + "/paths.jsonl" +
            " --out " + model2 + train_flags);
    REQUIRE(r.code == 0);
    CHECK(slurp_file(fs::path(model1) / "checkpoint.pnre") ==
          slurp_file(fs::path(model2) / "checkpoint.pnre"));
    CHECK(slurp_file(fs::path(model1) / "train_log.csv") ==
          slurp_file(fs::path(model2) / "train_log.csv"));

    const std::string model_args = " --checkpoint " + model1 + "/checkpoint.pnre --vocab " +
                                   model1 + "/vocab.txt --relations " + model1 + "/relations.txt" +
                                   kTinyDims;

    // --- eval on the training split: the memorization toy reaches max F1 = 1 ---
    const auto eval_train = (work / "eval_train").string();
    r = run("eval" + model_args + " --data " + corpus1 + "/train.jsonl --paths " + paths_dir +
            "/paths.jsonl --out " + eval_train + " --seed 7");
    CAPTURE(r.err);
    REQUIRE(r.code == 0);
    auto summary = read_summary(fs::path(eval_train) / "summary.csv");
    CHECK(summary.at("max_f1") == 1.0);
    CHECK(fs::exists(fs::path(eval_train) / "pr.csv"));
    CHECK(fs::exists(fs::path(eval_train) / "pr.svg"));

    // --- eval on the held-out split: cue words generalize ---
    const auto paths_test = (work / "paths_test").string();
    r = run("extract-paths --data " + corpus1 + "/test.jsonl --out " + paths_test);
    REQUIRE(r.code == 0);
    const auto eval_test = (work / "eval_test").string();
    r = run("eval" + model_args + " --data " + corpus1 + "/test.jsonl --paths " + paths_test +
            "/paths.jsonl --out " + eval_test + " --seed 7");
    CAPTURE(r.err);
    REQUIRE(r.code == 0);
    summary = read_summary(fs::path(eval_test) / "summary.csv");
    CHECK(summary.at("max_f1") >= 0.99);

    // identical inputs and seed: byte-identical report files
    const auto eval_again = (work / "eval_again").string();
    r = run("eval" + model_args + " --data " + corpus1 + "/test.jsonl --paths " + paths_test +
            "/paths.jsonl --out " + eval_again + " --seed 7");
    REQUIRE(r.code == 0);
    CHECK(slurp_file(fs::path(eval_test) / "pr.csv") == slurp_file(fs::path(eval_again) / "pr.csv"));
    CHECK(slurp_file(fs::path(eval_test) / "summary.csv") ==
          slurp_file(fs::path(eval_again) / "summary.csv"));

    // --- beta=0 ablation trains and evaluates ---
    const auto model0 = (work / "model_beta0").string();
    r = run("train --data " + corpus1 + "/train.jsonl --paths " + paths_dir + "/paths.jsonl" +
            " --out " + model0 + train_flags + " --beta 0");
    REQUIRE(r.code == 0);

    // --- slices ---
    const auto lt = (work / "slice_lt").string();
    r = run("slice --data " + corpus1 + "/test.jsonl --mode longtail --ns 1 --out " + lt);
    CAPTURE(r.err);
    REQUIRE(r.code == 0);
    CHECK(fs::exists(fs::path(lt) / "sliced.jsonl"));
    const auto nz = (work / "slice_nz").string();
    r = run("slice --data " + corpus1 + "/test.jsonl --mode noise --na-fraction 0.0 --out " + nz);
    REQUIRE(r.code == 0);

    // --- zero-shot probe over the pairs that have no direct sentences ---
    const auto zs = (work / "zero_shot").string();
    r = run("zero-shot" + model_args + " --train-data " + corpus1 + "/train.jsonl --test-data " +
            corpus1 + "/train.jsonl --triples " + fx.triples + " --out " + zs + " --seed 7");
    CAPTURE(r.err);
    REQUIRE(r.code == 0);
    summary = read_summary(fs::path(zs) / "summary.csv");
    CHECK(summary.at("zero_shot_accuracy") >= 0.0);
    CHECK(summary.at("zero_shot_accuracy") <= 1.0);
    CHECK(summary.at("train_examples") >= 1.0);

    // --- grad-check ---
    r = run("grad-check");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("OK") != std::string::npos);
}

TEST_CASE("config round trip: dump reloads to an identical run") {
    RunConfig cfg;
    cfg.learning_rate = 0.003;
    cfg.beta = 1.25;
    cfg.bag_mode = "rand";
    cfg.hop_mode = "exhaustive";
    cfg.seed = 987654321;
    cfg.freeze_hop_confidence = true;

    const auto dir = fs::temp_directory_path() / "pathrex_cli_cfg";
    fs::create_directories(dir);
    const auto path = (dir / "roundtrip.cfg").string();
    {
        std::ofstream f(path);
        f << cfg.dump();
    }
    const RunConfig back = RunConfig::from_file(path);
    CHECK(back.dump() == cfg.dump());
}

TEST_CASE("cli: train accepts pretrained embeddings in the word-vector format") {
    const auto fx = make_fixture();
    const auto work = fs::temp_directory_path() / "pathrex_cli_emb";
    fs::remove_all(work);
    fs::create_directories(work);

    const auto corpus_dir = (work / "corpus").string();
    auto r = run("build-corpus --triples " + fx.triples + " --sentences " + fx.sentences +
                 " --out " + corpus_dir + " --seed 5");
    REQUIRE(r.code == 0);

    // cover a couple of cue tokens; the rest fall back to random rows
    const auto vec = (work / "pre.vec").string();
    {
        std::ofstream f(vec);
        f << "2 8\n";
        f << "cueborn 0.1 0.2 0.3 0.4 0.5 0.6 0.7 0.8\n";
        f << "cuework -0.1 -0.2 -0.3 -0.4 -0.5 -0.6 -0.7 -0.8\n";
    }
    const auto model_dir = (work / "model").string();
    r = run("train --data " + corpus_dir + "/train.jsonl --embeddings " + vec + " --out " +
            model_dir + " --epochs 2 --seed 3" + kTinyDims);
    CAPTURE(r.err);
    CHECK(r.code == 0);

    // dimension mismatch between the file header and d_w is a validation error
    const auto bad = (work / "bad.vec").string();
    {
        std::ofstream f(bad);
        f << "1 5\ncueborn 1 2 3 4 5\n";
    }
    r = run("train --data " + corpus_dir + "/train.jsonl --embeddings " + bad + " --out " +
            (work / "model2").string() + " --epochs 1 --seed 3" + kTinyDims);
    CHECK(r.code == 1);
}

TEST_CASE("cli: error paths map to the documented exit codes") {
    const auto work = fs::temp_directory_path() / "pathrex_cli_errors";
    fs::create_directories(work);

    // missing input file: exit 2, message names the path
    auto r = run("build-corpus --triples /nonexistent/kb.tsv --sentences /nonexistent/raw.jsonl"
                 " --out " + (work / "x").string());
    CHECK(r.code == 2);
    CHECK(r.err.find("/nonexistent/kb.tsv") != std::string::npos);

    // bad config values: exit 1, every bad key listed at once
    const auto cfg = (work / "bad.cfg").string();
    {
        std::ofstream f(cfg);
        f << "learning_rate=-1\nbag_mode=sometimes\nno_such_key=1\n";
    }
    r = run("grad-check");  // sanity: the binary itself is fine
    REQUIRE(r.code == 0);
    r = run("extract-paths --config " + cfg + " --data /dev/null --out " + (work / "y").string());
    CHECK(r.code == 1);
    CHECK(r.err.find("learning_rate") != std::string::npos);
    CHECK(r.err.find("bag_mode") != std::string::npos);
    CHECK(r.err.find("no_such_key") != std::string::npos);

    // truncated checkpoint: exit 2
    const auto broken = (work / "broken.pnre").string();
    {
        std::ofstream f(broken, std::ios::binary);
        f << "PNRE";
    }
    r = run("eval --checkpoint " + broken + " --vocab /dev/null --relations /dev/null --data "
            "/dev/null --out " + (work / "z").string());
    CHECK(r.code == 2);

    // unknown subcommand / missing required flags: exit 1
    r = run("train");
    CHECK(r.code == 1);
}

TEST_CASE("cli: PATHREX_LOG raises verbosity") {
    auto r = run("grad-check");
    CHECK(r.err.find("[info]") == std::string::npos);
    const std::string saved = []() {
        const char* v = std::getenv("PATHREX_LOG");
        return v == nullptr ? std::string() : std::string(v);
    }();
    // the env var is read by the child process, so pass it through the shell
    const auto dir = fs::temp_directory_path() / "pathrex_cli_log";
    fs::create_directories(dir);
    const auto err_file = dir / "stderr.txt";
    const std::string cmd = "PATHREX_LOG=info " + binary() + " grad-check > /dev/null 2> " +
                            err_file.string();
    REQUIRE(std::system(cmd.c_str()) == 0);
    std::ifstream f(err_file);
    const std::string err((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    (void)saved;
    CHECK(err.find("[info]") != std::string::npos);
}
