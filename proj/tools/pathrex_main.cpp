#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pathrex/checkpoint.hpp"
#include "pathrex/config.hpp"
#include "pathrex/corpus.hpp"
#include "pathrex/eval.hpp"
#include "pathrex/joint.hpp"
#include "pathrex/util.hpp"
#include "pathrex/verify.hpp"

namespace {

using namespace pathrex;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumeric = 3;

// Config file first, then --set pairs, then named flags on top.
struct ConfigCli {
    std::string file;
    std::vector<std::string> sets;
    std::map<std::string, std::string> flags;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", file, "key=value config file");
        cmd->add_option("--set", sets, "override any config key (key=value, repeatable)");
        auto add = [this, cmd](const std::string& flag, const std::string& key,
                               const std::string& help) {
            cmd->add_option_function<std::string>(
                flag, [this, key](const std::string& v) { flags[key] = v; }, help);
        };
        add("--seed", "seed", "random seed");
        add("--threads", "threads", "worker threads (1 = bitwise-reproducible)");
        add("--beta", "beta", "path evidence weight (0 disables paths)");
        add("--epochs", "epochs", "training epochs");
        add("--learning-rate", "learning_rate", "SGD learning rate");
        add("--batch-size", "batch_size", "entity pairs per mini-batch");
        add("--bag-mode", "bag_mode", "max | rand");
        add("--hop-mode", "hop_mode", "greedy | exhaustive (inference-time hops)");
        add("--dropout-keep", "dropout_keep", "keep probability for dropout");
        add("--neg-ratio", "neg_ratio", "negatives per positive when building the corpus");
        add("--min-count", "min_count", "vocabulary frequency threshold (strict >)");
        add("--path-cap", "path_cap", "max stored paths per entity pair");
        add("--max-len", "max_len", "sentence truncation length");
    }

    RunConfig resolve() const {
        RunConfig cfg = file.empty() ? RunConfig{} : RunConfig::from_file(file);
        std::vector<std::pair<std::string, std::string>> overrides;
        for (const std::string& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got: " + s);
            overrides.push_back({s.substr(0, eq), s.substr(eq + 1)});
        }
        for (const auto& [k, v] : flags) overrides.push_back({k, v});
        cfg.apply(overrides);
        cfg.validate();
        return cfg;
    }
};

fs::path prepare_out_dir(const std::string& out, const RunConfig& cfg) {
    if (out.empty()) throw ConfigError("--out is required");
    fs::path dir(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory: " + out + " (" + ec.message() + ")");
    std::ofstream eff(dir / "effective.cfg");
    if (!eff) throw IoError("cannot write " + (dir / "effective.cfg").string());
    eff << cfg.dump();
    return dir;
}

corpus::StringTable load_relations_checked(const std::string& path, const ModelT<float>& model) {
    corpus::StringTable relations = corpus::read_relations(path);
    if (relations.size() != model.enc.n_r)
        throw DimError("relation inventory has " + std::to_string(relations.size()) +
                       " entries but the checkpoint was trained with " +
                       std::to_string(model.enc.n_r));
    return relations;
}

void check_vocab_hash(const ModelT<float>& model, const corpus::Vocabulary& vocab,
                      const corpus::StringTable& relations) {
    if (model.vocab_size != vocab.size())
        throw DimError("vocabulary has " + std::to_string(vocab.size()) +
                       " entries but the checkpoint was trained with " +
                       std::to_string(model.vocab_size));
    if (joint::table_fingerprint(vocab, relations) != model.vocab_hash)
        throw FormatError("vocabulary/relations fingerprint does not match the checkpoint");
}

std::vector<corpus::PathRecord> resolve_paths(const std::vector<corpus::RawPath>& raw,
                                              const corpus::StringTable& entities,
                                              const corpus::CorpusText& text) {
    std::vector<corpus::PathRecord> out;
    std::int64_t dropped = 0;
    for (const auto& p : raw) {
        const auto h = entities.find(p.head);
        const auto e = entities.find(p.mid);
        const auto t = entities.find(p.tail);
        if (h < 0 || e < 0 || t < 0) {
            ++dropped;
            continue;
        }
        const auto hop1 = text.find_bag_index(h, e);
        const auto hop2 = text.find_bag_index(e, t);
        if (hop1 < 0 || hop2 < 0) {
            ++dropped;
            continue;
        }
        out.push_back({h, e, t, hop1, hop2});
    }
    if (dropped > 0)
        log_warn("paths: dropped " + std::to_string(dropped) + " records without matching bags");
    return out;
}

// --- build-corpus ---

int cmd_build_corpus(const ConfigCli& cc, const std::string& triples_path,
                     const std::string& sentences_path, const std::string& out) {
    const RunConfig cfg = cc.resolve();
    const fs::path dir = prepare_out_dir(out, cfg);

    corpus::StringTable entities;
    corpus::StringTable relations = corpus::make_relation_table();
    const auto kb = corpus::read_triples_tsv(triples_path, entities, relations);
    const auto raw = corpus::read_sentences_jsonl(sentences_path, entities, relations);

    std::vector<std::int32_t> pool;
    for (std::int32_t i = 0; i < entities.size(); ++i) pool.push_back(i);

    const SeededRng root(cfg.seed);
    SeededRng neg_rng = root.fork(1);
    const auto negatives = corpus::sample_negatives(kb, pool, cfg.neg_ratio, neg_rng);
    std::vector<corpus::PairKey> neg_pairs;
    neg_pairs.reserve(negatives.size());
    for (const auto& t : negatives) neg_pairs.push_back({t.head, t.tail});

    corpus::AlignStats stats;
    corpus::AlignOptions opt;
    opt.max_len = cfg.max_len;
    const auto text = corpus::align(kb, neg_pairs, raw, opt, &stats);
    if (text.sentences.empty()) throw std::invalid_argument("alignment produced no instances");

    SeededRng split_rng = root.fork(2);
    const auto parts =
        corpus::split(text, {cfg.split_train, cfg.split_valid, cfg.split_test}, split_rng);

    corpus::write_sentences_jsonl((dir / "train.jsonl").string(), parts.train, entities, relations);
    corpus::write_sentences_jsonl((dir / "valid.jsonl").string(), parts.valid, entities, relations);
    corpus::write_sentences_jsonl((dir / "test.jsonl").string(), parts.test, entities, relations);

    auto facts_of = [](const corpus::CorpusText& t) {
        std::set<corpus::Triple> f;
        for (const auto& s : t.sentences)
            if (s.label != corpus::kNaRelation) f.insert({s.head.entity, s.label, s.tail.entity});
        return f.size();
    };
    {
        std::ofstream sf(dir / "stats.json");
        if (!sf) throw IoError("cannot write " + (dir / "stats.json").string());
        sf << "{\n";
        sf << "  \"aligned_instances\": " << stats.aligned << ",\n";
        sf << "  \"unmatched_sentences\": " << stats.unmatched << ",\n";
        sf << "  \"skipped_spans\": " << stats.skipped_span << ",\n";
        sf << "  \"truncated\": " << stats.truncated << ",\n";
        sf << "  \"negatives\": " << negatives.size() << ",\n";
        sf << "  \"train\": {\"sentences\": " << parts.train.sentences.size()
           << ", \"bags\": " << parts.train.bags.size() << ", \"facts\": " << facts_of(parts.train)
           << "},\n";
        sf << "  \"valid\": {\"sentences\": " << parts.valid.sentences.size()
           << ", \"bags\": " << parts.valid.bags.size() << ", \"facts\": " << facts_of(parts.valid)
           << "},\n";
        sf << "  \"test\": {\"sentences\": " << parts.test.sentences.size()
           << ", \"bags\": " << parts.test.bags.size() << ", \"facts\": " << facts_of(parts.test)
           << "}\n";
        sf << "}\n";
    }
    std::printf("build-corpus: %lld instances (%zu train / %zu valid / %zu test sentences) -> %s\n",
                static_cast<long long>(stats.aligned), parts.train.sentences.size(),
                parts.valid.sentences.size(), parts.test.sentences.size(), out.c_str());
    return kExitOk;
}

// --- extract-paths ---

int cmd_extract_paths(const ConfigCli& cc, const std::string& data_path, const std::string& out) {
    const RunConfig cfg = cc.resolve();
    const fs::path dir = prepare_out_dir(out, cfg);

    corpus::StringTable entities;
    corpus::StringTable relations = corpus::make_relation_table();
    corpus::CorpusText text;
    text.sentences = corpus::read_sentences_jsonl(data_path, entities, relations);
    text.rebuild_bags();

    const auto paths = corpus::extract_paths(text, cfg.path_cap);
    corpus::write_paths_jsonl((dir / "paths.jsonl").string(), paths, entities);
    std::printf("extract-paths: %zu path records over %zu bags -> %s\n", paths.size(),
                text.bags.size(), (dir / "paths.jsonl").string().c_str());
    return kExitOk;
}

// --- train ---

int cmd_train(const ConfigCli& cc, const std::string& data_path, const std::string& paths_path,
              const std::string& embeddings_path, const std::string& out) {
    const RunConfig cfg = cc.resolve();
    const fs::path dir = prepare_out_dir(out, cfg);

    corpus::StringTable entities;
    corpus::StringTable relations = corpus::make_relation_table();
    corpus::CorpusText text;
    text.sentences = corpus::read_sentences_jsonl(data_path, entities, relations);
    if (text.sentences.empty()) throw std::invalid_argument("training data is empty: " + data_path);
    text.rebuild_bags();

    const corpus::Vocabulary vocab = corpus::build_vocab(text.sentences, cfg.min_count);

    std::vector<corpus::PathRecord> paths;
    if (!paths_path.empty())
        paths = resolve_paths(corpus::read_paths_jsonl(paths_path), entities, text);

    const SeededRng root(cfg.seed);
    SeededRng init_rng = root.fork(0xC0DE);
    TensorT<float> pretrained;
    const TensorT<float>* words = nullptr;
    if (!embeddings_path.empty()) {
        SeededRng emb_rng = root.fork(0xE4B);
        pretrained = corpus::load_embeddings<float>(embeddings_path, vocab, cfg.d_w, emb_rng);
        words = &pretrained;
    }
    auto model = init_model<float>(encoder_config(cfg, relations.size()), cfg.d_r, vocab.size(),
                                   joint::table_fingerprint(vocab, relations), init_rng, words);

    const auto data = joint::bind_data(text, vocab, paths);
    const std::string ckpt = (dir / "checkpoint.pnre").string();
    const auto result = joint::train(model, data, cfg, &entities, ckpt);

    corpus::write_vocab((dir / "vocab.txt").string(), vocab);
    corpus::write_relations((dir / "relations.txt").string(), relations);
    {
        std::ofstream lf(dir / "train_log.csv");
        if (!lf) throw IoError("cannot write " + (dir / "train_log.csv").string());
        lf << "epoch,objective\n";
        lf.precision(17);
        for (std::size_t i = 0; i < result.epoch_objective.size(); ++i)
            lf << (i + 1) << ',' << result.epoch_objective[i] << '\n';
    }
    if (result.diverged) {
        std::fprintf(stderr, "train: diverged after %zu epochs: %s\n",
                     result.epoch_objective.size(), result.message.c_str());
        throw NumericError(result.message);
    }
    std::printf("train: %lld items, %d epochs, final objective %.6f -> %s\n",
                static_cast<long long>(result.item_count), cfg.epochs,
                result.epoch_objective.empty() ? 0.0 : result.epoch_objective.back(), ckpt.c_str());
    return kExitOk;
}

// --- eval ---

int cmd_eval(const ConfigCli& cc, const std::string& checkpoint_path, const std::string& vocab_path,
             const std::string& relations_path, const std::string& data_path,
             const std::string& paths_path, const std::string& out) {
    const RunConfig cfg = cc.resolve();
    const fs::path dir = prepare_out_dir(out, cfg);

    auto model = joint::load_checkpoint(checkpoint_path, &cfg);
    const corpus::Vocabulary vocab = corpus::read_vocab(vocab_path);
    corpus::StringTable relations = load_relations_checked(relations_path, model);
    check_vocab_hash(model, vocab, relations);

    corpus::StringTable entities;
    corpus::CorpusText text;
    text.sentences = corpus::read_sentences_jsonl(data_path, entities, relations);
    if (text.sentences.empty()) throw std::invalid_argument("test data is empty: " + data_path);
    text.rebuild_bags();

    std::vector<corpus::PathRecord> paths;
    if (!paths_path.empty())
        paths = resolve_paths(corpus::read_paths_jsonl(paths_path), entities, text);
    const auto data = joint::bind_data(text, vocab, paths);

    joint::ScoreOptions<float> opt;
    opt.bag_mode = textenc::bag_mode_from(cfg.bag_mode);
    opt.hop_select = joint::hop_select_from(cfg.hop_mode);
    opt.beta = static_cast<float>(cfg.beta);

    const auto ranked =
        eval::rank_predictions(model, data, entities, relations, opt, cfg.seed, cfg.threads);
    const auto gold = eval::gold_facts(text, entities, relations);
    if (gold.empty()) throw std::invalid_argument("test data contains no relational facts");
    const auto curve = eval::pr_curve(ranked, gold);
    const double f1 = eval::max_f1(curve);
    bool short_ranking = false;
    // tiny rankings: drop fractions whose cutoff would floor to zero
    const auto effective = std::min<std::int64_t>(20000, static_cast<std::int64_t>(ranked.size()));
    std::vector<double> fractions;
    for (double f : {0.1, 0.2, 0.5})
        if (static_cast<std::int64_t>(std::floor(static_cast<double>(effective) * f)) >= 1)
            fractions.push_back(f);
    std::vector<eval::FractionPrecision> at;
    if (!fractions.empty())
        at = eval::p_at_fractions(ranked, gold, 20000, fractions, &short_ranking);

    eval::write_pr_csv((dir / "pr.csv").string(), curve);
    eval::write_pr_svg((dir / "pr.svg").string(), curve);
    std::vector<std::pair<std::string, double>> metrics = {
        {"max_f1", f1},
        {"gold_facts", static_cast<double>(gold.size())},
        {"ranked_facts", static_cast<double>(ranked.size())},
        {"ranking_truncated", short_ranking ? 1.0 : 0.0},
    };
    for (const auto& fp : at)
        metrics.push_back(
            {"p_at_" + std::to_string(static_cast<int>(fp.fraction * 100)) + "pct", fp.precision});
    eval::write_summary_csv((dir / "summary.csv").string(), metrics);

    std::printf("eval: %zu predictions, %zu gold facts, max F1 %.4f -> %s\n", ranked.size(),
                gold.size(), f1, out.c_str());
    return kExitOk;
}

// --- slice ---

int cmd_slice(const ConfigCli& cc, const std::string& data_path, const std::string& mode, int ns,
              double na_fraction, const std::string& out) {
    const RunConfig cfg = cc.resolve();
    const fs::path dir = prepare_out_dir(out, cfg);

    corpus::StringTable entities;
    corpus::StringTable relations = corpus::make_relation_table();
    corpus::CorpusText text;
    text.sentences = corpus::read_sentences_jsonl(data_path, entities, relations);
    text.rebuild_bags();

    corpus::CorpusText sliced;
    if (mode == "longtail") {
        sliced = eval::longtail_slice(text, ns);
    } else if (mode == "noise") {
        SeededRng rng(cfg.seed);
        sliced = eval::noise_slice(text, na_fraction, rng);
    } else {
        throw ConfigError("--mode must be longtail or noise, got: " + mode);
    }
    corpus::write_sentences_jsonl((dir / "sliced.jsonl").string(), sliced, entities, relations);
    std::printf("slice(%s): %zu of %zu sentences kept -> %s\n", mode.c_str(),
                sliced.sentences.size(), text.sentences.size(),
                (dir / "sliced.jsonl").string().c_str());
    return kExitOk;
}

// --- zero-shot ---

int cmd_zero_shot(const ConfigCli& cc, const std::string& checkpoint_path,
                  const std::string& vocab_path, const std::string& relations_path,
                  const std::string& train_path, const std::string& test_path,
                  const std::string& triples_path, const std::string& out) {
    const RunConfig cfg = cc.resolve();
    const fs::path dir = prepare_out_dir(out, cfg);

    auto model = joint::load_checkpoint(checkpoint_path, &cfg);
    const corpus::Vocabulary vocab = corpus::read_vocab(vocab_path);
    corpus::StringTable relations = load_relations_checked(relations_path, model);
    check_vocab_hash(model, vocab, relations);

    corpus::StringTable entities;
    corpus::CorpusText train_text, test_text;
    train_text.sentences = corpus::read_sentences_jsonl(train_path, entities, relations);
    train_text.rebuild_bags();
    test_text.sentences = corpus::read_sentences_jsonl(test_path, entities, relations);
    test_text.rebuild_bags();
    const auto kb = corpus::read_triples_tsv(triples_path, entities, relations);

    const auto mode = textenc::bag_mode_from(cfg.bag_mode);
    const auto train_ex =
        eval::zero_shot_examples(model, train_text, vocab, kb, cfg.path_cap, mode, cfg.seed);
    const auto test_ex =
        eval::zero_shot_examples(model, test_text, vocab, kb, cfg.path_cap, mode, cfg.seed + 1);
    if (train_ex.empty() || test_ex.empty())
        throw std::invalid_argument("zero-shot probe dataset is empty (no pathful pairless facts)");

    eval::ProbeOptions popt;
    popt.seed = cfg.seed;
    const double acc = eval::logistic_probe_accuracy(train_ex, test_ex, model.enc.n_r, popt);
    eval::write_summary_csv((dir / "summary.csv").string(),
                            {{"zero_shot_accuracy", acc},
                             {"train_examples", static_cast<double>(train_ex.size())},
                             {"test_examples", static_cast<double>(test_ex.size())}});
    std::printf("zero-shot: %zu train / %zu test examples, accuracy %.4f -> %s\n", train_ex.size(),
                test_ex.size(), acc, out.c_str());
    return kExitOk;
}

// --- grad-check ---

int cmd_grad_check(double eps, double threshold) {
    log_info("running the tiny-world finite-difference suite (eps " + std::to_string(eps) + ")");
    const double err = verify::full_pipeline_grad_check(eps);
    std::printf("grad-check: max rel error %.3e (threshold %.1e)\n", err, threshold);
    if (!(err < threshold))
        throw NumericError("gradient check failed: max relative error " + std::to_string(err));
    std::printf("grad-check: OK\n");
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "pathrex: neural relation extraction over direct sentences and two-hop relation paths"};
    app.require_subcommand(1);

    ConfigCli cc_build, cc_paths, cc_train, cc_eval, cc_slice, cc_zero;
    std::string triples, sentences, out;
    std::string data, paths_file, embeddings;
    std::string checkpoint, vocab_file, relations_file, test_data;
    std::string slice_mode = "longtail";
    int slice_ns = 1;
    double slice_na = 0.75;
    double gc_eps = 1e-5;

    auto* build = app.add_subcommand("build-corpus", "align a triple store with tagged sentences");
    cc_build.attach(build);
    build->add_option("--triples", triples, "TSV triple store")->required();
    build->add_option("--sentences", sentences, "tagged sentences (JSON Lines)")->required();
    build->add_option("--out", out, "output directory")->required();

    auto* extract = app.add_subcommand("extract-paths", "store two-hop paths for a split");
    cc_paths.attach(extract);
    extract->add_option("--data", data, "split sentences (JSON Lines)")->required();
    extract->add_option("--out", out, "output directory")->required();

    auto* train = app.add_subcommand("train", "train the joint model");
    cc_train.attach(train);
    train->add_option("--data", data, "training sentences (JSON Lines)")->required();
    train->add_option("--paths", paths_file, "path records for the training split");
    train->add_option("--embeddings", embeddings, "pretrained word vectors (text format)");
    train->add_option("--out", out, "output directory")->required();

    auto* evalc = app.add_subcommand("eval", "held-out ranking evaluation");
    cc_eval.attach(evalc);
    evalc->add_option("--checkpoint", checkpoint, "trained model")->required();
    evalc->add_option("--vocab", vocab_file, "vocab.txt from training")->required();
    evalc->add_option("--relations", relations_file, "relations.txt from training")->required();
    evalc->add_option("--data", data, "test sentences (JSON Lines)")->required();
    evalc->add_option("--paths", paths_file, "path records for the test split");
    evalc->add_option("--out", out, "output directory")->required();

    auto* slice = app.add_subcommand("slice", "long-tail or noise test-set slices");
    cc_slice.attach(slice);
    slice->add_option("--data", data, "test sentences (JSON Lines)")->required();
    slice->add_option("--mode", slice_mode, "longtail | noise");
    slice->add_option("--ns", slice_ns, "longtail: keep facts with at most this many sentences");
    slice->add_option("--na-fraction", slice_na, "noise: target NA sentence fraction");
    slice->add_option("--out", out, "output directory")->required();

    auto* zero = app.add_subcommand("zero-shot", "hop-feature probe for pairs without sentences");
    cc_zero.attach(zero);
    zero->add_option("--checkpoint", checkpoint, "trained model")->required();
    zero->add_option("--vocab", vocab_file, "vocab.txt from training")->required();
    zero->add_option("--relations", relations_file, "relations.txt from training")->required();
    zero->add_option("--train-data", data, "training sentences")->required();
    zero->add_option("--test-data", test_data, "test sentences")->required();
    zero->add_option("--triples", triples, "TSV triple store")->required();
    zero->add_option("--out", out, "output directory")->required();

    auto* gc = app.add_subcommand("grad-check", "full-pipeline finite-difference verification");
    gc->add_option("--eps", gc_eps, "central-difference step");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        if (build->parsed()) return cmd_build_corpus(cc_build, triples, sentences, out);
        if (extract->parsed()) return cmd_extract_paths(cc_paths, data, out);
        if (train->parsed()) return cmd_train(cc_train, data, paths_file, embeddings, out);
        if (evalc->parsed())
            return cmd_eval(cc_eval, checkpoint, vocab_file, relations_file, data, paths_file, out);
        if (slice->parsed()) return cmd_slice(cc_slice, data, slice_mode, slice_ns, slice_na, out);
        if (zero->parsed())
            return cmd_zero_shot(cc_zero, checkpoint, vocab_file, relations_file, data, test_data,
                                 triples, out);
        if (gc->parsed()) return cmd_grad_check(gc_eps, 1e-4);
    } catch (const NumericError& e) {
        std::fprintf(stderr, "pathrex: %s\n", e.what());
        return kExitNumeric;
    } catch (const IoError& e) {
        std::fprintf(stderr, "pathrex: %s\n", e.what());
        return kExitIo;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "pathrex: %s\n", e.what());
        return kExitIo;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "pathrex: %s\n", e.what());
        return kExitIo;
    } catch (const CorruptError& e) {
        std::fprintf(stderr, "pathrex: %s\n", e.what());
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "pathrex: %s\n", e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "pathrex: %s\n", e.what());
        return kExitValidation;
    }
    return kExitOk;
}
