#pragma once

// Synthetic compositional benchmark: relation r3 holds exactly when some
// intermediate e gives r1(h,e) and r2(e,t). Templated sentences express the
// hop relations with relation-specific cue tokens; direct sentences for the
// held-out r3 facts are uninformative filler, indistinguishable from the
// No-Relation noise, so only path evidence can identify them.

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "pathrex/config.hpp"
#include "pathrex/corpus.hpp"
#include "pathrex/eval.hpp"
#include "pathrex/joint.hpp"
#include "pathrex/model.hpp"

namespace synth {

struct BenchmarkOptions {
    int train_groups = 60;        // compositional h -> e -> t triangles, train side
    int test_groups = 30;         // held-out triangles (half single-sentence r3 facts)
    int distractor_facts = 12;    // per distractor relation r4..r12
    int train_na_pairs = 120;     // corrupted pairs with noise sentences, train side
    int test_na_sentences = 2600; // enough noise to reach a 95% NA fraction
    // Noise is mostly filler, but a slice of it wears relation cues ("No
    // Relation" hides unknown relation types): weak pollution carries one cue
    // token, strong pollution is a full relational template on a non-fact pair.
    double pollute_fraction = 0.10;
    double strong_fraction = 0.15;
    std::uint64_t seed = 404;
};

struct Benchmark {
    pathrex::corpus::StringTable entities;
    pathrex::corpus::StringTable relations;  // NA + r1..r12
    pathrex::corpus::CorpusText train;
    pathrex::corpus::CorpusText test;
    pathrex::eval::FactSet heldout;                 // all held-out r3 facts
    pathrex::eval::FactSet heldout_single;          // those with exactly one direct sentence
    std::set<pathrex::corpus::PairKey> heldout_pairs;
};

Benchmark make_benchmark(const BenchmarkOptions& opt = {});

// Shared small model configuration for the benchmark runs.
pathrex::RunConfig benchmark_config(double beta, std::uint64_t seed);

struct TrainedModel {
    pathrex::ModelT<float> model;
    pathrex::corpus::Vocabulary vocab;
    pathrex::joint::TrainResult result;
};

TrainedModel train_benchmark(const Benchmark& bench, const pathrex::RunConfig& cfg);

// Max-F1 of ranking every non-NA candidate for the held-out pairs and the NA
// pairs of eval_text against the given gold facts. Paths are re-extracted
// from eval_text, so slices automatically carry their surviving evidence.
double benchmark_max_f1(const TrainedModel& tm, const Benchmark& bench,
                        const pathrex::corpus::CorpusText& eval_text,
                        const pathrex::eval::FactSet& gold, const pathrex::RunConfig& cfg);

}  // namespace synth
