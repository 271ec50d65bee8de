#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pathrex/errors.hpp"
#include "pathrex/numkernel.hpp"
#include "pathrex/rng.hpp"

namespace pathrex::corpus {

// Dense bidirectional name <-> id table for entities and relations.
class StringTable {
public:
    std::int32_t intern(std::string_view name) {
        auto it = ids_.find(std::string(name));
        if (it != ids_.end()) return it->second;
        const auto id = static_cast<std::int32_t>(names_.size());
        names_.emplace_back(name);
        ids_.emplace(names_.back(), id);
        return id;
    }

    std::int32_t find(std::string_view name) const {
        auto it = ids_.find(std::string(name));
        return it == ids_.end() ? -1 : it->second;
    }

    const std::string& name(std::int32_t id) const { return names_[static_cast<std::size_t>(id)]; }
    std::int32_t size() const { return static_cast<std::int32_t>(names_.size()); }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::int32_t> ids_;
};

// Relation id 0 is always the "No Relation" label.
inline constexpr std::int32_t kNaRelation = 0;
inline constexpr const char* kNaName = "NA";

inline StringTable make_relation_table() {
    StringTable t;
    t.intern(kNaName);
    return t;
}

struct Triple {
    std::int32_t head = -1;
    std::int32_t relation = -1;
    std::int32_t tail = -1;

    bool operator==(const Triple& o) const {
        return head == o.head && relation == o.relation && tail == o.tail;
    }
    bool operator<(const Triple& o) const {
        if (head != o.head) return head < o.head;
        if (relation != o.relation) return relation < o.relation;
        return tail < o.tail;
    }
};

struct TripleHash {
    std::size_t operator()(const Triple& t) const {
        std::uint64_t h = static_cast<std::uint64_t>(static_cast<std::uint32_t>(t.head));
        h = h * 0x9e3779b97f4a7c15ull + static_cast<std::uint32_t>(t.relation);
        h = h * 0x9e3779b97f4a7c15ull + static_cast<std::uint32_t>(t.tail);
        return static_cast<std::size_t>(h ^ (h >> 32));
    }
};

using PairKey = std::pair<std::int32_t, std::int32_t>;  // ordered (head, tail)

struct PairHash {
    std::size_t operator()(const PairKey& p) const {
        std::uint64_t h = static_cast<std::uint64_t>(static_cast<std::uint32_t>(p.first)) << 32 |
                          static_cast<std::uint32_t>(p.second);
        h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
        return static_cast<std::size_t>(h ^ (h >> 31));
    }
};

// Token span is half-open over the sentence's token sequence.
struct Mention {
    std::int32_t entity = -1;
    std::int32_t start = 0;
    std::int32_t end = 0;
};

// One labeled sentence; tokens stay strings until a Vocabulary indexes them.
struct TaggedSentence {
    std::vector<std::string> tokens;
    Mention head;
    Mention tail;
    std::int32_t label = kNaRelation;
};

// All instances sharing one ordered entity pair, plus the relations the KB
// holds for that pair ({NA} for corrupted pairs).
struct Bag {
    std::int32_t head = -1;
    std::int32_t tail = -1;
    std::vector<std::int32_t> sentences;  // indices into the sentence list
    std::vector<std::int32_t> gold;       // sorted ascending
};

// Two-hop path h -> mid -> tail; hop fields index into the owning bag list.
struct PathRecord {
    std::int32_t head = -1;
    std::int32_t mid = -1;
    std::int32_t tail = -1;
    std::int32_t hop1_bag = -1;
    std::int32_t hop2_bag = -1;
};

struct CorpusText {
    std::vector<TaggedSentence> sentences;
    std::vector<Bag> bags;  // sorted by (head, tail)

    const Bag* find_bag(std::int32_t head, std::int32_t tail) const;
    std::int32_t find_bag_index(std::int32_t head, std::int32_t tail) const;

    // Regroup bags from the sentence list: one bag per ordered pair, gold =
    // the distinct labels of its instances, sorted by pair key.
    void rebuild_bags();
};

// Token -> index with reserved PAD and UNK slots.
class Vocabulary {
public:
    static constexpr std::int32_t kPad = 0;
    static constexpr std::int32_t kUnk = 1;

    Vocabulary() {
        add("<pad>");
        add("<unk>");
    }

    std::int32_t add(const std::string& token) {
        auto it = ids_.find(token);
        if (it != ids_.end()) return it->second;
        const auto id = static_cast<std::int32_t>(tokens_.size());
        tokens_.push_back(token);
        ids_.emplace(token, id);
        return id;
    }

    std::int32_t lookup(const std::string& token) const {
        auto it = ids_.find(token);
        return it == ids_.end() ? kUnk : it->second;
    }

    // -1 when absent, no UNK fallback
    std::int32_t find(const std::string& token) const {
        auto it = ids_.find(token);
        return it == ids_.end() ? -1 : it->second;
    }

    const std::string& token(std::int32_t id) const { return tokens_[static_cast<std::size_t>(id)]; }
    std::int32_t size() const { return static_cast<std::int32_t>(tokens_.size()); }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::int32_t> ids_;
};

struct AlignStats {
    std::int64_t aligned = 0;        // labeled instances produced
    std::int64_t unmatched = 0;      // pair in neither KB nor negatives
    std::int64_t skipped_span = 0;   // unresolvable or overlapping mention spans
    std::int64_t truncated = 0;
};

struct AlignOptions {
    int max_len = 120;
};

// Distant-supervision alignment: a sentence whose (head, tail) pair carries
// KB relations yields one labeled instance per relation; a pair found only in
// negative_pairs yields one NA instance; anything else is dropped. Sentences
// longer than max_len are truncated around the midpoint of the two mentions.
CorpusText align(const std::vector<Triple>& kb,
                 const std::vector<PairKey>& negative_pairs,
                 const std::vector<TaggedSentence>& raw,
                 const AlignOptions& opt = {},
                 AlignStats* stats = nullptr);

// Corrupt head or tail (uniform choice) of KB triples to build the fake
// triple set; no produced triple may appear in the KB. Produces
// round(ratio * |kb|) triples, cycling through the KB in order.
std::vector<Triple> sample_negatives(const std::vector<Triple>& kb,
                                     const std::vector<std::int32_t>& entity_pool,
                                     double ratio, SeededRng& rng, int max_retries = 100);

struct SplitRatios {
    double train = 0.6;
    double valid = 0.2;
    double test = 0.2;
};

struct SplitResult {
    CorpusText train;
    CorpusText valid;
    CorpusText test;
};

// Fact-level partition: every labeled instance follows its (h, r, t) fact and
// no fact lands in two splits. NA bags are partitioned independently at bag
// level. Counts are floor(ratio * N) each with the remainder going to train.
SplitResult split(const CorpusText& corpus, const SplitRatios& ratios, SeededRng& rng);

// All two-hop paths h -> e -> t between pairs that have a bag (plus any extra
// candidate pairs). When a pair exceeds max_paths_per_pair, the intermediates
// with the largest min(|bag(h,e)|, |bag(e,t)|) win, ties by ascending entity
// id. Output is sorted by (head, tail, rank).
std::vector<PathRecord> extract_paths(const CorpusText& corpus, int max_paths_per_pair,
                                      const std::vector<PairKey>& extra_pairs = {});

// Tokens with frequency strictly greater than min_count are kept (sorted
// lexicographically after the reserved entries); everything else maps to UNK.
Vocabulary build_vocab(const std::vector<TaggedSentence>& sentences, int min_count);

// Text word-vector format: header "count dim", then "token v1 ... v_dim".
// In-vocabulary rows are copied; tokens absent from the file (including the
// reserved entries) are initialized uniform in [-0.25, 0.25] / dim. A token
// listed twice keeps its last occurrence (counted in *duplicates).
template <typename T>
TensorT<T> load_embeddings(const std::string& path, const Vocabulary& vocab, int dim,
                           SeededRng& rng, int* duplicates = nullptr);

extern template TensorT<float> load_embeddings<float>(const std::string&, const Vocabulary&, int,
                                                      SeededRng&, int*);
extern template TensorT<double> load_embeddings<double>(const std::string&, const Vocabulary&, int,
                                                        SeededRng&, int*);

// --- file formats ---

// JSON Lines: {"tokens":[...], "head":{"id":..,"start":..,"end":..}, "tail":{...}, "label":...}
std::vector<TaggedSentence> read_sentences_jsonl(const std::string& path, StringTable& entities,
                                                 StringTable& relations);
void write_sentences_jsonl(const std::string& path, const CorpusText& corpus,
                           const StringTable& entities, const StringTable& relations);

// TSV: head<TAB>relation<TAB>tail
std::vector<Triple> read_triples_tsv(const std::string& path, StringTable& entities,
                                     StringTable& relations);

// JSON Lines: {"h":..,"e":..,"t":..}
void write_paths_jsonl(const std::string& path, const std::vector<PathRecord>& paths,
                       const StringTable& entities);
struct RawPath {
    std::string head, mid, tail;
};
std::vector<RawPath> read_paths_jsonl(const std::string& path);

void write_vocab(const std::string& path, const Vocabulary& vocab);
Vocabulary read_vocab(const std::string& path);
void write_relations(const std::string& path, const StringTable& relations);
StringTable read_relations(const std::string& path);

// --- indexed form consumed by the encoder ---

struct IndexedSentence {
    std::vector<std::int32_t> tokens;  // vocabulary indices
    std::int32_t head_pos = 0;         // first token of the head mention
    std::int32_t tail_pos = 0;
    std::int32_t head_ent = -1;
    std::int32_t tail_ent = -1;
    std::int32_t label = kNaRelation;
};

std::vector<IndexedSentence> index_sentences(const CorpusText& corpus, const Vocabulary& vocab);

}  // namespace pathrex::corpus
