#include "pathrex/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "pathrex/util.hpp"

namespace pathrex::corpus {

using nlohmann::json;

// --- CorpusText ---

void CorpusText::rebuild_bags() {
    std::map<PairKey, Bag> grouped;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        const auto& s = sentences[i];
        Bag& b = grouped[{s.head.entity, s.tail.entity}];
        b.head = s.head.entity;
        b.tail = s.tail.entity;
        b.sentences.push_back(static_cast<std::int32_t>(i));
        b.gold.push_back(s.label);
    }
    bags.clear();
    bags.reserve(grouped.size());
    for (auto& [key, bag] : grouped) {
        std::sort(bag.gold.begin(), bag.gold.end());
        bag.gold.erase(std::unique(bag.gold.begin(), bag.gold.end()), bag.gold.end());
        bags.push_back(std::move(bag));
    }
}

std::int32_t CorpusText::find_bag_index(std::int32_t head, std::int32_t tail) const {
    const PairKey key{head, tail};
    auto it = std::lower_bound(bags.begin(), bags.end(), key, [](const Bag& b, const PairKey& k) {
        return PairKey{b.head, b.tail} < k;
    });
    if (it == bags.end() || it->head != head || it->tail != tail) return -1;
    return static_cast<std::int32_t>(it - bags.begin());
}

const Bag* CorpusText::find_bag(std::int32_t head, std::int32_t tail) const {
    const std::int32_t i = find_bag_index(head, tail);
    return i < 0 ? nullptr : &bags[static_cast<std::size_t>(i)];
}

// --- align ---

namespace {

bool spans_ok(const TaggedSentence& s) {
    const auto len = static_cast<std::int32_t>(s.tokens.size());
    const Mention& h = s.head;
    const Mention& t = s.tail;
    if (h.entity < 0 || t.entity < 0) return false;
    if (!(0 <= h.start && h.start < h.end && h.end <= len)) return false;
    if (!(0 <= t.start && t.start < t.end && t.end <= len)) return false;
    if (h.start < t.end && t.start < h.end) return false;  // overlap
    return true;
}

// Keep a max_len window containing both mentions, centered on their midpoint.
// Returns false when the mentions alone cannot fit.
bool truncate_sentence(TaggedSentence& s, int max_len) {
    const auto len = static_cast<std::int32_t>(s.tokens.size());
    if (len <= max_len) return true;
    const std::int32_t lo_need = std::min(s.head.start, s.tail.start);
    const std::int32_t hi_need = std::max(s.head.end, s.tail.end);
    if (hi_need - lo_need > max_len) return false;
    std::int32_t start = (lo_need + hi_need) / 2 - max_len / 2;
    start = std::clamp(start, std::int32_t{0}, len - max_len);
    start = std::min(start, lo_need);
    start = std::max(start, hi_need - max_len);
    s.tokens = std::vector<std::string>(s.tokens.begin() + start, s.tokens.begin() + start + max_len);
    s.head.start -= start;
    s.head.end -= start;
    s.tail.start -= start;
    s.tail.end -= start;
    return true;
}

}  // namespace

CorpusText align(const std::vector<Triple>& kb, const std::vector<PairKey>& negative_pairs,
                 const std::vector<TaggedSentence>& raw, const AlignOptions& opt,
                 AlignStats* stats) {
    std::unordered_map<PairKey, std::vector<std::int32_t>, PairHash> kb_pairs;
    for (const Triple& t : kb) kb_pairs[{t.head, t.tail}].push_back(t.relation);
    for (auto& [key, rels] : kb_pairs) {
        std::sort(rels.begin(), rels.end());
        rels.erase(std::unique(rels.begin(), rels.end()), rels.end());
    }
    std::unordered_set<PairKey, PairHash> neg_pairs(negative_pairs.begin(), negative_pairs.end());

    AlignStats local;
    CorpusText out;
    for (const TaggedSentence& src : raw) {
        if (!spans_ok(src)) {
            ++local.skipped_span;
            continue;
        }
        TaggedSentence s = src;
        if (static_cast<int>(s.tokens.size()) > opt.max_len) {
            if (!truncate_sentence(s, opt.max_len)) {
                ++local.skipped_span;
                continue;
            }
            ++local.truncated;
        }
        const PairKey pair{s.head.entity, s.tail.entity};
        auto it = kb_pairs.find(pair);
        if (it != kb_pairs.end()) {
            for (std::int32_t rel : it->second) {
                s.label = rel;
                out.sentences.push_back(s);
                ++local.aligned;
            }
        } else if (neg_pairs.count(pair)) {
            s.label = kNaRelation;
            out.sentences.push_back(s);
            ++local.aligned;
        } else {
            ++local.unmatched;
        }
    }
    out.rebuild_bags();
    if (local.skipped_span > 0)
        log_warn("align: skipped " + std::to_string(local.skipped_span) + " sentences with bad spans");
    if (stats != nullptr) *stats = local;
    return out;
}

// --- sample_negatives ---

std::vector<Triple> sample_negatives(const std::vector<Triple>& kb,
                                     const std::vector<std::int32_t>& entity_pool, double ratio,
                                     SeededRng& rng, int max_retries) {
    if (ratio < 0.0) throw std::invalid_argument("sample_negatives: ratio must be >= 0");
    const auto count = static_cast<std::int64_t>(std::llround(ratio * static_cast<double>(kb.size())));
    std::vector<Triple> out;
    if (count == 0) return out;
    if (kb.empty() || entity_pool.empty())
        throw GenError("sample_negatives: empty KB or entity pool");

    std::unordered_set<Triple, TripleHash> kb_set(kb.begin(), kb.end());
    out.reserve(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) {
        const Triple& base = kb[static_cast<std::size_t>(i) % kb.size()];
        bool placed = false;
        for (int attempt = 0; attempt < max_retries; ++attempt) {
            Triple cand = base;
            const auto repl = entity_pool[static_cast<std::size_t>(rng.next_below(entity_pool.size()))];
            if (rng.next_bool())
                cand.head = repl;
            else
                cand.tail = repl;
            if (cand.head == cand.tail || kb_set.count(cand)) continue;
            out.push_back(cand);
            placed = true;
            break;
        }
        if (!placed)
            throw GenError("sample_negatives: could not corrupt a triple without colliding after " +
                           std::to_string(max_retries) + " retries; entity pool too small");
    }
    return out;
}

// --- split ---

SplitResult split(const CorpusText& corpus, const SplitRatios& ratios, SeededRng& rng) {
    if (corpus.sentences.empty()) throw std::invalid_argument("split: empty corpus");
    if (!(ratios.train > 0.0 && ratios.valid > 0.0 && ratios.test > 0.0))
        throw std::invalid_argument("split: ratios must be positive");
    if (std::abs(ratios.train + ratios.valid + ratios.test - 1.0) > 1e-9)
        throw std::invalid_argument("split: ratios must sum to 1");

    // Relational facts, in deterministic pair order.
    std::vector<Triple> facts;
    std::vector<std::int32_t> na_bags;
    for (std::size_t i = 0; i < corpus.bags.size(); ++i) {
        const Bag& b = corpus.bags[i];
        bool relational = false;
        for (std::int32_t r : b.gold) {
            if (r == kNaRelation) continue;
            facts.push_back({b.head, r, b.tail});
            relational = true;
        }
        if (!relational) na_bags.push_back(static_cast<std::int32_t>(i));
    }

    // 0 = train, 1 = valid, 2 = test; floors for valid/test, remainder to train.
    auto assign = [&rng, &ratios](std::size_t n) {
        std::vector<int> dest(n, 0);
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        rng.shuffle(order);
        const auto n_valid = static_cast<std::size_t>(std::floor(ratios.valid * static_cast<double>(n)));
        const auto n_test = static_cast<std::size_t>(std::floor(ratios.test * static_cast<double>(n)));
        const std::size_t n_train = n - n_valid - n_test;
        for (std::size_t i = 0; i < n; ++i)
            dest[order[i]] = i < n_train ? 0 : (i < n_train + n_valid ? 1 : 2);
        return dest;
    };

    const std::vector<int> fact_dest = assign(facts.size());
    const std::vector<int> na_dest = assign(na_bags.size());

    std::unordered_map<Triple, int, TripleHash> fact_split;
    for (std::size_t i = 0; i < facts.size(); ++i) fact_split[facts[i]] = fact_dest[i];
    std::unordered_map<std::int32_t, int> na_split;
    for (std::size_t i = 0; i < na_bags.size(); ++i) na_split[na_bags[i]] = na_dest[i];

    std::unordered_map<PairKey, std::int32_t, PairHash> bag_of_pair;
    for (std::size_t i = 0; i < corpus.bags.size(); ++i)
        bag_of_pair[{corpus.bags[i].head, corpus.bags[i].tail}] = static_cast<std::int32_t>(i);

    SplitResult result;
    CorpusText* parts[3] = {&result.train, &result.valid, &result.test};
    for (const TaggedSentence& s : corpus.sentences) {
        int dest;
        if (s.label == kNaRelation) {
            dest = na_split.at(bag_of_pair.at({s.head.entity, s.tail.entity}));
        } else {
            dest = fact_split.at({s.head.entity, s.label, s.tail.entity});
        }
        parts[dest]->sentences.push_back(s);
    }
    for (CorpusText* part : parts) part->rebuild_bags();
    return result;
}

// --- extract_paths ---

std::vector<PathRecord> extract_paths(const CorpusText& corpus, int max_paths_per_pair,
                                      const std::vector<PairKey>& extra_pairs) {
    if (max_paths_per_pair < 0) throw std::invalid_argument("extract_paths: negative cap");

    std::unordered_map<PairKey, std::int32_t, PairHash> bag_index;
    std::unordered_map<std::int32_t, std::vector<std::pair<std::int32_t, std::int32_t>>> out_edges;
    for (std::size_t i = 0; i < corpus.bags.size(); ++i) {
        const Bag& b = corpus.bags[i];
        if (b.sentences.empty()) continue;
        bag_index[{b.head, b.tail}] = static_cast<std::int32_t>(i);
        out_edges[b.head].push_back({b.tail, static_cast<std::int32_t>(i)});
    }

    std::set<PairKey> targets;
    for (const Bag& b : corpus.bags)
        if (!b.sentences.empty()) targets.insert({b.head, b.tail});
    for (const PairKey& p : extra_pairs) targets.insert(p);

    struct Candidate {
        std::int32_t mid, hop1, hop2;
        std::int64_t strength;
    };

    std::vector<PathRecord> out;
    for (const auto& [head, tail] : targets) {
        auto edges = out_edges.find(head);
        if (edges == out_edges.end()) continue;
        std::vector<Candidate> cands;
        for (const auto& [mid, hop1] : edges->second) {
            if (mid == head || mid == tail) continue;
            auto hop2 = bag_index.find({mid, tail});
            if (hop2 == bag_index.end()) continue;
            const auto n1 = static_cast<std::int64_t>(corpus.bags[static_cast<std::size_t>(hop1)].sentences.size());
            const auto n2 = static_cast<std::int64_t>(corpus.bags[static_cast<std::size_t>(hop2->second)].sentences.size());
            cands.push_back({mid, hop1, hop2->second, std::min(n1, n2)});
        }
        std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
            if (a.strength != b.strength) return a.strength > b.strength;
            return a.mid < b.mid;
        });
        if (static_cast<int>(cands.size()) > max_paths_per_pair)
            cands.resize(static_cast<std::size_t>(max_paths_per_pair));
        for (const Candidate& c : cands) out.push_back({head, c.mid, tail, c.hop1, c.hop2});
    }
    return out;
}

// --- build_vocab ---

Vocabulary build_vocab(const std::vector<TaggedSentence>& sentences, int min_count) {
    if (min_count < 0) throw std::invalid_argument("build_vocab: negative min_count");
    std::map<std::string, std::int64_t> freq;
    for (const TaggedSentence& s : sentences)
        for (const std::string& tok : s.tokens) ++freq[tok];
    Vocabulary vocab;
    for (const auto& [tok, n] : freq)
        if (n > min_count) vocab.add(tok);
    return vocab;
}

// --- load_embeddings ---

template <typename T>
TensorT<T> load_embeddings(const std::string& path, const Vocabulary& vocab, int dim,
                           SeededRng& rng, int* duplicates) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open embeddings file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ":1: missing header");
    std::istringstream header(line);
    std::int64_t declared_count = 0;
    int file_dim = 0;
    if (!(header >> declared_count >> file_dim) || declared_count < 0 || file_dim <= 0)
        throw ParseError(path + ":1: header must be 'count dim'");
    if (file_dim != dim)
        throw DimError("embeddings dimension " + std::to_string(file_dim) + " does not match configured " +
                       std::to_string(dim));

    TensorT<T> table({vocab.size(), dim});
    std::vector<char> filled(static_cast<std::size_t>(vocab.size()), 0);
    int dups = 0;

    std::int64_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string token;
        if (!(ls >> token)) throw ParseError(path + ":" + std::to_string(line_no) + ": missing token");
        std::vector<T> row(static_cast<std::size_t>(dim));
        for (int j = 0; j < dim; ++j) {
            double x;
            if (!(ls >> x))
                throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                                 std::to_string(dim) + " values for token '" + token + "'");
            row[static_cast<std::size_t>(j)] = static_cast<T>(x);
        }
        double extra;
        if (ls >> extra)
            throw ParseError(path + ":" + std::to_string(line_no) + ": too many values for token '" +
                             token + "'");
        const std::int32_t id = vocab.find(token);
        if (id < 0) continue;
        if (filled[static_cast<std::size_t>(id)]) {
            ++dups;
            log_warn("embeddings: token '" + token + "' appears more than once; keeping last");
        }
        std::copy(row.begin(), row.end(), table.row(id));
        filled[static_cast<std::size_t>(id)] = 1;
    }

    // Uncovered rows (including the reserved entries) are drawn afterwards in
    // index order so coverage does not change which values they receive.
    for (std::int32_t i = 0; i < vocab.size(); ++i) {
        if (filled[static_cast<std::size_t>(i)]) continue;
        T* row = table.row(i);
        for (int j = 0; j < dim; ++j)
            row[j] = static_cast<T>(rng.next_range(-0.25, 0.25) / static_cast<double>(dim));
    }
    if (duplicates != nullptr) *duplicates = dups;
    return table;
}

template TensorT<float> load_embeddings<float>(const std::string&, const Vocabulary&, int, SeededRng&, int*);
template TensorT<double> load_embeddings<double>(const std::string&, const Vocabulary&, int, SeededRng&, int*);

// --- file formats ---

namespace {

json mention_to_json(const Mention& m, const StringTable& entities) {
    return json{{"id", entities.name(m.entity)}, {"start", m.start}, {"end", m.end}};
}

Mention mention_from_json(const json& j, StringTable& entities) {
    Mention m;
    m.entity = entities.intern(j.at("id").get<std::string>());
    m.start = j.at("start").get<std::int32_t>();
    m.end = j.at("end").get<std::int32_t>();
    return m;
}

}  // namespace

std::vector<TaggedSentence> read_sentences_jsonl(const std::string& path, StringTable& entities,
                                                 StringTable& relations) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open sentences file: " + path);
    std::vector<TaggedSentence> out;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
            TaggedSentence s;
            s.tokens = j.at("tokens").get<std::vector<std::string>>();
            s.head = mention_from_json(j.at("head"), entities);
            s.tail = mention_from_json(j.at("tail"), entities);
            if (j.contains("label"))
                s.label = relations.intern(j.at("label").get<std::string>());
            else
                s.label = kNaRelation;
            out.push_back(std::move(s));
        } catch (const json::exception& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void write_sentences_jsonl(const std::string& path, const CorpusText& corpus,
                           const StringTable& entities, const StringTable& relations) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write sentences file: " + path);
    for (const TaggedSentence& s : corpus.sentences) {
        json j;
        j["tokens"] = s.tokens;
        j["head"] = mention_to_json(s.head, entities);
        j["tail"] = mention_to_json(s.tail, entities);
        j["label"] = relations.name(s.label);
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("failed writing sentences file: " + path);
}

std::vector<Triple> read_triples_tsv(const std::string& path, StringTable& entities,
                                     StringTable& relations) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open triples file: " + path);
    std::vector<Triple> out;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto tab1 = line.find('\t');
        const auto tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
        if (tab1 == std::string::npos || tab2 == std::string::npos ||
            line.find('\t', tab2 + 1) != std::string::npos)
            throw ParseError(path + ":" + std::to_string(line_no) +
                             ": expected head<TAB>relation<TAB>tail");
        const std::string head = line.substr(0, tab1);
        const std::string rel = line.substr(tab1 + 1, tab2 - tab1 - 1);
        const std::string tail = line.substr(tab2 + 1);
        if (head.empty() || rel.empty() || tail.empty())
            throw ParseError(path + ":" + std::to_string(line_no) + ": empty field");
        if (head == tail)
            throw ParseError(path + ":" + std::to_string(line_no) + ": head equals tail");
        out.push_back({entities.intern(head), relations.intern(rel), entities.intern(tail)});
    }
    return out;
}

void write_paths_jsonl(const std::string& path, const std::vector<PathRecord>& paths,
                       const StringTable& entities) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write paths file: " + path);
    for (const PathRecord& p : paths) {
        json j;
        j["h"] = entities.name(p.head);
        j["e"] = entities.name(p.mid);
        j["t"] = entities.name(p.tail);
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("failed writing paths file: " + path);
}

std::vector<RawPath> read_paths_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open paths file: " + path);
    std::vector<RawPath> out;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            out.push_back({j.at("h").get<std::string>(), j.at("e").get<std::string>(),
                           j.at("t").get<std::string>()});
        } catch (const json::exception& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void write_vocab(const std::string& path, const Vocabulary& vocab) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write vocab file: " + path);
    for (std::int32_t i = 0; i < vocab.size(); ++i) out << vocab.token(i) << '\n';
    if (!out) throw IoError("failed writing vocab file: " + path);
}

Vocabulary read_vocab(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open vocab file: " + path);
    Vocabulary vocab;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 || line_no == 2) {
            const char* want = line_no == 1 ? "<pad>" : "<unk>";
            if (line != want)
                throw ParseError(path + ":" + std::to_string(line_no) + ": expected reserved token " +
                                 want);
            continue;
        }
        if (line.empty()) throw ParseError(path + ":" + std::to_string(line_no) + ": empty token");
        vocab.add(line);
    }
    if (line_no < 2) throw ParseError(path + ": missing reserved tokens");
    return vocab;
}

void write_relations(const std::string& path, const StringTable& relations) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write relations file: " + path);
    for (std::int32_t i = 0; i < relations.size(); ++i) out << relations.name(i) << '\n';
    if (!out) throw IoError("failed writing relations file: " + path);
}

StringTable read_relations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open relations file: " + path);
    StringTable t;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) throw ParseError(path + ":" + std::to_string(line_no) + ": empty relation");
        if (line_no == 1 && line != kNaName)
            throw ParseError(path + ":1: first relation must be " + std::string(kNaName));
        t.intern(line);
    }
    if (t.size() == 0) throw ParseError(path + ": empty relations file");
    return t;
}

std::vector<IndexedSentence> index_sentences(const CorpusText& corpus, const Vocabulary& vocab) {
    std::vector<IndexedSentence> out;
    out.reserve(corpus.sentences.size());
    for (const TaggedSentence& s : corpus.sentences) {
        IndexedSentence ix;
        ix.tokens.reserve(s.tokens.size());
        for (const std::string& tok : s.tokens) ix.tokens.push_back(vocab.lookup(tok));
        ix.head_pos = s.head.start;
        ix.tail_pos = s.tail.start;
        ix.head_ent = s.head.entity;
        ix.tail_ent = s.tail.entity;
        ix.label = s.label;
        out.push_back(std::move(ix));
    }
    return out;
}

}  // namespace pathrex::corpus
