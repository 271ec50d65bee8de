#include "pathrex/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "pathrex/util.hpp"

namespace pathrex::eval {

void sort_ranked(std::vector<RankedFact>& ranked) {
    std::sort(ranked.begin(), ranked.end(), [](const RankedFact& a, const RankedFact& b) {
        if (a.score != b.score) return a.score > b.score;
        return std::tie(a.head, a.relation, a.tail) < std::tie(b.head, b.relation, b.tail);
    });
}

FactSet gold_facts(const corpus::CorpusText& text, const corpus::StringTable& entities,
                   const corpus::StringTable& relations) {
    FactSet gold;
    for (const corpus::TaggedSentence& s : text.sentences) {
        if (s.label == corpus::kNaRelation) continue;
        gold.insert({entities.name(s.head.entity), relations.name(s.label), entities.name(s.tail.entity)});
    }
    return gold;
}

std::vector<PRPoint> pr_curve(const std::vector<RankedFact>& ranked, const FactSet& gold) {
    if (gold.empty()) throw std::invalid_argument("pr_curve: empty gold set");
    std::vector<PRPoint> curve;
    curve.reserve(ranked.size());
    FactSet matched;
    std::int64_t correct = 0;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        const FactKey key{ranked[i].head, ranked[i].relation, ranked[i].tail};
        if (gold.count(key) && matched.insert(key).second) ++correct;
        const auto n = static_cast<std::int64_t>(i) + 1;
        curve.push_back({n, static_cast<double>(correct) / static_cast<double>(n),
                         static_cast<double>(correct) / static_cast<double>(gold.size())});
    }
    return curve;
}

std::vector<FractionPrecision> p_at_fractions(const std::vector<RankedFact>& ranked,
                                              const FactSet& gold, std::int64_t n,
                                              const std::vector<double>& fractions, bool* warned) {
    if (warned != nullptr) *warned = false;
    std::int64_t effective = n;
    if (static_cast<std::int64_t>(ranked.size()) < n) {
        effective = static_cast<std::int64_t>(ranked.size());
        if (warned != nullptr) *warned = true;
        log_warn("p_at_fractions: ranking has only " + std::to_string(ranked.size()) +
                 " facts, using full length instead of " + std::to_string(n));
    }

    std::vector<FractionPrecision> out;
    FactSet matched;
    std::int64_t correct = 0;
    std::int64_t scanned = 0;
    std::vector<std::pair<std::int64_t, std::size_t>> cutoffs;  // (cutoff, fraction idx)
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        if (fractions[i] > 1.0)
            throw std::invalid_argument("p_at_fractions: fraction " + std::to_string(fractions[i]) +
                                        " exceeds 1");
        const auto cutoff = static_cast<std::int64_t>(
            std::floor(static_cast<double>(effective) * fractions[i]));
        if (cutoff <= 0)
            throw std::invalid_argument("p_at_fractions: fraction " + std::to_string(fractions[i]) +
                                        " selects zero facts");
        cutoffs.push_back({cutoff, i});
    }
    out.resize(fractions.size());
    std::sort(cutoffs.begin(), cutoffs.end());
    std::size_t next = 0;
    for (std::int64_t i = 0; i < effective && next < cutoffs.size(); ++i) {
        const RankedFact& f = ranked[static_cast<std::size_t>(i)];
        const FactKey key{f.head, f.relation, f.tail};
        if (gold.count(key) && matched.insert(key).second) ++correct;
        ++scanned;
        while (next < cutoffs.size() && cutoffs[next].first == scanned) {
            out[cutoffs[next].second] = {fractions[cutoffs[next].second], scanned,
                                         static_cast<double>(correct) / static_cast<double>(scanned)};
            ++next;
        }
    }
    return out;
}

double max_f1(const std::vector<PRPoint>& curve) {
    if (curve.empty()) throw std::invalid_argument("max_f1: empty curve");
    double best = 0.0;
    for (const PRPoint& p : curve) {
        const double denom = p.precision + p.recall;
        const double f1 = denom > 0.0 ? 2.0 * p.precision * p.recall / denom : 0.0;
        best = std::max(best, f1);
    }
    return best;
}

corpus::CorpusText longtail_slice(const corpus::CorpusText& test, int max_sentences) {
    if (max_sentences < 1) throw std::invalid_argument("longtail_slice: threshold must be >= 1");
    std::unordered_map<corpus::Triple, std::int64_t, corpus::TripleHash> fact_count;
    for (const corpus::TaggedSentence& s : test.sentences)
        if (s.label != corpus::kNaRelation)
            ++fact_count[{s.head.entity, s.label, s.tail.entity}];

    corpus::CorpusText out;
    for (const corpus::TaggedSentence& s : test.sentences) {
        if (s.label == corpus::kNaRelation) {
            out.sentences.push_back(s);  // noise is always reserved
            continue;
        }
        if (fact_count.at({s.head.entity, s.label, s.tail.entity}) <= max_sentences)
            out.sentences.push_back(s);
    }
    out.rebuild_bags();
    return out;
}

corpus::CorpusText noise_slice(const corpus::CorpusText& test, double na_target, SeededRng& rng,
                               bool* warned) {
    if (warned != nullptr) *warned = false;
    if (na_target < 0.0 || na_target > 1.0)
        throw std::invalid_argument("noise_slice: target fraction must be in [0, 1]");

    std::vector<std::size_t> na_indices;
    std::int64_t relational = 0;
    for (std::size_t i = 0; i < test.sentences.size(); ++i) {
        if (test.sentences[i].label == corpus::kNaRelation)
            na_indices.push_back(i);
        else
            ++relational;
    }

    std::int64_t wanted;
    if (na_target >= 1.0) {
        wanted = static_cast<std::int64_t>(na_indices.size()) + 1;  // unreachable on purpose
    } else {
        wanted = static_cast<std::int64_t>(
            std::llround(na_target * static_cast<double>(relational) / (1.0 - na_target)));
    }

    std::vector<char> keep(test.sentences.size(), 0);
    if (wanted >= static_cast<std::int64_t>(na_indices.size())) {
        if (wanted > static_cast<std::int64_t>(na_indices.size())) {
            if (warned != nullptr) *warned = true;
            log_warn("noise_slice: only " + std::to_string(na_indices.size()) +
                     " NA sentences available, target fraction not reachable");
        }
        for (std::size_t i : na_indices) keep[i] = 1;
    } else {
        std::vector<std::size_t> pool = na_indices;
        rng.shuffle(pool);
        for (std::int64_t i = 0; i < wanted; ++i) keep[pool[static_cast<std::size_t>(i)]] = 1;
    }

    corpus::CorpusText out;
    for (std::size_t i = 0; i < test.sentences.size(); ++i) {
        const auto& s = test.sentences[i];
        if (s.label != corpus::kNaRelation || keep[i]) out.sentences.push_back(s);
    }
    out.rebuild_bags();
    return out;
}

double logistic_probe_accuracy(const std::vector<ProbeExample>& train,
                               const std::vector<ProbeExample>& test, std::int32_t n_classes,
                               const ProbeOptions& opt) {
    if (train.empty() || test.empty())
        throw std::invalid_argument("logistic_probe: empty probe dataset");
    if (n_classes < 2) throw std::invalid_argument("logistic_probe: need at least two classes");
    const std::size_t dim = train[0].feature.size();
    for (const auto& ex : train)
        if (ex.feature.size() != dim) throw DimError("logistic_probe: inconsistent feature size");

    std::vector<double> w(static_cast<std::size_t>(n_classes) * dim, 0.0);
    std::vector<double> b(static_cast<std::size_t>(n_classes), 0.0);
    SeededRng rng(opt.seed);
    std::vector<std::size_t> order(train.size());

    std::vector<double> logits(static_cast<std::size_t>(n_classes));
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);
        for (std::size_t pos : order) {
            const ProbeExample& ex = train[pos];
            for (std::int32_t c = 0; c < n_classes; ++c) {
                double acc = b[static_cast<std::size_t>(c)];
                const double* wc = w.data() + static_cast<std::size_t>(c) * dim;
                for (std::size_t d = 0; d < dim; ++d) acc += wc[d] * ex.feature[d];
                logits[static_cast<std::size_t>(c)] = acc;
            }
            softmax_inplace(logits.data(), logits.size());
            for (std::int32_t c = 0; c < n_classes; ++c) {
                const double err = logits[static_cast<std::size_t>(c)] - (c == ex.label ? 1.0 : 0.0);
                double* wc = w.data() + static_cast<std::size_t>(c) * dim;
                for (std::size_t d = 0; d < dim; ++d)
                    wc[d] -= opt.learning_rate * (err * ex.feature[d] + opt.l2 * wc[d]);
                b[static_cast<std::size_t>(c)] -= opt.learning_rate * err;
            }
        }
    }

    std::int64_t hits = 0;
    for (const ProbeExample& ex : test) {
        if (ex.feature.size() != dim) throw DimError("logistic_probe: inconsistent feature size");
        std::int32_t best = 0;
        double best_score = -std::numeric_limits<double>::infinity();
        for (std::int32_t c = 0; c < n_classes; ++c) {
            double acc = b[static_cast<std::size_t>(c)];
            const double* wc = w.data() + static_cast<std::size_t>(c) * dim;
            for (std::size_t d = 0; d < dim; ++d) acc += wc[d] * ex.feature[d];
            if (acc > best_score) {
                best_score = acc;
                best = c;
            }
        }
        if (best == ex.label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(test.size());
}

void write_pr_csv(const std::string& path, const std::vector<PRPoint>& curve) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write PR file: " + path);
    out << "cutoff,precision,recall\n";
    out.precision(17);
    for (const PRPoint& p : curve) out << p.cutoff << ',' << p.precision << ',' << p.recall << '\n';
    if (!out) throw IoError("failed writing PR file: " + path);
}

void write_summary_csv(const std::string& path,
                       const std::vector<std::pair<std::string, double>>& metrics) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write summary file: " + path);
    out << "metric,value\n";
    out.precision(17);
    for (const auto& [name, value] : metrics) out << name << ',' << value << '\n';
    if (!out) throw IoError("failed writing summary file: " + path);
}

void write_pr_svg(const std::string& path, const std::vector<PRPoint>& curve) {
    const int width = 640, height = 480, margin = 50;
    const int plot_w = width - 2 * margin, plot_h = height - 2 * margin;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    svg << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin
        << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
        << height - margin << "\" stroke=\"black\"/>\n";
    for (int tick = 0; tick <= 10; tick += 2) {
        const double f = tick / 10.0;
        const int x = margin + static_cast<int>(f * plot_w);
        const int y = height - margin - static_cast<int>(f * plot_h);
        svg << "<text x=\"" << x << "\" y=\"" << height - margin + 18
            << "\" font-size=\"11\" text-anchor=\"middle\">" << f << "</text>\n";
        svg << "<text x=\"" << margin - 8 << "\" y=\"" << y + 4
            << "\" font-size=\"11\" text-anchor=\"end\">" << f << "</text>\n";
    }
    svg << "<text x=\"" << width / 2 << "\" y=\"" << height - 12
        << "\" font-size=\"13\" text-anchor=\"middle\">recall</text>\n";
    svg << "<text x=\"16\" y=\"" << height / 2
        << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << height / 2
        << ")\">precision</text>\n";
    svg << "<polyline fill=\"none\" stroke=\"#c0392b\" stroke-width=\"1.5\" points=\"";
    for (const PRPoint& p : curve) {
        const double x = margin + p.recall * plot_w;
        const double y = height - margin - p.precision * plot_h;
        svg << x << ',' << y << ' ';
    }
    svg << "\"/>\n</svg>\n";

    std::ofstream out(path);
    if (!out) throw IoError("cannot write SVG file: " + path);
    out << svg.str();
    if (!out) throw IoError("failed writing SVG file: " + path);
}

}  // namespace pathrex::eval
