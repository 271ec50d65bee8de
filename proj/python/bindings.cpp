#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <tuple>
#include <vector>

#include "pathrex/eval.hpp"
#include "pathrex/joint.hpp"
#include "pathrex/numkernel.hpp"
#include "pathrex/path_encoder.hpp"
#include "pathrex/verify.hpp"

namespace py = pybind11;

namespace {

pathrex::TensorT<double> matrix_from(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw std::invalid_argument("empty matrix");
    const auto cols = static_cast<std::int64_t>(rows[0].size());
    pathrex::TensorT<double> m({static_cast<std::int64_t>(rows.size()), cols});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (static_cast<std::int64_t>(rows[i].size()) != cols)
            throw pathrex::DimError("ragged matrix rows");
        std::copy(rows[i].begin(), rows[i].end(), m.row(static_cast<std::int64_t>(i)));
    }
    return m;
}

using PyFact = std::tuple<std::string, std::string, std::string, double>;
using PyKey = std::tuple<std::string, std::string, std::string>;

}  // namespace

PYBIND11_MODULE(_pathrex, m) {
    m.doc() = "Core scoring operations of the path-based relation extraction engine";
    m.attr("__version__") = "0.1.0";

    m.def(
        "softmax", [](std::vector<double> z) { return pathrex::softmax(std::move(z)); },
        py::arg("logits"), "Max-shifted softmax over a logit vector");

    m.def(
        "l1_distance",
        [](const std::vector<double>& a, const std::vector<double>& b) {
            return pathrex::l1_distance(a, b);
        },
        py::arg("a"), py::arg("b"));

    m.def(
        "affine",
        [](const std::vector<std::vector<double>>& w, const std::vector<double>& x,
           const std::vector<double>& b) {
            const auto wm = matrix_from(w);
            const pathrex::TensorT<double> xv({static_cast<std::int64_t>(x.size())}, x);
            const pathrex::TensorT<double> bv({static_cast<std::int64_t>(b.size())}, b);
            return pathrex::affine(wm, xv, bv).v;
        },
        py::arg("w"), py::arg("x"), py::arg("b"), "W x + b");

    m.def("global_score", &pathrex::joint::global_score<double>, py::arg("text_score"),
          py::arg("path_score"), py::arg("beta"),
          "Joint score E + (1-E)*beta*G of text and path evidence");

    m.def(
        "path_relation_prob",
        [](const std::vector<std::vector<double>>& rel_emb, std::int32_t rel_a, std::int32_t rel_b) {
            return pathrex::pathenc::path_relation_prob(rel_a, rel_b, matrix_from(rel_emb));
        },
        py::arg("rel_emb"), py::arg("rel_a"), py::arg("rel_b"),
        "p(r | r_a, r_b) from composed relation embeddings under negative L1 distance");

    m.def(
        "aggregate_paths",
        [](const std::vector<double>& scores) { return pathrex::pathenc::aggregate_paths(scores); },
        py::arg("scores"), "Max over path scores; empty means no evidence (0)");

    m.def(
        "pr_curve",
        [](const std::vector<PyFact>& ranked, const std::vector<PyKey>& gold) {
            std::vector<pathrex::eval::RankedFact> facts;
            facts.reserve(ranked.size());
            for (const auto& [h, r, t, s] : ranked) facts.push_back({h, r, t, s});
            pathrex::eval::sort_ranked(facts);
            pathrex::eval::FactSet gold_set(gold.begin(), gold.end());
            const auto curve = pathrex::eval::pr_curve(facts, gold_set);
            std::vector<std::tuple<std::int64_t, double, double>> out;
            out.reserve(curve.size());
            for (const auto& p : curve) out.push_back({p.cutoff, p.precision, p.recall});
            return out;
        },
        py::arg("ranked"), py::arg("gold"),
        "Precision/recall at every cutoff of a ranked fact list");

    m.def(
        "max_f1",
        [](const std::vector<std::tuple<std::int64_t, double, double>>& curve) {
            std::vector<pathrex::eval::PRPoint> points;
            points.reserve(curve.size());
            for (const auto& [c, p, r] : curve) points.push_back({c, p, r});
            return pathrex::eval::max_f1(points);
        },
        py::arg("curve"));

    m.def("grad_check", &pathrex::verify::full_pipeline_grad_check, py::arg("eps") = 1e-5,
          py::arg("seed") = 31,
          "Max relative error of the full-pipeline analytic gradient against central differences");
}
