#include "pathrex/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace pathrex {

namespace {

bool parse_int(const std::string& s, long long& out) {
    const char* b = s.data();
    const char* e = s.data() + s.size();
    auto r = std::from_chars(b, e, out);
    return r.ec == std::errc{} && r.ptr == e;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    std::size_t pos = 0;
    try {
        out = std::stod(s, &pos);
    } catch (...) {
        return false;
    }
    return pos == s.size();
}

bool parse_bool(const std::string& s, bool& out) {
    if (s == "1" || s == "true" || s == "yes") {
        out = true;
        return true;
    }
    if (s == "0" || s == "false" || s == "no") {
        out = false;
        return true;
    }
    return false;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::string RunConfig::set(const std::string& key, const std::string& value) {
    auto want_int = [&](int& field, long long lo, long long hi) -> std::string {
        long long v;
        if (!parse_int(value, v) || v < lo || v > hi)
            return key + "=" + value + " (expected integer in [" + std::to_string(lo) + ", " +
                   std::to_string(hi) + "])";
        field = static_cast<int>(v);
        return "";
    };
    auto want_double = [&](double& field, double lo, bool lo_open) -> std::string {
        double v;
        if (!parse_double(value, v) || !std::isfinite(v) || (lo_open ? !(v > lo) : !(v >= lo)))
            return key + "=" + value + " (expected real " + (lo_open ? "> " : ">= ") +
                   std::to_string(lo) + ")";
        field = v;
        return "";
    };

    if (key == "learning_rate") return want_double(learning_rate, 0.0, true);
    if (key == "d_c") return want_int(d_c, 1, 1 << 20);
    if (key == "window") return want_int(window, 1, 1 << 10);
    if (key == "batch_size") return want_int(batch_size, 1, 1 << 24);
    if (key == "d_r") return want_int(d_r, 1, 1 << 20);
    if (key == "beta") return want_double(beta, 0.0, false);
    if (key == "d_w") return want_int(d_w, 1, 1 << 20);
    if (key == "d_p") return want_int(d_p, 1, 1 << 20);
    if (key == "dropout_keep") {
        double v;
        if (!parse_double(value, v) || !(v > 0.0) || v > 1.0)
            return key + "=" + value + " (expected real in (0, 1])";
        dropout_keep = v;
        return "";
    }
    if (key == "epochs") return want_int(epochs, 1, 1 << 24);
    if (key == "min_count") return want_int(min_count, 0, 1 << 30);
    if (key == "pos_clip") return want_int(pos_clip, 0, 1 << 16);
    if (key == "max_len") return want_int(max_len, 1, 1 << 20);
    if (key == "path_cap") return want_int(path_cap, 0, 1 << 20);
    if (key == "hop_mode") {
        if (value != "greedy" && value != "exhaustive")
            return key + "=" + value + " (expected greedy or exhaustive)";
        hop_mode = value;
        return "";
    }
    if (key == "bag_mode") {
        if (value != "max" && value != "rand") return key + "=" + value + " (expected max or rand)";
        bag_mode = value;
        return "";
    }
    if (key == "seed") {
        unsigned long long v;
        const char* b = value.data();
        auto r = std::from_chars(b, b + value.size(), v);
        if (r.ec != std::errc{} || r.ptr != b + value.size())
            return key + "=" + value + " (expected unsigned integer)";
        seed = v;
        return "";
    }
    if (key == "threads") return want_int(threads, 1, 4096);
    if (key == "freeze_hop_confidence") {
        bool v;
        if (!parse_bool(value, v)) return key + "=" + value + " (expected boolean)";
        freeze_hop_confidence = v;
        return "";
    }
    if (key == "neg_ratio") return want_double(neg_ratio, 0.0, false);
    if (key == "split_train") return want_double(split_train, 0.0, true);
    if (key == "split_valid") return want_double(split_valid, 0.0, true);
    if (key == "split_test") return want_double(split_test, 0.0, true);
    return "unknown key: " + key;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    RunConfig cfg;
    std::vector<std::string> problems;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line.substr(0, line.find('#')));
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            problems.push_back("line " + std::to_string(line_no) + ": expected key=value");
            continue;
        }
        const std::string err = cfg.set(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
        if (!err.empty()) problems.push_back("line " + std::to_string(line_no) + ": " + err);
    }
    if (!problems.empty()) {
        std::string msg = "invalid config " + path + ":";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ConfigError(msg);
    }
    return cfg;
}

void RunConfig::apply(const std::vector<std::pair<std::string, std::string>>& overrides) {
    std::vector<std::string> problems;
    for (const auto& [key, value] : overrides) {
        const std::string err = set(key, value);
        if (!err.empty()) problems.push_back(err);
    }
    if (!problems.empty()) {
        std::string msg = "invalid overrides:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ConfigError(msg);
    }
}

void RunConfig::validate() const {
    std::vector<std::string> problems;
    if (std::abs(split_train + split_valid + split_test - 1.0) > 1e-9)
        problems.push_back("split ratios must sum to 1");
    if (!problems.empty()) {
        std::string msg = "invalid config:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ConfigError(msg);
    }
}

std::string RunConfig::dump() const {
    std::ostringstream out;
    out.precision(17);
    out << "bag_mode=" << bag_mode << '\n';
    out << "batch_size=" << batch_size << '\n';
    out << "beta=" << beta << '\n';
    out << "d_c=" << d_c << '\n';
    out << "d_p=" << d_p << '\n';
    out << "d_r=" << d_r << '\n';
    out << "d_w=" << d_w << '\n';
    out << "dropout_keep=" << dropout_keep << '\n';
    out << "epochs=" << epochs << '\n';
    out << "freeze_hop_confidence=" << (freeze_hop_confidence ? 1 : 0) << '\n';
    out << "hop_mode=" << hop_mode << '\n';
    out << "learning_rate=" << learning_rate << '\n';
    out << "max_len=" << max_len << '\n';
    out << "min_count=" << min_count << '\n';
    out << "neg_ratio=" << neg_ratio << '\n';
    out << "path_cap=" << path_cap << '\n';
    out << "pos_clip=" << pos_clip << '\n';
    out << "seed=" << seed << '\n';
    out << "split_test=" << split_test << '\n';
    out << "split_train=" << split_train << '\n';
    out << "split_valid=" << split_valid << '\n';
    out << "threads=" << threads << '\n';
    out << "window=" << window << '\n';
    return out.str();
}

}  // namespace pathrex
