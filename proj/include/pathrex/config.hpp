#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pathrex/errors.hpp"

namespace pathrex {

// All knobs in one flat bag, loadable from a key=value file with flag
// overrides on top. Defaults are the grid-searched operating point plus the
// artifact's own choices (pos_clip, max_len, path_cap, modes, seed).
struct RunConfig {
    double learning_rate = 0.01;
    int d_c = 230;
    int window = 3;
    int batch_size = 160;
    int d_r = 40;
    double beta = 0.5;
    int d_w = 50;
    int d_p = 5;
    double dropout_keep = 0.5;
    int epochs = 25;
    int min_count = 100;
    int pos_clip = 30;
    int max_len = 120;
    int path_cap = 8;
    std::string hop_mode = "greedy";  // greedy | exhaustive
    std::string bag_mode = "max";     // max | rand
    std::uint64_t seed = 42;
    int threads = 1;
    bool freeze_hop_confidence = false;
    double neg_ratio = 1.0;
    double split_train = 0.6;
    double split_valid = 0.2;
    double split_test = 0.2;

    // nullopt-style: empty string means accepted, otherwise the complaint
    std::string set(const std::string& key, const std::string& value);

    // Collects every bad key before throwing ConfigError.
    static RunConfig from_file(const std::string& path);
    void apply(const std::vector<std::pair<std::string, std::string>>& overrides);

    void validate() const;
    std::string dump() const;
};

}  // namespace pathrex
