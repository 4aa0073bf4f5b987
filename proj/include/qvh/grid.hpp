#pragma once

#include "qvh/core.hpp"

#include <map>
#include <string>
#include <vector>

namespace qvh {

struct TimeGrid {
    std::vector<double> times;

    static TimeGrid uniform(double T, std::size_t steps);
    static TimeGrid from(std::vector<double> times);  // validates

    std::size_t size() const { return times.size(); }
    std::size_t steps() const { return times.empty() ? 0 : times.size() - 1; }
    double horizon() const { return times.back(); }
    double max_step() const;
    void validate() const;
};

struct Path {
    TimeGrid grid;
    std::vector<double> values;
};

struct PathSet {
    TimeGrid grid;
    std::vector<std::string> labels;             // traded vector A, in order
    std::vector<std::vector<double>> values;     // values[c][k]
    std::map<std::string, std::vector<double>> aux;  // non-traded state (e.g. Heston variance)
    std::uint64_t seed = 0;
    bool unspliced = false;
    long splice_begin = -1, splice_end = -1;

    std::size_t dim() const { return labels.size(); }
    int index_of(const std::string& label) const;  // -1 if absent
    const std::vector<double>& at(const std::string& label) const;
    Path path(const std::string& label) const { return {grid, at(label)}; }
    Vec state(std::size_t k) const;  // A at grid index k
};

}  // namespace qvh
