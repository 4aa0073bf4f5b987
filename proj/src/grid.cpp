#include "qvh/grid.hpp"

#include <algorithm>

namespace qvh {

TimeGrid TimeGrid::uniform(double T, std::size_t steps) {
    if (!(T > 0) || steps == 0) throw ParameterError("time grid needs T > 0 and at least one step");
    TimeGrid g;
    g.times.resize(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) g.times[k] = T * static_cast<double>(k) / static_cast<double>(steps);
    g.times.back() = T;
    return g;
}

TimeGrid TimeGrid::from(std::vector<double> times) {
    TimeGrid g{std::move(times)};
    g.validate();
    return g;
}

void TimeGrid::validate() const {
    if (times.size() < 2) throw ParameterError("time grid needs at least two points");
    if (times.front() != 0.0) throw ParameterError("time grid must start at exactly 0");
    for (std::size_t k = 1; k < times.size(); ++k)
        if (!(times[k] > times[k - 1])) throw ParameterError("time grid must be strictly increasing");
}

double TimeGrid::max_step() const {
    double m = 0;
    for (std::size_t k = 1; k < times.size(); ++k) m = std::max(m, times[k] - times[k - 1]);
    return m;
}

int PathSet::index_of(const std::string& label) const {
    auto it = std::find(labels.begin(), labels.end(), label);
    return it == labels.end() ? -1 : static_cast<int>(it - labels.begin());
}

const std::vector<double>& PathSet::at(const std::string& label) const {
    int i = index_of(label);
    if (i < 0) throw SpecError("path set has no component '" + label + "'");
    return values[i];
}

Vec PathSet::state(std::size_t k) const {
    Vec a(labels.size());
    for (std::size_t c = 0; c < labels.size(); ++c) a[c] = values[c][k];
    return a;
}

}  // namespace qvh
