#include "qvh/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace qvh {

namespace {
template <class... Ts> struct overloaded : Ts... { using Ts::operator()...; };
template <class... Ts> overloaded(Ts...) -> overloaded<Ts...>;

bool is_direct(const Component& c) {
    return std::holds_alternative<comp::Asset>(c) || std::holds_alternative<comp::Time>(c) ||
           std::holds_alternative<comp::TimeValue>(c);
}

std::string default_name(const Component& c, std::size_t i) {
    return std::visit(overloaded{
                          [](const comp::Asset& a) { return a.label; },
                          [](const comp::Time&) { return std::string("t"); },
                          [&](const comp::TimeIntegral&) { return "I" + std::to_string(i); },
                          [&](const comp::WeightedQV&) { return "Q" + std::to_string(i); },
                          [&](const comp::CrossVar&) { return "L" + std::to_string(i); },
                          [](const comp::TimeValue&) { return std::string("V"); },
                          [&](const comp::RunningMax&) { return "M" + std::to_string(i); },
                          [&](const comp::RunningMin&) { return "m" + std::to_string(i); },
                          [&](const comp::DrawdownSq&) { return "D" + std::to_string(i); },
                      },
                      c);
}
}  // namespace

FunctionalSpec::FunctionalSpec(std::vector<std::string> assets, std::vector<Component> comps,
                               std::vector<std::string> names)
    : assets_(std::move(assets)), comps_(std::move(comps)), names_(std::move(names)) {
    if (names_.empty())
        for (std::size_t i = 0; i < comps_.size(); ++i) names_.push_back(default_name(comps_[i], i));
    validate();
}

int FunctionalSpec::asset_index(const std::string& label) const {
    auto it = std::find(assets_.begin(), assets_.end(), label);
    return it == assets_.end() ? -1 : static_cast<int>(it - assets_.begin());
}

void FunctionalSpec::validate() {
    if (names_.size() != comps_.size()) throw SpecError("functional spec: one name per component required");
    asset_of_.assign(comps_.size(), -1);
    int n = static_cast<int>(comps_.size());
    auto need_direct = [&](int of, const char* what) {
        if (of < 0 || of >= n) throw SpecError(std::string(what) + ": component index out of range");
        if (!is_direct(comps_[of]))
            throw SpecError(std::string(what) + ": must refer to an asset, time or time-value component");
    };
    for (int i = 0; i < n; ++i) {
        std::visit(overloaded{
                       [&](const comp::Asset& a) {
                           asset_of_[i] = asset_index(a.label);
                           if (asset_of_[i] < 0) throw SpecError("unknown asset label '" + a.label + "'");
                       },
                       [](const comp::Time&) {},
                       [&](const comp::TimeIntegral& c) { need_direct(c.of, "time integral"); },
                       [&](const comp::WeightedQV& c) { need_direct(c.of, "weighted quadratic variation"); },
                       [&](const comp::CrossVar& c) {
                           need_direct(c.a, "cross variation");
                           need_direct(c.b, "cross variation");
                       },
                       [&](const comp::TimeValue& c) {
                           if (asset_index(c.asset) < 0 || asset_index(c.claim) < 0)
                               throw SpecError("time value: unknown asset or claim label");
                       },
                       [&](const comp::RunningMax& c) { need_direct(c.of, "running max"); },
                       [&](const comp::RunningMin& c) { need_direct(c.of, "running min"); },
                       [&](const comp::DrawdownSq& c) { need_direct(c.of, "drawdown"); },
                   },
                   comps_[i]);
    }
    // weights read the state vector: their coordinate must exist
    for (auto& c : comps_) {
        if (auto* q = std::get_if<comp::WeightedQV>(&c))
            if (q->w.of < 0 || q->w.of >= n) throw SpecError("weight coordinate out of range");
        if (auto* q = std::get_if<comp::CrossVar>(&c))
            if (q->w.of < 0 || q->w.of >= n) throw SpecError("weight coordinate out of range");
    }
}

bool FunctionalSpec::in_class(std::size_t i) const {
    return !std::holds_alternative<comp::RunningMax>(comps_[i]) && !std::holds_alternative<comp::RunningMin>(comps_[i]);
}

bool FunctionalSpec::monotone(std::size_t i) const {
    return std::holds_alternative<comp::Time>(comps_[i]) || std::holds_alternative<comp::WeightedQV>(comps_[i]);
}

int FunctionalSpec::source(std::size_t i) const {
    return std::visit(overloaded{
                          [](const comp::TimeIntegral& c) { return c.of; },
                          [](const comp::WeightedQV& c) { return c.of; },
                          [](const comp::RunningMax& c) { return c.of; },
                          [](const comp::RunningMin& c) { return c.of; },
                          [](const comp::DrawdownSq& c) { return c.of; },
                          [](const auto&) { return -1; },
                      },
                      comps_[i]);
}

Coefficients<double> FunctionalSpec::coefficients(const Vec& x) const {
    const int n = static_cast<int>(comps_.size()), d = static_cast<int>(assets_.size());
    Coefficients<double> c;
    c.alpha = Mat::Zero(n, d);
    c.beta.assign(n, Mat::Zero(d, d));
    c.gamma = Vec::Zero(n);
    // direct components first: their alpha feeds the derived ones
    for (int i = 0; i < n; ++i) {
        if (std::holds_alternative<comp::Asset>(comps_[i])) {
            c.alpha(i, asset_of_[i]) = 1.0;
        } else if (std::holds_alternative<comp::Time>(comps_[i])) {
            c.gamma[i] = 1.0;
        } else if (auto* v = std::get_if<comp::TimeValue>(&comps_[i])) {
            int js = asset_index(v->asset), jc = asset_index(v->claim);
            // price of S is read from the Asset component carrying it
            double s = std::numeric_limits<double>::quiet_NaN();
            for (int k = 0; k < n; ++k)
                if (asset_of_[k] == js) s = x[k];
            if (std::isnan(s)) throw SpecError("time value needs the asset '" + v->asset + "' as a component");
            c.alpha(i, js) = -v->g.d1(s);
            c.alpha(i, jc) = 1.0;
            c.beta[i](js, js) = -0.5 * v->g.d2(s);
        }
    }
    for (int i = 0; i < n; ++i) {
        std::visit(overloaded{
                       [&](const comp::TimeIntegral& q) { c.gamma[i] = x[q.of]; },
                       [&](const comp::WeightedQV& q) {
                           Vec al = c.alpha.row(q.of).transpose();
                           c.beta[i] = q.w(x) * (al * al.transpose());
                       },
                       [&](const comp::CrossVar& q) {
                           Vec aa = c.alpha.row(q.a).transpose(), ab = c.alpha.row(q.b).transpose();
                           c.beta[i] = (0.5 * q.w(x)) * (aa * ab.transpose() + ab * aa.transpose());
                       },
                       [&](const comp::DrawdownSq& q) {
                           Vec al = c.alpha.row(q.of).transpose();
                           double r = std::sqrt(std::max(x[i], 0.0));
                           c.alpha.row(i) = (q.max_based ? -2.0 * r : 2.0 * r) * al.transpose();
                           c.beta[i] = al * al.transpose();
                       },
                       [](const auto&) {},
                   },
                   comps_[i]);
    }
    return c;
}

Mat FunctionalSpec::alpha(const Vec& x) const {
    const int n = static_cast<int>(comps_.size()), d = static_cast<int>(assets_.size());
    Mat al = Mat::Zero(n, d);
    for (int i = 0; i < n; ++i) {
        if (std::holds_alternative<comp::Asset>(comps_[i])) {
            al(i, asset_of_[i]) = 1.0;
        } else if (auto* v = std::get_if<comp::TimeValue>(&comps_[i])) {
            int js = asset_index(v->asset);
            double s = std::numeric_limits<double>::quiet_NaN();
            for (int k = 0; k < n; ++k)
                if (asset_of_[k] == js) s = x[k];
            if (std::isnan(s)) throw SpecError("time value needs the asset '" + v->asset + "' as a component");
            al(i, js) = -v->g.d1(s);
            al(i, asset_index(v->claim)) = 1.0;
        }
    }
    for (int i = 0; i < n; ++i)
        if (auto* q = std::get_if<comp::DrawdownSq>(&comps_[i])) {
            double r = std::sqrt(std::max(x[i], 0.0));
            al.row(i) = (q->max_based ? -2.0 * r : 2.0 * r) * al.row(q->of);
        }
    return al;
}

// ---------------------------------------------------------------------------------------------

StoppingSet StoppingSet::always() {
    StoppingSet b;
    b.kind_ = Kind::Always;
    return b;
}
StoppingSet StoppingSet::never() {
    StoppingSet b;
    b.kind_ = Kind::Never;
    return b;
}
StoppingSet StoppingSet::level(int index, double value, bool up) {
    StoppingSet b;
    b.kind_ = Kind::LevelSet;
    b.index_ = index;
    b.a_ = value;
    b.up_ = up;
    return b;
}
StoppingSet StoppingSet::corridor_exit(int index, double l, double u) {
    if (!(l < u)) throw ParameterError("corridor exit needs l < u");
    StoppingSet b;
    b.kind_ = Kind::CorridorExit;
    b.index_ = index;
    b.a_ = l;
    b.b_ = u;
    return b;
}
StoppingSet StoppingSet::unite(std::vector<StoppingSet> parts) {
    StoppingSet b;
    b.kind_ = Kind::Union;
    b.parts_ = std::move(parts);
    return b;
}

double StoppingSet::signed_gap(const Vec& x) const {
    switch (kind_) {
        case Kind::Always: return 0.0;
        case Kind::Never: return -std::numeric_limits<double>::infinity();
        case Kind::LevelSet: return up_ ? x[index_] - a_ : a_ - x[index_];
        case Kind::CorridorExit: return std::max(a_ - x[index_], x[index_] - b_);
        case Kind::Union: {
            double g = -std::numeric_limits<double>::infinity();
            for (auto& p : parts_) g = std::max(g, p.signed_gap(x));
            return g;
        }
    }
    return 0.0;
}

bool StoppingSet::monotone_driven(const FunctionalSpec& spec) const {
    switch (kind_) {
        case Kind::LevelSet: return up_ && index_ >= 0 && spec.monotone(index_);
        case Kind::Union:
            return std::all_of(parts_.begin(), parts_.end(), [&](auto& p) { return p.monotone_driven(spec); });
        default: return false;
    }
}

void StoppingSet::snap(Vec& x) const {
    if (kind_ == Kind::LevelSet && contains(x)) x[index_] = a_;
    if (kind_ == Kind::Union)
        for (auto& p : parts_)
            if (p.kind_ == Kind::LevelSet && p.contains(x)) p.snap(x);
}

std::string StoppingSet::describe() const {
    std::ostringstream os;
    switch (kind_) {
        case Kind::Always: os << "always"; break;
        case Kind::Never: os << "never"; break;
        case Kind::LevelSet: os << "{x" << index_ + 1 << (up_ ? " >= " : " <= ") << a_ << "}"; break;
        case Kind::CorridorExit: os << "{x" << index_ + 1 << " outside (" << a_ << ", " << b_ << ")}"; break;
        case Kind::Union: {
            os << "union(";
            for (std::size_t i = 0; i < parts_.size(); ++i) os << (i ? ", " : "") << parts_[i].describe();
            os << ")";
        }
    }
    return os.str();
}

// ---------------------------------------------------------------------------------------------

Tracker::Tracker(std::shared_ptr<const FunctionalSpec> spec) : spec_(std::move(spec)) {
    for (std::size_t i = 0; i < spec_->n(); ++i)
        (is_direct(spec_->components()[i]) ? direct_ : derived_).push_back(static_cast<int>(i));
}

void Tracker::direct(const Vec& a, double t, Vec& x) const {
    const auto& comps = spec_->components();
    for (int i : direct_) {
        std::visit(overloaded{
                       [&](const comp::Asset& c) { x[i] = a[spec_->asset_index(c.label)]; },
                       [&](const comp::Time&) { x[i] = t; },
                       [&](const comp::TimeValue& c) {
                           x[i] = a[spec_->asset_index(c.claim)] - c.g(a[spec_->asset_index(c.asset)]);
                       },
                       [](const auto&) {},
                   },
                   comps[i]);
    }
}

Tracker::State Tracker::start(const Vec& a0, double t0) const {
    const auto n = static_cast<Eigen::Index>(spec_->n());
    if (a0.size() != static_cast<Eigen::Index>(spec_->d())) throw AlignmentError("tracker: traded vector has wrong size");
    State s;
    s.x = Vec::Zero(n);
    s.a = a0;
    s.t = t0;
    direct(a0, t0, s.x);
    s.hmax = s.x;
    s.hmin = s.x;
    const auto& comps = spec_->components();
    for (int i : derived_) {
        if (auto* m = std::get_if<comp::RunningMax>(&comps[i])) s.x[i] = s.x[m->of];
        if (auto* m = std::get_if<comp::RunningMin>(&comps[i])) s.x[i] = s.x[m->of];
    }
    return s;
}

void Tracker::step(const State& s, const Vec& a1, double t1, double phi, State& out) const {
    const auto& comps = spec_->components();
    out.a = s.a + phi * (a1 - s.a);
    out.t = s.t + phi * (t1 - s.t);
    out.x.resize(s.x.size());
    direct(out.a, out.t, out.x);
    out.hmax = s.hmax.cwiseMax(out.x);
    out.hmin = s.hmin.cwiseMin(out.x);
    const double dt = out.t - s.t;
    for (int i : derived_) {
        std::visit(overloaded{
                       [&](const comp::TimeIntegral& c) { out.x[i] = s.x[i] + s.x[c.of] * dt; },
                       [&](const comp::WeightedQV& c) {
                           double dx = out.x[c.of] - s.x[c.of];
                           out.x[i] = s.x[i] + c.w(s.x) * dx * dx;
                       },
                       [&](const comp::CrossVar& c) {
                           out.x[i] = s.x[i] + c.w(s.x) * (out.x[c.a] - s.x[c.a]) * (out.x[c.b] - s.x[c.b]);
                       },
                       [&](const comp::RunningMax& c) { out.x[i] = out.hmax[c.of]; },
                       [&](const comp::RunningMin& c) { out.x[i] = out.hmin[c.of]; },
                       [&](const comp::DrawdownSq& c) {
                           double g = c.max_based ? out.hmax[c.of] - out.x[c.of] : out.x[c.of] - out.hmin[c.of];
                           out.x[i] = g * g;
                       },
                       [](const auto&) {},
                   },
                   comps[i]);
    }
}

Tracker::State Tracker::step(const State& s, const Vec& a1, double t1, double phi) const {
    State out;
    step(s, a1, t1, phi, out);
    return out;
}

Tracker::State TrackedPath::state(std::size_t k) const {
    Tracker::State s;
    s.x = X.col(k);
    s.a = A.col(k);
    s.hmax = HM.col(k);
    s.hmin = Hm.col(k);
    s.t = grid.times[k];
    return s;
}

std::vector<double> quadratic_covariation(const Path& a, const Path& b, const std::function<double(double)>& weight) {
    if (a.values.size() != b.values.size() || a.grid.times != b.grid.times)
        throw AlignmentError("quadratic covariation: paths are not on a shared grid");
    std::vector<double> out(a.values.size(), 0.0);
    for (std::size_t k = 1; k < out.size(); ++k) {
        double w = weight ? weight(a.values[k - 1]) : 1.0;
        out[k] = out[k - 1] + w * (a.values[k] - a.values[k - 1]) * (b.values[k] - b.values[k - 1]);
    }
    return out;
}

TrackedPath track(std::shared_ptr<const FunctionalSpec> spec, const PathSet& paths) {
    std::vector<int> cols;
    for (auto& l : spec->assets()) {
        int c = paths.index_of(l);
        if (c < 0) throw SpecError("missing component label '" + l + "'");
        cols.push_back(c);
    }
    Tracker tr(spec);
    const std::size_t K = paths.grid.size(), n = spec->n(), d = spec->d();
    TrackedPath tp;
    tp.grid = paths.grid;
    tp.spec = spec;
    tp.X.resize(n, K);
    tp.A.resize(d, K);
    tp.HM.resize(n, K);
    tp.Hm.resize(n, K);
    Vec a(d);
    for (std::size_t j = 0; j < d; ++j) a[j] = paths.values[cols[j]][0];
    Tracker::State s = tr.start(a, paths.grid.times[0]), nx;
    auto store = [&](std::size_t k, const Tracker::State& st) {
        tp.X.col(k) = st.x;
        tp.A.col(k) = st.a;
        tp.HM.col(k) = st.hmax;
        tp.Hm.col(k) = st.hmin;
    };
    store(0, s);
    for (std::size_t k = 1; k < K; ++k) {
        for (std::size_t j = 0; j < d; ++j) a[j] = paths.values[cols[j]][k];
        tr.step(s, a, paths.grid.times[k], 1.0, nx);
        std::swap(s, nx);
        store(k, s);
    }
    return tp;
}

std::optional<HitResult> hitting(const TrackedPath& tracked, const StoppingSet& B) {
    const std::size_t K = tracked.size();
    std::size_t k = 0;
    while (k < K && !B.contains(tracked.X.col(k))) ++k;
    if (k == K) return std::nullopt;
    HitResult h;
    h.index = k;
    h.x = tracked.x(k);
    h.a = tracked.a(k);
    if (k == 0) return h;

    // refine only when every part of B that fired is driven by a nondecreasing clock
    bool refine = false;
    if (B.kind() == StoppingSet::Kind::Union) {
        refine = true;
        bool any = false;
        for (auto& p : B.parts())
            if (p.contains(h.x)) {
                any = true;
                refine = refine && p.monotone_driven(*tracked.spec);
            }
        refine = refine && any;
    } else {
        refine = B.monotone_driven(*tracked.spec);
    }
    if (!refine) return h;

    Tracker tr(tracked.spec);
    Tracker::State s0 = tracked.state(k - 1), mid;
    const Vec a1 = tracked.a(k);
    const double t1 = tracked.grid.times[k];
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 60 && hi - lo > 1e-15; ++it) {
        double m = 0.5 * (lo + hi);
        tr.step(s0, a1, t1, m, mid);
        (B.contains(mid.x) ? hi : lo) = m;
    }
    tr.step(s0, a1, t1, hi, mid);
    h.phi = hi;
    h.x = mid.x;
    h.a = mid.a;
    B.snap(h.x);
    return h;
}

}  // namespace qvh
