#include "qvh/hedging.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace qvh {

void HedgeReport::recompute() {
    std::vector<double> errs;
    std::size_t unstopped = 0;
    excursions = 0;
    for (auto& r : rows) {
        excursions += r.excursions;
        if (r.stopped)
            errs.push_back(r.error);
        else
            ++unstopped;
    }
    Stats s = summarize(errs);
    used = errs.size();
    mean_error = s.mean;
    se = s.se;
    rms = s.rms;
    max_abs = s.max_abs;
    mean_abs = 0;
    for (double e : errs) mean_abs += std::abs(e);
    if (!errs.empty()) mean_abs /= static_cast<double>(errs.size());
    fraction_unstopped = rows.empty() ? 0.0 : static_cast<double>(unstopped) / static_cast<double>(rows.size());
}

bool HedgeReport::consistent(double tol) const {
    HedgeReport c = *this;
    c.recompute();
    auto close = [&](double a, double b) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(a)); };
    return close(c.mean_error, mean_error) && close(c.se, se) && close(c.rms, rms) && close(c.max_abs, max_abs) &&
           close(c.mean_abs, mean_abs) && c.used == used && close(c.fraction_unstopped, fraction_unstopped);
}

void HedgeReport::write_csv(std::ostream& os) const {
    os << "path,stopped,hit_time,wealth,target,error,max_gap,excursions\n" << std::setprecision(17);
    for (auto& r : rows)
        os << r.path << ',' << r.stopped << ',' << r.hit_time << ',' << r.wealth << ',' << r.target << ',' << r.error
           << ',' << r.max_gap << ',' << r.excursions << '\n';
}

namespace {

Vec holdings(const Claim& c, const Vec& x) {
    if (!c.F.contains(x)) {
        std::ostringstream os;
        os << "hedge: state (" << x.transpose() << ") outside the domain of " << c.F.name;
        throw DomainError(os.str());
    }
    return c.spec->alpha(x).transpose() * c.F.grad(x);
}

bool outside(const Box& box, const Vec& x) {
    for (std::size_t i = 0; i < box.size(); ++i)
        if (x[i] < box[i].first || x[i] > box[i].second) return true;
    return false;
}

double safe_value(const Claim& c, const Vec& x, bool& ok) {
    ok = c.F.contains(x);
    if (!ok) return 0.0;
    try {
        return c.F.value(x);
    } catch (const DomainError&) {
        ok = false;
        return 0.0;
    }
}

}  // namespace

HedgeTrace hedge_path(const Claim& claim, const PathSet& paths, bool keep_wealth) {
    TrackedPath tp = track(claim.spec, paths);
    HedgeTrace tr;
    tr.hit = hitting(tp, claim.B);
    const std::size_t K = tp.size();
    const std::size_t last = tr.hit ? tr.hit->index : K - 1;
    double W = claim.F.value(tp.x(0));
    if (keep_wealth) tr.wealth.assign(K, 0.0);
    if (keep_wealth) tr.wealth[0] = W;
    HedgeRow& row = tr.row;
    for (std::size_t k = 0; k < K; ++k)
        if (k <= last && !claim.box.empty() && outside(claim.box, tp.X.col(k))) ++row.excursions;
    for (std::size_t k = 0; k < last; ++k) {
        Vec x = tp.x(k);
        Vec h = holdings(claim, x);
        bool at_hit = tr.hit && k + 1 == last;
        Vec da = (at_hit ? tr.hit->a : tp.a(k + 1)) - tp.a(k);
        W += h.dot(da);
        if (keep_wealth) tr.wealth[k + 1] = W;
        Vec xn = at_hit ? tr.hit->x : tp.x(k + 1);
        bool ok;
        double f = safe_value(claim, xn, ok);
        if (ok) row.max_gap = std::max(row.max_gap, std::abs(W - f));
    }
    if (keep_wealth)
        for (std::size_t k = last + 1; k < K; ++k) tr.wealth[k] = W;
    row.wealth = W;
    row.stopped = tr.hit.has_value();
    if (tr.hit) {
        const std::size_t i = tr.hit->index;
        row.hit_time = i == 0 ? 0.0 : tp.grid.times[i - 1] + tr.hit->phi * (tp.grid.times[i] - tp.grid.times[i - 1]);
        row.target = claim.pay(tr.hit->x);
    } else {
        bool ok;
        row.target = safe_value(claim, tp.x(K - 1), ok);
    }
    row.error = row.wealth - row.target;
    return tr;
}

HedgeTrace cashflow_path(const Claim& claim, const PathSet& paths, bool keep_wealth) {
    TrackedPath tp = track(claim.spec, paths);
    HedgeTrace tr;
    tr.hit = hitting(tp, claim.B);
    const auto& t = tp.grid.times;
    const std::size_t K = tp.size();
    const double T = t.back();
    const std::size_t last = tr.hit ? tr.hit->index : K - 1;
    double f_prev = claim.F.value(tp.x(0));
    double W = T * f_prev, target = 0;
    if (keep_wealth) tr.wealth.assign(K, 0.0);
    if (keep_wealth) tr.wealth[0] = W;
    HedgeRow& row = tr.row;
    double t_stop = T;
    for (std::size_t k = 0; k < last; ++k) {
        Vec x = tp.x(k);
        bool at_hit = tr.hit && k + 1 == last;
        double t1 = at_hit ? t[k] + tr.hit->phi * (t[k + 1] - t[k]) : t[k + 1];
        Vec xn = at_hit ? tr.hit->x : tp.x(k + 1);
        Vec da = (at_hit ? tr.hit->a : tp.a(k + 1)) - tp.a(k);
        W += (T - 0.5 * (t[k] + t1)) * holdings(claim, x).dot(da);
        double f = claim.F.value(xn);
        target += 0.5 * (f_prev + f) * (t1 - t[k]);
        f_prev = f;
        t_stop = t1;
        if (keep_wealth) tr.wealth[k + 1] = W;
    }
    if (tr.hit && tr.hit->index == 0) t_stop = 0;
    // after the hit F(X^B) is frozen and the holdings vanish
    target += f_prev * (T - t_stop);
    if (keep_wealth)
        for (std::size_t k = last + 1; k < K; ++k) tr.wealth[k] = W;
    row.stopped = true;
    row.hit_time = tr.hit ? t_stop : -1;
    row.wealth = W;
    row.target = target;
    row.error = W - target;
    return tr;
}

namespace {
HedgeReport run(const PathSource& src, const std::function<HedgeTrace(const PathSet&)>& one) {
    HedgeReport rep;
    rep.rows.resize(src.count);
    parallel_for(src.count, [&](std::size_t i) {
        PathSet p = src.get(i);
        HedgeTrace tr = one(p);
        tr.row.path = i;
        rep.rows[i] = tr.row;
    });
    rep.recompute();
    return rep;
}
}  // namespace

HedgeReport backtest(const Claim& claim, const PathSource& paths) {
    return run(paths, [&](const PathSet& p) { return hedge_path(claim, p); });
}

HedgeReport cashflow_backtest(const Claim& claim, const PathSource& paths) {
    return run(paths, [&](const PathSet& p) { return cashflow_path(claim, p); });
}

SweepReport sweep(const Claim& claim, const std::vector<ModelSpec>& models, const TimeGrid& grid, std::size_t n_paths,
                  std::uint64_t seed) {
    SweepReport s;
    for (auto& m : models) {
        try {
            HedgeReport r = backtest(claim, PathSource::of(m, grid, n_paths, seed));
            r.model = m.name();
            s.reports.push_back(std::move(r));
        } catch (const std::exception& e) {
            s.failures.push_back(m.name() + ": " + e.what());
        }
    }
    return s;
}

void SweepReport::write_csv(std::ostream& os) const {
    os << "model,paths_used,mean_error,se,t_stat,rms,max_abs,fraction_unstopped\n" << std::setprecision(17);
    for (auto& r : reports)
        os << '"' << r.model << "\"," << r.used << ',' << r.mean_error << ',' << r.se << ',' << r.t_stat() << ','
           << r.rms << ',' << r.max_abs << ',' << r.fraction_unstopped << '\n';
}

DriftReport drift_test(const ScalarField& F, const model::Spliced& spliced, const TimeGrid& grid, std::size_t n_paths,
                       std::uint64_t seed) {
    ModelSpec(spliced).validate();
    const auto& spec = spliced.spec;
    std::vector<double> inc(n_paths, 0.0);
    std::vector<char> used(n_paths, 0);
    parallel_for(n_paths, [&](std::size_t i) {
        PathSet p = splice(spliced, grid, stream_seed(seed, i));
        if (p.unspliced || p.splice_end <= p.splice_begin) return;
        TrackedPath tp = track(spec, p);
        double y = 0;
        for (long k = p.splice_begin; k < p.splice_end; ++k) {
            Vec x = tp.x(k), xn = tp.x(k + 1);
            Vec h = spec->alpha(x).transpose() * F.grad(x);
            y += F.value(xn) - F.value(x) - h.dot(tp.a(k + 1) - tp.a(k));
        }
        inc[i] = y;
        used[i] = 1;
    });
    DriftReport r;
    r.paths = n_paths;
    for (std::size_t i = 0; i < n_paths; ++i)
        if (used[i]) r.increments.push_back(inc[i]);
    r.windows = r.increments.size();
    r.trigger_frequency = n_paths ? static_cast<double>(r.windows) / static_cast<double>(n_paths) : 0.0;
    if (r.windows < 2) {
        r.inconclusive = true;
        return r;
    }
    Stats s = summarize(r.increments);
    r.mean = s.mean;
    r.se = s.se;
    r.t = s.se > 0 ? s.mean / s.se : 0.0;
    return r;
}

Mat suggest_cov(const ScalarField& F, const FunctionalSpec& spec, const Vec& x, double scale) {
    auto o = operators(F, spec, x);
    const Eigen::Index d = o.l_ab.rows();
    Eigen::Index bi = 0, bj = 0;
    o.l_ab.cwiseAbs().maxCoeff(&bi, &bj);
    Mat S = 1e-2 * scale * Mat::Identity(d, d);
    if (bi == bj) {
        S(bi, bi) = scale;
    } else {
        // off-diagonal amplification: strongly correlated pair with the sign of the entry
        double sgn = o.l_ab(bi, bj) >= 0 ? 1.0 : -1.0;
        S(bi, bi) = S(bj, bj) = scale;
        S(bi, bj) = S(bj, bi) = 0.9 * sgn * scale;
    }
    return S;
}

}  // namespace qvh
