#pragma once

#include "qvh/pde.hpp"

#include <optional>

namespace qvh {

enum class Family { TVS, MFIV, MFVV, MFIL };
std::string to_string(Family f);
Family family_from_string(const std::string& s);

struct Ingredients {
    Fn1 g = Fn1::neglog();
    Fn1 w_s = Fn1::power(-2.0);  // weight of Q^s
    Fn1 w_v = Fn1::constant(1.0);  // weight of Q^v
    Fn1 w_l = Fn1::power(-1.0);  // weight of L
    std::optional<ScalarField> F_h;  // homogeneous part added to MFIV
    double kappa = 0.5;   // MFIV: q-term kappa g''/w_s ; MFIL: G-term coefficient
    double s_ref = 1.0;   // normalisation point of G
};

// Closed forms with analytic derivatives. TVS lives on (t, v, s); the other families on the
// five coordinates (s, v, q_s, q_v, l).
ScalarField family(Family tag, const std::vector<double>& c, const Ingredients& ing = {});

// X = (S, V, Q^s, Q^v, L) over A = (S, C) with V = C - g(S).
std::shared_ptr<const FunctionalSpec> five_component_spec(const Ingredients& ing);
// X = (t, int S dt, S) over A = (S).
std::shared_ptr<const FunctionalSpec> tvs_spec();

struct AdjudicationReport {
    struct Variant {
        std::string label;
        double coefficient = 0;
        bool stated = false;
        double residual = 0;
        Vec worst_point;
    };
    Family tag = Family::MFVV;
    std::vector<Variant> variants;
    int selected = -1;
    bool discrepancy = false;  // the stated variant fails (> 1e-3)
    const Variant& chosen() const { return variants.at(selected); }
};

AdjudicationReport adjudicate(Family tag, const Ingredients& ing, const Box& box, std::size_t samples = 256);
Box default_box(Family tag);

// G with G'' = x g''(x), G(s_ref) = G'(s_ref) = 0.
Fn1 g_double_primitive(const Fn1& g, double s_ref);

enum class Extremum { Max, Min };
// Discrete Azema-Yor identity residual. Without a slope function: D - <S> + 2 sum sqrt(D) dS
// (max) or D - <S> - 2 sum sqrt(D) dS (min). With slope h: h(M)(M - S) - (H(M) - H(S_0)) + sum h(M) dS.
std::vector<double> azema_yor_residual(const Path& path, Extremum variant = Extremum::Max,
                                       const std::optional<Fn1>& slope = std::nullopt);

enum class Direction { MaxToDrawdown, DrawdownToMax };
// MaxToDrawdown: F^D(s, d, q) = F^M(s, s + sqrt d, q). DrawdownToMax: F^M(s, m, q) = F^D(s, (m - s)^2, q).
ScalarField change_coordinates(const ScalarField& F, Direction dir);

}  // namespace qvh
