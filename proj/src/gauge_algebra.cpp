#include "ga/gauge_algebra.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ga {

namespace {

constexpr double kBreakpointTol = 1e-12;

double binomial(unsigned n, unsigned k) {
    double v = 1.0;
    for (unsigned i = 0; i < k; ++i) v = v * static_cast<double>(n - i) / static_cast<double>(i + 1);
    return v;
}

} // namespace

Poly Poly::operator+(const Poly& o) const {
    Poly r;
    r.c.resize(std::max(c.size(), o.c.size()), 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) r.c[i] += c[i];
    for (std::size_t i = 0; i < o.c.size(); ++i) r.c[i] += o.c[i];
    return r;
}

Poly Poly::operator*(const Poly& o) const {
    if (c.empty() || o.c.empty()) return {};
    Poly r;
    r.c.assign(c.size() + o.c.size() - 1, 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) {
        for (std::size_t j = 0; j < o.c.size(); ++j) r.c[i + j] += c[i] * o.c[j];
    }
    return r;
}

Poly Poly::scaled(double s) const {
    Poly r = *this;
    for (double& v : r.c) v *= s;
    return r;
}

Poly Poly::antiderivative() const {
    Poly r;
    r.c.assign(c.size() + 1, 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) r.c[i + 1] = c[i] / static_cast<double>(i + 1);
    return r;
}

Poly Poly::composed_linear(double a, double b) const {
    // P(a + b t) = sum_i c_i sum_k binom(i,k) a^(i-k) b^k t^k
    Poly r;
    if (c.empty()) return r;
    r.c.assign(c.size(), 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) {
        double apow = 1.0;
        std::vector<double> a_powers(i + 1);
        for (std::size_t k = 0; k <= i; ++k) {
            a_powers[i - k] = apow;
            apow *= a;
        }
        double bpow = 1.0;
        for (std::size_t k = 0; k <= i; ++k) {
            r.c[k] += c[i] * binomial(static_cast<unsigned>(i), static_cast<unsigned>(k)) *
                      a_powers[k] * bpow;
            bpow *= b;
        }
    }
    return r;
}

PiecewiseDensity::PiecewiseDensity(std::vector<DensitySegment> segments) {
    std::sort(segments.begin(), segments.end(),
              [](const DensitySegment& a, const DensitySegment& b) { return a.lo < b.lo; });
    for (const auto& s : segments) {
        if (s.lo < -kBreakpointTol) {
            throw Error(ErrorCode::config_invalid, "density support must lie in [0, inf)");
        }
        if (!(s.hi > s.lo)) {
            throw Error(ErrorCode::config_invalid, "empty density segment");
        }
    }
    for (std::size_t i = 1; i < segments.size(); ++i) {
        if (segments[i].lo < segments[i - 1].hi - kBreakpointTol) {
            throw Error(ErrorCode::config_invalid, "overlapping density segments");
        }
    }
    segments_ = std::move(segments);
}

double PiecewiseDensity::value_at(double t) const {
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        const auto& s = segments_[i];
        const bool last = i + 1 == segments_.size();
        if (t >= s.lo && (t < s.hi || (last && t <= s.hi))) return s.poly.eval(t);
    }
    return 0.0;
}

double PiecewiseDensity::integral() const {
    double total = 0.0;
    for (const auto& s : segments_) {
        const Poly f = s.poly.antiderivative();
        total += f.eval(s.hi) - f.eval(s.lo);
    }
    return total;
}

CashflowIntensity CashflowIntensity::dirac(double location, double weight) {
    if (location < 0.0) {
        throw Error(ErrorCode::config_invalid, "atom location must be >= 0");
    }
    CashflowIntensity out;
    out.atoms.emplace_back(location, weight);
    return out;
}

CashflowIntensity CashflowIntensity::piecewise(const std::vector<double>& breakpoints,
                                               const std::vector<double>& values) {
    if (breakpoints.size() < 2) {
        throw Error(ErrorCode::config_invalid, "density needs at least 2 breakpoints");
    }
    std::vector<DensitySegment> segs;
    if (values.size() + 1 == breakpoints.size()) {
        for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
            segs.push_back({breakpoints[i], breakpoints[i + 1], Poly{{values[i]}}});
        }
    } else if (values.size() == breakpoints.size()) {
        for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
            const double x0 = breakpoints[i], x1 = breakpoints[i + 1];
            const double slope = (values[i + 1] - values[i]) / (x1 - x0);
            segs.push_back({x0, x1, Poly{{values[i] - slope * x0, slope}}});
        }
    } else {
        throw Error(ErrorCode::config_invalid,
                    "density values must have breakpoints or breakpoints-1 entries");
    }
    CashflowIntensity out;
    out.density = PiecewiseDensity(std::move(segs));
    return out;
}

double CashflowIntensity::support_end() const {
    double h = density.support_end();
    for (const auto& [loc, w] : atoms) h = std::max(h, loc);
    return h;
}

void CashflowIntensity::validate() const {
    for (const auto& [loc, w] : atoms) {
        if (loc < 0.0) throw Error(ErrorCode::config_invalid, "atom location < 0");
        (void)w;
    }
}

namespace {

// Exact convolution of two polynomial segments. Returns contributions
// (interval, poly in t) on [alo+blo, ahi+bhi], kinked where an integration
// limit switches branch.
void convolve_segments(const DensitySegment& a, const DensitySegment& b,
                       std::vector<DensitySegment>& out) {
    // integrand in h: a.poly(h) * b.poly(t - h); collect as coefficients of
    // h^m, each a polynomial in t.
    const std::size_t db = b.poly.c.size();
    std::vector<Poly> h_coeff;  // h_coeff[m] = poly in t
    for (std::size_t j = 0; j < db; ++j) {
        // (t - h)^j expanded in h with poly-in-t coefficients
        for (std::size_t m = 0; m <= j; ++m) {
            const double sign = (m % 2 == 0) ? 1.0 : -1.0;
            Poly tpow;  // binom(j,m) t^(j-m)
            tpow.c.assign(j - m + 1, 0.0);
            tpow.c[j - m] = binomial(static_cast<unsigned>(j), static_cast<unsigned>(m)) * sign *
                            b.poly.c[j];
            if (h_coeff.size() <= m) h_coeff.resize(m + 1);
            h_coeff[m] = h_coeff[m] + tpow;
        }
    }
    // multiply by a.poly(h)
    std::vector<Poly> f(h_coeff.size() + a.poly.c.size());
    for (std::size_t k = 0; k < a.poly.c.size(); ++k) {
        for (std::size_t m = 0; m < h_coeff.size(); ++m) {
            f[k + m] = f[k + m] + h_coeff[m].scaled(a.poly.c[k]);
        }
    }
    // antiderivative in h: G[m+1] = f[m]/(m+1)
    std::vector<Poly> g(f.size() + 1);
    for (std::size_t m = 0; m < f.size(); ++m) g[m + 1] = f[m].scaled(1.0 / static_cast<double>(m + 1));

    const auto eval_at_limit = [&g](double alpha, double beta) {
        // G(alpha + beta t) as a poly in t, limits are linear in t
        Poly lim{{alpha, beta}};
        Poly acc;
        Poly lim_pow{{1.0}};
        for (std::size_t m = 0; m < g.size(); ++m) {
            acc = acc + (g[m] * lim_pow);
            lim_pow = lim_pow * lim;
        }
        return acc;
    };

    double kinks[4] = {a.lo + b.lo, a.lo + b.hi, a.hi + b.lo, a.hi + b.hi};
    std::sort(kinks, kinks + 4);
    for (int i = 0; i < 3; ++i) {
        const double lo = kinks[i], hi = kinks[i + 1];
        if (hi - lo <= kBreakpointTol) continue;
        const double tm = 0.5 * (lo + hi);
        // lower limit: max(a.lo, t - b.hi); upper: min(a.hi, t - b.lo)
        const bool lower_const = a.lo >= tm - b.hi;
        const bool upper_const = a.hi <= tm - b.lo;
        const Poly upper = upper_const ? eval_at_limit(a.hi, 0.0) : eval_at_limit(-b.lo, 1.0);
        const Poly lower = lower_const ? eval_at_limit(a.lo, 0.0) : eval_at_limit(-b.hi, 1.0);
        out.push_back({lo, hi, upper + lower.scaled(-1.0)});
    }
}

PiecewiseDensity flatten_contributions(const std::vector<DensitySegment>& contribs) {
    if (contribs.empty()) return {};
    std::vector<double> points;
    points.reserve(contribs.size() * 2);
    for (const auto& s : contribs) {
        points.push_back(s.lo);
        points.push_back(s.hi);
    }
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end(),
                             [](double x, double y) { return std::abs(x - y) < kBreakpointTol; }),
                 points.end());
    std::vector<DensitySegment> flat;
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
        const double lo = points[i], hi = points[i + 1];
        const double tm = 0.5 * (lo + hi);
        Poly sum;
        for (const auto& s : contribs) {
            if (s.lo - kBreakpointTol <= tm && tm <= s.hi + kBreakpointTol && tm >= s.lo &&
                tm < s.hi) {
                sum = sum + s.poly;
            }
        }
        if (!sum.c.empty()) flat.push_back({lo, hi, sum});
    }
    return PiecewiseDensity(std::move(flat));
}

} // namespace

CashflowIntensity convolve(const CashflowIntensity& a, const CashflowIntensity& b) {
    a.validate();
    b.validate();
    CashflowIntensity out;
    for (const auto& [ha, wa] : a.atoms) {
        for (const auto& [hb, wb] : b.atoms) out.atoms.emplace_back(ha + hb, wa * wb);
    }
    std::sort(out.atoms.begin(), out.atoms.end());

    std::vector<DensitySegment> contribs;
    const auto shift_density = [&contribs](const PiecewiseDensity& d, double shift, double weight) {
        for (const auto& s : d.segments()) {
            contribs.push_back(
                {s.lo + shift, s.hi + shift, s.poly.composed_linear(-shift, 1.0).scaled(weight)});
        }
    };
    for (const auto& [ha, wa] : a.atoms) shift_density(b.density, ha, wa);
    for (const auto& [hb, wb] : b.atoms) shift_density(a.density, hb, wb);
    for (const auto& sa : a.density.segments()) {
        for (const auto& sb : b.density.segments()) convolve_segments(sa, sb, contribs);
    }
    out.density = flatten_contributions(contribs);
    return out;
}

namespace {

// int_lo^hi poly(h) * P[t, u + h] dh with P linear in the offset between
// stored nodes, integrated exactly cell by cell.
double integrate_against_surface(const Poly& poly, double lo, double hi,
                                 const MaturitySurface& surface, std::size_t t, double u) {
    std::vector<double> cuts;
    cuts.push_back(lo);
    for (double off : surface.offsets) {
        const double h = off - u;
        if (h > lo + kBreakpointTol && h < hi - kBreakpointTol) cuts.push_back(h);
    }
    cuts.push_back(hi);
    std::sort(cuts.begin(), cuts.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double c0 = cuts[i], c1 = cuts[i + 1];
        if (c1 - c0 <= kBreakpointTol) continue;
        const double p0 = surface.at(t, u + c0);
        const double p1 = surface.at(t, u + c1);
        const double slope = (p1 - p0) / (c1 - c0);
        const Poly lin{{p0 - slope * c0, slope}};
        const Poly f = (poly * lin).antiderivative();
        total += f.eval(c1) - f.eval(c0);
    }
    return total;
}

double intensity_integral(const CashflowIntensity& pi, const MaturitySurface& surface,
                          std::size_t t, double u) {
    double total = 0.0;
    for (const auto& [h, w] : pi.atoms) total += w * surface.at(t, u + h);
    for (const auto& s : pi.density.segments()) {
        total += integrate_against_surface(s.poly, s.lo, s.hi, surface, t, u);
    }
    return total;
}

} // namespace

Gauge apply_gauge_transform(const Gauge& gauge, const CashflowIntensity& intensity) {
    intensity.validate();
    const auto& ts = gauge.term_structure;
    if (ts.empty()) {
        throw Error(ErrorCode::config_invalid, "gauge transform needs a term structure");
    }
    const double support = intensity.support_end();
    if (support > ts.offsets.back() + kBreakpointTol) {
        throw Error(ErrorCode::maturity_out_of_range,
                    "intensity support exceeds stored maturity range");
    }

    Gauge out;
    out.deflator.resize(gauge.deflator.size());
    // keep the offsets u with u + support inside the stored range
    for (double u : ts.offsets) {
        if (u + support <= ts.offsets.back() + kBreakpointTol) {
            out.term_structure.offsets.push_back(u);
        }
    }
    out.term_structure.n_times = ts.n_times;
    out.term_structure.values.resize(ts.n_times * out.term_structure.offsets.size());

    for (std::size_t t = 0; t < ts.n_times; ++t) {
        const double denom = intensity_integral(intensity, ts, t, 0.0);
        if (std::abs(denom) < 1e-12) {
            throw Error(ErrorCode::transform_singular,
                        "transform denominator ~ 0 at time index " + std::to_string(t));
        }
        out.deflator[t] = gauge.deflator[t] * denom;
        for (std::size_t k = 0; k < out.term_structure.offsets.size(); ++k) {
            const double u = out.term_structure.offsets[k];
            out.term_structure.at_node(t, k) =
                (k == 0) ? 1.0 : intensity_integral(intensity, ts, t, u) / denom;
        }
    }
    return out;
}

MarketScenario numeraire_transform(const MarketScenario& scenario,
                                   std::span<const double> x_num) {
    if (x_num.size() != scenario.n_assets()) {
        throw Error(ErrorCode::dimension_mismatch, "numeraire nominal size != asset count");
    }
    std::vector<double> num_deflator(scenario.n_times());
    for (std::size_t t = 0; t < scenario.n_times(); ++t) {
        double v = 0.0;
        for (std::size_t j = 0; j < x_num.size(); ++j) {
            v += x_num[j] * scenario.assets[j].deflator[t];
        }
        if (!(v > 0.0)) {
            throw Error(ErrorCode::numeraire_not_positive,
                        "numeraire deflator <= 0 at time index " + std::to_string(t));
        }
        num_deflator[t] = v;
    }
    MarketScenario out = scenario;
    for (auto& asset : out.assets) {
        for (std::size_t t = 0; t < num_deflator.size(); ++t) asset.deflator[t] /= num_deflator[t];
    }
    return out;
}

} // namespace ga
