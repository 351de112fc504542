#include "plap/grid.hpp"

#include "plap/exponents.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace plap {

Grid::Grid(Geometry geometry, double L, int M, int N)
    : geometry_(geometry), L_(L), M_(M), N_(N) {
    if (!(L > 0.0) || !std::isfinite(L)) throw DomainError("grid half-width L must be positive");
    if (M < 8) throw DomainError("grid needs M >= 8");
    if (N < 1) throw DomainError("N must be >= 1");
    if (geometry == Geometry::Line && N != 1) throw DomainError("line geometry is one-dimensional");
    h_ = L / M;

    if (geometry == Geometry::Line) {
        const std::size_t n = 2 * static_cast<std::size_t>(M) + 1;
        x_.resize(n);
        for (std::size_t i = 0; i < n; ++i) x_[i] = -L + static_cast<double>(i) * h_;
        x_[M] = 0.0;
        x_.back() = L;
        volume_.assign(n, h_);
        volume_.front() = volume_.back() = 0.5 * h_;
        face_area_.assign(n - 1, 1.0);
        omega_ = 1.0;
    } else {
        const std::size_t n = static_cast<std::size_t>(M) + 1;
        x_.resize(n);
        for (std::size_t i = 0; i < n; ++i) x_[i] = static_cast<double>(i) * h_;
        x_.back() = L;
        const double dN = N;
        auto prim = [&](double r) { return std::pow(r, dN) / dN; };
        volume_.resize(n);
        face_area_.resize(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double rf = (static_cast<double>(i) + 0.5) * h_;
            face_area_[i] = std::pow(rf, dN - 1.0);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double lo = i == 0 ? 0.0 : (static_cast<double>(i) - 0.5) * h_;
            const double hi = i + 1 == n ? L : (static_cast<double>(i) + 0.5) * h_;
            volume_[i] = prim(hi) - prim(lo);
        }
        omega_ = 2.0 * std::pow(std::numbers::pi, dN / 2.0) / std::tgamma(dN / 2.0);
    }
    weights_.resize(volume_.size());
    for (std::size_t i = 0; i < volume_.size(); ++i) weights_[i] = omega_ * volume_[i];
}

GridPtr make_grid(Geometry geometry, double L, int M, int N) {
    return std::make_shared<const Grid>(geometry, L, M, N);
}

Field::Field(GridPtr g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
    if (!grid) throw DomainError("field without grid");
    if (values.size() != grid->size()) throw DomainError("field size does not match grid");
}

Field::Field(GridPtr g, double fill) : grid(std::move(g)) {
    if (!grid) throw DomainError("field without grid");
    values.assign(grid->size(), fill);
}

double a_eps(double xi, double p, double eps) { return std::pow(xi + eps * eps, 0.5 * (p - 2.0)); }

double b_eps(double xi, double q, double eps) {
    // (xi+e^2)^{q/2} - e^q = e^q * expm1((q/2) log1p(xi/e^2))
    const double e2 = eps * eps;
    if (e2 == 0.0) return std::pow(xi, 0.5 * q);
    return std::pow(eps, q) * std::expm1(0.5 * q * std::log1p(xi / e2));
}

std::vector<double> face_differences(const Field& u) {
    const double h = u.grid->h();
    const auto& v = u.values;
    std::vector<double> d(v.size() - 1);
    for (std::size_t i = 0; i + 1 < v.size(); ++i) d[i] = (v[i + 1] - v[i]) / h;
    return d;
}

std::vector<double> gradient_magnitude(const Field& u) {
    const double h = u.grid->h();
    const auto& v = u.values;
    const std::size_t n = v.size();
    std::vector<double> g(n);
    for (std::size_t i = 1; i + 1 < n; ++i) g[i] = std::abs(v[i + 1] - v[i - 1]) / (2.0 * h);
    g[n - 1] = std::abs(v[n - 1] - v[n - 2]) / h;
    g[0] = u.grid->geometry() == Geometry::Radial ? 0.0 : std::abs(v[1] - v[0]) / h;
    return g;
}

std::vector<double> face_averaged_grad_sq(const Field& u) {
    const auto d = face_differences(u);
    const std::size_t n = u.values.size();
    std::vector<double> g2(n);
    g2[0] = d[0] * d[0];
    g2[n - 1] = d[n - 2] * d[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) g2[i] = 0.5 * (d[i - 1] * d[i - 1] + d[i] * d[i]);
    return g2;
}

std::vector<double> upwind_grad_sq(const Field& u) {
    const auto d = face_differences(u);
    const std::size_t n = u.values.size();
    std::vector<double> g2(n);
    for (std::size_t i = 0; i < n; ++i) {
        // mirrored ghosts at both ends
        const double back = i > 0 ? d[i - 1] : -d[0];
        const double fwd = i + 1 < n ? d[i] : -d[n - 2];
        const double m = std::max({back, -fwd, 0.0});
        g2[i] = m * m;
    }
    return g2;
}

Field p_laplacian_reg(const Field& u, double p, double eps) {
    const auto d = face_differences(u);
    const auto area = u.grid->face_area();
    const auto vol = u.grid->volume();
    std::vector<double> flux(d.size());
    for (std::size_t j = 0; j < d.size(); ++j) flux[j] = area[j] * a_eps(d[j] * d[j], p, eps) * d[j];
    Field out(u.grid, 0.0);
    const std::size_t n = u.values.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double right = i + 1 < n ? flux[i] : 0.0;
        const double left = i > 0 ? flux[i - 1] : 0.0;
        out.values[i] = (right - left) / vol[i];
    }
    return out;
}

Field hamilton_term_reg(const Field& u, double q, double eps) {
    const auto g2 = face_averaged_grad_sq(u);
    Field out(u.grid, 0.0);
    for (std::size_t i = 0; i < g2.size(); ++i) out.values[i] = b_eps(g2[i], q, eps);
    return out;
}

}  // namespace plap
