#pragma once

#include <memory>
#include <span>
#include <vector>

namespace plap {

enum class Geometry { Line, Radial };

/// Uniform grid. Line covers [-L, L] with 2M+1 nodes; Radial(N) covers
/// [0, L] with M+1 nodes and a zero-flux origin. Outer boundaries are
/// zero-flux (Neumann).
class Grid {
public:
    Grid(Geometry geometry, double L, int M, int N = 1);

    Geometry geometry() const { return geometry_; }
    double L() const { return L_; }
    int M() const { return M_; }
    int N() const { return N_; }
    double h() const { return h_; }
    std::size_t size() const { return x_.size(); }

    std::span<const double> x() const { return x_; }
    /// Control volume of node i without the sphere-area factor.
    std::span<const double> volume() const { return volume_; }
    /// r^{N-1} at face i+1/2 (1 on the line); size() - 1 entries.
    std::span<const double> face_area() const { return face_area_; }
    /// Surface area of the unit sphere in R^N for radial grids, 1 on the line.
    double measure_factor() const { return omega_; }
    /// Quadrature weights: measure_factor() * volume().
    std::span<const double> weights() const { return weights_; }

    bool operator==(const Grid& o) const {
        return geometry_ == o.geometry_ && L_ == o.L_ && M_ == o.M_ && N_ == o.N_;
    }

private:
    Geometry geometry_;
    double L_;
    int M_;
    int N_;
    double h_;
    double omega_;
    std::vector<double> x_, volume_, face_area_, weights_;
};

using GridPtr = std::shared_ptr<const Grid>;

GridPtr make_grid(Geometry geometry, double L, int M, int N = 1);

struct Field {
    GridPtr grid;
    std::vector<double> values;

    Field() = default;
    Field(GridPtr g, std::vector<double> v);
    explicit Field(GridPtr g, double fill = 0.0);

    std::size_t size() const { return values.size(); }
};

/// a_eps(xi) = (xi + eps^2)^{(p-2)/2}.
double a_eps(double xi, double p, double eps);
/// b_eps(xi) = (xi + eps^2)^{q/2} - eps^q, computed without cancellation.
double b_eps(double xi, double q, double eps);

/// (u_{i+1} - u_i) / h for each face.
std::vector<double> face_differences(const Field& u);

/// Centered differences inside, one-sided at the outer ends, 0 at the radial origin.
std::vector<double> gradient_magnitude(const Field& u);

/// Mean of the squared adjacent face differences; a boundary node mirrors its
/// single face. This is the gradient the solver feeds to b_eps.
std::vector<double> face_averaged_grad_sq(const Field& u);

/// Monotone upwind choice max(D-, -D+, 0)^2: zero at a discrete minimum,
/// one-sided on monotone stretches.
std::vector<double> upwind_grad_sq(const Field& u);

/// Flux-form divergence of a_eps(D^2) D with zero flux at the boundaries.
Field p_laplacian_reg(const Field& u, double p, double eps);

/// Nodewise b_eps(|grad u|^2) with the face-averaged gradient.
Field hamilton_term_reg(const Field& u, double q, double eps);

}  // namespace plap
