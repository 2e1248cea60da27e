#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "fracholtz/errors.hpp"

namespace fracholtz {

using Index = Eigen::Index;
using Complex = std::complex<double>;
using Point = std::array<double, 2>;

// ---------------------------------------------------------------------------
// Region descriptions
// ---------------------------------------------------------------------------

/// Open axis-aligned box lo < x < hi (componentwise).
struct Rect {
    std::vector<double> lo;
    std::vector<double> hi;
};

/// Open ball |x - center| < radius.
struct Disc {
    std::vector<double> center;
    double radius = 0.0;
};

using Shape = std::variant<Rect, Disc>;

/// Union of open shapes. Membership uses strict inequalities with a tolerance
/// proportional to the grid spacing so that nodes lying on a boundary are
/// consistently classified as outside.
struct Region {
    std::vector<Shape> shapes;

    Region() = default;
    Region(std::initializer_list<Shape> s) : shapes(s) {}
    explicit Region(std::vector<Shape> s) : shapes(std::move(s)) {}

    [[nodiscard]] bool empty() const { return shapes.empty(); }

    [[nodiscard]] bool contains(const Point& x, int dim, double tol) const {
        for (const auto& shape : shapes) {
            if (std::visit([&](const auto& sh) { return inside(sh, x, dim, tol); }, shape)) return true;
        }
        return false;
    }

private:
    static bool inside(const Rect& r, const Point& x, int dim, double tol) {
        for (int k = 0; k < dim; ++k) {
            if (!(x[k] > r.lo[k] + tol && x[k] < r.hi[k] - tol)) return false;
        }
        return true;
    }
    static bool inside(const Disc& d, const Point& x, int dim, double tol) {
        double r2 = 0.0;
        for (int k = 0; k < dim; ++k) r2 += (x[k] - d.center[k]) * (x[k] - d.center[k]);
        return std::sqrt(r2) < d.radius - tol;
    }
};

inline void validate_shape_dims(const Region& region, int dim, const std::string& name) {
    for (const auto& shape : region.shapes) {
        if (const auto* r = std::get_if<Rect>(&shape)) {
            if (static_cast<int>(r->lo.size()) != dim || static_cast<int>(r->hi.size()) != dim)
                throw GeometryError(name + ": rectangle bounds must have " + std::to_string(dim) + " entries");
            for (int k = 0; k < dim; ++k)
                if (!(r->lo[k] < r->hi[k])) throw GeometryError(name + ": rectangle with lo >= hi");
        } else {
            const auto& d = std::get<Disc>(shape);
            if (static_cast<int>(d.center.size()) != dim)
                throw GeometryError(name + ": disc center must have " + std::to_string(dim) + " entries");
            if (!(d.radius > 0.0)) throw GeometryError(name + ": disc radius must be positive");
        }
    }
}

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

enum class Partition { Omega, Exterior };

struct NodeClass {
    Partition partition = Partition::Exterior;
    bool o1 = false;
    bool o2 = false;
};

/// Uniform tensor grid on the box [-L, L]^dim with the Ω / Ω_e / O1 / O2
/// node partition. Values outside the box are implicitly zero.
///
/// Nodes are ordered lexicographically: in 2D node (i, j) has index
/// i * n_per_axis + j with x = -L + i h, y = -L + j h.
class Grid {
public:
    [[nodiscard]] int dim() const { return dim_; }
    [[nodiscard]] double box_halfwidth() const { return box_halfwidth_; }
    [[nodiscard]] double spacing() const { return h_; }
    [[nodiscard]] Index per_axis() const { return per_axis_; }
    [[nodiscard]] Index size() const { return static_cast<Index>(nodes_.size()); }
    [[nodiscard]] const Point& node(Index i) const { return nodes_[static_cast<std::size_t>(i)]; }
    [[nodiscard]] const std::vector<Point>& nodes() const { return nodes_; }

    /// Quadrature weight h^dim attached to every node.
    [[nodiscard]] double cell_volume() const { return std::pow(h_, dim_); }

    [[nodiscard]] const std::vector<bool>& omega_mask() const { return omega_mask_; }
    [[nodiscard]] const std::vector<bool>& exterior_mask() const { return exterior_mask_; }
    [[nodiscard]] const std::vector<bool>& o1_mask() const { return o1_mask_; }
    [[nodiscard]] const std::vector<bool>& o2_mask() const { return o2_mask_; }

    [[nodiscard]] const std::vector<Index>& omega_nodes() const { return omega_nodes_; }
    [[nodiscard]] const std::vector<Index>& exterior_nodes() const { return exterior_nodes_; }
    [[nodiscard]] const std::vector<Index>& o1_nodes() const { return o1_nodes_; }
    [[nodiscard]] const std::vector<Index>& o2_nodes() const { return o2_nodes_; }

    [[nodiscard]] const Region& omega_spec() const { return omega_spec_; }
    [[nodiscard]] const Region& o1_spec() const { return o1_spec_; }
    [[nodiscard]] const Region& o2_spec() const { return o2_spec_; }

    [[nodiscard]] double distance(Index i, Index j) const {
        const auto& a = node(i);
        const auto& b = node(j);
        double r2 = 0.0;
        for (int k = 0; k < dim_; ++k) r2 += (a[k] - b[k]) * (a[k] - b[k]);
        return std::sqrt(r2);
    }

    /// Distance from node i to the nearest face of the box.
    [[nodiscard]] double distance_to_box(Index i) const {
        double d = std::numeric_limits<double>::infinity();
        for (int k = 0; k < dim_; ++k) d = std::min(d, box_halfwidth_ - std::abs(node(i)[k]));
        return d;
    }

    /// Position of node i inside omega_nodes(), or -1 for exterior nodes.
    [[nodiscard]] Index omega_position(Index i) const { return omega_pos_[static_cast<std::size_t>(i)]; }

    friend Grid build_grid(int dim, double box_halfwidth, double h, const Region& omega, const Region& o1,
                           const Region& o2);

private:
    Grid() = default;

    int dim_ = 1;
    double box_halfwidth_ = 0.0;
    double h_ = 0.0;
    Index per_axis_ = 0;
    std::vector<Point> nodes_;
    std::vector<bool> omega_mask_, exterior_mask_, o1_mask_, o2_mask_;
    std::vector<Index> omega_nodes_, exterior_nodes_, o1_nodes_, o2_nodes_;
    std::vector<Index> omega_pos_;
    Region omega_spec_, o1_spec_, o2_spec_;
};

using GridPtr = std::shared_ptr<const Grid>;

/// Builds the uniform grid and its node partition.
///
/// Throws GeometryError when h or the box are invalid, when an Ω node lies
/// closer than 2h to the box boundary, when Ω has no nodes, when O1 or O2
/// contain no exterior node, or when O1/O2 cover an Ω node.
inline Grid build_grid(int dim, double box_halfwidth, double h, const Region& omega, const Region& o1,
                       const Region& o2) {
    if (dim != 1 && dim != 2) throw GeometryError("dim must be 1 or 2");
    if (!(h > 0.0)) throw GeometryError("spacing h must be positive");
    if (!(box_halfwidth > 0.0)) throw GeometryError("box_halfwidth must be positive");
    const double cells = 2.0 * box_halfwidth / h;
    const double rounded = std::round(cells);
    if (std::abs(cells - rounded) > 1e-8 * std::max(1.0, cells))
        throw GeometryError("2*box_halfwidth/h must be an integer");
    validate_shape_dims(omega, dim, "omega");
    validate_shape_dims(o1, dim, "o1");
    validate_shape_dims(o2, dim, "o2");
    if (omega.empty()) throw GeometryError("omega region is empty");

    Grid g;
    g.dim_ = dim;
    g.box_halfwidth_ = box_halfwidth;
    g.h_ = h;
    g.per_axis_ = static_cast<Index>(rounded) + 1;
    g.omega_spec_ = omega;
    g.o1_spec_ = o1;
    g.o2_spec_ = o2;

    const Index m = g.per_axis_;
    const Index total = dim == 1 ? m : m * m;
    g.nodes_.reserve(static_cast<std::size_t>(total));
    for (Index i = 0; i < m; ++i) {
        const double x = -box_halfwidth + static_cast<double>(i) * h;
        if (dim == 1) {
            g.nodes_.push_back({x, 0.0});
        } else {
            for (Index j = 0; j < m; ++j) g.nodes_.push_back({x, -box_halfwidth + static_cast<double>(j) * h});
        }
    }

    const double tol = 1e-9 * h;
    const auto n = static_cast<std::size_t>(total);
    g.omega_mask_.assign(n, false);
    g.exterior_mask_.assign(n, false);
    g.o1_mask_.assign(n, false);
    g.o2_mask_.assign(n, false);
    g.omega_pos_.assign(n, -1);
    for (Index i = 0; i < total; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const Point& x = g.nodes_[k];
        if (omega.contains(x, dim, tol)) {
            if (g.distance_to_box(i) < 2.0 * h - tol)
                throw GeometryError("omega region touches the box boundary (needs a margin of 2h)");
            if (o1.contains(x, dim, tol) || o2.contains(x, dim, tol))
                throw GeometryError("measurement sets O1/O2 must lie outside omega");
            g.omega_mask_[k] = true;
            g.omega_pos_[k] = static_cast<Index>(g.omega_nodes_.size());
            g.omega_nodes_.push_back(i);
        } else {
            g.exterior_mask_[k] = true;
            g.exterior_nodes_.push_back(i);
            if (o1.contains(x, dim, tol)) {
                g.o1_mask_[k] = true;
                g.o1_nodes_.push_back(i);
            }
            if (o2.contains(x, dim, tol)) {
                g.o2_mask_[k] = true;
                g.o2_nodes_.push_back(i);
            }
        }
    }
    if (g.omega_nodes_.empty()) throw GeometryError("omega region contains no grid node");
    if (g.o1_nodes_.empty()) throw GeometryError("O1 contains no exterior grid node");
    if (g.o2_nodes_.empty()) throw GeometryError("O2 contains no exterior grid node");
    return g;
}

inline GridPtr make_grid(int dim, double box_halfwidth, double h, const Region& omega, const Region& o1,
                         const Region& o2) {
    return std::make_shared<const Grid>(build_grid(dim, box_halfwidth, h, omega, o1, o2));
}

inline NodeClass classify_node(const Grid& grid, Index index) {
    if (index < 0 || index >= grid.size()) throw std::out_of_range("node index out of range");
    const auto k = static_cast<std::size_t>(index);
    NodeClass c;
    c.partition = grid.omega_mask()[k] ? Partition::Omega : Partition::Exterior;
    c.o1 = grid.o1_mask()[k];
    c.o2 = grid.o2_mask()[k];
    return c;
}

// ---------------------------------------------------------------------------
// Grid functions
// ---------------------------------------------------------------------------

/// Complex nodal values over every node of a grid.
class GridFunction {
public:
    GridFunction(GridPtr grid, Eigen::VectorXcd values) : grid_(std::move(grid)), values_(std::move(values)) {
        if (!grid_) throw ContractError("grid function requires a grid");
        if (values_.size() != grid_->size()) throw ContractError("grid function length must equal node count");
    }

    static GridFunction zeros(GridPtr grid) {
        const Index n = grid->size();
        return GridFunction(std::move(grid), Eigen::VectorXcd::Zero(n));
    }

    /// Places interior values (ordered as grid.omega_nodes()) on Ω, zero elsewhere.
    static GridFunction from_interior(GridPtr grid, const Eigen::VectorXcd& interior) {
        const auto& idx = grid->omega_nodes();
        if (interior.size() != static_cast<Index>(idx.size()))
            throw ContractError("interior vector length must equal the omega node count");
        Eigen::VectorXcd v = Eigen::VectorXcd::Zero(grid->size());
        for (std::size_t k = 0; k < idx.size(); ++k) v(idx[k]) = interior(static_cast<Index>(k));
        return GridFunction(std::move(grid), std::move(v));
    }

    [[nodiscard]] const Grid& grid() const { return *grid_; }
    [[nodiscard]] const GridPtr& grid_ptr() const { return grid_; }
    [[nodiscard]] const Eigen::VectorXcd& values() const { return values_; }
    [[nodiscard]] Complex operator()(Index i) const { return values_(i); }

    [[nodiscard]] Eigen::VectorXcd restrict_to(const std::vector<Index>& nodes) const {
        Eigen::VectorXcd out(static_cast<Index>(nodes.size()));
        for (std::size_t k = 0; k < nodes.size(); ++k) out(static_cast<Index>(k)) = values_(nodes[k]);
        return out;
    }
    [[nodiscard]] Eigen::VectorXcd interior() const { return restrict_to(grid_->omega_nodes()); }

    [[nodiscard]] bool is_exterior_supported() const {
        for (Index i : grid_->omega_nodes())
            if (values_(i) != Complex(0.0)) return false;
        return true;
    }
    [[nodiscard]] bool is_interior_supported() const {
        for (Index i : grid_->exterior_nodes())
            if (values_(i) != Complex(0.0)) return false;
        return true;
    }

private:
    GridPtr grid_;
    Eigen::VectorXcd values_;
};

// Index-vector helpers shared by the solver modules.
namespace detail {

inline Eigen::MatrixXd submatrix(const Eigen::MatrixXd& a, const std::vector<Index>& rows,
                                 const std::vector<Index>& cols) {
    Eigen::MatrixXd out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c)
        for (std::size_t r = 0; r < rows.size(); ++r)
            out(static_cast<Index>(r), static_cast<Index>(c)) = a(rows[r], cols[c]);
    return out;
}

template <typename Vec>
Vec gather(const Vec& v, const std::vector<Index>& idx) {
    Vec out(static_cast<Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) out(static_cast<Index>(k)) = v(idx[k]);
    return out;
}

}  // namespace detail

}  // namespace fracholtz
