#ifndef ACSCP_GRID_HPP
#define ACSCP_GRID_HPP

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace acscp {

/// Grid vertices are numbered 1..side_count^2.
using VertexId = int;

/// Square workspace [-w, w]^2 discretized into side_count x side_count
/// uniformly spaced points with 4-way adjacency. Vertex 1 is the bottom-left
/// corner; ids increase row-major (x varies fastest), so the top-right corner
/// carries the largest id.
class GridWorld {
public:
    GridWorld(double half_width, int side_count)
        : half_width_(half_width), side_(side_count) {
        if (side_count < 2)
            throw std::invalid_argument("GridWorld: side_count must be >= 2");
        if (!(half_width > 0.0))
            throw std::invalid_argument("GridWorld: half_width must be positive");
        spacing_ = 2.0 * half_width / static_cast<double>(side_count - 1);
        coords_.reserve(static_cast<std::size_t>(side_) * side_);
        for (int row = 0; row < side_; ++row)
            for (int col = 0; col < side_; ++col)
                coords_.emplace_back(-half_width + spacing_ * col,
                                     -half_width + spacing_ * row);
    }

    double half_width() const noexcept { return half_width_; }
    int side_count() const noexcept { return side_; }
    int num_vertices() const noexcept { return side_ * side_; }
    double spacing() const noexcept { return spacing_; }

    bool contains(VertexId v) const noexcept {
        return v >= 1 && v <= num_vertices();
    }

    const Eigen::Vector2d& coord(VertexId v) const {
        require_vertex(v);
        return coords_[static_cast<std::size_t>(v - 1)];
    }

    int row_of(VertexId v) const {
        require_vertex(v);
        return (v - 1) / side_;
    }
    int col_of(VertexId v) const {
        require_vertex(v);
        return (v - 1) % side_;
    }
    VertexId vertex_at(int row, int col) const {
        if (row < 0 || row >= side_ || col < 0 || col >= side_)
            throw std::invalid_argument("GridWorld: row/col out of range");
        return row * side_ + col + 1;
    }

    /// 4-way adjacent vertices, ascending id order (2, 3 or 4 of them).
    std::vector<VertexId> neighbors(VertexId v) const {
        require_vertex(v);
        const int row = (v - 1) / side_;
        const int col = (v - 1) % side_;
        std::vector<VertexId> out;
        out.reserve(4);
        if (row > 0) out.push_back(v - side_);
        if (col > 0) out.push_back(v - 1);
        if (col + 1 < side_) out.push_back(v + 1);
        if (row + 1 < side_) out.push_back(v + side_);
        return out;
    }

    bool adjacent(VertexId a, VertexId b) const {
        require_vertex(a);
        require_vertex(b);
        const int ra = (a - 1) / side_, ca = (a - 1) % side_;
        const int rb = (b - 1) / side_, cb = (b - 1) % side_;
        return std::abs(ra - rb) + std::abs(ca - cb) == 1;
    }

    /// Grid distance in edges.
    int manhattan(VertexId a, VertexId b) const {
        require_vertex(a);
        require_vertex(b);
        const int ra = (a - 1) / side_, ca = (a - 1) % side_;
        const int rb = (b - 1) / side_, cb = (b - 1) % side_;
        return std::abs(ra - rb) + std::abs(ca - cb);
    }

    VertexId nearest_vertex(const Eigen::Vector2d& x) const noexcept {
        auto clamp_index = [this](double value) {
            int i = static_cast<int>(std::lround((value + half_width_) / spacing_));
            if (i < 0) i = 0;
            if (i >= side_) i = side_ - 1;
            return i;
        };
        return clamp_index(x.y()) * side_ + clamp_index(x.x()) + 1;
    }

private:
    void require_vertex(VertexId v) const {
        if (!contains(v))
            throw std::invalid_argument("GridWorld: invalid vertex id " +
                                        std::to_string(v));
    }

    double half_width_;
    int side_;
    double spacing_;
    std::vector<Eigen::Vector2d> coords_;
};

/// A walk over grid vertices. Consecutive vertices must be 4-way adjacent;
/// revisits are permitted.
struct Path {
    std::vector<VertexId> vertices;

    Path() = default;
    explicit Path(std::vector<VertexId> v) : vertices(std::move(v)) {}

    /// Number of edges.
    int length() const noexcept {
        return vertices.empty() ? 0 : static_cast<int>(vertices.size()) - 1;
    }
    bool empty() const noexcept { return vertices.empty(); }
    VertexId front() const { return vertices.front(); }
    VertexId back() const { return vertices.back(); }
};

inline bool is_valid_path(const GridWorld& g, const Path& p) {
    if (p.vertices.size() < 2) return false;
    for (VertexId v : p.vertices)
        if (!g.contains(v)) return false;
    for (std::size_t i = 0; i + 1 < p.vertices.size(); ++i)
        if (!g.adjacent(p.vertices[i], p.vertices[i + 1])) return false;
    return true;
}

}  // namespace acscp

#endif  // ACSCP_GRID_HPP
