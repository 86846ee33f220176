#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vanishcost/common.hpp"

namespace vanishcost::geometry {

enum class DomainKind { interval, rectangle, disk };

// The spatial domain Omega. Intervals and rectangles can carry a PDE mesh;
// disks are accepted by flow/flushing analysis only.
struct Domain {
    DomainKind kind = DomainKind::interval;
    int dim = 1;
    std::array<double, 3> lo{}, hi{};  // interval / rectangle
    Pt center;                         // disk
    double radius = 0.0;

    static Domain interval(double a, double b);
    static Domain rectangle(double ax, double bx, double ay, double by);
    static Domain disk(double cx, double cy, double r);

    double measure() const;
    bool contains(const Pt& p) const;
    // Axis-aligned box containing the closure (the disk's bounding square).
    void bounding_box(std::array<double, 3>& blo, std::array<double, 3>& bhi) const;
    // Evenly spaced points on the boundary, `per_face` per face or circle,
    // paired with the outward unit normal there.
    std::vector<std::pair<Pt, Pt>> boundary_samples(int per_face = 64) const;
};

// A finite union of axis-aligned boxes and balls: the control regions
// omega, omega', omega0 and the flushing target O.
struct Region {
    struct Part {
        bool is_ball = false;
        std::array<double, 3> lo{}, hi{};
        Pt center;
        double radius = 0.0;
    };
    int dim = 1;
    std::vector<Part> parts;

    static Region interval(double a, double b);
    static Region box2(double ax, double bx, double ay, double by);
    static Region ball(const Pt& c, double r);
    Region& add_part(const Part& p);

    bool contains_closure(const Pt& p) const;
    bool contains_open(const Pt& p) const;
    double distance(const Pt& p) const;  // Euclidean distance to the closure
    double inradius() const;             // largest of the parts' inradii
    double measure() const;              // may overcount if parts overlap
};

Region shrink_region(const Region& region, double margin);

// Uniform tensor-product cell grid over an interval or rectangle.
struct Grid {
    int dim = 1;
    std::array<int, 2> n{1, 1};
    std::array<double, 2> lo{}, hi{}, h{};

    int cell_count() const { return dim == 1 ? n[0] : n[0] * n[1]; }
    double cell_volume() const { return dim == 1 ? h[0] : h[0] * h[1]; }
    int index(int i, int j = 0) const { return j * n[0] + i; }
    Pt cell_center(int idx) const;
    double domain_measure() const;

    struct BoundaryFace {
        int cell;     // owning cell index
        int axis;     // normal axis
        int side;     // -1 low face, +1 high face
        Pt center;    // face midpoint
        double area;  // 1 in 1-D, edge length in 2-D
        Pt normal() const {
            Pt nn = Pt::zero(2);
            nn.dim = center.dim;
            nn[axis] = side;
            return nn;
        }
    };
    std::vector<BoundaryFace> boundary_faces() const;

    // Fraction of the cell's volume lying inside the region. Exact for
    // axis-aligned boxes and 1-D balls; midpoint-subsampled (16x16) for
    // 2-D balls.
    double cell_fraction(int idx, const Region& region) const;
};

Grid build_grid(const Domain& domain, const std::array<int, 2>& resolution);

}  // namespace vanishcost::geometry
