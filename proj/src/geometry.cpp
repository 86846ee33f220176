#include "vanishcost/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace vanishcost::geometry {

Domain Domain::interval(double a, double b) {
    require(a < b, ErrorCode::config_error, "interval: lower bound must be < upper bound");
    Domain d;
    d.kind = DomainKind::interval;
    d.dim = 1;
    d.lo[0] = a;
    d.hi[0] = b;
    return d;
}

Domain Domain::rectangle(double ax, double bx, double ay, double by) {
    require(ax < bx && ay < by, ErrorCode::config_error, "rectangle: lower < upper required per axis");
    Domain d;
    d.kind = DomainKind::rectangle;
    d.dim = 2;
    d.lo = {ax, ay, 0.0};
    d.hi = {bx, by, 0.0};
    return d;
}

Domain Domain::disk(double cx, double cy, double r) {
    require(r > 0, ErrorCode::config_error, "disk: radius must be positive");
    Domain d;
    d.kind = DomainKind::disk;
    d.dim = 2;
    d.center = Pt(cx, cy);
    d.radius = r;
    return d;
}

double Domain::measure() const {
    switch (kind) {
        case DomainKind::interval: return hi[0] - lo[0];
        case DomainKind::rectangle: return (hi[0] - lo[0]) * (hi[1] - lo[1]);
        case DomainKind::disk: return M_PI * radius * radius;
    }
    return 0.0;
}

bool Domain::contains(const Pt& p) const {
    if (kind == DomainKind::disk) return (p - center).norm() <= radius;
    for (int i = 0; i < dim; ++i)
        if (p[i] < lo[static_cast<size_t>(i)] || p[i] > hi[static_cast<size_t>(i)]) return false;
    return true;
}

void Domain::bounding_box(std::array<double, 3>& blo, std::array<double, 3>& bhi) const {
    if (kind == DomainKind::disk) {
        blo = {center[0] - radius, center[1] - radius, 0.0};
        bhi = {center[0] + radius, center[1] + radius, 0.0};
    } else {
        blo = lo;
        bhi = hi;
    }
}

std::vector<std::pair<Pt, Pt>> Domain::boundary_samples(int per_face) const {
    std::vector<std::pair<Pt, Pt>> out;
    if (kind == DomainKind::interval) {
        Pt nl(-1.0), nr(1.0);
        out.emplace_back(Pt(lo[0]), nl);
        out.emplace_back(Pt(hi[0]), nr);
        return out;
    }
    if (kind == DomainKind::disk) {
        for (int k = 0; k < 4 * per_face; ++k) {
            double a = 2.0 * M_PI * k / (4.0 * per_face);
            Pt n(std::cos(a), std::sin(a));
            out.emplace_back(center + radius * n, n);
        }
        return out;
    }
    // rectangle: per_face samples on each of the 4 edges
    for (int side = 0; side < 4; ++side) {
        int axis = side / 2;
        int sgn = (side % 2 == 0) ? -1 : 1;
        int other = 1 - axis;
        double fixed = sgn < 0 ? lo[static_cast<size_t>(axis)] : hi[static_cast<size_t>(axis)];
        for (int k = 0; k < per_face; ++k) {
            double s = lo[static_cast<size_t>(other)] +
                       (hi[static_cast<size_t>(other)] - lo[static_cast<size_t>(other)]) * (k + 0.5) / per_face;
            Pt p = Pt::zero(2), n = Pt::zero(2);
            p.dim = n.dim = 2;
            p[axis] = fixed;
            p[other] = s;
            n[axis] = sgn;
            out.emplace_back(p, n);
        }
    }
    return out;
}

Region Region::interval(double a, double b) {
    require(a < b, ErrorCode::config_error, "region interval: a < b required");
    Region r;
    r.dim = 1;
    Part p;
    p.lo[0] = a;
    p.hi[0] = b;
    r.parts.push_back(p);
    return r;
}

Region Region::box2(double ax, double bx, double ay, double by) {
    require(ax < bx && ay < by, ErrorCode::config_error, "region box: lower < upper required");
    Region r;
    r.dim = 2;
    Part p;
    p.lo = {ax, ay, 0.0};
    p.hi = {bx, by, 0.0};
    r.parts.push_back(p);
    return r;
}

Region Region::ball(const Pt& c, double radius) {
    require(radius > 0, ErrorCode::config_error, "region ball: radius must be positive");
    Region r;
    r.dim = c.dim;
    Part p;
    p.is_ball = true;
    p.center = c;
    p.radius = radius;
    r.parts.push_back(p);
    return r;
}

Region& Region::add_part(const Part& p) {
    parts.push_back(p);
    return *this;
}

static double part_distance(const Region::Part& part, const Pt& p) {
    if (part.is_ball) return std::max(0.0, (p - part.center).norm() - part.radius);
    double s = 0.0;
    for (int i = 0; i < p.dim; ++i) {
        double d = std::max({part.lo[static_cast<size_t>(i)] - p[i], 0.0, p[i] - part.hi[static_cast<size_t>(i)]});
        s += d * d;
    }
    return std::sqrt(s);
}

bool Region::contains_closure(const Pt& p) const { return distance(p) == 0.0; }

bool Region::contains_open(const Pt& p) const {
    for (const auto& part : parts) {
        if (part.is_ball) {
            if ((p - part.center).norm() < part.radius) return true;
        } else {
            bool in = true;
            for (int i = 0; i < dim; ++i)
                if (!(p[i] > part.lo[static_cast<size_t>(i)] && p[i] < part.hi[static_cast<size_t>(i)])) in = false;
            if (in) return true;
        }
    }
    return false;
}

double Region::distance(const Pt& p) const {
    require(p.dim == dim, ErrorCode::config_error, "region_distance: dimension mismatch");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& part : parts) best = std::min(best, part_distance(part, p));
    return best;
}

double Region::inradius() const {
    double best = 0.0;
    for (const auto& part : parts) {
        if (part.is_ball) {
            best = std::max(best, part.radius);
        } else {
            double r = std::numeric_limits<double>::infinity();
            for (int i = 0; i < dim; ++i)
                r = std::min(r, 0.5 * (part.hi[static_cast<size_t>(i)] - part.lo[static_cast<size_t>(i)]));
            best = std::max(best, r);
        }
    }
    return best;
}

double Region::measure() const {
    double s = 0.0;
    for (const auto& part : parts) {
        if (part.is_ball) {
            s += dim == 1 ? 2.0 * part.radius : M_PI * part.radius * part.radius;
        } else {
            double m = 1.0;
            for (int i = 0; i < dim; ++i) m *= part.hi[static_cast<size_t>(i)] - part.lo[static_cast<size_t>(i)];
            s += m;
        }
    }
    return s;
}

Region shrink_region(const Region& region, double margin) {
    require(margin > 0, ErrorCode::config_error, "shrink_region: margin must be positive");
    Region out;
    out.dim = region.dim;
    for (const auto& part : region.parts) {
        Region::Part q = part;
        if (part.is_ball) {
            if (part.radius - margin <= 0) continue;
            q.radius = part.radius - margin;
        } else {
            bool ok = true;
            for (int i = 0; i < region.dim; ++i) {
                q.lo[static_cast<size_t>(i)] += margin;
                q.hi[static_cast<size_t>(i)] -= margin;
                if (q.lo[static_cast<size_t>(i)] >= q.hi[static_cast<size_t>(i)]) ok = false;
            }
            if (!ok) continue;
        }
        out.parts.push_back(q);
    }
    require(!out.parts.empty(), ErrorCode::config_error,
            "shrink_region: margin exceeds the region's inradius (empty shrink)");
    return out;
}

Pt Grid::cell_center(int idx) const {
    if (dim == 1) return Pt(lo[0] + (idx + 0.5) * h[0]);
    int i = idx % n[0], j = idx / n[0];
    return Pt(lo[0] + (i + 0.5) * h[0], lo[1] + (j + 0.5) * h[1]);
}

double Grid::domain_measure() const {
    double m = 1.0;
    for (int a = 0; a < dim; ++a) m *= hi[static_cast<size_t>(a)] - lo[static_cast<size_t>(a)];
    return m;
}

std::vector<Grid::BoundaryFace> Grid::boundary_faces() const {
    std::vector<BoundaryFace> out;
    if (dim == 1) {
        out.push_back({0, 0, -1, Pt(lo[0]), 1.0});
        out.push_back({n[0] - 1, 0, 1, Pt(hi[0]), 1.0});
        return out;
    }
    for (int j = 0; j < n[1]; ++j) {
        double y = lo[1] + (j + 0.5) * h[1];
        out.push_back({index(0, j), 0, -1, Pt(lo[0], y), h[1]});
        out.push_back({index(n[0] - 1, j), 0, 1, Pt(hi[0], y), h[1]});
    }
    for (int i = 0; i < n[0]; ++i) {
        double x = lo[0] + (i + 0.5) * h[0];
        out.push_back({index(i, 0), 1, -1, Pt(x, lo[1]), h[0]});
        out.push_back({index(i, n[1] - 1), 1, 1, Pt(x, hi[1]), h[0]});
    }
    return out;
}

// Exact overlap of [a,b] with the union of the region's 1-D traces along a
// line is only needed part-by-part; overlapping parts are clipped by taking
// the max fraction, which is exact for the disjoint unions used in practice.
static double box_overlap_fraction(const Region::Part& part, const Pt& c, const std::array<double, 2>& h, int dim) {
    double frac = 1.0;
    for (int a = 0; a < dim; ++a) {
        double clo = c[a] - 0.5 * h[static_cast<size_t>(a)], chi = c[a] + 0.5 * h[static_cast<size_t>(a)];
        double olo = std::max(clo, part.lo[static_cast<size_t>(a)]), ohi = std::min(chi, part.hi[static_cast<size_t>(a)]);
        if (ohi <= olo) return 0.0;
        frac *= (ohi - olo) / (chi - clo);
    }
    return frac;
}

double Grid::cell_fraction(int idx, const Region& region) const {
    Pt c = cell_center(idx);
    double frac = 0.0;
    for (const auto& part : region.parts) {
        double f = 0.0;
        if (!part.is_ball) {
            f = box_overlap_fraction(part, c, h, dim);
        } else if (dim == 1) {
            Region::Part iv;
            iv.lo[0] = part.center[0] - part.radius;
            iv.hi[0] = part.center[0] + part.radius;
            f = box_overlap_fraction(iv, c, h, 1);
        } else {
            const int S = 16;
            int inside = 0;
            for (int a = 0; a < S; ++a)
                for (int b = 0; b < S; ++b) {
                    Pt q(c[0] + ((a + 0.5) / S - 0.5) * h[0], c[1] + ((b + 0.5) / S - 0.5) * h[1]);
                    if ((q - part.center).norm() <= part.radius) ++inside;
                }
            f = static_cast<double>(inside) / (S * S);
        }
        frac = std::min(1.0, frac + f);
    }
    return frac;
}

Grid build_grid(const Domain& domain, const std::array<int, 2>& resolution) {
    require(domain.kind != DomainKind::disk, ErrorCode::config_error,
            "build_grid: disk domains are supported by flow analysis only");
    // N = 1 is admitted for the single-cell closed-form instances; zero or
    // negative cell counts are rejected.
    for (int a = 0; a < domain.dim; ++a)
        require(resolution[static_cast<size_t>(a)] >= 1, ErrorCode::config_error,
                "build_grid: invalid resolution (need >= 1 cell per axis)");
    Grid g;
    g.dim = domain.dim;
    for (int a = 0; a < domain.dim; ++a) {
        g.n[static_cast<size_t>(a)] = resolution[static_cast<size_t>(a)];
        g.lo[static_cast<size_t>(a)] = domain.lo[static_cast<size_t>(a)];
        g.hi[static_cast<size_t>(a)] = domain.hi[static_cast<size_t>(a)];
        g.h[static_cast<size_t>(a)] =
            (domain.hi[static_cast<size_t>(a)] - domain.lo[static_cast<size_t>(a)]) / resolution[static_cast<size_t>(a)];
    }
    return g;
}

}  // namespace vanishcost::geometry
