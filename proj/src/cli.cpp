#include "vanishcost/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "vanishcost/expr.hpp"

namespace vanishcost::cli {

namespace {

using geometry::Domain;
using geometry::Grid;
using geometry::Region;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// ---------------------------------------------------------------- raw parse

struct RawValue {
    std::string value;
    int line = 0;
    bool used = false;
};

using RawSection = std::map<std::string, RawValue>;
using RawConfig = std::map<std::string, std::pair<RawSection, int>>;  // section -> (keys, line)

constexpr const char* kSections[] = {"experiment", "domain",      "omega", "omega0",
                                     "omega_prime", "field", "output"};

RawConfig split_sections(const std::string& content, std::vector<std::string>& errs) {
    RawConfig raw;
    std::istringstream in(content);
    std::string line;
    std::string section;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                errs.push_back("line " + std::to_string(n) + ": unterminated section header");
                continue;
            }
            section = trim(line.substr(1, line.size() - 2));
            bool known = false;
            for (const char* s : kSections) known |= section == s;
            if (!known) {
                errs.push_back("line " + std::to_string(n) + ": unknown section [" + section + "]");
                section.clear();
                continue;
            }
            raw.emplace(section, std::make_pair(RawSection{}, n));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            errs.push_back("line " + std::to_string(n) + ": expected key = value");
            continue;
        }
        if (section.empty()) {
            errs.push_back("line " + std::to_string(n) + ": key outside any section");
            continue;
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        auto& sec = raw[section].first;
        if (sec.count(key))
            errs.push_back("line " + std::to_string(n) + ": duplicate key '" + key + "'");
        else
            sec[key] = RawValue{value, n, false};
    }
    return raw;
}

// --------------------------------------------------------------- extraction

struct Reader {
    RawConfig& raw;
    std::vector<std::string>& errs;

    void fail(int line, const std::string& msg) {
        errs.push_back("line " + std::to_string(line) + ": " + msg);
    }

    RawSection* section(const std::string& name) {
        auto it = raw.find(name);
        return it == raw.end() ? nullptr : &it->second.first;
    }

    RawValue* find(const std::string& sec, const std::string& key) {
        auto* s = section(sec);
        if (!s) return nullptr;
        auto it = s->find(key);
        if (it == s->end()) return nullptr;
        it->second.used = true;
        return &it->second;
    }

    std::optional<std::string> str(const std::string& sec, const std::string& key) {
        auto* v = find(sec, key);
        if (!v) return std::nullopt;
        return v->value;
    }

    std::optional<double> num(const std::string& sec, const std::string& key) {
        auto* v = find(sec, key);
        if (!v) return std::nullopt;
        char* end = nullptr;
        double d = std::strtod(v->value.c_str(), &end);
        if (end == v->value.c_str() || *end != '\0') {
            fail(v->line, "key '" + key + "' expects a number, got '" + v->value + "'");
            return std::nullopt;
        }
        return d;
    }

    std::optional<std::vector<double>> num_list(const std::string& sec, const std::string& key) {
        auto* v = find(sec, key);
        if (!v) return std::nullopt;
        std::vector<double> out;
        std::istringstream in(v->value);
        std::string item;
        while (std::getline(in, item, ',')) {
            item = trim(item);
            char* end = nullptr;
            double d = std::strtod(item.c_str(), &end);
            if (item.empty() || end == item.c_str() || *end != '\0') {
                fail(v->line, "key '" + key + "' expects a comma-separated number list");
                return std::nullopt;
            }
            out.push_back(d);
        }
        if (out.empty()) fail(v->line, "key '" + key + "' is empty");
        return out;
    }

    double require_num(const std::string& sec, const std::string& key, int sec_line) {
        auto v = num(sec, key);
        if (!v) {
            if (!find(sec, key))
                fail(sec_line, "missing required key '" + key + "' in [" + sec + "]");
            return 0;
        }
        return *v;
    }
};

std::optional<Domain> extract_domain(Reader& r) {
    auto* sec = r.section("domain");
    if (!sec) {
        r.errs.push_back("missing section [domain]");
        return std::nullopt;
    }
    int line = r.raw["domain"].second;
    auto kind = r.str("domain", "kind");
    if (!kind) {
        r.fail(line, "missing required key 'kind' in [domain]");
        return std::nullopt;
    }
    if (*kind == "interval") {
        double a = r.require_num("domain", "a", line), b = r.require_num("domain", "b", line);
        if (!(a < b)) {
            r.fail(line, "[domain] interval needs a < b");
            return std::nullopt;
        }
        return Domain::interval(a, b);
    }
    if (*kind == "rectangle") {
        double ax = r.require_num("domain", "ax", line), bx = r.require_num("domain", "bx", line);
        double ay = r.require_num("domain", "ay", line), by = r.require_num("domain", "by", line);
        if (!(ax < bx && ay < by)) {
            r.fail(line, "[domain] rectangle needs ax < bx and ay < by");
            return std::nullopt;
        }
        return Domain::rectangle(ax, bx, ay, by);
    }
    if (*kind == "disk") {
        double cx = r.require_num("domain", "cx", line), cy = r.require_num("domain", "cy", line);
        double rad = r.require_num("domain", "r", line);
        if (!(rad > 0)) {
            r.fail(line, "[domain] disk needs r > 0");
            return std::nullopt;
        }
        return Domain::disk(cx, cy, rad);
    }
    r.fail(line, "unknown domain kind '" + *kind + "' (interval | rectangle | disk)");
    return std::nullopt;
}

std::optional<Region> extract_region(Reader& r, const std::string& sec) {
    if (!r.section(sec)) return std::nullopt;
    int line = r.raw[sec].second;
    auto kind = r.str(sec, "kind");
    if (!kind) {
        r.fail(line, "missing required key 'kind' in [" + sec + "]");
        return std::nullopt;
    }
    if (*kind == "interval") {
        double a = r.require_num(sec, "a", line), b = r.require_num(sec, "b", line);
        if (!(a < b)) {
            r.fail(line, "[" + sec + "] interval needs a < b");
            return std::nullopt;
        }
        return Region::interval(a, b);
    }
    if (*kind == "box") {
        double ax = r.require_num(sec, "ax", line), bx = r.require_num(sec, "bx", line);
        double ay = r.require_num(sec, "ay", line), by = r.require_num(sec, "by", line);
        if (!(ax < bx && ay < by)) {
            r.fail(line, "[" + sec + "] box needs ax < bx and ay < by");
            return std::nullopt;
        }
        return Region::box2(ax, bx, ay, by);
    }
    if (*kind == "ball") {
        double cx = r.require_num(sec, "cx", line);
        auto cy = r.num(sec, "cy");
        double rad = r.require_num(sec, "r", line);
        if (!(rad > 0)) {
            r.fail(line, "[" + sec + "] ball needs r > 0");
            return std::nullopt;
        }
        return Region::ball(cy ? Pt(cx, *cy) : Pt(cx), rad);
    }
    r.fail(line, "unknown region kind '" + *kind + "' (interval | box | ball)");
    return std::nullopt;
}

std::optional<velocity::VelocityField> extract_field(Reader& r) {
    auto* sec = r.section("field");
    if (!sec) {
        r.errs.push_back("missing section [field]");
        return std::nullopt;
    }
    int line = r.raw["field"].second;
    int dim = 1;
    if (auto d = r.num("field", "dim")) {
        if (*d != 1 && *d != 2) {
            r.fail(line, "[field] dim must be 1 or 2");
            return std::nullopt;
        }
        dim = static_cast<int>(*d);
    }
    auto builtin = r.str("field", "builtin");
    auto potential = r.str("field", "potential");
    if (builtin && potential) {
        r.fail(line, "[field] takes either 'builtin' or 'potential', not both");
        return std::nullopt;
    }
    try {
        if (builtin) return velocity::builtin_field(*builtin, dim);
        if (potential) {
            auto pot = std::make_shared<velocity::GradientPotential>(
                velocity::GradientPotential::from_expression(expr::parse(*potential), dim));
            return velocity::make_gradient_field(pot);
        }
    } catch (const Error& e) {
        r.fail(line, std::string("[field] ") + e.what());
        return std::nullopt;
    }
    r.fail(line, "[field] needs 'builtin = <name>' or 'potential = <expression>'");
    return std::nullopt;
}

// Per-kind parameter schema: numeric and text keys of [experiment].
struct KindSpec {
    std::vector<std::string> required_num, optional_num;
    std::vector<std::string> required_text, optional_text;
    bool epsilon_list = false;
    bool needs_omega = false, needs_omega0 = false, needs_omega_prime = false;
};

const std::map<std::string, KindSpec>& kind_table() {
    static const std::map<std::string, KindSpec> table = {
        {"flushing",
         {{"T", "T0", "r0"}, {"space_per_axis", "time_points", "scan_points"}, {}, {}, false,
          true, false, false}},
        {"solve",
         {{"epsilon", "T", "N", "M"}, {"Ny"}, {"terminal"}, {}, false, false, false, false}},
        {"cost",
         {{"epsilon", "T", "N", "M"},
          {"Ny", "tolerance", "max_iterations", "delta"},
          {},
          {"method"},
          false, true, false, false}},
        {"sweep",
         {{"T"},
          {"grid_constant", "steps_per_unit_time", "min_steps", "max_cells_per_axis", "tolerance",
           "max_iterations", "delta"},
          {},
          {"method"},
          true, true, false, false}},
        {"hum",
         {{"epsilon", "T", "N", "M"},
          {"Ny", "tolerance", "max_iterations", "delta"},
          {"y0"},
          {},
          false, true, false, false}},
        {"theta",
         {{"cx", "r", "t1", "t2"}, {"cy", "lattice_n", "time_points"}, {}, {}, false, false,
          false, false}},
        {"agmon",
         {{"epsilon", "T", "N", "M"},
          {"Ny", "cx", "cy", "r", "tolerance"},
          {"terminal", "variant"},
          {},
          false, false, false, false}},
        {"dissipation",
         {{"t0", "T0", "N", "M"}, {"Ny"}, {"G"}, {}, true, false, true, false}},
        {"carleman",
         {{"epsilon", "T", "N", "M", "lambda"},
          {"Ny", "s", "s1", "guard_steps"},
          {"terminal"},
          {},
          false, true, false, true}},
        {"theorem1-trend",
         {{"T", "T0", "r0"},
          {"grid_constant", "steps_per_unit_time", "min_steps", "max_cells_per_axis", "tolerance",
           "max_iterations", "delta", "m", "space_per_axis", "time_points"},
          {},
          {},
          true, true, false, false}},
        {"theorem2-trend",
         {{"T", "cx", "r0", "N", "M"}, {"Ny", "cy"}, {}, {}, true, true, false, false}},
    };
    return table;
}

// Range constraints applied by key name wherever the key appears.
void check_range(Reader& r, const std::string& key, double v, int line) {
    auto bad = [&](const std::string& what) {
        r.fail(line, "key '" + key + "' out of range: " + what);
    };
    auto is_int = [&] {
        if (v != std::floor(v)) bad("must be an integer");
        return v == std::floor(v);
    };
    if (key == "epsilon" || key == "T" || key == "T0" || key == "r0" || key == "r" ||
        key == "tolerance" || key == "s1" || key == "grid_constant") {
        if (!(v > 0)) bad("must be > 0");
    } else if (key == "delta") {
        if (!(v >= 0)) bad("must be >= 0");
    } else if (key == "lambda" || key == "s") {
        if (!(v >= 1)) bad("must be >= 1");
    } else if (key == "N" || key == "Ny" || key == "max_cells_per_axis") {
        if (is_int() && !(v >= 1)) bad("must be >= 1");
    } else if (key == "M" || key == "min_steps" || key == "max_iterations") {
        if (is_int() && !(v >= 2)) bad("must be >= 2");
    } else if (key == "guard_steps" || key == "m" || key == "steps_per_unit_time") {
        if (is_int() && !(v >= 1)) bad("must be >= 1");
    } else if (key == "space_per_axis" || key == "time_points" || key == "lattice_n") {
        if (is_int() && !(v >= 2)) bad("must be >= 2");
    } else if (key == "scan_points") {
        if (is_int() && !(v >= 16)) bad("must be >= 16");
    }
}

}  // namespace

double ExperimentConfig::number(const std::string& key) const {
    auto it = num.find(key);
    require(it != num.end(), ErrorCode::config_error, "missing parameter '" + key + "'");
    return it->second;
}

double ExperimentConfig::number_or(const std::string& key, double fallback) const {
    auto it = num.find(key);
    return it == num.end() ? fallback : it->second;
}

int ExperimentConfig::integer(const std::string& key) const {
    return static_cast<int>(std::llround(number(key)));
}

int ExperimentConfig::integer_or(const std::string& key, int fallback) const {
    auto it = num.find(key);
    return it == num.end() ? fallback : static_cast<int>(std::llround(it->second));
}

ExperimentConfig parse_config(const std::string& content) {
    std::vector<std::string> errs;
    RawConfig raw = split_sections(content, errs);
    Reader r{raw, errs};
    ExperimentConfig cfg;

    int exp_line = raw.count("experiment") ? raw["experiment"].second : 0;
    auto kind = r.str("experiment", "kind");
    if (!raw.count("experiment"))
        errs.push_back("missing section [experiment]");
    else if (!kind)
        r.fail(exp_line, "missing required key 'kind' in [experiment]");

    const KindSpec* spec = nullptr;
    if (kind) {
        auto it = kind_table().find(*kind);
        if (it == kind_table().end())
            r.fail(exp_line, "unknown experiment kind '" + *kind + "'");
        else {
            cfg.kind = *kind;
            spec = &it->second;
        }
    }

    if (auto dom = extract_domain(r)) cfg.domain = *dom;
    cfg.omega = extract_region(r, "omega");
    cfg.omega0 = extract_region(r, "omega0");
    cfg.omega_prime = extract_region(r, "omega_prime");
    if (auto f = extract_field(r)) cfg.field = *f;
    if (auto dir = r.str("output", "dir")) cfg.out_dir = *dir;

    if (spec) {
        auto want_num = [&](const std::string& key, bool required) {
            auto* rv = r.find("experiment", key);
            if (!rv) {
                if (required)
                    r.fail(exp_line, "missing required key '" + key + "' in [experiment]");
                return;
            }
            rv->used = false;  // re-read through the typed path
            auto v = r.num("experiment", key);
            if (v) {
                check_range(r, key, *v, rv->line);
                cfg.num[key] = *v;
            }
        };
        for (const auto& k : spec->required_num) want_num(k, true);
        for (const auto& k : spec->optional_num) want_num(k, false);
        for (const auto& k : spec->required_text) {
            auto v = r.str("experiment", k);
            if (!v)
                r.fail(exp_line, "missing required key '" + k + "' in [experiment]");
            else
                cfg.text[k] = *v;
        }
        for (const auto& k : spec->optional_text)
            if (auto v = r.str("experiment", k)) cfg.text[k] = *v;
        if (spec->epsilon_list) {
            auto* rv = r.find("experiment", "epsilon_list");
            if (!rv)
                r.fail(exp_line, "missing required key 'epsilon_list' in [experiment]");
            else {
                rv->used = false;
                if (auto list = r.num_list("experiment", "epsilon_list")) {
                    for (double e : *list)
                        if (!(e > 0)) r.fail(rv->line, "epsilon_list entries must be > 0");
                    cfg.epsilon_list = *list;
                }
            }
        }
        if (spec->needs_omega && !cfg.omega) errs.push_back("missing section [omega]");
        if (spec->needs_omega0 && !cfg.omega0) errs.push_back("missing section [omega0]");
        if (spec->needs_omega_prime && !cfg.omega_prime)
            errs.push_back("missing section [omega_prime]");
    }

    if (auto seed = r.num("experiment", "seed")) cfg.seed = static_cast<unsigned long long>(*seed);

    for (auto& [name, sec] : raw)
        for (auto& [key, rv] : sec.first)
            if (!rv.used)
                errs.push_back("line " + std::to_string(rv.line) + ": unknown key '" + key +
                               "' in [" + name + "]");

    if (!errs.empty()) {
        std::string msg = "config invalid:";
        for (const auto& e : errs) msg += "\n  " + e;
        throw Error(ErrorCode::config_error, msg);
    }
    return cfg;
}

// ------------------------------------------------------------------ output

void RunManifest::write(const std::string& path) const {
    std::ofstream out(path);
    out << "config_hash = " << config_hash << "\n";
    out << "version = " << version << "\n";
    out << "wall_seconds = " << fmt(wall_seconds) << "\n";
    for (const auto& a : artifacts) out << "artifact = " << a << "\n";
    for (const auto& f : flags) out << "flag = " << f << "\n";
}

int emit_plotdata(const std::vector<costlab::SweepRow>& rows, PlotKind kind,
                  const std::string& path) {
    require(!rows.empty(), ErrorCode::config_error, "emit_plotdata: no rows");
    std::ofstream out(path);
    int dropped = 0;
    for (const auto& row : rows) {
        if (!row.flag.empty() || !std::isfinite(row.K)) {
            ++dropped;
            continue;
        }
        if (kind == PlotKind::K_vs_eps) {
            out << fmt(row.epsilon) << "\t" << fmt(row.K) << "\n";
        } else {
            if (!(row.K > 0)) {
                ++dropped;
                continue;
            }
            out << fmt(1.0 / row.epsilon) << "\t" << fmt(std::log(row.K)) << "\n";
        }
    }
    return dropped;
}

void emit_pairs(const std::vector<std::pair<double, double>>& points, const std::string& path) {
    require(!points.empty(), ErrorCode::config_error, "emit_pairs: no points");
    std::ofstream out(path);
    for (const auto& [a, b] : points) out << fmt(a) << "\t" << fmt(b) << "\n";
}

namespace {

std::string fnv_hash(const std::string& text) {
    unsigned long long h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", h);
    return buf;
}

constexpr const char* kVersion = "vanishcost 1.0.0";

Grid make_grid(const ExperimentConfig& cfg) {
    int nx = cfg.integer("N");
    int ny = cfg.domain.dim == 2 ? cfg.integer_or("Ny", nx) : 1;
    return geometry::build_grid(cfg.domain, {nx, ny});
}

pde::Slice sample_expression(const Grid& g, const std::string& text, double t) {
    auto e = expr::parse(text);
    pde::Slice s(static_cast<size_t>(g.cell_count()));
    for (int i = 0; i < g.cell_count(); ++i)
        s[static_cast<size_t>(i)] = e->eval(g.cell_center(i), t);
    return s;
}

costlab::CostOptions cost_options(const ExperimentConfig& cfg) {
    costlab::CostOptions opts;
    auto it = cfg.text.find("method");
    if (it != cfg.text.end()) {
        require(it->second == "power" || it->second == "dense", ErrorCode::config_error,
                "method must be 'power' or 'dense'");
        opts.method = it->second == "dense" ? costlab::CostMethod::dense_eigensolve
                                            : costlab::CostMethod::power_iteration;
    }
    opts.tolerance = cfg.number_or("tolerance", opts.tolerance);
    opts.max_iterations = cfg.integer_or("max_iterations", opts.max_iterations);
    opts.delta = cfg.number_or("delta", opts.delta);
    return opts;
}

std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.out_dir);
    return (std::filesystem::path(cfg.out_dir) / name).string();
}

// Distance from x to the boundary of the domain.
double boundary_clearance(const Domain& dom, const Pt& x) {
    if (dom.kind == geometry::DomainKind::disk) return dom.radius - (x - dom.center).norm();
    double d = std::numeric_limits<double>::infinity();
    for (int a = 0; a < dom.dim; ++a) {
        d = std::min(d, x[a] - dom.lo[static_cast<size_t>(a)]);
        d = std::min(d, dom.hi[static_cast<size_t>(a)] - x[a]);
    }
    return d;
}

}  // namespace

TrendArtifacts run_theorem1_trend(const ExperimentConfig& cfg) {
    require(cfg.kind == "theorem1-trend", ErrorCode::config_error,
            "run_theorem1_trend: config kind is '" + cfg.kind + "'");
    require(cfg.epsilon_list.size() >= 4, ErrorCode::config_error,
            "theorem1-trend: epsilon_list needs at least 4 values (exponential fit)");
    double T = cfg.number("T"), T0 = cfg.number("T0"), r0 = cfg.number("r0");
    require(T0 < T, ErrorCode::config_error, "theorem1-trend: T0 must be < T");

    // boundary-sign certificate: min dn f > 0 on Gamma
    require(cfg.field.potential != nullptr, ErrorCode::certificate_refusal,
            "theorem1-trend refused: field has no gradient potential; a gradient field with "
            "min dn f > 0 is required (certificate: velocity::field_norms)");
    auto norms = velocity::field_norms(cfg.field, cfg.domain, T);
    require(norms.min_dnf > 0, ErrorCode::certificate_refusal,
            "theorem1-trend refused: boundary-sign certificate failed, min dn f = " +
                fmt(norms.min_dnf) + " <= 0 on the boundary (certificate: velocity::field_norms)");

    // flushing certificate for (T, T0, r0)
    flow::LatticeSpec lat;
    lat.space_per_axis = cfg.integer_or("space_per_axis", 21);
    lat.time_points = cfg.integer_or("time_points", 5);
    auto fr = flow::check_flushing(cfg.field, cfg.domain, *cfg.omega, T, T0, r0, lat);
    if (fr.verdict != flow::FlushingVerdict::satisfied) {
        std::string msg = "theorem1-trend refused: flushing certificate for (T=" + fmt(T) +
                          ", T0=" + fmt(T0) + ", r0=" + fmt(r0) +
                          ") not satisfied (certificate: flow::check_flushing)";
        if (!fr.violations.empty())
            msg += "; witness anchor x0 = " + fmt(fr.violations.front().x0[0]) +
                   ", t0 = " + fmt(fr.violations.front().t0);
        throw Error(ErrorCode::certificate_refusal, msg);
    }

    costlab::SweepSpec ss;
    ss.domain = cfg.domain;
    ss.omega = *cfg.omega;
    ss.field = cfg.field;
    ss.grid_constant = cfg.number_or("grid_constant", ss.grid_constant);
    ss.max_cells_per_axis = cfg.integer_or("max_cells_per_axis", ss.max_cells_per_axis);
    ss.steps_per_unit_time = cfg.integer_or("steps_per_unit_time", ss.steps_per_unit_time);
    ss.min_steps = cfg.integer_or("min_steps", ss.min_steps);
    ss.cost = cost_options(cfg);

    TrendArtifacts art;
    art.rows = costlab::sweep(ss, cfg.epsilon_list, {T});
    art.fit = costlab::boundedness_report(art.rows);

    // dissipation-chain diagnostics: measured C0 on the shrunk region
    Region omega0 = geometry::shrink_region(*cfg.omega, r0 / 2);
    double eps_mid = cfg.epsilon_list[cfg.epsilon_list.size() / 2];
    int nd = std::clamp(static_cast<int>(std::ceil(ss.grid_constant / std::sqrt(eps_mid))) * 2, 2,
                        ss.max_cells_per_axis);
    Grid gd = geometry::build_grid(cfg.domain, {nd, cfg.domain.dim == 2 ? nd : 1});
    pde::SolverParams base;
    base.M = std::max(ss.min_steps,
                      static_cast<int>(std::lround(T0 * ss.steps_per_unit_time)));
    double t0 = std::min(T, 2 * T0);
    pde::Slice G(static_cast<size_t>(gd.cell_count()), 1.0);
    auto os = analysis::dissipation_outside_sweep(gd, omega0, cfg.field, G, t0, T0,
                                                  cfg.epsilon_list, base);
    art.measured_C0 = -os.slope;
    art.chain_m = cfg.integer_or("m", std::max(1, static_cast<int>(std::floor(T / T0))));
    double C1 = std::max(art.fit.slope, 0.0);
    art.chain_inequality_holds = C1 * (1 + 1 / T) <= art.chain_m * art.measured_C0 + 1e-12;

    std::string csv = out_path(cfg, "sweep.csv");
    costlab::write_sweep_csv(art.rows, csv);
    std::string p1 = out_path(cfg, "plot_k_vs_eps.tsv");
    std::string p2 = out_path(cfg, "plot_logk_vs_inveps.tsv");
    int d1 = emit_plotdata(art.rows, PlotKind::K_vs_eps, p1);
    int d2 = emit_plotdata(art.rows, PlotKind::logK_vs_inv_eps, p2);

    std::string rpt = out_path(cfg, "trend_report.txt");
    {
        std::ofstream out(rpt);
        out << "experiment = theorem1-trend\n";
        out << "verdict = " << art.fit.verdict << "\n";
        out << "slope = " << fmt(art.fit.slope) << "\n";
        out << "r2 = " << (art.fit.r2_defined ? fmt(art.fit.r2) : "undefined") << "\n";
        out << "spread = " << fmt(art.fit.spread) << "\n";
        out << "rows_used = " << art.fit.rows_used << "\n";
        out << "measured_C0 = " << fmt(art.measured_C0) << "\n";
        out << "chain_m = " << art.chain_m << "\n";
        out << "chain_inequality_holds = " << (art.chain_inequality_holds ? "true" : "false")
            << "\n";
        out << "dropped_plot_rows = " << d1 + d2 << "\n";
    }
    art.files = {csv, p1, p2, rpt};
    return art;
}

TrendArtifacts run_theorem2_trend(const ExperimentConfig& cfg, int workers) {
    require(cfg.kind == "theorem2-trend", ErrorCode::config_error,
            "run_theorem2_trend: config kind is '" + cfg.kind + "'");
    require(cfg.epsilon_list.size() >= 4, ErrorCode::config_error,
            "theorem2-trend: epsilon_list needs at least 4 values (exponential fit)");
    double T = cfg.number("T"), r0 = cfg.number("r0");
    Pt x0 = cfg.domain.dim == 2 ? Pt(cfg.number("cx"), cfg.number("cy")) : Pt(cfg.number("cx"));

    // witness-trajectory certificate: Phi(t, T, x0) stays in Omega away from
    // omega with clearance 4 r0 on [0, T]
    auto traj = flow::integrate_flow(cfg.field, x0, T, 0.0);
    for (int k = 0; k <= 128; ++k) {
        double t = T * k / 128;
        Pt x = traj.at(t);
        double clear = boundary_clearance(cfg.domain, x);
        require(clear >= 4 * r0, ErrorCode::certificate_refusal,
                "theorem2-trend refused: witness trajectory certificate failed at t = " + fmt(t) +
                    ": boundary clearance " + fmt(clear) + " < 4 r0 (certificate: "
                    "flow::integrate_flow)");
        require(cfg.omega->distance(x) > 0, ErrorCode::certificate_refusal,
                "theorem2-trend refused: witness trajectory certificate failed at t = " + fmt(t) +
                    ": trajectory meets the closure of omega (certificate: flow::integrate_flow)");
    }

    Grid g = make_grid(cfg);
    int M = cfg.integer("M");

    // smooth bump supported in B(x0, r0)
    pde::Slice bump(static_cast<size_t>(g.cell_count()), 0.0);
    for (int i = 0; i < g.cell_count(); ++i) {
        double q = (g.cell_center(i) - x0).norm() / r0;
        if (q < 1) bump[static_cast<size_t>(i)] = std::exp(-1.0 / (1.0 - q * q));
    }
    require(std::fabs(pde::mass(g, bump)) > 0, ErrorCode::config_error,
            "theorem2-trend: bump datum has zero mass on this grid (nonzero mean required); "
            "refine N or enlarge r0");

    std::vector<double> eps(cfg.epsilon_list);
    std::sort(eps.begin(), eps.end(), std::greater<>());

    TrendArtifacts art;
    art.rows.resize(eps.size());
    art.mean_bounds.resize(eps.size());
    auto work = [&](size_t i) {
        costlab::SweepRow row;
        row.epsilon = eps[i];
        row.T = T;
        row.N = g.n[0];
        row.M = M;
        try {
            pde::SolverParams params;
            params.epsilon = eps[i];
            params.M = M;
            auto phi = pde::solve_adjoint(g, bump, cfg.field, params, T);
            double obs = pde::omega_norm(phi, *cfg.omega);
            if (obs > 0)
                row.K = pde::l2_norm(g, phi.front()) / obs;
            else
                row.flag = "zero observation norm";
            costlab::ProblemSpec prob{g, *cfg.omega, cfg.field, T};
            art.mean_bounds[i] = costlab::mean_lower_bound_check(bump, prob, params);
        } catch (const Error& e) {
            row.flag = e.what();
            row.K = std::nan("");
        }
        art.rows[i] = row;
    };
    workers = std::clamp(workers, 1, static_cast<int>(eps.size()));
    if (workers <= 1) {
        for (size_t i = 0; i < eps.size(); ++i) work(i);
    } else {
        std::vector<std::thread> pool;
        std::atomic<size_t> next{0};
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (size_t i = next++; i < eps.size(); i = next++) work(i);
            });
        for (auto& th : pool) th.join();
    }

    art.fit = costlab::boundedness_report(art.rows);

    std::string csv = out_path(cfg, "sweep.csv");
    costlab::write_sweep_csv(art.rows, csv);
    std::string p1 = out_path(cfg, "plot_k_vs_eps.tsv");
    std::string p2 = out_path(cfg, "plot_logk_vs_inveps.tsv");
    int d1 = emit_plotdata(art.rows, PlotKind::K_vs_eps, p1);
    int d2 = emit_plotdata(art.rows, PlotKind::logK_vs_inv_eps, p2);

    std::string rpt = out_path(cfg, "trend_report.txt");
    {
        std::ofstream out(rpt);
        out << "experiment = theorem2-trend\n";
        out << "note = K column is the certified lower-bound ratio "
               "||phi(0)|| / ||phi||_L2(omega_T) for the bump datum\n";
        out << "verdict = " << art.fit.verdict << "\n";
        out << "slope = " << fmt(art.fit.slope) << "\n";
        out << "r2 = " << (art.fit.r2_defined ? fmt(art.fit.r2) : "undefined") << "\n";
        out << "spread = " << fmt(art.fit.spread) << "\n";
        out << "rows_used = " << art.fit.rows_used << "\n";
        for (size_t i = 0; i < eps.size(); ++i) {
            const auto& mb = art.mean_bounds[i];
            out << "mean_lower_bound eps=" << fmt(eps[i]) << " margin=" << fmt(mb.margin)
                << " holds=" << (mb.holds ? "true" : "false")
                << (mb.vacuous ? " (vacuous)" : "") << "\n";
        }
        out << "dropped_plot_rows = " << d1 + d2 << "\n";
    }
    art.files = {csv, p1, p2, rpt};
    return art;
}

// ------------------------------------------------------------- subcommands

namespace {

int cmd_flushing(const ExperimentConfig& cfg) {
    flow::LatticeSpec lat;
    lat.space_per_axis = cfg.integer_or("space_per_axis", 21);
    lat.time_points = cfg.integer_or("time_points", 5);
    lat.scan_points = cfg.integer_or("scan_points", 256);
    auto fr = flow::check_flushing(cfg.field, cfg.domain, *cfg.omega, cfg.number("T"),
                                   cfg.number("T0"), cfg.number("r0"), lat);
    std::string path = out_path(cfg, "flushing_report.txt");
    std::ofstream out(path);
    auto verdict = fr.verdict == flow::FlushingVerdict::satisfied   ? "satisfied"
                   : fr.verdict == flow::FlushingVerdict::violated  ? "violated"
                                                                    : "inconclusive";
    out << "verdict = " << verdict << "\n";
    out << "lattice = " << fr.lattice_description << "\n";
    out << "lattice_points = " << fr.lattice_points << "\n";
    out << "min_common_window = " << fmt(fr.min_common_window) << "\n";
    if (!fr.warning.empty()) out << "warning = " << fr.warning << "\n";
    for (const auto& w : fr.violations) {
        out << "violation x0 =";
        for (int a = 0; a < w.x0.dim; ++a) out << " " << fmt(w.x0[a]);
        out << " t0 = " << fmt(w.t0) << "\n";
    }
    std::printf("flushing: %s (%ld anchors) -> %s\n", verdict, fr.lattice_points, path.c_str());
    return 0;
}

int cmd_solve(const ExperimentConfig& cfg) {
    Grid g = make_grid(cfg);
    pde::SolverParams params;
    params.epsilon = cfg.number("epsilon");
    params.M = cfg.integer("M");
    auto phi_T = sample_expression(g, cfg.text.at("terminal"), cfg.number("T"));
    auto phi = pde::solve_adjoint(g, phi_T, cfg.field, params, cfg.number("T"));
    std::string path = out_path(cfg, "solution.tsv");
    phi.export_tsv(path);
    std::printf("solve: %d cells x %d steps, courant %.3g -> %s\n", g.cell_count(), phi.steps(),
                phi.courant, path.c_str());
    if (!phi.warning.empty()) std::printf("warning: %s\n", phi.warning.c_str());
    return 0;
}

int cmd_cost(const ExperimentConfig& cfg) {
    Grid g = make_grid(cfg);
    costlab::ProblemSpec prob{g, *cfg.omega, cfg.field, cfg.number("T")};
    pde::SolverParams params;
    params.epsilon = cfg.number("epsilon");
    params.M = cfg.integer("M");
    auto est = costlab::observability_cost(prob, params, cost_options(cfg));
    std::string path = out_path(cfg, "cost_estimate.txt");
    std::ofstream out(path);
    out << "K = " << fmt(est.K) << "\n";
    out << "method = "
        << (est.method == costlab::CostMethod::power_iteration ? "power" : "dense") << "\n";
    out << "iterations = " << est.iterations << "\n";
    out << "residual = " << fmt(est.residual) << "\n";
    out << "converged = " << (est.converged ? "true" : "false") << "\n";
    if (!est.flag.empty()) out << "flag = " << est.flag << "\n";
    std::printf("cost: K = %.12g (%s, %d iterations) -> %s\n", est.K,
                est.method == costlab::CostMethod::power_iteration ? "power" : "dense",
                est.iterations, path.c_str());
    return 0;
}

int cmd_sweep(const ExperimentConfig& cfg) {
    costlab::SweepSpec ss;
    ss.domain = cfg.domain;
    ss.omega = *cfg.omega;
    ss.field = cfg.field;
    ss.grid_constant = cfg.number_or("grid_constant", ss.grid_constant);
    ss.max_cells_per_axis = cfg.integer_or("max_cells_per_axis", ss.max_cells_per_axis);
    ss.steps_per_unit_time = cfg.integer_or("steps_per_unit_time", ss.steps_per_unit_time);
    ss.min_steps = cfg.integer_or("min_steps", ss.min_steps);
    ss.cost = cost_options(cfg);
    auto rows = costlab::sweep(ss, cfg.epsilon_list, {cfg.number("T")});
    std::string csv = out_path(cfg, "sweep.csv");
    costlab::write_sweep_csv(rows, csv);
    emit_plotdata(rows, PlotKind::K_vs_eps, out_path(cfg, "plot_k_vs_eps.tsv"));
    emit_plotdata(rows, PlotKind::logK_vs_inv_eps, out_path(cfg, "plot_logk_vs_inveps.tsv"));
    std::printf("sweep: %zu rows -> %s\n", rows.size(), csv.c_str());
    return 0;
}

int cmd_hum(const ExperimentConfig& cfg) {
    Grid g = make_grid(cfg);
    costlab::ProblemSpec prob{g, *cfg.omega, cfg.field, cfg.number("T")};
    pde::SolverParams params;
    params.epsilon = cfg.number("epsilon");
    params.M = cfg.integer("M");
    auto y0 = sample_expression(g, cfg.text.at("y0"), 0.0);
    auto res = costlab::hum_control(y0, prob, params, cfg.number_or("tolerance", 1e-6),
                                    cfg.integer_or("max_iterations", 500),
                                    cfg.number_or("delta", 1e-12));
    std::string path = out_path(cfg, "hum_report.txt");
    {
        std::ofstream out(path);
        out << "y0_norm = " << fmt(res.y0_norm) << "\n";
        out << "terminal_norm = " << fmt(res.terminal_norm) << "\n";
        out << "control_norm = " << fmt(res.control_norm) << "\n";
        out << "iterations = " << res.iterations << "\n";
        out << "converged = " << (res.converged ? "true" : "false") << "\n";
        if (!res.flag.empty()) out << "flag = " << res.flag << "\n";
    }
    res.control.export_tsv(out_path(cfg, "control.tsv"));
    std::printf("hum: ||y(T)|| = %.6g, ||u|| = %.6g, %d iterations -> %s\n", res.terminal_norm,
                res.control_norm, res.iterations, path.c_str());
    return 0;
}

int cmd_theta(const ExperimentConfig& cfg) {
    Pt c = cfg.domain.dim == 2 ? Pt(cfg.number("cx"), cfg.number("cy")) : Pt(cfg.number("cx"));
    auto w = analysis::build_theta(cfg.field, c, cfg.number("r"), cfg.number("t1"),
                                   cfg.number("t2"));
    analysis::EvalLattice lat;
    std::array<double, 3> blo{}, bhi{};
    cfg.domain.bounding_box(blo, bhi);
    lat.lo = Pt::zero(cfg.domain.dim);
    lat.hi = Pt::zero(cfg.domain.dim);
    for (int a = 0; a < cfg.domain.dim; ++a) {
        lat.lo[a] = blo[static_cast<size_t>(a)];
        lat.hi[a] = bhi[static_cast<size_t>(a)];
    }
    int n = cfg.integer_or("lattice_n", 41);
    lat.n = {n, cfg.domain.dim == 2 ? n : 1};
    lat.time_points = cfg.integer_or("time_points", 7);
    double res = analysis::hj_residual(w, cfg.field, lat);
    std::string path = out_path(cfg, "theta_report.txt");
    std::ofstream out(path);
    out << "kappa = " << fmt(w.kappa) << "\n";
    out << "c0 = " << fmt(w.c0) << "\n";
    out << "hj_residual = " << fmt(res) << "\n";
    std::printf("theta: kappa = %.6g, c0 = %.6g, hj residual = %.6g -> %s\n", w.kappa, w.c0, res,
                path.c_str());
    return 0;
}

int cmd_agmon(const ExperimentConfig& cfg) {
    Grid g = make_grid(cfg);
    pde::SolverParams params;
    params.epsilon = cfg.number("epsilon");
    params.M = cfg.integer("M");
    double T = cfg.number("T");
    auto phi_T = sample_expression(g, cfg.text.at("terminal"), T);
    auto phi = pde::solve_adjoint(g, phi_T, cfg.field, params, T);
    std::optional<analysis::AgmonWeight> weight;
    if (cfg.num.count("r")) {
        Pt c = cfg.domain.dim == 2 ? Pt(cfg.number("cx"), cfg.number("cy")) : Pt(cfg.number("cx"));
        weight = analysis::build_theta(cfg.field, c, cfg.number("r"), 0.0, T);
    }
    auto variant = cfg.text.at("variant");
    require(variant == "A1" || variant == "A2", ErrorCode::config_error,
            "variant must be 'A1' or 'A2'");
    auto rep = analysis::agmon_check(phi, weight ? &*weight : nullptr, cfg.field, cfg.domain,
                                     variant == "A1" ? analysis::AgmonVariant::A1
                                                     : analysis::AgmonVariant::A2,
                                     cfg.number_or("tolerance", 1e-6));
    std::string path = out_path(cfg, "agmon_report.txt");
    std::ofstream out(path);
    out << "variant = " << variant << "\n";
    out << "C = " << fmt(rep.C) << "\n";
    out << "worst_margin = " << fmt(rep.worst_margin) << "\n";
    out << "worst_slice = " << rep.worst_slice << "\n";
    out << "holds = " << (rep.holds ? "true" : "false") << "\n";
    std::printf("agmon %s: C = %.6g, worst margin = %.6g, holds = %s -> %s\n", variant.c_str(),
                rep.C, rep.worst_margin, rep.holds ? "true" : "false", path.c_str());
    return 0;
}

int cmd_dissipation(const ExperimentConfig& cfg) {
    Grid g = make_grid(cfg);
    pde::SolverParams base;
    base.M = cfg.integer("M");
    double t0 = cfg.number("t0"), T0 = cfg.number("T0");
    auto G = sample_expression(g, cfg.text.at("G"), t0);
    auto sw = analysis::dissipation_outside_sweep(g, *cfg.omega0, cfg.field, G, t0, T0,
                                                  cfg.epsilon_list, base);
    std::vector<std::pair<double, double>> pts;
    for (const auto& row : sw.rows)
        if (row.defined) pts.emplace_back(1.0 / row.epsilon, std::log(row.ratio));
    if (!pts.empty()) emit_pairs(pts, out_path(cfg, "plot_logratio_vs_inveps.tsv"));
    std::string path = out_path(cfg, "dissipation_report.txt");
    std::ofstream out(path);
    out << "slope = " << fmt(sw.slope) << "\n";
    out << "C0_hat = " << fmt(-sw.slope) << "\n";
    out << "intercept = " << fmt(sw.intercept) << "\n";
    out << "r2 = " << fmt(sw.r2) << "\n";
    for (const auto& row : sw.rows)
        out << "ratio eps=" << fmt(row.epsilon) << " value="
            << (row.defined ? fmt(row.ratio) : "undefined") << "\n";
    std::printf("dissipation: slope = %.6g, r2 = %.6g -> %s\n", sw.slope, sw.r2, path.c_str());
    return 0;
}

int cmd_carleman(const ExperimentConfig& cfg) {
    require(cfg.field.potential != nullptr, ErrorCode::config_error,
            "carleman: field must be a gradient potential");
    Grid g = make_grid(cfg);
    double T = cfg.number("T");
    auto eta = analysis::build_eta(cfg.domain, *cfg.omega_prime);
    double lambda = cfg.number("lambda");
    double s1 = cfg.number_or("s1", 1.0);
    double eps = cfg.number("epsilon");
    double threshold =
        (s1 / eps) * (T + T * T) * analysis::c_T(*cfg.field.potential, cfg.domain, T);
    double s = cfg.number_or("s", threshold);
    auto weights = analysis::carleman_weights(eta, lambda, s, T);
    pde::SolverParams params;
    params.epsilon = eps;
    params.M = cfg.integer("M");
    auto phi_T = sample_expression(g, cfg.text.at("terminal"), T);
    auto phi = pde::solve_adjoint(g, phi_T, cfg.field, params, T);
    auto rep = analysis::carleman_functional(phi, *cfg.field.potential, *cfg.omega, weights, s1,
                                             cfg.integer_or("guard_steps", 2));
    std::string path = out_path(cfg, "carleman_report.txt");
    std::ofstream out(path);
    out << "volume_phi = " << fmt(rep.volume_phi) << "\n";
    out << "volume_grad = " << fmt(rep.volume_grad) << "\n";
    out << "boundary = " << fmt(rep.boundary) << "\n";
    out << "rhs = " << fmt(rep.rhs) << "\n";
    out << "C_min = " << fmt(rep.C_min) << "\n";
    out << "defined = " << (rep.defined ? "true" : "false") << "\n";
    out << "degenerate = " << (rep.degenerate ? "true" : "false") << "\n";
    out << "log_scale = " << fmt(rep.log_scale) << "\n";
    out << "s = " << fmt(rep.s) << "\n";
    out << "lambda = " << fmt(rep.lambda) << "\n";
    out << "epsilon = " << fmt(rep.epsilon) << "\n";
    out << "s_threshold = " << fmt(rep.s_threshold) << "\n";
    out << "s1 = " << fmt(rep.s1) << "\n";
    out << "guard_steps = " << rep.guard_steps << "\n";
    out << "eta_delta = " << fmt(eta.delta) << "\n";
    std::printf("carleman: C_min = %.9g (defined = %s, log scale = %.6g) -> %s\n", rep.C_min,
                rep.defined ? "true" : "false", rep.log_scale, path.c_str());
    return 0;
}

int cmd_trend(const ExperimentConfig& cfg, int workers) {
    TrendArtifacts art = cfg.kind == "theorem1-trend" ? run_theorem1_trend(cfg)
                                                      : run_theorem2_trend(cfg, workers);
    std::printf("%s: verdict = %s, slope = %.6g, spread = %.6g\n", cfg.kind.c_str(),
                art.fit.verdict.c_str(), art.fit.slope, art.fit.spread);
    for (const auto& f : art.files) std::printf("  %s\n", f.c_str());
    return 0;
}

struct Invocation {
    std::string config_path;
    std::string out_override;
    int workers = 1;
    unsigned long long seed = 0;
};

int dispatch(const std::string& expected_kind, const Invocation& inv) {
    std::ifstream in(inv.config_path);
    require(in.good(), ErrorCode::config_error,
            "cannot open config file '" + inv.config_path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    std::string content = buf.str();

    ExperimentConfig cfg = parse_config(content);
    require(cfg.kind == expected_kind, ErrorCode::config_error,
            "config kind '" + cfg.kind + "' does not match subcommand (expected '" +
                expected_kind + "')");
    if (!inv.out_override.empty()) cfg.out_dir = inv.out_override;
    if (inv.seed) cfg.seed = inv.seed;

    auto start = std::chrono::steady_clock::now();
    int rc;
    if (cfg.kind == "flushing") rc = cmd_flushing(cfg);
    else if (cfg.kind == "solve") rc = cmd_solve(cfg);
    else if (cfg.kind == "cost") rc = cmd_cost(cfg);
    else if (cfg.kind == "sweep") rc = cmd_sweep(cfg);
    else if (cfg.kind == "hum") rc = cmd_hum(cfg);
    else if (cfg.kind == "theta") rc = cmd_theta(cfg);
    else if (cfg.kind == "agmon") rc = cmd_agmon(cfg);
    else if (cfg.kind == "dissipation") rc = cmd_dissipation(cfg);
    else if (cfg.kind == "carleman") rc = cmd_carleman(cfg);
    else rc = cmd_trend(cfg, inv.workers);

    RunManifest man;
    man.config_hash = fnv_hash(content);
    man.version = kVersion;
    man.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (const auto& entry : std::filesystem::directory_iterator(cfg.out_dir))
        if (entry.is_regular_file() && entry.path().filename() != "manifest.txt")
            man.artifacts.push_back(entry.path().filename().string());
    std::sort(man.artifacts.begin(), man.artifacts.end());
    man.write(out_path(cfg, "manifest.txt"));
    return rc;
}

}  // namespace

}  // namespace vanishcost::cli

// CLI11 lives in the global namespace; keep the heavy include out of cli.hpp.
#include "CLI11.hpp"

namespace vanishcost::cli {

int run_command(int argc, char** argv) {
    CLI::App app{"vanishcost: controllability-cost laboratory for vanishing-viscosity transport"};
    app.require_subcommand(1);

    Invocation inv;
    struct Leaf {
        CLI::App* cmd;
        std::string kind;
    };
    std::vector<Leaf> leaves;
    auto add_leaf = [&](CLI::App* parent, const std::string& name, const std::string& kind,
                        const std::string& desc) {
        CLI::App* c = parent->add_subcommand(name, desc);
        c->add_option("--config", inv.config_path, "experiment config file")
            ->required()
            ->check(CLI::ExistingFile);
        c->add_option("--out", inv.out_override, "output directory override");
        c->add_option("--workers", inv.workers, "worker threads for sweep rows")
            ->check(CLI::Range(1, 64));
        c->add_option("--seed", inv.seed, "seed for sampled constructions");
        leaves.push_back({c, kind});
    };

    auto* flow_cmd = app.add_subcommand("flow", "characteristic flow analysis");
    flow_cmd->require_subcommand(1);
    add_leaf(flow_cmd, "check-flushing", "flushing", "certify or refute the flushing condition");

    auto* pde_cmd = app.add_subcommand("pde", "adjoint solver");
    pde_cmd->require_subcommand(1);
    add_leaf(pde_cmd, "solve", "solve", "backward adjoint solve, TSV export");

    auto* cost_cmd = app.add_subcommand("cost", "controllability cost");
    cost_cmd->require_subcommand(1);
    add_leaf(cost_cmd, "estimate", "cost", "observability cost of one instance");
    add_leaf(cost_cmd, "sweep", "sweep", "cost sweep over an epsilon list");
    add_leaf(cost_cmd, "hum", "hum", "minimal-norm steering control");

    auto* ana_cmd = app.add_subcommand("analysis", "estimate machinery");
    ana_cmd->require_subcommand(1);
    add_leaf(ana_cmd, "theta", "theta", "flow-adapted Agmon weight construction");
    add_leaf(ana_cmd, "agmon", "agmon", "Agmon inequality check");
    add_leaf(ana_cmd, "dissipation", "dissipation", "annulus dissipation sweep");
    add_leaf(ana_cmd, "carleman", "carleman", "Carleman weights and functional");

    auto* trend_cmd = app.add_subcommand("trend", "theorem-scale experiments");
    trend_cmd->require_subcommand(1);
    add_leaf(trend_cmd, "theorem1", "theorem1-trend", "bounded-cost trend experiment");
    add_leaf(trend_cmd, "theorem2", "theorem2-trend", "blow-up trend experiment");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        for (const auto& leaf : leaves)
            if (leaf.cmd->parsed()) return dispatch(leaf.kind, inv);
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        switch (e.code()) {
            case ErrorCode::certificate_refusal: return 3;
            case ErrorCode::numerical_failure: return 4;
            default: return 2;
        }
    }
}

}  // namespace vanishcost::cli
