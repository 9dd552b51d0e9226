#include "qbspde/field_io.hpp"

#include <array>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "qbspde/errors.hpp"

namespace qbspde {

namespace {

constexpr char kMagic[8] = {'Q', 'B', 'S', 'P', 'D', 'E', '0', '1'};

void put_f64(std::ostream& os, double v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void put_i32(std::ostream& os, std::int32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
double get_f64(std::istream& is) {
    double v;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
std::int32_t get_i32(std::istream& is) {
    std::int32_t v;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

namespace {
void write_csv_preamble(std::ostream& os, const SolutionField& field);
}

void write_field_csv(const SolutionField& field, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for write: " + path);
    const GridStack& g = field.grid;
    const int d = g.dim();

    write_csv_preamble(os, field);
    os << "t";
    for (int a = 0; a < d; ++a) os << ",x" << (a + 1);
    if (g.noise()) os << ",w";
    os << ",u";
    for (int c = 0; c < field.d0; ++c) os << ",q" << (c + 1);
    os << "\n";

    std::array<double, 2> xbuf{};
    for (int level = 0; level <= g.n_time(); ++level) {
        for (int s = 0; s < g.space_points(); ++s) {
            g.space_coords(s, std::span<double>(xbuf.data(), static_cast<std::size_t>(d)));
            for (int k = 0; k < g.noise_points(); ++k) {
                os << fmt17(g.time(level));
                for (int a = 0; a < d; ++a) os << ',' << fmt17(xbuf[static_cast<std::size_t>(a)]);
                if (g.noise()) os << ',' << fmt17(g.noise_coord(k));
                os << ',' << fmt17(field.u[field.uidx(level, s, k)]);
                for (int c = 0; c < field.d0; ++c)
                    os << ',' << fmt17(field.q_value(level, s, k, c));
                os << "\n";
            }
        }
    }
    if (!os) throw IoError("write failed: " + path);
}

namespace {

// Grid geometry rides in a comment-style preamble so CSV round-trips without
// a sidecar file.
void write_csv_preamble(std::ostream& os, const SolutionField& field) {
    const GridStack& g = field.grid;
    os << "# qbspde-field"
       << " mode=" << (field.mode == CoefficientMode::deterministic ? "det" : "lift")
       << " d=" << g.dim() << " d0=" << field.d0;
    for (int a = 0; a < g.dim(); ++a) {
        const Axis& ax = g.space()[static_cast<std::size_t>(a)];
        os << " axis=" << ax.n << ':' << fmt17(ax.lo) << ':' << fmt17(ax.hi);
    }
    if (g.noise()) os << " noise=" << g.noise()->n << ':' << fmt17(g.noise()->hi);
    os << " T=" << fmt17(g.horizon()) << " nt=" << g.n_time() << "\n";
}

}  // namespace

void write_field_binary(const SolutionField& field, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);
    os.write(kMagic, 8);
    const GridStack& g = field.grid;
    put_i32(os, field.mode == CoefficientMode::deterministic ? 0 : 1);
    put_i32(os, g.dim());
    put_i32(os, field.d0);
    for (int a = 0; a < g.dim(); ++a) {
        const Axis& ax = g.space()[static_cast<std::size_t>(a)];
        put_i32(os, ax.n);
        put_f64(os, ax.lo);
        put_f64(os, ax.hi);
    }
    put_i32(os, g.noise() ? g.noise()->n : 0);
    put_f64(os, g.noise() ? g.noise()->hi : 0.0);
    put_f64(os, g.horizon());
    put_i32(os, g.n_time());
    os.write(reinterpret_cast<const char*>(field.u.data()),
             static_cast<std::streamsize>(field.u.size() * 8));
    put_i32(os, field.q.empty() ? 0 : 1);
    if (!field.q.empty())
        os.write(reinterpret_cast<const char*>(field.q.data()),
                 static_cast<std::streamsize>(field.q.size() * 8));
    if (!os) throw IoError("write failed: " + path);
}

SolutionField read_field_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for read: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw IoError("bad magic in " + path);
    const int mode = get_i32(is);
    const int d = get_i32(is);
    const int d0 = get_i32(is);
    std::vector<Axis> axes;
    for (int a = 0; a < d; ++a) {
        Axis ax;
        ax.n = get_i32(is);
        ax.lo = get_f64(is);
        ax.hi = get_f64(is);
        axes.push_back(ax);
    }
    const int nw = get_i32(is);
    const double wmax = get_f64(is);
    const double T = get_f64(is);
    const int nt = get_i32(is);
    std::optional<Axis> noise;
    if (nw > 0) noise = Axis{nw, -wmax, wmax};
    GridStack grid(std::move(axes), noise, T, nt);
    SolutionField field(std::move(grid),
                        mode == 0 ? CoefficientMode::deterministic : CoefficientMode::markovian_lift,
                        d0);
    is.read(reinterpret_cast<char*>(field.u.data()),
            static_cast<std::streamsize>(field.u.size() * 8));
    const int has_q = get_i32(is);
    if (has_q) {
        if (field.q.empty())
            field.q.assign(field.u.size() * static_cast<std::size_t>(d0), 0.0);
        is.read(reinterpret_cast<char*>(field.q.data()),
                static_cast<std::streamsize>(field.q.size() * 8));
    }
    if (!is) throw IoError("truncated field file: " + path);
    return field;
}

SolutionField read_field_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open for read: " + path);
    std::string line;
    if (!std::getline(is, line) || line.rfind("# qbspde-field", 0) != 0)
        throw IoError("missing field preamble in " + path);

    std::istringstream head(line.substr(14));
    std::string tok;
    int d = 1, d0 = 1, nt = 0, nw = 0;
    double T = 1.0, wmax = 0.0;
    bool lift = false;
    std::vector<Axis> axes;
    while (head >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "mode") lift = (val == "lift");
        else if (key == "d") d = std::stoi(val);
        else if (key == "d0") d0 = std::stoi(val);
        else if (key == "axis") {
            Axis ax;
            std::sscanf(val.c_str(), "%d:%lf:%lf", &ax.n, &ax.lo, &ax.hi);
            axes.push_back(ax);
        } else if (key == "noise") {
            std::sscanf(val.c_str(), "%d:%lf", &nw, &wmax);
        } else if (key == "T") T = std::stod(val);
        else if (key == "nt") nt = std::stoi(val);
    }
    (void)d;
    std::getline(is, line);  // column header
    std::optional<Axis> noise;
    if (nw > 0) noise = Axis{nw, -wmax, wmax};
    GridStack grid(std::move(axes), noise, T, nt);
    SolutionField field(std::move(grid),
                        lift ? CoefficientMode::markovian_lift : CoefficientMode::deterministic, d0);

    const GridStack& g = field.grid;
    for (int level = 0; level <= g.n_time(); ++level)
        for (int s = 0; s < g.space_points(); ++s)
            for (int k = 0; k < g.noise_points(); ++k) {
                if (!std::getline(is, line)) throw IoError("truncated CSV: " + path);
                std::istringstream row(line);
                std::string cell;
                std::vector<double> cells;
                while (std::getline(row, cell, ',')) cells.push_back(std::stod(cell));
                const std::size_t base = 1 + static_cast<std::size_t>(g.dim()) + (g.noise() ? 1 : 0);
                if (cells.size() < base + 1 + static_cast<std::size_t>(field.d0))
                    throw IoError("short CSV row in " + path);
                field.u[field.uidx(level, s, k)] = cells[base];
                if (!field.q.empty())
                    for (int c = 0; c < field.d0; ++c)
                        field.q[field.qidx(level, s, k, c)] =
                            cells[base + 1 + static_cast<std::size_t>(c)];
            }
    return field;
}

void write_field(const SolutionField& field, const std::string& path) {
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0)
        write_field_csv(field, path);
    else
        write_field_binary(field, path);
}

}  // namespace qbspde
