#include "proplab/click_model.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace proplab {

PropensitySurface PropensitySurface::from_raw(std::vector<double> raw) {
    if (raw.empty()) throw config_error("empty propensity surface");
    const double anchor = raw.front();
    if (!(anchor > 0.0)) throw config_error("rank-1 propensity must be positive");
    for (auto& v : raw) v /= anchor;
    raw.front() = 1.0;  // bit-exact anchor
    for (size_t i = 0; i < raw.size(); ++i) {
        if (!(raw[i] > 0.0) || raw[i] > 1.0) {
            throw config_error("propensity at rank " + std::to_string(i + 1) +
                               " outside (0,1] after normalization");
        }
    }
    return PropensitySurface(std::move(raw));
}

PropensitySurface exponential_surface(int page_size, const DecayParams& params) {
    if (page_size < 1) throw config_error("page_size must be >= 1");
    if (params.gamma < 0.0) throw config_error("gamma must be >= 0");
    std::vector<double> v(static_cast<size_t>(page_size));
    for (int p = 1; p <= page_size; ++p) {
        v[static_cast<size_t>(p) - 1] = 1.0 / std::pow(static_cast<double>(p), params.gamma);
    }
    return PropensitySurface::from_raw(std::move(v));
}

PropensitySurface grid_surface(const GridLayout& layout,
                               const GridSurfaceParams& params) {
    if (static_cast<int>(params.row_factors.size()) != layout.rows ||
        static_cast<int>(params.column_profiles.size()) != layout.rows) {
        throw config_error("grid surface params do not match layout rows");
    }
    std::vector<double> v;
    v.reserve(static_cast<size_t>(layout.page_size()));
    for (int r = 0; r < layout.rows; ++r) {
        const auto& profile = params.column_profiles[static_cast<size_t>(r)];
        if (static_cast<int>(profile.size()) != layout.columns) {
            throw config_error("grid surface profile for row " +
                               std::to_string(r) + " does not match columns");
        }
        for (int c = 0; c < layout.columns; ++c) {
            v.push_back(params.row_factors[static_cast<size_t>(r)] *
                        profile[static_cast<size_t>(c)]);
        }
    }
    return PropensitySurface::from_raw(std::move(v));
}

double click_probability(double relevance, const PropensitySurface& surface,
                         int rank) {
    return relevance * surface.at(rank);
}

bool sample_click(double p_click, RngStream& rng) {
    return rng.bernoulli(p_click);
}

void write_surface_csv(std::ostream& os, const PropensitySurface& surface,
                       const GridLayout& layout) {
    os << "rank,row,col,propensity\n";
    for (int p = 1; p <= surface.page_size(); ++p) {
        const GridCell cell = rank_to_cell(p, layout);
        char buf[32];
        auto res = std::to_chars(buf, buf + sizeof(buf), surface.at(p));
        os << p << ',' << cell.row << ',' << cell.column << ','
           << std::string_view(buf, static_cast<size_t>(res.ptr - buf)) << '\n';
    }
}

PropensitySurface read_surface_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw io_error("empty surface CSV");
    std::vector<double> v;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        for (int i = 0; i < 4 && std::getline(ss, field, ','); ++i) {
            if (i == 3) v.push_back(std::stod(field));
        }
    }
    return PropensitySurface::from_raw(std::move(v));
}

PropensitySurface read_surface_csv_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open surface CSV: " + path);
    return read_surface_csv(is);
}

}  // namespace proplab
