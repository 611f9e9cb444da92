#include "snp/sweep.hpp"

#include <cmath>
#include <sstream>

#include "snp/config.hpp"
#include "snp/errors.hpp"

namespace snp {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

bool parse_number(const std::string& s, double& out) {
    try {
        size_t pos = 0;
        out = std::stod(s, &pos);
        return pos == s.size();
    } catch (const std::exception&) {
        return false;
    }
}

}  // namespace

SweepAxis SweepAxis::parse(const std::string& arg) {
    size_t eq = arg.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("sweep spec must be path=values, got '" + arg + "'");
    SweepAxis axis;
    axis.path = trim(arg.substr(0, eq));
    std::string rhs = trim(arg.substr(eq + 1));
    if (rhs.empty()) throw ConfigError("sweep spec '" + arg + "' has no values");

    // start:stop:step range form.
    size_t c1 = rhs.find(':');
    size_t c2 = c1 == std::string::npos ? std::string::npos : rhs.find(':', c1 + 1);
    if (c1 != std::string::npos && c2 != std::string::npos &&
        rhs.find(':', c2 + 1) == std::string::npos) {
        double start, stop, step;
        if (parse_number(trim(rhs.substr(0, c1)), start) &&
            parse_number(trim(rhs.substr(c1 + 1, c2 - c1 - 1)), stop) &&
            parse_number(trim(rhs.substr(c2 + 1)), step)) {
            if (step == 0.0) throw ConfigError("sweep range step must be nonzero: '" + arg + "'");
            if ((stop - start) * step < 0.0)
                throw ConfigError("sweep range never reaches stop: '" + arg + "'");
            const double eps = std::fabs(step) * 1e-9;
            for (int k = 0;; ++k) {
                double v = start + k * step;
                if (step > 0 ? v > stop + eps : v < stop - eps) break;
                // 12 significant digits: drops accumulation artifacts
                // (0.1 + 2*0.2 -> "0.5", not "0.5000000000000001").
                char buf[40];
                std::snprintf(buf, sizeof buf, "%.12g", v);
                axis.values.emplace_back(buf);
            }
            return axis;
        }
        throw ConfigError("sweep range must be numeric start:stop:step: '" + arg + "'");
    }

    std::string cur;
    std::istringstream ss(rhs);
    while (std::getline(ss, cur, ',')) {
        cur = trim(cur);
        if (cur.empty()) throw ConfigError("empty value in sweep spec '" + arg + "'");
        axis.values.push_back(cur);
    }
    if (axis.values.empty()) throw ConfigError("sweep spec '" + arg + "' has no values");
    return axis;
}

std::string SweepCell::key() const {
    if (assignments.empty()) return "base";
    std::string out;
    for (size_t i = 0; i < assignments.size(); ++i) {
        if (i) out += ",";
        out += assignments[i].first + "=" + assignments[i].second;
    }
    for (char& c : out) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-' || c == '=' ||
                        c == ',' || c == '+';
        if (!ok) c = '_';
    }
    return out;
}

std::vector<SweepCell> expand_sweep(const std::vector<SweepAxis>& axes) {
    std::vector<SweepCell> cells{SweepCell{}};
    for (const SweepAxis& axis : axes) {
        std::vector<SweepCell> next;
        next.reserve(cells.size() * axis.values.size());
        for (const SweepCell& cell : cells) {
            for (const std::string& v : axis.values) {
                SweepCell extended = cell;
                extended.assignments.emplace_back(axis.path, v);
                next.push_back(std::move(extended));
            }
        }
        cells = std::move(next);
    }
    return cells;
}

}  // namespace snp
