#include "ritzfit/core.hpp"
#include "csv_util.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace ritzfit {

namespace detail {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(trim(cur));
    return out;
}

double parse_double(const std::string& token, const std::string& what, int line_no) {
    const std::string t = trim(token);
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size() || !std::isfinite(v)) {
        throw ValidationError("line " + std::to_string(line_no) + ": bad " + what +
                              " '" + token + "'");
    }
    return v;
}

long parse_long(const std::string& token, const std::string& what, int line_no) {
    const std::string t = trim(token);
    char* end = nullptr;
    const long v = std::strtol(t.c_str(), &end, 10);
    if (t.empty() || end != t.c_str() + t.size()) {
        throw ValidationError("line " + std::to_string(line_no) + ": bad " + what +
                              " '" + token + "'");
    }
    return v;
}

std::string format_trimmed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
    std::string s(buf);
    const auto dot = s.find('.');
    if (dot != std::string::npos) {
        auto last = s.find_last_not_of('0');
        if (last == dot) ++last;  // keep one decimal
        s.erase(last + 1);
    }
    return s;
}

}  // namespace detail

FrequencyMHz LevelDataset::max_energy_mhz() const {
    double m = levels_.front().energy_mhz;
    for (const auto& l : levels_) m = std::max(m, l.energy_mhz);
    return m;
}

LevelDataset LevelDataset::filtered(int n_min, int n_max) const {
    std::vector<MeasuredLevel> keep;
    for (const auto& l : levels_) {
        if (l.n >= n_min && l.n <= n_max) keep.push_back(l);
    }
    if (keep.empty()) {
        throw ValidationError("no levels with n in [" + std::to_string(n_min) + ", " +
                              std::to_string(n_max) + "]");
    }
    return validate_dataset(std::move(keep));
}

LevelDataset validate_dataset(std::vector<MeasuredLevel> raw) {
    if (raw.empty()) throw ValidationError("level dataset is empty");
    std::sort(raw.begin(), raw.end(),
              [](const MeasuredLevel& a, const MeasuredLevel& b) { return a.n < b.n; });
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const auto& l = raw[i];
        if (l.n < 1) throw ValidationError("level n=" + std::to_string(l.n) + ": n must be >= 1");
        if (!std::isfinite(l.energy_mhz) || l.energy_mhz <= 0.0) {
            throw ValidationError("level n=" + std::to_string(l.n) +
                                  ": energy must be finite and positive");
        }
        if (!std::isfinite(l.sigma_mhz) || l.sigma_mhz <= 0.0) {
            throw ValidationError("level n=" + std::to_string(l.n) + ": sigma must be > 0");
        }
        if (i > 0 && raw[i - 1].n == l.n) {
            throw ValidationError("duplicate level n=" + std::to_string(l.n));
        }
    }
    LevelDataset out;
    out.levels_ = std::move(raw);
    return out;
}

LevelDataset read_level_csv(std::istream& in, double default_sigma_mhz) {
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("line 1: empty level table");
    const auto header = detail::split_csv(line);
    bool has_sigma = false;
    if (header.size() == 3 && header[0] == "n" && header[1] == "energy_mhz" &&
        header[2] == "sigma_mhz") {
        has_sigma = true;
    } else if (header.size() == 2 && header[0] == "n" && header[1] == "energy_mhz") {
        has_sigma = false;
    } else {
        throw ValidationError("line 1: expected header 'n,energy_mhz,sigma_mhz' or "
                              "'n,energy_mhz'");
    }

    std::vector<MeasuredLevel> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto f = detail::split_csv(line);
        if (f.size() != (has_sigma ? 3u : 2u)) {
            throw ValidationError("line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(has_sigma ? 3 : 2) + " fields, got " +
                                  std::to_string(f.size()));
        }
        MeasuredLevel l;
        l.n = static_cast<int>(detail::parse_long(f[0], "principal quantum number", line_no));
        l.energy_mhz = detail::parse_double(f[1], "energy", line_no);
        l.sigma_mhz = has_sigma ? detail::parse_double(f[2], "sigma", line_no)
                                : default_sigma_mhz;
        rows.push_back(l);
    }
    return validate_dataset(std::move(rows));
}

LevelDataset load_level_file(const std::string& path, double default_sigma_mhz) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open level table '" + path + "'");
    return read_level_csv(in, default_sigma_mhz);
}

void write_level_csv(std::ostream& out, const LevelDataset& dataset) {
    out << "n,energy_mhz,sigma_mhz\n";
    char buf[64];
    for (const auto& l : dataset.levels()) {
        std::snprintf(buf, sizeof(buf), "%.1f", l.energy_mhz);
        out << l.n << ',' << buf << ',' << detail::format_trimmed(l.sigma_mhz, 4) << '\n';
    }
}

}  // namespace ritzfit
