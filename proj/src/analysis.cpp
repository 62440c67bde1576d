#include "ritzfit/analysis.hpp"
#include "csv_util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <set>

namespace ritzfit {

ErrorBudget ErrorBudget::validate(std::vector<BudgetComponent> components) {
    std::set<std::string> labels;
    for (const auto& c : components) {
        if (c.label.empty()) throw ValidationError("budget component with empty label");
        if (!labels.insert(c.label).second) {
            throw ValidationError("duplicate budget label '" + c.label + "'");
        }
        if (!std::isfinite(c.value_mhz) || c.value_mhz < 0.0) {
            throw ValidationError("budget component '" + c.label +
                                  "' must be a finite non-negative value");
        }
    }
    ErrorBudget b;
    b.components_ = std::move(components);
    return b;
}

FrequencyMHz third_step_to_total(FrequencyMHz nu3_mhz, const PhysicalConstants& constants) {
    if (!std::isfinite(nu3_mhz) || nu3_mhz < 0.0) {
        throw DomainError("third_step_to_total: frequency must be finite and non-negative");
    }
    return nu3_mhz + constants.ground_offset_mhz;
}

ScanAggregate aggregate_scan_set(const ScanSet& set) {
    const std::size_t n = set.centers_mhz.size();
    if (n < 2) {
        throw ValidationError("scan set for n=" + std::to_string(set.n) + " has " +
                              std::to_string(n) + " centers; need at least 2");
    }
    ScanAggregate agg;
    for (double c : set.centers_mhz) agg.mean_mhz += c;
    agg.mean_mhz /= static_cast<double>(n);
    double ss = 0.0;
    for (double c : set.centers_mhz) {
        const double d = c - agg.mean_mhz;
        ss += d * d;
    }
    agg.std_mhz = std::sqrt(ss / static_cast<double>(n - 1));
    return agg;
}

FrequencyMHz total_error(const ErrorBudget& budget, FrequencyMHz round_to) {
    if (budget.empty()) throw ValidationError("error budget is empty");
    double ss = 0.0;
    for (const auto& c : budget.components()) ss += c.value_mhz * c.value_mhz;
    const double raw = std::sqrt(ss);
    if (!(round_to > 0.0)) return raw;
    return std::floor(raw / round_to + 0.5) * round_to;
}

ErrorBudget read_budget_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("line 1: empty budget file");
    const auto header = detail::split_csv(line);
    if (header.size() != 2 || header[0] != "label" || header[1] != "value_mhz") {
        throw ValidationError("line 1: expected header 'label,value_mhz'");
    }
    std::vector<BudgetComponent> components;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto f = detail::split_csv(line);
        if (f.size() != 2) {
            throw ValidationError("line " + std::to_string(line_no) +
                                  ": expected 2 fields, got " + std::to_string(f.size()));
        }
        components.push_back({f[0], detail::parse_double(f[1], "budget value", line_no)});
    }
    return ErrorBudget::validate(std::move(components));
}

ErrorBudget load_budget_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open budget file '" + path + "'");
    return read_budget_csv(in);
}

std::vector<ScanSet> read_scan_sets_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("line 1: empty scan-set file");
    const auto header = detail::split_csv(line);
    if (header.size() != 2 || header[0] != "n" || header[1] != "center_mhz") {
        throw ValidationError("line 1: expected header 'n,center_mhz'");
    }
    std::map<int, std::vector<double>> groups;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto f = detail::split_csv(line);
        if (f.size() != 2) {
            throw ValidationError("line " + std::to_string(line_no) +
                                  ": expected 2 fields, got " + std::to_string(f.size()));
        }
        const int n =
            static_cast<int>(detail::parse_long(f[0], "principal quantum number", line_no));
        if (n < 1) {
            throw ValidationError("line " + std::to_string(line_no) + ": n must be >= 1");
        }
        groups[n].push_back(detail::parse_double(f[1], "center", line_no));
    }
    if (groups.empty()) throw ValidationError("scan-set file has no data rows");
    std::vector<ScanSet> sets;
    for (auto& [n, centers] : groups) sets.push_back({n, std::move(centers)});
    return sets;
}

std::vector<ScanSet> load_scan_sets_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open scan-set file '" + path + "'");
    return read_scan_sets_csv(in);
}

}  // namespace ritzfit
