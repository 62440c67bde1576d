#pragma once

// Measurement bookkeeping around the fits: per-state scan aggregation,
// third-step to total-energy conversion, and the error-budget quadrature.

#include "ritzfit/core.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace ritzfit {

struct BudgetComponent {
    std::string label;
    FrequencyMHz value_mhz = 0.0;
};

/// Named, non-negative error components with unique labels.
class ErrorBudget {
public:
    static ErrorBudget validate(std::vector<BudgetComponent> components);
    const std::vector<BudgetComponent>& components() const { return components_; }
    bool empty() const { return components_.empty(); }

private:
    ErrorBudget() = default;
    std::vector<BudgetComponent> components_;
};

/// One state's repeated line-center measurements.
struct ScanSet {
    int n = 0;
    std::vector<FrequencyMHz> centers_mhz;
};

/// nu3 + ground_offset: lifts a third-step transition frequency to the
/// total 5S_1/2 c.o.m. energy.
FrequencyMHz third_step_to_total(FrequencyMHz nu3_mhz,
                                 const PhysicalConstants& constants = {});

struct ScanAggregate {
    FrequencyMHz mean_mhz = 0.0;
    FrequencyMHz std_mhz = 0.0;  // sample (N-1) standard deviation
};

/// Mean and sample standard deviation of a scan set. Requires >= 2 centers.
ScanAggregate aggregate_scan_set(const ScanSet& set);

/// Quadrature sum sqrt(sum c_i^2), rounded half-up to `round_to`
/// (default 0.1 MHz; pass round_to <= 0 for no rounding).
FrequencyMHz total_error(const ErrorBudget& budget, FrequencyMHz round_to = 0.1);

// Budget file: CSV `label,value_mhz`. Scan-set file: CSV `n,center_mhz`,
// rows grouped by n in any order; returned sets are n-ascending.
ErrorBudget read_budget_csv(std::istream& in);
ErrorBudget load_budget_file(const std::string& path);
std::vector<ScanSet> read_scan_sets_csv(std::istream& in);
std::vector<ScanSet> load_scan_sets_file(const std::string& path);

}  // namespace ritzfit
