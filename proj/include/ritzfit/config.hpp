#pragma once

// key=value pipeline configuration shared by the CLI subcommands.

#include "ritzfit/core.hpp"
#include "ritzfit/ritz.hpp"

#include <iosfwd>
#include <string>

namespace ritzfit {

struct PipelineConfig {
    PhysicalConstants constants;
    double default_sigma_mhz = 8.0;  // applied when a level table omits sigmas
    int method = 3;
    int order = 3;  // defect coefficients for methods 1-2; method 3 is fixed at 2
    bool scale_sigmas_by_reduced_chi2 = true;
    TnClosure tn_closure = TnClosure::MeasuredEnergy;
    std::string out_dir = ".";
};

/// Parses `key=value` lines ('#' comments, blank lines allowed) on top of
/// `base`. Keys: rydberg_rb85_mhz, ground_offset_mhz, default_sigma_mhz,
/// method, order, scale_sigmas_by_reduced_chi2, tn_closure
/// (data | self_consistent), out_dir. Unknown keys are rejected.
PipelineConfig parse_config(std::istream& in, const PipelineConfig& base = {});
PipelineConfig load_config_file(const std::string& path, const PipelineConfig& base = {});

}  // namespace ritzfit
