#include "ritzfit/config.hpp"
#include "csv_util.hpp"

#include <cmath>
#include <fstream>
#include <istream>

namespace ritzfit {

namespace {

bool parse_bool(const std::string& value, int line_no) {
    if (value == "true" || value == "1" || value == "on") return true;
    if (value == "false" || value == "0" || value == "off") return false;
    throw ValidationError("line " + std::to_string(line_no) + ": bad boolean '" + value + "'");
}

}  // namespace

PipelineConfig parse_config(std::istream& in, const PipelineConfig& base) {
    PipelineConfig cfg = base;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;

        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("line " + std::to_string(line_no) +
                                  ": expected key=value, got '" + line + "'");
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));

        if (key == "rydberg_rb85_mhz") {
            cfg.constants.rydberg_rb85_mhz = detail::parse_double(value, key, line_no);
        } else if (key == "ground_offset_mhz") {
            cfg.constants.ground_offset_mhz = detail::parse_double(value, key, line_no);
        } else if (key == "default_sigma_mhz") {
            cfg.default_sigma_mhz = detail::parse_double(value, key, line_no);
            if (!(cfg.default_sigma_mhz > 0.0)) {
                throw ValidationError("line " + std::to_string(line_no) +
                                      ": default_sigma_mhz must be > 0");
            }
        } else if (key == "method") {
            const long m = detail::parse_long(value, key, line_no);
            if (m < 1 || m > 3) {
                throw ValidationError("line " + std::to_string(line_no) +
                                      ": method must be 1, 2 or 3");
            }
            cfg.method = static_cast<int>(m);
        } else if (key == "order") {
            const long o = detail::parse_long(value, key, line_no);
            if (o < 1 || o > 3) {
                throw ValidationError("line " + std::to_string(line_no) +
                                      ": order must be 1, 2 or 3");
            }
            cfg.order = static_cast<int>(o);
        } else if (key == "scale_sigmas_by_reduced_chi2") {
            cfg.scale_sigmas_by_reduced_chi2 = parse_bool(value, line_no);
        } else if (key == "tn_closure") {
            if (value == "data") {
                cfg.tn_closure = TnClosure::MeasuredEnergy;
            } else if (value == "self_consistent") {
                cfg.tn_closure = TnClosure::SelfConsistent;
            } else {
                throw ValidationError("line " + std::to_string(line_no) +
                                      ": tn_closure must be 'data' or 'self_consistent'");
            }
        } else if (key == "out_dir") {
            cfg.out_dir = value;
        } else {
            throw ValidationError("line " + std::to_string(line_no) + ": unknown key '" +
                                  key + "'");
        }
    }
    return cfg;
}

PipelineConfig load_config_file(const std::string& path, const PipelineConfig& base) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file '" + path + "'");
    return parse_config(in, base);
}

}  // namespace ritzfit
