#pragma once

#include <iosfwd>
#include <string>

#include "adlab/linalg.hpp"

namespace adlab {

/// Simulation truth stored next to trajectory files so that estimates and
/// diagnostics can be run from files alone.
struct TruthRecord {
    std::size_t horizon = 0;
    std::size_t dim = 0;
    Vector beta0;
    double sigma = 0.0;
    Vector nu;
    double truth = 0.0;  // nu^T beta0
    double gamma = 0.0;  // LinUCB bonus, 0 for other policies
    double ridge_reg = 1.0;
    std::string policy;  // policy descriptor
};

/// "key = value" lines; vectors are comma-separated with 17 significant digits.
void write_truth(std::ostream& out, const TruthRecord& truth);
/// Throws DataError on missing keys or malformed values.
TruthRecord read_truth(std::istream& in);
void save_truth(const std::string& path, const TruthRecord& truth);
TruthRecord load_truth(const std::string& path);

}  // namespace adlab
