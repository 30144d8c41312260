#pragma once

#include <string>

#include "gridssl/pipeline.hpp"

namespace gridssl {

// Structured-text document covering every analysis in the result: per-unit
// spectral table, module clusters, distance curves, torus projections, and
// the commutation residuals for model runs.
std::string format_report(const EvalResult& result);
void write_report(const std::string& path, const EvalResult& result);

}  // namespace gridssl
