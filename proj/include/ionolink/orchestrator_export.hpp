#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "ionolink/orchestrator.hpp"

namespace ionolink::run {

/// Trace export in the documented four-column layout.
inline void write_trace_csv(const std::vector<synth::EpochSample>& trace,
                            const std::string& path) {
  std::ofstream out(path);
  require(out.good(), Errc::InvalidConfig, "cannot write trace '" + path + "'");
  out << "t_s,y_rad,truth_dvtec_tecu,truth_bias_rad\n";
  char buf[160];
  for (const auto& s : trace) {
    std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,%.10g\n", s.t_s, s.y_rad,
                  s.truth_dvtec_tecu, s.truth_bias_rad);
    out << buf;
  }
}

}  // namespace ionolink::run
