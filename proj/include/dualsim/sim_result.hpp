#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace dualsim {

struct TraceEvent {
  std::size_t cycle = 0;
  std::string what;
};

struct SimResult {
  std::size_t D = 0;        // total cycles
  std::size_t stalls = 0;   // cycles lost to conflicts or backpressure
  std::size_t busy_cycles = 0;        // summed over all units
  std::vector<double> per_unit_busy;  // busy fraction per unit, in [0, 1]
  std::vector<TraceEvent> trace;      // filled only when tracing is requested

  double R() const { return D == 0 ? 0.0 : 1.0 / static_cast<double>(D); }
};

}  // namespace dualsim
