#pragma once

#include <string>

namespace ratlanczos {

enum class Termination { running, max_iterations, converged, lucky_breakdown, deflation_required };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::running: return "running";
    case Termination::max_iterations: return "max-iterations";
    case Termination::converged: return "converged";
    case Termination::lucky_breakdown: return "lucky-breakdown";
    case Termination::deflation_required: return "deflation-required";
  }
  return "unknown";
}

}  // namespace ratlanczos
