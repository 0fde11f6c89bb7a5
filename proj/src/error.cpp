#include "svc/error.hpp"

namespace svc {

DivergenceError::DivergenceError(std::int64_t step, const std::string& what)
    : Error("divergence at step " + std::to_string(step) + ": " + what),
      step_(step) {}

}  // namespace svc
