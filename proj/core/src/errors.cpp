#include "grids/errors.hpp"

namespace grids {

ConfigParseError::ConfigParseError(std::size_t line, const std::string& message)
    : Error("line " + std::to_string(line) + ": " + message), line_(line) {}

DivergenceError::DivergenceError(std::size_t step, const std::string& message)
    : NumericError("step " + std::to_string(step) + ": " + message), step_(step) {}

}  // namespace grids
