#include "pxbh/error.hpp"

#include <sstream>

namespace pxbh {

namespace {

template <typename Seq>
std::string join_ids(const Seq& ids) {
    std::ostringstream out;
    bool first = true;
    for (const auto id : ids) {
        out << (first ? "" : ",") << id;
        first = false;
    }
    return out.str();
}

}  // namespace

DeadlockError::DeadlockError(const std::string& context, std::vector<std::uint64_t> unsatisfied)
    : Error(context + ": deadlock, unsatisfied gids [" + join_ids(unsatisfied) + "]"),
      unsatisfied_(std::move(unsatisfied)) {}

DuplicatePositionError::DuplicatePositionError(std::vector<std::size_t> indices)
    : Error("duplicate particle positions at indices [" + join_ids(indices) + "]"),
      indices_(std::move(indices)) {}

ParseError::ParseError(std::size_t line, const std::string& what)
    : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

NumericalBlowupError::NumericalBlowupError(std::uint64_t iteration, const std::string& what)
    : Error("iteration " + std::to_string(iteration) + ": " + what), iteration_(iteration) {}

}  // namespace pxbh
