#pragma once

#include <optional>
#include <string>
#include <utility>

#include "mdtoc/errors.hpp"

namespace mdtoc {

// Evaluator verdict: pass/fail plus the failure explanation the generator is
// re-conditioned on. A failing verdict always carries a non-empty reason.
struct EvalVerdict {
  bool pass = false;
  std::optional<std::string> reason;

  static EvalVerdict passing() { return {true, std::nullopt}; }
  static EvalVerdict failing(std::string why) {
    if (why.empty()) raise(Errc::ParseFailure, "failing verdict requires a reason");
    return {false, std::move(why)};
  }
};

inline bool operator==(const EvalVerdict& a, const EvalVerdict& b) {
  return a.pass == b.pass && a.reason == b.reason;
}

}  // namespace mdtoc
