#pragma once

#include <stdexcept>
#include <string>

namespace mdtoc {

// One exception type for the whole library; the code tells callers which
// contract was violated. Codes are named after the failure surface, not the
// module that raised them.
enum class Errc {
  // tree
  CapacityExceeded,
  InvalidParent,
  ChainTerminated,
  UnknownNode,
  // prompt rendering / parsing
  MissingBinding,
  ParseFailure,
  EmptyAnswer,
  // engine phases
  PlanningFailed,
  MonitoringFailed,
  NoValidAnswers,
  SecondFixPass,
  // backends
  BackendError,
  AuthError,
  RateLimited,
  ScriptParseError,
  ScriptExhausted,
  // tasks
  ParseError,
  SchemaError,
  // cli
  ConfigError,
  TraceCorrupt,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::CapacityExceeded: return "CapacityExceeded";
    case Errc::InvalidParent: return "InvalidParent";
    case Errc::ChainTerminated: return "ChainTerminated";
    case Errc::UnknownNode: return "UnknownNode";
    case Errc::MissingBinding: return "MissingBinding";
    case Errc::ParseFailure: return "ParseFailure";
    case Errc::EmptyAnswer: return "EmptyAnswer";
    case Errc::PlanningFailed: return "PlanningFailed";
    case Errc::MonitoringFailed: return "MonitoringFailed";
    case Errc::NoValidAnswers: return "NoValidAnswers";
    case Errc::SecondFixPass: return "SecondFixPass";
    case Errc::BackendError: return "BackendError";
    case Errc::AuthError: return "AuthError";
    case Errc::RateLimited: return "RateLimited";
    case Errc::ScriptParseError: return "ScriptParseError";
    case Errc::ScriptExhausted: return "ScriptExhausted";
    case Errc::ParseError: return "ParseError";
    case Errc::SchemaError: return "SchemaError";
    case Errc::ConfigError: return "ConfigError";
    case Errc::TraceCorrupt: return "TraceCorrupt";
  }
  return "?";
}

class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const { return code_; }

  // Pipeline phase this error escaped from ("planning", "monitoring",
  // "reviewing"); empty until the engine tags it.
  const std::string& phase() const { return phase_; }
  void set_phase(const std::string& p) { phase_ = p; }

private:
  Errc code_;
  std::string phase_;
};

[[noreturn]] inline void raise(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace mdtoc
