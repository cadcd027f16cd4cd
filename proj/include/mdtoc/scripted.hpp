#pragma once

#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mdtoc/chat.hpp"

namespace mdtoc {

// One scripted reply. An entry without a match key is consumed strictly in
// order; substring/hash keys match the first unconsumed entry that accepts
// the request. `repeat` entries never get consumed.
struct ScriptEntry {
  std::optional<Role> role;
  std::optional<std::string> match_substring;
  std::optional<std::string> match_hash;
  std::string reply;
  Usage usage;
  bool repeat = false;
};

// Deterministic mock transport: same script + same request sequence always
// produces the same replies and usages.
class ScriptedBackend final : public Backend {
public:
  explicit ScriptedBackend(std::vector<ScriptEntry> entries)
      : entries_(std::move(entries)), consumed_(entries_.size(), false) {}

  static std::vector<ScriptEntry> parse_script(const nlohmann::json& doc) {
    std::vector<ScriptEntry> entries;
    try {
      if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_array())
        raise(Errc::ScriptParseError, "script must be an object with an 'entries' array");
      for (const auto& je : doc["entries"]) {
        ScriptEntry e;
        if (je.contains("role")) e.role = role_from_name(je.at("role").get<std::string>());
        if (je.contains("match") && !je.at("match").is_null()) {
          const auto& m = je.at("match");
          if (m.contains("substring")) e.match_substring = m.at("substring").get<std::string>();
          if (m.contains("hash")) e.match_hash = m.at("hash").get<std::string>();
        }
        e.reply = je.at("reply").get<std::string>();
        if (je.contains("usage")) {
          e.usage.prompt_tokens = je.at("usage").value("prompt", 0);
          e.usage.completion_tokens = je.at("usage").value("completion", 0);
        }
        e.repeat = je.value("repeat", false);
        entries.push_back(std::move(e));
      }
    } catch (const nlohmann::json::exception& ex) {
      raise(Errc::ScriptParseError, std::string("malformed script entry: ") + ex.what());
    }
    return entries;
  }

  static std::shared_ptr<ScriptedBackend> from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(Errc::ScriptParseError, "cannot open script file " + path);
    nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) raise(Errc::ScriptParseError, "script file is not valid JSON: " + path);
    return std::make_shared<ScriptedBackend>(parse_script(doc));
  }

  SendResult send(const ChatRequest& request) override {
    std::string text = request_text(request);
    std::string hash = request_fingerprint(request);
    std::lock_guard<std::mutex> lock(mu_);
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (consumed_[i]) continue;
      const ScriptEntry& e = entries_[i];
      if (e.role && *e.role != request.role) continue;
      if (e.match_hash && *e.match_hash != hash) continue;
      if (e.match_substring && text.find(*e.match_substring) == std::string::npos) continue;
      if (!e.repeat) consumed_[i] = true;
      return SendResult::success(e.reply, e.usage);
    }
    raise(Errc::ScriptExhausted, "no scripted reply for " + std::string(role_name(request.role)) +
                                     " request " + hash + " (" +
                                     text.substr(0, std::min<std::size_t>(text.size(), 80)) + ")");
  }

private:
  std::vector<ScriptEntry> entries_;
  std::vector<bool> consumed_;
  std::mutex mu_;
};

// Wraps a live backend and records every successful exchange as a hash-keyed
// script entry; the emitted script replays to an identical run.
class RecordingBackend final : public Backend {
public:
  explicit RecordingBackend(std::shared_ptr<Backend> inner) : inner_(std::move(inner)) {}

  SendResult send(const ChatRequest& request) override {
    SendResult r = inner_->send(request);
    if (r.status == SendResult::Status::Ok) {
      std::lock_guard<std::mutex> lock(mu_);
      ScriptEntry e;
      e.role = request.role;
      e.match_hash = request_fingerprint(request);
      e.reply = r.text;
      e.usage = r.usage;
      recorded_.push_back(std::move(e));
    }
    return r;
  }

  nlohmann::json script() const {
    std::lock_guard<std::mutex> lock(mu_);
    nlohmann::json entries = nlohmann::json::array();
    for (const ScriptEntry& e : recorded_) {
      entries.push_back(nlohmann::json{
          {"role", role_name(*e.role)},
          {"match", {{"hash", *e.match_hash}}},
          {"reply", e.reply},
          {"usage",
           {{"prompt", e.usage.prompt_tokens}, {"completion", e.usage.completion_tokens}}}});
    }
    return nlohmann::json{{"entries", entries}};
  }

private:
  std::shared_ptr<Backend> inner_;
  std::vector<ScriptEntry> recorded_;
  mutable std::mutex mu_;
};

}  // namespace mdtoc
