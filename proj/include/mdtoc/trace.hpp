#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "mdtoc/chat.hpp"
#include "mdtoc/ledger.hpp"
#include "mdtoc/scripted.hpp"

namespace mdtoc {

// Event stream for one unit of work (the planning pass, one calculation
// chain, the review pass). Events are buffered locally so concurrent chains
// never interleave; the engine flushes whole streams in a deterministic
// order at phase boundaries. Sequence numbers are monotone per stream.
class TraceStream {
public:
  TraceStream(Phase phase, std::string stream_id)
      : phase_(phase), stream_id_(std::move(stream_id)) {}

  Phase phase() const { return phase_; }
  const std::string& stream_id() const { return stream_id_; }

  void emit(const std::string& event_kind, nlohmann::json fields) {
    fields["event"] = event_kind;
    fields["phase"] = phase_name(phase_);
    fields["stream"] = stream_id_;
    fields["seq"] = seq_++;
    lines_.push_back(fields.dump());
  }

  void emit_prompt(const ChatRequest& request, TemplateId template_id) {
    nlohmann::json messages = nlohmann::json::array();
    for (const ChatMessage& m : request.messages)
      messages.push_back({{"speaker", m.speaker}, {"text", m.text}});
    emit("prompt", {{"role", role_name(request.role)},
                    {"model", request.model},
                    {"template", template_name(template_id)},
                    {"request", request_fingerprint(request)},
                    {"messages", messages}});
  }

  void emit_response(const ChatExchange& ex) {
    nlohmann::json fields{{"role", role_name(ex.role)},
                          {"model", ex.model},
                          {"text", ex.response},
                          {"usage",
                           {{"prompt_tokens", ex.usage.prompt_tokens},
                            {"completion_tokens", ex.usage.completion_tokens}}},
                          {"attempt", ex.attempt}};
    if (!ex.ok) fields["error"] = ex.error;
    emit("response", fields);
  }

  const std::vector<std::string>& lines() const { return lines_; }
  void clear() { lines_.clear(); }

private:
  Phase phase_;
  std::string stream_id_;
  std::uint64_t seq_ = 0;
  std::vector<std::string> lines_;
};

// Append-only JSON-lines sink. flush_stream appends a whole stream buffer
// atomically with respect to other writers.
class TraceWriter {
public:
  virtual ~TraceWriter() = default;
  virtual void flush_stream(TraceStream& stream) = 0;
};

class FileTraceWriter final : public TraceWriter {
public:
  explicit FileTraceWriter(const std::filesystem::path& path) : out_(path) {
    if (!out_) raise(Errc::ConfigError, "cannot open trace file " + path.string());
  }

  void flush_stream(TraceStream& stream) override {
    std::lock_guard<std::mutex> lock(mu_);
    for (const std::string& line : stream.lines()) out_ << line << '\n';
    out_.flush();
    stream.clear();
  }

private:
  std::ofstream out_;
  std::mutex mu_;
};

class MemoryTraceWriter final : public TraceWriter {
public:
  void flush_stream(TraceStream& stream) override {
    std::lock_guard<std::mutex> lock(mu_);
    for (const std::string& line : stream.lines()) text_ += line + "\n";
    stream.clear();
  }

  const std::string& text() const { return text_; }

private:
  std::string text_;
  std::mutex mu_;
};

class NullTraceWriter final : public TraceWriter {
public:
  void flush_stream(TraceStream& stream) override { stream.clear(); }
};

struct TraceRecord {
  std::size_t line_no = 0;  // 1-based
  nlohmann::json fields;
};

// Reads a trace back, validating line-level integrity.
class TraceReader {
public:
  static std::vector<TraceRecord> read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) raise(Errc::TraceCorrupt, "cannot open trace file " + path.string());
    std::vector<TraceRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("event"))
        raise(Errc::TraceCorrupt,
              "trace line " + std::to_string(line_no) + " of " + path.string() + " is corrupt");
      records.push_back({line_no, std::move(j)});
    }
    return records;
  }

  // Rebuilds a scripted backend from the recorded prompt/response pairs.
  // Entries are hash-keyed and consumed FIFO, so identical prompts replay in
  // recorded order.
  static std::vector<ScriptEntry> derive_script(const std::vector<TraceRecord>& records) {
    std::vector<ScriptEntry> entries;
    std::map<std::string, nlohmann::json> pending;  // stream -> prompt event
    for (const TraceRecord& r : records) {
      const nlohmann::json& j = r.fields;
      const std::string kind = j.at("event").get<std::string>();
      if (kind == "prompt") {
        pending[j.at("stream").get<std::string>()] = j;
      } else if (kind == "response") {
        auto it = pending.find(j.at("stream").get<std::string>());
        if (it == pending.end())
          raise(Errc::TraceCorrupt,
                "trace line " + std::to_string(r.line_no) + ": response without prompt");
        if (!j.contains("error")) {
          ScriptEntry e;
          e.role = role_from_name(j.at("role").get<std::string>());
          e.match_hash = it->second.at("request").get<std::string>();
          e.reply = j.at("text").get<std::string>();
          e.usage.prompt_tokens = j.at("usage").at("prompt_tokens").get<std::int64_t>();
          e.usage.completion_tokens = j.at("usage").at("completion_tokens").get<std::int64_t>();
          entries.push_back(std::move(e));
        }
        pending.erase(it);
      }
    }
    return entries;
  }
};

}  // namespace mdtoc
