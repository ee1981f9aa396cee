#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <string_view>

#include <json.hpp>

#include "q2/backends/transport.hpp"

namespace q2::backends {

enum class TranscriptMode { record, replay, passthrough };

std::string_view to_string(TranscriptMode m);
TranscriptMode parse_transcript_mode(std::string_view s);

// Sorted keys, no insignificant whitespace.
std::string canonical_json(const nlohmann::json &body);

// Hex SHA-256 of "<capability>\n<canonical body>".
std::string request_hash(std::string_view capability, const nlohmann::json &body);

std::string sha256_hex(std::string_view data);

// Request-hash -> response cache that makes every backend call replayable.
//
// record:      stored response if present, else live call stored under its hash
// replay:      stored response, else CacheMissError (never a live call)
// passthrough: always live, nothing stored
//
// Lookups take a shared lock; inserts an exclusive one. The file form is JSONL
// of {"hash","capability","request","response"} sorted by hash, so the same set
// of calls always serializes to the same bytes.
class Transcript {
  public:
    struct Entry {
        std::string capability;
        nlohmann::json request;
        nlohmann::json response;
    };

    explicit Transcript(TranscriptMode mode) : mode_(mode) {}

    static std::shared_ptr<Transcript> load(const std::filesystem::path &path, TranscriptMode mode);
    void save(const std::filesystem::path &path) const;

    TranscriptMode mode() const { return mode_; }
    std::size_t size() const;

    nlohmann::json with_transcript(std::string_view capability, const nlohmann::json &request,
                                   const std::function<nlohmann::json()> &live_call);

  private:
    TranscriptMode mode_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, Entry> entries_;
};

// Transport decorator routing every call through a shared Transcript. `inner`
// may be null in replay mode.
class TranscriptTransport : public Transport {
  public:
    TranscriptTransport(std::shared_ptr<Transcript> transcript, std::shared_ptr<Transport> inner)
        : transcript_(std::move(transcript)), inner_(std::move(inner)) {}

    nlohmann::json call(std::string_view capability, const nlohmann::json &request) override;

  private:
    std::shared_ptr<Transcript> transcript_;
    std::shared_ptr<Transport> inner_;
};

} // namespace q2::backends
