#include "q2/backends/transcript.hpp"

#include <fstream>
#include <mutex>

#include <openssl/evp.h>

#include "q2/error.hpp"
#include "q2/text.hpp"

namespace q2::backends {

std::string_view to_string(TranscriptMode m) {
    switch (m) {
    case TranscriptMode::record:
        return "record";
    case TranscriptMode::replay:
        return "replay";
    case TranscriptMode::passthrough:
        return "passthrough";
    }
    return "passthrough";
}

TranscriptMode parse_transcript_mode(std::string_view s) {
    if (s == "record")
        return TranscriptMode::record;
    if (s == "replay")
        return TranscriptMode::replay;
    if (s == "passthrough")
        return TranscriptMode::passthrough;
    throw PreconditionError("unknown transcript mode '" + std::string(s) + "'");
}

std::string canonical_json(const nlohmann::json &body) {
    // nlohmann's object type is an ordered std::map, and dump() without an
    // indent emits no whitespace between tokens.
    return body.dump();
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 digest failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

std::string request_hash(std::string_view capability, const nlohmann::json &body) {
    std::string material(capability);
    material.push_back('\n');
    material += canonical_json(body);
    return sha256_hex(material);
}

std::shared_ptr<Transcript> Transcript::load(const std::filesystem::path &path, TranscriptMode mode) {
    auto t = std::make_shared<Transcript>(mode);
    std::ifstream in(path);
    if (!in) {
        if (mode == TranscriptMode::replay)
            throw IoError("replay transcript not found: " + path.string());
        return t;
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty())
            continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error &e) {
            throw ParseError(path.string() + ": " + e.what(), line_no);
        }
        if (!rec.is_object() || !rec.contains("hash") || !rec.contains("capability") || !rec.contains("request") ||
            !rec.contains("response") || !rec["hash"].is_string() || !rec["capability"].is_string())
            throw SchemaError(path.string() + ": line " + std::to_string(line_no) +
                              ": transcript entries need hash, capability, request, response");
        t->entries_[rec["hash"].get<std::string>()] =
            Entry{rec["capability"].get<std::string>(), rec["request"], rec["response"]};
    }
    return t;
}

void Transcript::save(const std::filesystem::path &path) const {
    std::shared_lock lock(mutex_);
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write transcript " + path.string());
    for (const auto &[hash, e] : entries_) {
        nlohmann::json rec = {{"hash", hash}, {"capability", e.capability}, {"request", e.request},
                              {"response", e.response}};
        out << rec.dump() << '\n';
    }
    if (!out)
        throw IoError("write failed for " + path.string());
}

std::size_t Transcript::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

nlohmann::json Transcript::with_transcript(std::string_view capability, const nlohmann::json &request,
                                           const std::function<nlohmann::json()> &live_call) {
    if (mode_ == TranscriptMode::passthrough)
        return live_call();

    const auto hash = request_hash(capability, request);
    {
        std::shared_lock lock(mutex_);
        if (auto it = entries_.find(hash); it != entries_.end())
            return it->second.response;
    }
    if (mode_ == TranscriptMode::replay)
        throw CacheMissError("transcript miss for capability '" + std::string(capability) + "' (hash " + hash +
                             ")");

    auto response = live_call();
    std::unique_lock lock(mutex_);
    // A concurrent caller may have recorded the same request first; keep theirs.
    auto [it, inserted] = entries_.try_emplace(hash, Entry{std::string(capability), request, response});
    return it->second.response;
}

nlohmann::json TranscriptTransport::call(std::string_view capability, const nlohmann::json &request) {
    return transcript_->with_transcript(capability, request, [&] {
        if (!inner_)
            throw TransportError("no live backend configured for '" + std::string(capability) + "'");
        return inner_->call(capability, request);
    });
}

} // namespace q2::backends
