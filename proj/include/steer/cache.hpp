/*
 * Copyright 2026 The steer Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Record/replay cache for rater calls. One JSON file per key under a
// content-addressed directory:
//
//   <dir>/<key[0:2]>/<key>.json
//   {"schema_version":1,"key":...,"level":...,"rationale":...,"timestamp":...}
//
// The key is the SHA-256 of the backend id, persona prompt, case payload and
// scale.

#include <openssl/evp.h>

#include <array>
#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>

#include <json.hpp>

#include "steer/backends.hpp"

namespace steer {

inline std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw CacheError("SHA-256 digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

class CachedRater final : public RaterBackend {
 public:
  static constexpr int kSchemaVersion = 1;

  // `inner` may be null for replay-only use; a miss then raises CacheError.
  CachedRater(std::filesystem::path dir, std::shared_ptr<RaterBackend> inner,
              std::string backend_id = {})
      : dir_(std::move(dir)),
        inner_(std::move(inner)),
        backend_id_(!backend_id.empty() ? std::move(backend_id)
                                         : inner_ ? inner_->id() : std::string()) {
    if (backend_id_.empty())
      throw CacheError("replay-only cache needs an explicit backend id");
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw CacheError("cannot create cache directory " + dir_.string() + ": " + ec.message());
  }

  std::string id() const override { return backend_id_; }

  RaterCapabilities capabilities() const override {
    RaterCapabilities caps{true, true};
    if (inner_) caps = inner_->capabilities();
    caps.supports_parallel = true;
    return caps;
  }

  static std::string cache_key(std::string_view backend_id, const Persona& persona,
                               const Case& c, const OrdinalScale& scale) {
    nlohmann::json inputs = {
        {"backend", backend_id},
        {"persona_prompt", persona.prompt_text},
        {"case_payload", c.payload},
        {"scale", {scale.k_levels, scale.most_urgent_level, scale.midpoint}},
    };
    return sha256_hex(inputs.dump());
  }

  std::filesystem::path record_path(const std::string& key) const {
    return dir_ / key.substr(0, 2) / (key + ".json");
  }

  Rating rate(const Persona& persona, const Case& c, const OrdinalScale& scale) override {
    const std::string key = cache_key(backend_id_, persona, c, scale);
    const auto path = record_path(key);
    std::lock_guard lock(stripe_for(key));

    if (std::filesystem::exists(path)) {
      ++hits_;
      return read_record(path, key, scale);
    }
    if (!inner_) throw CacheError("replay miss: no record " + path.string());
    ++misses_;
    Rating r = inner_->rate(persona, c, scale);
    require_level(scale, r.level);
    write_record(path, key, r);
    return r;
  }

  long hits() const noexcept { return hits_; }
  long misses() const noexcept { return misses_; }

 private:
  std::mutex& stripe_for(const std::string& key) {
    return stripes_[std::hash<std::string>{}(key) % stripes_.size()];
  }

  static Rating read_record(const std::filesystem::path& path, const std::string& key,
                            const OrdinalScale& scale) {
    std::ifstream in(path, std::ios::binary);
    try {
      const auto j = nlohmann::json::parse(in);
      if (j.at("schema_version").get<int>() != kSchemaVersion)
        throw CacheError("unknown schema_version");
      if (j.at("key").get<std::string>() != key) throw CacheError("key mismatch");
      Rating r{j.at("level").get<int>(), j.value("rationale", std::string())};
      if (!scale.contains(r.level)) throw CacheError("stored level out of range");
      return r;
    } catch (const CacheError& e) {
      throw CacheError("corrupt cache record " + path.string() + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw CacheError("corrupt cache record " + path.string() + ": " + e.what());
    }
  }

  static std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

  void write_record(const std::filesystem::path& path, const std::string& key,
                    const Rating& r) const {
    std::filesystem::create_directories(path.parent_path());
    const nlohmann::json j = {{"schema_version", kSchemaVersion},
                              {"key", key},
                              {"backend", backend_id_},
                              {"level", r.level},
                              {"rationale", r.rationale},
                              {"timestamp", utc_timestamp()}};
    std::ostringstream tid;
    tid << std::this_thread::get_id();
    auto tmp = path;
    tmp += ".tmp." + tid.str();
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw CacheError("cannot write cache record " + tmp.string());
      out << j.dump() << '\n';
    }
    std::filesystem::rename(tmp, path);
  }

  std::filesystem::path dir_;
  std::shared_ptr<RaterBackend> inner_;
  std::string backend_id_;
  std::array<std::mutex, 64> stripes_;
  std::atomic<long> hits_{0};
  std::atomic<long> misses_{0};
};

}  // namespace steer
