#pragma once

// CSV emission, whole-file atomic writes, SHA-256 digests and run manifests.

#include <openssl/evp.h>

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "gxlab/errors.hpp"

namespace gxlab::io {

inline constexpr const char* kToolVersion = "0.1.0";

/// Shortest round-trip representation, so CSVs are reproducible bit for bit.
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Csv {
 public:
  explicit Csv(std::initializer_list<std::string_view> header) {
    bool first = true;
    for (auto h : header) {
      if (!first) text_ += ',';
      text_ += h;
      first = false;
    }
    text_ += '\n';
  }

  template <class... Cells>
  Csv& row(const Cells&... cells) {
    bool first = true;
    ((append(cells, first)), ...);
    text_ += '\n';
    ++rows_;
    return *this;
  }

  const std::string& str() const noexcept { return text_; }
  std::size_t rows() const noexcept { return rows_; }

 private:
  void append(double v, bool& first) { sep(first), text_ += fmt(v); }
  void append(int v, bool& first) { sep(first), text_ += std::to_string(v); }
  void append(long v, bool& first) { sep(first), text_ += std::to_string(v); }
  void append(std::string_view s, bool& first) {
    sep(first);
    if (s.find_first_of(",\"\n") == std::string_view::npos) {
      text_ += s;
      return;
    }
    text_ += '"';
    for (char c : s) {
      if (c == '"') text_ += '"';
      text_ += c;
    }
    text_ += '"';
  }
  void append(const std::string& s, bool& first) { append(std::string_view(s), first); }
  void append(const char* s, bool& first) { append(std::string_view(s), first); }
  void sep(bool& first) {
    if (!first) text_ += ',';
    first = false;
  }

  std::string text_;
  std::size_t rows_ = 0;
};

inline std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256: digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

/// Writes to a temporary sibling and renames it over the target.
inline void write_atomic(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Canonical text of a JSON value: object keys sorted, no whitespace.
inline std::string canonical(const nlohmann::json& j) { return j.dump(); }

struct OutputFile {
  std::string path;
  std::string sha256;
};

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::string tool_version = kToolVersion;
  std::uint64_t seed = 0;
  std::vector<OutputFile> outputs;
  double wall_time = 0.0;

  nlohmann::json to_json() const {
    nlohmann::json outs = nlohmann::json::array();
    for (const auto& o : outputs) outs.push_back({{"path", o.path}, {"sha256", o.sha256}});
    return {{"command", command},   {"config_hash", config_hash}, {"tool_version", tool_version},
            {"seed", seed},         {"outputs", outs},            {"wall_time", wall_time}};
  }
};

/// Collects outputs of one run: each file is written atomically and its
/// digest recorded for the manifest.
class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
  }

  void write(const std::string& name, std::string_view content) {
    write_atomic(root_ / name, content);
    files_.push_back({name, sha256_hex(content)});
  }

  void finish(RunManifest manifest) {
    manifest.outputs = files_;
    write_atomic(root_ / "manifest.json", manifest.to_json().dump(2) + "\n");
  }

  const std::vector<OutputFile>& files() const noexcept { return files_; }
  const std::filesystem::path& root() const noexcept { return root_; }

  /// Digest over the names and digests of every data output.
  std::string combined_digest() const {
    std::string acc;
    for (const auto& f : files_) acc += f.path + ":" + f.sha256 + "\n";
    return sha256_hex(acc);
  }

 private:
  std::filesystem::path root_;
  std::vector<OutputFile> files_;
};

}  // namespace gxlab::io
