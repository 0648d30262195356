// Copyright 2026 The tigs-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tigs/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace tigs {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const char* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  template <class T>
  void pod(T v) { bytes(&v, sizeof v); }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    bytes(s.data(), s.size());
  }
  const std::string& buffer() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& buf, const std::string& path) : buf_(buf), path_(path) {}
  void bytes(void* out, std::size_t n, const char* what) {
    if (n > buf_.size() - pos_) fail(std::string("truncated while reading ") + what);
    std::memcpy(out, buf_.data() + pos_, n);
    pos_ += n;
  }
  template <class T>
  T pod(const char* what) {
    T v;
    bytes(&v, sizeof v, what);
    return v;
  }
  std::string str(const char* what) {
    const auto n = pod<std::uint64_t>(what);
    if (n > buf_.size() - pos_) fail(std::string("truncated while reading ") + what);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == buf_.size(); }
  [[noreturn]] void fail(const std::string& msg) const {
    throw std::runtime_error("checkpoint " + path_ + ": " + msg);
  }

 private:
  const std::string& buf_;
  const std::string& path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const nlohmann::json& meta) {
  params.validate();
  Writer w;
  w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  w.pod<std::uint32_t>(kCheckpointVersion);
  nlohmann::json head = {{"config", params.config.to_json()}, {"meta", meta}};
  w.str(head.dump());
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(params.arrays.size()));
  for (const auto& [name, t] : params.arrays) {
    w.str(name);
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) w.pod<std::uint64_t>(d);
    w.bytes(t.data().data(), t.size() * sizeof(double));
  }

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint " + path + ": cannot open for writing");
    out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
    if (!out) throw std::runtime_error("checkpoint " + path + ": write failed");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint " + path + ": cannot open");
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(buf, path);

  char magic[sizeof kCheckpointMagic];
  r.bytes(magic, sizeof magic, "magic");
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) r.fail("bad magic bytes");
  const auto version = r.pod<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    r.fail("version " + std::to_string(version) + " unsupported (expected " +
           std::to_string(kCheckpointVersion) + ")");
  }

  Checkpoint ck;
  try {
    const auto head = nlohmann::json::parse(r.str("header"));
    ck.params.config = ModelConfig::from_json(head.at("config"));
    ck.meta = head.value("meta", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    r.fail(std::string("malformed header: ") + e.what());
  }

  const auto count = r.pod<std::uint32_t>("array count");
  for (std::uint32_t a = 0; a < count; ++a) {
    std::string name = r.str("array name");
    const auto ndim = r.pod<std::uint32_t>("array rank");
    if (ndim > 8) r.fail("array '" + name + "' has implausible rank " + std::to_string(ndim));
    Shape shape(ndim);
    for (auto& d : shape) d = r.pod<std::uint64_t>("array dims");
    const std::size_t numel = shape_numel(shape);
    if (numel > buf.size() / sizeof(double)) r.fail("truncated in array '" + name + "'");
    std::vector<double> data(numel);
    r.bytes(data.data(), numel * sizeof(double), "array data");
    ck.params.arrays.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  if (!r.done()) r.fail("trailing bytes after last array");
  try {
    ck.params.validate();
  } catch (const std::exception& e) {
    r.fail(e.what());
  }
  return ck;
}

}  // namespace tigs
