#include <bit>
#include <cstring>
#include <fstream>
#include <span>

#include "irisloc/error.hpp"
#include "irisloc/nets.hpp"

namespace irisloc {

namespace {

constexpr char kMagic[4] = {'I', 'L', 'N', 'W'};
constexpr uint16_t kFormatVersion = 1;

void put_u16(std::ostream& out, uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>(v >> 8)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f32(std::ostream& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

uint16_t get_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

float get_f32(std::istream& in) {
  uint32_t bits = get_u32(in);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

void put_f32_block(std::ostream& out, std::span<const float> data) {
  // x86 stores IEEE floats little-endian already; keep the per-value path as
  // the portable fallback.
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * 4));
  } else {
    for (float v : data) put_f32(out, v);
  }
}

void get_f32_block(std::istream& in, std::span<float> data) {
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * 4));
  } else {
    for (float& v : data) v = get_f32(in);
  }
}

}  // namespace

void save_weights(const NetworkParams& np, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("weights: cannot write " + path);
  out.write(kMagic, 4);
  put_u16(out, kFormatVersion);
  put_f32(out, np.config.s);
  put_f32(out, np.config.m);
  put_u32(out, static_cast<uint32_t>(np.config.d));
  put_u64(out, layout_hash(np.config.d));
  const auto named = np.named();
  put_u32(out, static_cast<uint32_t>(named.size()));
  for (const auto& [name, t] : named) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<uint32_t>(t.shape().size()));
    for (int e : t.shape()) put_u64(out, static_cast<uint64_t>(e));
    put_f32_block(out, t.data());
  }
  if (!out) throw IoError("weights: write failed for " + path);
}

NetworkParams load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("weights: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("weights: bad magic in " + path);
  const uint16_t version = get_u16(in);
  if (version != kFormatVersion)
    throw IoError("weights: unsupported format version " + std::to_string(version));
  ModelConfig config;
  config.s = get_f32(in);
  config.m = get_f32(in);
  config.d = static_cast<int>(get_u32(in));
  const uint64_t hash = get_u64(in);
  if (hash != layout_hash(config.d))
    throw IoError("weights: codec layout hash mismatch in " + path +
                  " (model and codec are out of sync)");

  // Rebuild the expected structure for this config, then fill tensors in the
  // stored order, verifying names and extents as we go.
  NetworkParams np = init_network(config, 0);
  auto expected = np.named();
  const uint32_t count = get_u32(in);
  if (count != expected.size())
    throw IoError("weights: tensor count mismatch in " + path);
  for (auto& [name, t] : expected) {
    const uint32_t name_len = get_u32(in);
    std::string stored(name_len, '\0');
    in.read(stored.data(), name_len);
    if (stored != name)
      throw IoError("weights: unexpected tensor '" + stored + "', wanted '" + name + "'");
    const uint32_t rank = get_u32(in);
    if (rank != t.shape().size())
      throw IoError("weights: rank mismatch for " + name);
    for (int e : t.shape()) {
      if (get_u64(in) != static_cast<uint64_t>(e))
        throw IoError("weights: extent mismatch for " + name);
    }
    get_f32_block(in, t.mutable_data());
    if (!in) throw IoError("weights: truncated data for " + name + " in " + path);
  }
  return np;
}

uint64_t file_fnv1a(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("fnv1a: cannot open " + path);
  uint64_t h = 14695981039346656037ull;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (in.eof()) break;
  }
  return h;
}

}  // namespace irisloc
