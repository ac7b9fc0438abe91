#include <cstdint>
#include <fstream>

#include "aqua/field.hpp"

namespace aqua {

namespace {
constexpr char kMagic[4] = {'A', 'Q', 'F', 'D'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}
}  // namespace

void save_checkpoint(const std::string& path, const FieldParams<float>& p) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_error("cannot open checkpoint for writing: " + path);
  os.write(kMagic, 4);
  write_pod(os, kVersion);
  const FieldArch& a = p.arch;
  write_pod<int32_t>(os, a.pos_freqs);
  write_pod<int32_t>(os, a.dir_freqs);
  write_pod<int32_t>(os, a.include_input ? 1 : 0);
  write_pod<int32_t>(os, a.trunk_depth);
  write_pod<int32_t>(os, a.trunk_width);
  write_pod<int32_t>(os, a.skip_layer);
  write_pod<int32_t>(os, a.color_hidden);
  write_pod<int32_t>(os, a.atten_hidden);
  write_pod<int32_t>(os, a.smooth_kernel);
  write_pod<double>(os, a.phi_floor);
  write_pod<int32_t>(os, static_cast<int32_t>(p.tensors.size()));
  for (const auto& t : p.tensors) {
    write_pod<int32_t>(os, static_cast<int32_t>(t.shape.size()));
    for (int64_t d : t.shape) write_pod<int64_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.data.data()),
             static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  }
  if (!os) throw io_error("short write on checkpoint: " + path);
}

FieldParams<float> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw io_error("bad checkpoint magic: " + path);
  if (read_pod<uint32_t>(is) != kVersion)
    throw io_error("unsupported checkpoint version: " + path);
  FieldArch a;
  a.pos_freqs = read_pod<int32_t>(is);
  a.dir_freqs = read_pod<int32_t>(is);
  a.include_input = read_pod<int32_t>(is) != 0;
  a.trunk_depth = read_pod<int32_t>(is);
  a.trunk_width = read_pod<int32_t>(is);
  a.skip_layer = read_pod<int32_t>(is);
  a.color_hidden = read_pod<int32_t>(is);
  a.atten_hidden = read_pod<int32_t>(is);
  a.smooth_kernel = read_pod<int32_t>(is);
  a.phi_floor = read_pod<double>(is);
  FieldParams<float> p = make_zero_params<float>(a);
  int32_t ntensors = read_pod<int32_t>(is);
  if (ntensors != static_cast<int32_t>(p.tensors.size()))
    throw io_error("checkpoint tensor count mismatch: " + path);
  for (auto& t : p.tensors) {
    int32_t rank = read_pod<int32_t>(is);
    if (rank != static_cast<int32_t>(t.shape.size()))
      throw io_error("checkpoint tensor rank mismatch: " + path);
    for (int64_t expect : t.shape) {
      int64_t got = read_pod<int64_t>(is);
      if (got != expect) throw io_error("checkpoint tensor shape mismatch: " + path);
    }
    is.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  }
  if (!is) throw io_error("truncated checkpoint: " + path);
  return p;
}

}  // namespace aqua
