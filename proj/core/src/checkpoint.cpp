#include "refdepth/ad/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

#include "refdepth/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

namespace refdepth::ad {

namespace {

constexpr char kMagic[4] = {'L', 'D', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint32_t read_u32(std::istream& in, const std::string& path) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw IoError("truncated checkpoint: " + path);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write(kMagic, 4);
  write_u32(f, kVersion);
  write_u32(f, static_cast<uint32_t>(tensors.size()));
  for (const NamedTensor& t : tensors) {
    write_u32(f, static_cast<uint32_t>(t.name.size()));
    f.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_u32(f, static_cast<uint32_t>(t.dims.size()));
    for (int d : t.dims) write_u32(f, static_cast<uint32_t>(d));
    f.write(reinterpret_cast<const char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  }
  if (!f) throw IoError("write failed: " + path);
}

std::vector<NamedTensor> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for reading: " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::string_view(magic, 4) != std::string_view(kMagic, 4))
    throw IoError("not a checkpoint file: " + path);
  const uint32_t version = read_u32(f, path);
  if (version != kVersion) throw IoError("unsupported checkpoint version: " + path);
  const uint32_t count = read_u32(f, path);

  std::vector<NamedTensor> tensors(count);
  for (NamedTensor& t : tensors) {
    const uint32_t name_len = read_u32(f, path);
    t.name.resize(name_len);
    f.read(t.name.data(), name_len);
    const uint32_t rank = read_u32(f, path);
    t.dims.resize(rank);
    uint64_t numel = 1;
    for (uint32_t i = 0; i < rank; ++i) {
      t.dims[i] = static_cast<int>(read_u32(f, path));
      numel *= static_cast<uint64_t>(t.dims[i]);
    }
    t.data.resize(numel);
    f.read(reinterpret_cast<char*>(t.data.data()),
           static_cast<std::streamsize>(numel * sizeof(float)));
    if (!f) throw IoError("truncated checkpoint: " + path);
  }
  return tensors;
}

}  // namespace refdepth::ad
