#include "slrkit/serialize.hpp"

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>

#include "slrkit/errors.hpp"

namespace slrkit {

namespace {

constexpr char kMapMagic[4] = {'S', 'L', 'R', 'W'};
constexpr char kArrMagic[4] = {'S', 'L', 'R', 'A'};

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("unexpected end of file while reading binary tensor data");
  return v;
}

}  // namespace

void write_tensor_map(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os.write(kMapMagic, 4);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t->rank()));
    for (int d : t->shape()) put<std::int64_t>(os, d);
    os.write(reinterpret_cast<const char*>(t->data()),
             static_cast<std::streamsize>(t->size() * sizeof(double)));
  }
  if (!os) throw IoError("write failed: " + path.string());
}

std::map<std::string, Tensor> read_tensor_map(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMapMagic, 4) != 0) {
    throw IoError("not a tensor map file: " + path.string());
  }
  const auto count = get<std::uint32_t>(is);
  std::map<std::string, Tensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = get<std::uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const auto rank = get<std::uint32_t>(is);
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(get<std::int64_t>(is));
    Tensor t(shape);
    is.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!is) throw IoError("truncated tensor map: " + path.string());
    out.emplace(std::move(name), std::move(t));
  }
  return out;
}

void write_compressed_array(const std::filesystem::path& path, const Tensor& t) {
  const auto* raw = reinterpret_cast<const Bytef*>(t.data());
  const uLong raw_len = static_cast<uLong>(t.size() * sizeof(double));
  uLongf comp_len = compressBound(raw_len);
  std::vector<Bytef> comp(comp_len);
  if (compress2(comp.data(), &comp_len, raw, raw_len, Z_BEST_SPEED) != Z_OK) {
    throw IoError("zlib compression failed for " + path.string());
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os.write(kArrMagic, 4);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
  for (int d : t.shape()) put<std::int64_t>(os, d);
  put<std::uint64_t>(os, static_cast<std::uint64_t>(comp_len));
  os.write(reinterpret_cast<const char*>(comp.data()), static_cast<std::streamsize>(comp_len));
  if (!os) throw IoError("write failed: " + path.string());
}

Tensor read_compressed_array(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kArrMagic, 4) != 0) {
    throw IoError("not a compressed array file: " + path.string());
  }
  const auto rank = get<std::uint32_t>(is);
  std::vector<int> shape(rank);
  for (auto& d : shape) d = static_cast<int>(get<std::int64_t>(is));
  const auto comp_len = get<std::uint64_t>(is);
  std::vector<Bytef> comp(comp_len);
  is.read(reinterpret_cast<char*>(comp.data()), static_cast<std::streamsize>(comp_len));
  if (!is) throw IoError("truncated compressed array: " + path.string());
  Tensor t(shape);
  uLongf raw_len = static_cast<uLongf>(t.size() * sizeof(double));
  if (uncompress(reinterpret_cast<Bytef*>(t.data()), &raw_len, comp.data(),
                 static_cast<uLong>(comp_len)) != Z_OK ||
      raw_len != t.size() * sizeof(double)) {
    throw IoError("zlib decompression failed for " + path.string());
  }
  return t;
}

}  // namespace slrkit
