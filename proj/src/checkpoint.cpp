#include "mtlsp/checkpoint.hpp"

#include <cstdint>
#include <fstream>

#include "mtlsp/errors.hpp"

namespace mtlsp {

namespace {

template <class T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is, const char* what) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw DataError(std::string("checkpoint truncated while reading ") + what);
  }
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<std::pair<std::string, Tensor>>& named) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open checkpoint for writing: " + path.string());
  os << kCheckpointHeader << '\n';
  write_pod<uint64_t>(os, named.size());
  for (const auto& [name, tensor] : named) {
    write_pod<uint32_t>(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<uint32_t>(os, static_cast<uint32_t>(tensor.shape().size()));
    for (int64_t d : tensor.shape()) write_pod<int64_t>(os, d);
    os.write(reinterpret_cast<const char*>(tensor.values().data()),
             static_cast<std::streamsize>(tensor.size() * sizeof(double)));
  }
  if (!os) throw DataError("checkpoint write failed: " + path.string());
}

std::vector<std::pair<std::string, Tensor>> load_checkpoint(
    const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path.string());
  std::string header;
  std::getline(is, header);
  if (header != kCheckpointHeader) {
    throw DataError("bad checkpoint header in " + path.string() +
                    ": expected \"" + kCheckpointHeader + "\"");
  }
  const auto count = read_pod<uint64_t>(is, "entry count");
  std::vector<std::pair<std::string, Tensor>> out;
  out.reserve(count);
  for (uint64_t e = 0; e < count; ++e) {
    const auto name_len = read_pod<uint32_t>(is, "name length");
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) {
      throw DataError("checkpoint truncated while reading name");
    }
    const auto rank = read_pod<uint32_t>(is, "rank");
    if (rank == 0 || rank > 2) throw DataError("checkpoint entry has bad rank");
    Shape shape(rank);
    int64_t size = 1;
    for (uint32_t i = 0; i < rank; ++i) {
      shape[i] = read_pod<int64_t>(is, "dimension");
      if (shape[i] <= 0) throw DataError("checkpoint entry has bad dimension");
      size *= shape[i];
    }
    std::vector<double> values(static_cast<size_t>(size));
    if (!is.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(values.size() * sizeof(double)))) {
      throw DataError("checkpoint truncated while reading values");
    }
    out.emplace_back(name, Tensor::from(std::move(shape), std::move(values)));
  }
  return out;
}

}  // namespace mtlsp
