#include "speechrt/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "speechrt/errors.hpp"

namespace speechrt {

namespace {

constexpr const char* kMagic = "speechrt-weights";

void put_le(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

double get_le(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw FormatError("truncated tensor data");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_tensors(const std::filesystem::path& path, const TensorMap& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << kMagic << " 1 " << tensors.size() << "\n";
  for (const auto& [name, m] : tensors) {
    if (name.find_first_of(" \t\n") != std::string::npos) throw FormatError("tensor name with whitespace: " + name);
    out << name << " " << m.rows << " " << m.cols << "\n";
  }
  out << "\n";
  for (const auto& [name, m] : tensors)
    for (double v : m.data) put_le(out, v);
  if (!out) throw FormatError("write failed for " + path.string());
}

TensorMap load_tensors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::istringstream head(line);
  std::string magic;
  int version = 0;
  std::size_t count = 0;
  if (!(head >> magic >> version >> count) || magic != kMagic || version != 1)
    throw FormatError(path.string() + " is not a weight file");
  std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> manifest;
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw FormatError("truncated manifest");
    std::istringstream entry(line);
    std::string name;
    std::size_t rows = 0, cols = 0;
    if (!(entry >> name >> rows >> cols)) throw FormatError("bad manifest line: " + line);
    manifest.push_back({name, {rows, cols}});
  }
  if (!std::getline(in, line) || !line.empty()) throw FormatError("missing manifest terminator");
  TensorMap out;
  for (const auto& [name, shape] : manifest) {
    Matrix m(shape.first, shape.second);
    for (double& v : m.data) v = get_le(in);
    out.emplace(name, std::move(m));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after tensor data");
  return out;
}

void restore_tensor(const TensorMap& tensors, const std::string& name, Matrix& target) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw FormatError("weight file has no tensor " + name);
  if (it->second.rows != target.rows || it->second.cols != target.cols)
    throw ShapeMismatch(name + " has shape " + std::to_string(it->second.rows) + "x" +
                        std::to_string(it->second.cols) + ", expected " + std::to_string(target.rows) + "x" +
                        std::to_string(target.cols));
  target = it->second;
}

}  // namespace speechrt
