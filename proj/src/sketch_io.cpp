#include <cstring>
#include <fstream>
#include <limits>

#include "dppvfx/errors.hpp"
#include "dppvfx/nystrom.hpp"

namespace dppvfx {

void save_sketch(const std::filesystem::path& path, const NystromSketch& sketch) {
  if (sketch.n() > std::numeric_limits<std::uint32_t>::max()) throw InvalidInput("sketch too large for u32 header");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot open " + path.string() + " for writing");
  const auto n = static_cast<std::uint32_t>(sketch.n());
  const auto m = static_cast<std::uint32_t>(sketch.m());
  out.write("DPPS", 4);
  out.write(reinterpret_cast<const char*>(&n), 4);
  out.write(reinterpret_cast<const char*>(&m), 4);
  for (const Index c : sketch.dictionary()) {
    const auto v = static_cast<std::uint32_t>(c);
    out.write(reinterpret_cast<const char*>(&v), 4);
  }
  out.write(reinterpret_cast<const char*>(sketch.factor().data()),
            static_cast<std::streamsize>(sizeof(double)) * sketch.factor().size());
  out.write(reinterpret_cast<const char*>(sketch.inner_eigs().data()),
            static_cast<std::streamsize>(sizeof(double)) * sketch.inner_eigs().size());
  if (!out) throw InvalidInput("failed writing " + path.string());
}

NystromSketch load_sketch(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  char magic[4];
  std::uint32_t n = 0, m = 0;
  if (!in.read(magic, 4) || std::memcmp(magic, "DPPS", 4) != 0) throw ParseError("bad magic, expected DPPS");
  if (!in.read(reinterpret_cast<char*>(&n), 4) || !in.read(reinterpret_cast<char*>(&m), 4)) {
    throw ParseError("truncated sketch header");
  }
  if (n == 0 || m == 0 || m > n) throw ParseError("invalid sketch dimensions n = " + std::to_string(n) + ", m = " + std::to_string(m));
  IndexSequence dictionary(m);
  for (auto& c : dictionary) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), 4)) throw ParseError("truncated dictionary");
    c = v;
  }
  Matrix factor(n, m);
  Vector eigs(m);
  if (!in.read(reinterpret_cast<char*>(factor.data()), static_cast<std::streamsize>(sizeof(double)) * n * m)) {
    throw ParseError("truncated factor");
  }
  if (!in.read(reinterpret_cast<char*>(eigs.data()), static_cast<std::streamsize>(sizeof(double)) * m)) {
    throw ParseError("truncated eigenvalues");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError("trailing bytes after sketch payload");
  return NystromSketch::from_factor(std::move(dictionary), std::move(factor), std::move(eigs));
}

}  // namespace dppvfx
