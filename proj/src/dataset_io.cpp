#include "rgan/dataset_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace rgan {

namespace {

constexpr std::array<char, 5> kMagic{'R', 'G', 'P', 'N', '1'};

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char buf[8];
  if (!is.read(reinterpret_cast<char*>(buf), 8)) throw std::runtime_error("read_increments: truncated header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& os, double x) { put_u64(os, std::bit_cast<std::uint64_t>(x)); }

}  // namespace

void write_increments(const std::string& path, const NoiseIncrements& inc) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_increments: cannot open " + path);
  os.write(kMagic.data(), kMagic.size());
  const std::size_t B = inc.n_paths(), N = inc.n_steps(), d = inc.dim();
  put_u64(os, d);
  put_u64(os, N);
  put_u64(os, B);
  put_u64(os, inc.seed);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t i = 0; i < d; ++i)
        put_f64(os, inc.z[n](static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(i)));
  if (!os) throw std::runtime_error("write_increments: write failed for " + path);
}

NoiseIncrements read_increments(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_increments: cannot open " + path);
  std::array<char, 5> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic)
    throw std::runtime_error("read_increments: bad magic in " + path);
  const std::uint64_t d = get_u64(is), N = get_u64(is), B = get_u64(is), seed = get_u64(is);
  if (d > (1u << 16) || N > (1u << 24) || B > (1ull << 32)) throw std::runtime_error("read_increments: implausible header");
  NoiseIncrements inc = NoiseIncrements::zeros(B, N, d);
  inc.seed = seed;
  std::vector<unsigned char> row(8 * d * N);
  for (std::uint64_t b = 0; b < B; ++b) {
    if (!is.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size())))
      throw std::runtime_error("read_increments: truncated payload in " + path);
    std::size_t k = 0;
    for (std::uint64_t n = 0; n < N; ++n)
      for (std::uint64_t i = 0; i < d; ++i, k += 8) {
        std::uint64_t v = 0;
        for (int j = 0; j < 8; ++j) v |= static_cast<std::uint64_t>(row[k + j]) << (8 * j);
        inc.z[n](static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(i)) = std::bit_cast<double>(v);
      }
  }
  return inc;
}

void write_paths_csv(const std::string& path, const PathBatch& paths, const TimeGrid& grid, std::size_t max_paths) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_paths_csv: cannot open " + path);
  os.precision(17);
  os << "t,path_id";
  for (std::size_t i = 0; i < paths.dim(); ++i) os << ",S_" << (i + 1);
  os << '\n';
  const std::size_t B = std::min(max_paths, paths.n_paths());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t n = 0; n < paths.s.size(); ++n) {
      os << grid.time(n) << ',' << b;
      for (std::size_t i = 0; i < paths.dim(); ++i)
        os << ',' << paths.s[n](static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(i));
      os << '\n';
    }
}

}  // namespace rgan
