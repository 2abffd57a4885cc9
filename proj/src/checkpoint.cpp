#include "rgan/checkpoint.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <stdexcept>

namespace rgan {

namespace {

constexpr std::array<char, 4> kMagic{'R', 'G', 'C', 'K'};

void put(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t get(std::istream& is) {
  unsigned char buf[8];
  if (!is.read(reinterpret_cast<char*>(buf), 8)) throw std::runtime_error("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void put_vec(std::ostream& os, const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) put(os, std::bit_cast<std::uint64_t>(v(i)));
}

void get_vec(std::istream& is, Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = std::bit_cast<double>(get(is));
}

}  // namespace

void save_network(const std::string& path, const Network& net) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_network: cannot open " + path);
  os.write(kMagic.data(), kMagic.size());
  put(os, kCheckpointVersion);
  const NetSpec& sp = net.spec();
  put(os, static_cast<std::uint64_t>(sp.arch));
  put(os, sp.input_dim);
  put(os, sp.output_dim);
  put(os, sp.hidden.size());
  for (auto h : sp.hidden) put(os, h);
  put(os, sp.n_steps);
  const ParamSet& p = net.params();
  put(os, p.slices.size());
  for (const auto& s : p.slices) {
    put(os, s.name.size());
    os.write(s.name.data(), static_cast<std::streamsize>(s.name.size()));
    put(os, static_cast<std::uint64_t>(s.rows));
    put(os, static_cast<std::uint64_t>(s.cols));
  }
  put_vec(os, p.values);
  put_vec(os, p.m);
  put_vec(os, p.v);
  put(os, p.step);
  if (!os) throw std::runtime_error("save_network: write failed for " + path);
}

Network load_network(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_network: cannot open " + path);
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) throw std::runtime_error("load_network: bad magic");
  const auto version = get(is);
  if (version != kCheckpointVersion) throw std::runtime_error("load_network: unsupported version " + std::to_string(version));
  NetSpec sp;
  const auto arch = get(is);
  if (arch > 2) throw std::runtime_error("load_network: bad architecture id");
  sp.arch = static_cast<Arch>(arch);
  sp.input_dim = get(is);
  sp.output_dim = get(is);
  const auto nh = get(is);
  if (nh > 64) throw std::runtime_error("load_network: implausible depth");
  sp.hidden.resize(nh);
  for (auto& h : sp.hidden) h = get(is);
  sp.n_steps = get(is);
  Network net(sp, 0);
  ParamSet& p = net.params();
  if (get(is) != p.slices.size()) throw std::runtime_error("load_network: slice count mismatch");
  for (const auto& s : p.slices) {
    const auto len = get(is);
    if (len > 4096) throw std::runtime_error("load_network: implausible slice name");
    std::string name(len, '\0');
    is.read(name.data(), static_cast<std::streamsize>(len));
    const auto rows = get(is), cols = get(is);
    if (name != s.name || rows != static_cast<std::uint64_t>(s.rows) || cols != static_cast<std::uint64_t>(s.cols))
      throw std::runtime_error("load_network: slice layout mismatch at " + name);
  }
  get_vec(is, p.values);
  get_vec(is, p.m);
  get_vec(is, p.v);
  p.step = get(is);
  return net;
}

}  // namespace rgan
