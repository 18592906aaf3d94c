#include "ktele/core/checkpoint.hpp"

#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace ktele {

namespace {

constexpr char kMagic[8] = {'K', 'T', 'L', 'C', 'K', 'P', 'T', '1'};

void write_u64(std::ostream& os, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = char((v >> (8 * i)) & 0xff);
  os.write(buf, 8);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ad::ParamStore& store,
                     const std::string& meta_json) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  os.write(kMagic, 8);
  write_u64(os, meta_json.size());
  os.write(meta_json.data(), std::streamsize(meta_json.size()));
  write_u64(os, store.size());
  for (const auto& [name, p] : store) {
    write_u64(os, name.size());
    os.write(name.data(), std::streamsize(name.size()));
    write_u64(os, std::uint64_t(p->value.rows()));
    write_u64(os, std::uint64_t(p->value.cols()));
    os.write(reinterpret_cast<const char*>(p->value.data()),
             std::streamsize(sizeof(double) * std::size_t(p->value.size())));
  }
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::string(magic, 8) != std::string(kMagic, 8))
    throw std::runtime_error("bad checkpoint magic: " + path);
  Checkpoint ckpt;
  const auto meta_len = read_u64(is);
  ckpt.meta_json.resize(meta_len);
  is.read(ckpt.meta_json.data(), std::streamsize(meta_len));
  const auto count = read_u64(is);
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto name_len = read_u64(is);
    std::string name(name_len, '\0');
    is.read(name.data(), std::streamsize(name_len));
    const auto rows = Index(read_u64(is));
    const auto cols = Index(read_u64(is));
    Mat m(rows, cols);
    is.read(reinterpret_cast<char*>(m.data()),
            std::streamsize(sizeof(double) * std::size_t(m.size())));
    ckpt.tensors.emplace(std::move(name), std::move(m));
  }
  if (!is) throw std::runtime_error("checkpoint truncated: " + path);
  return ckpt;
}

std::vector<std::string> restore_params(ad::ParamStore& store, const Checkpoint& ckpt) {
  std::vector<std::string> unmatched;
  for (const auto& [name, m] : ckpt.tensors) {
    if (!store.has(name)) {
      unmatched.push_back(name);
      continue;
    }
    auto& p = store.get(name);
    if (p.value.rows() != m.rows() || p.value.cols() != m.cols())
      throw std::runtime_error("checkpoint shape mismatch for " + name);
    p.value = m;
  }
  return unmatched;
}

}  // namespace ktele
